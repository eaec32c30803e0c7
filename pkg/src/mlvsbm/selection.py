"""Stepwise ICL search over block counts and the dependence verdict.

The search starts from the best independent unilevel fits, then repeatedly
fits every neighbour obtained by splitting one block or merging two blocks
on one level, keeping the neighbour with the highest ICL until none
improves.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from mlvsbm.icl import icl_mlvsbm, icl_sbm
from mlvsbm.init import relabel, ward
from mlvsbm.model import DegenerateFitError, _levels
from mlvsbm.vem import FitOptions, _map, fit_from, fit_sbm, tau_from_labels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectOptions:
    q_max: int = 10
    fit: FitOptions = field(default_factory=lambda: FitOptions(n_random_restarts=4))
    jobs: int = 1
    # unilevel scan stops once q exceeds the best q so far by this much
    sbm_patience: int = 3
    # testing aid: fit every (q_ind, q_org) up to q_max instead of the stepwise search
    exhaustive: bool = False


@dataclass(eq=False)
class SBMPath:
    """Unilevel fits for q = 1..q_max on one level."""
    fits: dict
    icl: dict

    @property
    def best_q(self):
        return max(self.icl, key=lambda q: (self.icl[q], -q))

    @property
    def best_icl(self):
        return self.icl[self.best_q]


@dataclass(eq=False)
class SelectionResult:
    best_fit: object
    best_q: tuple
    explored: dict
    independent_q: tuple
    icl_independent: float
    verdict: str
    search_trace: list
    sbm_ind: SBMPath = None
    sbm_org: SBMPath = None
    fits: dict = None

    @property
    def best_icl(self):
        return max(self.explored.values())


def sbm_path(x, mask, directed, q_max, options, jobs=1, label="level", patience=None):
    """Fit unilevel SBMs for q = 1, 2, ... up to q_max and record their ICL.

    With ``patience`` the scan stops once q is ``patience`` above the best q
    found so far.
    """
    n = np.asarray(x).shape[0]
    top = min(q_max, n)
    fits, icl = {}, {}
    for q in range(1, top + 1):
        try:
            f = fit_sbm(x, mask, directed, q, options, jobs=jobs)
        except DegenerateFitError as exc:
            log.info("SBM on %s level with q=%d skipped: %s", label, q, exc)
            continue
        f.icl = icl_sbm(x, mask, directed, f)
        fits[q], icl[q] = f, f.icl
        if patience is not None and q - SBMPath(fits, icl).best_q >= patience:
            break
    if not fits:
        raise DegenerateFitError(f"no unilevel fit succeeded on the {label} level")
    path = SBMPath(fits, icl)
    if path.best_q == max(fits) == q_max and top < n:
        warnings.warn(f"ICL on the {label} level is maximal at the cap q_max={q_max}",
                      stacklevel=2)
    return path


def _profile_features(net, fit, level):
    """Adjacency rows/columns of each node plus its cross-level membership summary."""
    x, m, directed = net.level(level)
    obs = np.where(m > 0, x, 0).astype(float)
    feats = [obs] if not directed else [obs, obs.T]
    aff = net.affiliation.astype(float)
    if level == "ind":
        feats.append(aff @ fit.state.tau_org)
    else:
        size = aff.sum(axis=0)[:, None]
        feats.append(aff.T @ fit.state.tau_ind / np.maximum(size, 1.0))
    return np.hstack(feats)


def _labels(fit, level):
    z = fit.state.map()
    return np.array(z.z_ind if level == "ind" else z.z_org)


def propose_split(net, fit, level, block):
    """Split ``block`` in two with Ward clustering of its members' profiles.

    Returns the new labelling with ``q + 1`` labels, or ``None`` when the
    block has fewer than two members.
    """
    z = _labels(fit, level)
    q = fit.params.q_ind if level == "ind" else fit.params.q_org
    members = np.flatnonzero(z == block)
    if len(members) < 2:
        return None
    feats = _profile_features(net, fit, level)[members]
    halves = ward(feats, 2)
    new = z.copy()
    new[members[halves == 1]] = q
    return new


def propose_merge(fit, level, block_a, block_b):
    """Relabel ``block_b`` as ``block_a`` and compact the labels to 0..q-2."""
    if block_a == block_b:
        raise ValueError("cannot merge a block with itself")
    z = _labels(fit, level)
    z[z == block_b] = block_a
    z[z > block_b] -= 1
    return z


def _neighbour_inits(net, fit, q_max):
    """(move, q_ind, q_org, tau_ind, tau_org) for every split/merge neighbour."""
    out = []
    qi, qo = fit.params.q_ind, fit.params.q_org
    caps = {"ind": min(q_max, net.n_ind), "org": min(q_max, net.n_org)}
    for level, q in (("ind", qi), ("org", qo)):
        props = []
        if q + 1 <= caps[level]:
            for b in range(q):
                z = propose_split(net, fit, level, b)
                if z is not None:
                    props.append((f"split {level} {b}", q + 1, z))
        if q > 1:
            for a, b in combinations(range(q), 2):
                props.append((f"merge {level} {a}+{b}", q - 1, propose_merge(fit, level, a, b)))
        for move, qn, z in props:
            if level == "ind":
                out.append((move, qn, qo, tau_from_labels(z, qn), fit.state.tau_org))
            else:
                out.append((move, qi, qn, fit.state.tau_ind, tau_from_labels(z, qn)))
    return out


def _scored_fit(net, tau_ind, tau_org, options, lev):
    f = fit_from(net, tau_ind, tau_org, options, lev=lev)
    f.icl = icl_mlvsbm(net, f)
    return f


def select(net, options=None):
    """Choose (q_ind, q_org) by stepwise ICL search and decide on dependence."""
    options = options or SelectOptions()
    fopt = options.fit
    lev = _levels(net)
    sbm_ind = sbm_path(*net.level("ind"), options.q_max, replace(fopt, seed=fopt.seed),
                       options.jobs, "individual", options.sbm_patience)
    sbm_org = sbm_path(*net.level("org"), options.q_max, replace(fopt, seed=fopt.seed + 1),
                       options.jobs, "organization", options.sbm_patience)
    qi0, qo0 = sbm_ind.best_q, sbm_org.best_q
    icl_ind = sbm_ind.best_icl + sbm_org.best_icl
    explored, fits, trace = {}, {}, []

    def record(move, f):
        key = (f.params.q_ind, f.params.q_org)
        trace.append((move, key, float(f.icl)))
        if key not in explored or f.icl > explored[key]:
            explored[key], fits[key] = float(f.icl), f

    if options.exhaustive:
        _exhaustive(net, options, sbm_ind, sbm_org, lev, record)
        current = fits[max(explored, key=lambda k: (explored[k], -k[0], -k[1]))]
    else:
        start = _scored_fit(net, sbm_ind.fits[qi0].tau, sbm_org.fits[qo0].tau, fopt, lev)
        record("start", start)
        current = start
        while True:
            cands = _neighbour_inits(net, current, options.q_max)

            def run(c):
                move, _, _, ti, to = c
                try:
                    return move, _scored_fit(net, ti, to, fopt, lev)
                except DegenerateFitError as exc:
                    return move, exc

            best = None
            for move, f in _map(run, cands, options.jobs):
                if isinstance(f, Exception):
                    trace.append((f"{move} failed: {f}", None, None))
                    continue
                record(move, f)
                if best is None or f.icl > best.icl:
                    best = f
            if best is None or best.icl <= current.icl:
                break
            current = best
            trace.append(("accept", current.q, float(current.icl)))

    best_q = max(explored, key=lambda k: (explored[k], -k[0], -k[1]))
    best_fit = fits[best_q]
    # models with a single block on either level are independent models
    independent_q = (qi0, qo0)
    for (qi, qo), v in explored.items():
        if (qi == 1 or qo == 1) and v > icl_ind:
            icl_ind, independent_q = v, (qi, qo)
    verdict = "independent" if icl_ind >= explored[best_q] else "dependent"
    return SelectionResult(best_fit=best_fit, best_q=best_q, explored=explored,
                           independent_q=independent_q, icl_independent=float(icl_ind),
                           verdict=verdict, search_trace=trace, sbm_ind=sbm_ind,
                           sbm_org=sbm_org, fits=fits)


def _exhaustive(net, options, sbm_ind, sbm_org, lev, record):
    for qi in sorted(sbm_ind.fits):
        for qo in sorted(sbm_org.fits):
            try:
                f = _scored_fit(net, sbm_ind.fits[qi].tau, sbm_org.fits[qo].tau, options.fit, lev)
            except DegenerateFitError:
                continue
            record("grid", f)
