"""Variational EM for the multilevel SBM and for the unilevel SBM.

One outer iteration is an M-step followed by a VE-step.  The VE-step sweeps
the organization responsibilities (all rows at once) and then the individual
ones, repeating until the largest change drops below the tolerance.  A block
update that would lower the bound is damped by halving its step towards the
fixed point, so the recorded bound never decreases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict, replace

import numpy as np
from scipy.special import xlogy

from mlvsbm._random import child_seed
from mlvsbm.init import init_clustering, perturb, profiles
from mlvsbm.model import (
    TAU_FLOOR, DegenerateFitError, LevelData, VariationalState, _levels, _m_step,
    log_probs, onehot, sbm_bound, sbm_m_step, variational_bound,
)
from mlvsbm.params import SBMParams

log = logging.getLogger(__name__)

MAX_HALVINGS = 30
PERTURB_FRACTION = 0.2


@dataclass(frozen=True)
class FitOptions:
    max_outer_iterations: int = 1000
    bound_rel_tolerance: float = 1e-6
    max_fixed_point_sweeps: int = 50
    fixed_point_tolerance: float = 1e-6
    n_random_restarts: int = 10
    init_method: str = "spectral"
    seed: int = 0
    damping: float = 1.0

    def __post_init__(self):
        if self.bound_rel_tolerance <= 0 or self.fixed_point_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_outer_iterations < 1 or self.max_fixed_point_sweeps < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.n_random_restarts < 1:
            raise ValueError("n_random_restarts must be >= 1")
        if self.init_method not in ("spectral", "hierarchical", "random", "given"):
            raise ValueError(f"unknown init_method {self.init_method!r}")

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class FitResult:
    params: object
    state: VariationalState
    bound: float
    bound_trace: list
    n_iterations: int
    converged: bool
    independent: bool = False
    restart: int = 0
    icl: float = None
    notes: list = field(default_factory=list)
    options: FitOptions = None

    @property
    def map_assignments(self):
        return self.state.map()

    @property
    def q(self):
        return self.params.q_ind, self.params.q_org


@dataclass(eq=False)
class SBMFit:
    params: SBMParams
    tau: np.ndarray
    bound: float
    bound_trace: list
    n_iterations: int
    converged: bool
    restart: int = 0
    icl: float = None
    notes: list = field(default_factory=list)

    @property
    def z(self):
        return np.argmax(self.tau, axis=1)

    @property
    def q(self):
        return self.tau.shape[1]


def floor_rows(p):
    """Rows >= TAU_FLOOR that still sum to one."""
    q = p.shape[1]
    if q == 1:
        return np.ones_like(p)
    return TAU_FLOOR + (1.0 - q * TAU_FLOOR) * p


def tau_from_labels(z, q):
    return floor_rows(onehot(z, q))


def _safe_log(p):
    return np.log(np.maximum(p, np.finfo(float).tiny))


def _entropy(tau):
    # rows are floored away from zero inside the fit loops
    return -float(np.sum(tau * np.log(tau)))


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _damped(objective, old, proposal, b_old, damping):
    """Move ``old`` towards ``proposal``; halve the step until ``objective``
    does not decrease.  ``objective`` returns (value, cache); returns
    (tau, value, cache) with cache None when ``old`` is kept."""
    lam = damping
    for _ in range(MAX_HALVINGS):
        cand = proposal if lam == 1.0 else (1.0 - lam) * old + lam * proposal
        b, cache = objective(cand)
        if b >= b_old:
            return cand, b, cache
        lam *= 0.5
    return old, b_old, None


class _Bound:
    """Variational bound of the multilevel model for fixed parameters, with
    the per-level products of the current responsibilities cached."""

    def __init__(self, net, params, lev):
        self.params = params
        self.ind, self.org = lev
        self.org_of = net.org_of
        self.aff_t = net.affiliation.T.astype(float)
        self.logs_ind = log_probs(params.alpha_ind)
        self.logs_org = log_probs(params.alpha_org)

    def value(self, ti, to, pi_, po_):
        p = self.params
        mixed = ti.T @ to[self.org_of]
        return (float(np.sum(xlogy(to.sum(axis=0), p.pi_org)))
                + float(np.sum(xlogy(mixed, p.gamma)))
                + self.ind.loglik(ti, None, pi_, self.logs_ind)
                + self.org.loglik(to, None, po_, self.logs_org)
                + _entropy(ti) + _entropy(to))


def _ve(net, params, tau_ind, tau_org, lev, options, bound=None):
    """Fixed-point sweeps; returns (tau_ind, tau_org, bound, sweeps, converged)."""
    ind, org = lev
    B = _Bound(net, params, lev)
    lpi, lgam = _safe_log(params.pi_org), _safe_log(params.gamma)
    pi_, po_ = ind.prods(tau_ind), org.prods(tau_org)
    b = B.value(tau_ind, tau_org, pi_, po_) if bound is None else bound

    def org_obj(t):
        prods = org.prods(t)
        return B.value(tau_ind, t, pi_, prods), prods

    def ind_obj(t):
        prods = ind.prods(t)
        return B.value(t, tau_org, prods, po_), prods

    converged = False
    sweeps = 0
    for sweeps in range(1, options.max_fixed_point_sweeps + 1):
        old_ind, old_org = tau_ind, tau_org
        logits = lpi[None, :] + B.aff_t @ tau_ind @ lgam + org.tau_gradient(
            tau_org, params.alpha_org, po_)
        tau_org, b, cache = _damped(org_obj, tau_org, floor_rows(_softmax(logits)), b,
                                    options.damping)
        po_ = cache or po_
        logits = tau_org[B.org_of] @ lgam.T + ind.tau_gradient(tau_ind, params.alpha_ind, pi_)
        tau_ind, b, cache = _damped(ind_obj, tau_ind, floor_rows(_softmax(logits)), b,
                                    options.damping)
        pi_ = cache or pi_
        change = max(np.abs(tau_org - old_org).max(), np.abs(tau_ind - old_ind).max())
        if change < options.fixed_point_tolerance:
            converged = True
            break
    return tau_ind, tau_org, b, sweeps, converged


def ve_step(net, params, state, options=None):
    """Fixed-point update of both responsibility matrices for fixed ``params``."""
    options = options or FitOptions()
    ti, to, _, _, _ = _ve(net, params, floor_rows(np.asarray(state.tau_ind)),
                          floor_rows(np.asarray(state.tau_org)), _levels(net), options)
    return VariationalState(ti, to)


def _improved(b, prev, tol):
    return (b - prev) > tol * max(1.0, abs(prev))


def _check_fittable(lev, q, name):
    if q > 1 and lev.n_obs == 0:
        raise DegenerateFitError(f"{name} level has no observed dyads; cannot fit {q} blocks")
    if q > lev.n:
        raise DegenerateFitError(f"{name} level has {lev.n} nodes, fewer than q={q}")


def fit_from(net, tau_ind, tau_org, options=None, independent=False, callback=None,
             lev=None, restart=0):
    """One variational EM run from the given responsibilities.

    ``callback(iteration, params, state, bound)`` is called after every
    outer iteration.
    """
    options = options or FitOptions()
    lev = lev or _levels(net)
    tau_ind, tau_org = floor_rows(np.asarray(tau_ind, float)), floor_rows(np.asarray(tau_org, float))
    notes = []
    trace = []
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, options.max_outer_iterations + 1):
        params = _m_step(net, tau_ind, tau_org, *lev, independent, notes)
        tau_ind, tau_org, b, _, _ = _ve(net, params, tau_ind, tau_org, lev, options)
        if not np.isfinite(b):
            raise DegenerateFitError(f"bound became {b} at iteration {it}")
        trace.append(b)
        if callback is not None:
            callback(it, params, VariationalState(tau_ind, tau_org), b)
        if it > 1 and not _improved(b, prev, options.bound_rel_tolerance):
            converged = True
            break
        prev = b
    # final M-step so that the returned parameters are stationary for the returned state
    params = _m_step(net, tau_ind, tau_org, *lev, independent, notes)
    state = VariationalState(tau_ind, tau_org)
    b = variational_bound(net, params, state, lev)
    trace.append(b)
    if callback is not None:
        callback(it + 1, params, state, b)
    return FitResult(params=params, state=state, bound=b, bound_trace=trace,
                     n_iterations=it, converged=converged, independent=independent,
                     restart=restart, notes=_dedupe(notes), options=options)


def _dedupe(notes):
    out = []
    for n in notes:
        n = (n[0], tuple(n[1]))
        if n not in out:
            out.append(n)
    return out


def _base_labels(x, mask, q, method, seed, extra=None):
    if method in ("spectral", "hierarchical"):
        feats = x if extra is None else np.hstack([profiles(x, mask), extra])
        return init_clustering(feats, q, method, seed, mask=mask if extra is None else None)
    return init_clustering(x, q, "random", seed)


def default_inits(net, q_ind, q_org, options):
    """Initial labellings: the base method on each level, then random perturbations."""
    method = options.init_method if options.init_method != "given" else "spectral"
    x_i, m_i, _ = net.level("ind")
    x_o, m_o, _ = net.level("org")
    zi = _base_labels(x_i, m_i, q_ind, method, child_seed(options.seed, 0, 0))
    zo = _base_labels(x_o, m_o, q_org, method, child_seed(options.seed, 0, 1))
    inits = [(zi, zo)]
    if method == "spectral" and options.n_random_restarts > 1:
        inits.append((_base_labels(x_i, m_i, q_ind, "hierarchical", 0),
                      _base_labels(x_o, m_o, q_org, "hierarchical", 0)))
    for r in range(len(inits), options.n_random_restarts):
        if method == "random":
            inits.append((init_clustering(x_i, q_ind, "random", child_seed(options.seed, r, 0)),
                          init_clustering(x_o, q_org, "random", child_seed(options.seed, r, 1))))
        else:
            inits.append((perturb(zi, q_ind, PERTURB_FRACTION, child_seed(options.seed, r, 0)),
                          perturb(zo, q_org, PERTURB_FRACTION, child_seed(options.seed, r, 1))))
    return inits


def best_of(results):
    """Highest bound; ties go to the lowest restart index."""
    return max(results, key=lambda r: (r.bound, -r.restart))


def fit(net, q_ind, q_org, options=None, init=None, independent=False, callback=None,
        jobs=1):
    """Fit the multilevel SBM with ``q_ind`` x ``q_org`` blocks.

    ``init`` is an :class:`~mlvsbm.params.Assignments` or a
    :class:`VariationalState`; when given, only that start is used.
    ``independent=True`` constrains all columns of gamma to be equal.
    """
    options = options or FitOptions()
    if q_ind < 1 or q_org < 1:
        raise ValueError("block counts must be >= 1")
    lev = _levels(net)
    _check_fittable(lev[0], q_ind, "individual")
    _check_fittable(lev[1], q_org, "organization")
    if init is not None:
        if isinstance(init, VariationalState):
            starts = [(init.tau_ind, init.tau_org)]
        else:
            starts = [(tau_from_labels(init.z_ind, q_ind), tau_from_labels(init.z_org, q_org))]
    elif options.init_method == "given":
        raise ValueError("init_method 'given' requires an init")
    else:
        starts = [(tau_from_labels(a, q_ind), tau_from_labels(b, q_org))
                  for a, b in default_inits(net, q_ind, q_org, options)]

    def run(r):
        ti, to = starts[r]
        try:
            return fit_from(net, ti, to, options, independent, callback, lev, restart=r)
        except DegenerateFitError as exc:
            log.debug("restart %d failed: %s", r, exc)
            return exc

    results = _map(run, range(len(starts)), jobs)
    good = [r for r in results if isinstance(r, FitResult)]
    if not good:
        raise DegenerateFitError(f"all {len(results)} restarts failed: {results[0]}")
    return best_of(good)


def _map(fn, items, jobs):
    items = list(items)
    if jobs is None or jobs == 1 or len(items) < 2:
        return [fn(i) for i in items]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=jobs, prefer="threads")(delayed(fn)(i) for i in items)


# --------------------------------------------------------------------------
# unilevel SBM


def _sbm_ve(lev, params, tau, options, bound=None):
    lpi = _safe_log(params.pi)
    prods = lev.prods(tau)
    logs = log_probs(params.alpha)

    def value(t, pr):
        return (float(np.sum(xlogy(t.sum(axis=0), params.pi)))
                + lev.loglik(t, None, pr, logs) + _entropy(t))

    def obj(t):
        pr = lev.prods(t)
        return value(t, pr), pr

    b = value(tau, prods) if bound is None else bound
    converged = False
    sweeps = 0
    for sweeps in range(1, options.max_fixed_point_sweeps + 1):
        logits = lpi[None, :] + lev.tau_gradient(tau, params.alpha, prods)
        new, b, cache = _damped(obj, tau, floor_rows(_softmax(logits)), b, options.damping)
        prods = cache or prods
        change = np.abs(new - tau).max()
        tau = new
        if change < options.fixed_point_tolerance:
            converged = True
            break
    return tau, b, sweeps, converged


def sbm_fit_from(lev, tau, options=None, callback=None, restart=0):
    options = options or FitOptions()
    tau = floor_rows(np.asarray(tau, float))
    notes, trace = [], []
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, options.max_outer_iterations + 1):
        params = sbm_m_step(lev, tau, notes)
        tau, b, _, _ = _sbm_ve(lev, params, tau, options)
        if not np.isfinite(b):
            raise DegenerateFitError(f"bound became {b} at iteration {it}")
        trace.append(b)
        if callback is not None:
            callback(it, params, tau, b)
        if it > 1 and not _improved(b, prev, options.bound_rel_tolerance):
            converged = True
            break
        prev = b
    params = sbm_m_step(lev, tau, notes)
    b = sbm_bound(lev, params, tau)
    trace.append(b)
    return SBMFit(params=params, tau=tau, bound=b, bound_trace=trace, n_iterations=it,
                  converged=converged, restart=restart, notes=_dedupe(notes))


def sbm_inits(x, mask, q, options):
    method = options.init_method if options.init_method != "given" else "spectral"
    base = _base_labels(x, mask, q, method, child_seed(options.seed, 0))
    inits = [base]
    if method == "spectral" and options.n_random_restarts > 1:
        inits.append(_base_labels(x, mask, q, "hierarchical", 0))
    for r in range(len(inits), options.n_random_restarts):
        if method == "random":
            inits.append(init_clustering(x, q, "random", child_seed(options.seed, r)))
        else:
            inits.append(perturb(base, q, PERTURB_FRACTION, child_seed(options.seed, r)))
    return inits


def fit_sbm(x, mask, directed, q, options=None, init=None, callback=None, jobs=1):
    """Variational EM for a single-level SBM on adjacency ``x``."""
    options = options or FitOptions()
    x = np.asarray(x)
    mask = np.ones_like(x) if mask is None else np.asarray(mask)
    lev = LevelData(x, mask, directed)
    _check_fittable(lev, q, "the")
    if init is not None:
        init = np.asarray(init)
        starts = [init if init.ndim == 2 else tau_from_labels(init, q)]
    else:
        starts = [tau_from_labels(z, q) for z in sbm_inits(x, mask, q, options)]

    def run(r):
        try:
            return sbm_fit_from(lev, starts[r], options, callback, restart=r)
        except DegenerateFitError as exc:
            return exc

    results = _map(run, range(len(starts)), jobs)
    good = [r for r in results if isinstance(r, SBMFit)]
    if not good:
        raise DegenerateFitError(f"all {len(results)} restarts failed: {results[0]}")
    return max(good, key=lambda r: (r.bound, -r.restart))
