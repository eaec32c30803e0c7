"""Likelihoods, variational bound and closed-form parameter estimates.

Both levels are handled by :class:`LevelData`, which folds the observation
mask into the adjacency matrix once.  Sums run over ordered observed pairs
``i != i'``; undirected levels carry a factor 1/2, directed ones do not.
Probabilities of exactly 0 or 1 meeting an opposing observation yield
``-inf``, never NaN.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from mlvsbm.params import Assignments, ModelParams, SBMParams

log = logging.getLogger(__name__)

TAU_FLOOR = 1e-9
ALPHA_CLAMP = 1e-9
# denominators below this count as empty blocks in the M-step
EMPTY_WEIGHT = 1e-12
EXACT_LIMIT = 10 ** 7


class DegenerateFitError(RuntimeError):
    pass


class InstanceTooLarge(ValueError):
    pass


def onehot(z, q):
    z = np.asarray(z, dtype=int)
    t = np.zeros((len(z), q))
    t[np.arange(len(z)), z] = 1.0
    return t


@dataclass(frozen=True, eq=False)
class VariationalState:
    tau_ind: np.ndarray
    tau_org: np.ndarray

    def __post_init__(self):
        for name in ("tau_ind", "tau_org"):
            a = np.array(getattr(self, name), dtype=float, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_assignments(cls, z, q_ind, q_org):
        return cls(onehot(z.z_ind, q_ind), onehot(z.z_org, q_org))

    def map(self):
        """Row-wise argmax; ties go to the lowest block index."""
        return Assignments(np.argmax(self.tau_ind, axis=1), np.argmax(self.tau_org, axis=1))

    def permuted(self, perm_ind, perm_org):
        return VariationalState(self.tau_ind[:, perm_ind], self.tau_org[:, perm_org])


class LevelData:
    """Adjacency of one level with the observation mask folded in."""

    def __init__(self, x, mask, directed):
        x = np.asarray(x)
        m = np.asarray(mask, dtype=float).copy()
        np.fill_diagonal(m, 0.0)
        self.n = x.shape[0]
        self.directed = bool(directed)
        self.half = 1.0 if directed else 0.5
        self.obs = m
        self.edges = np.where(m > 0, x, 0).astype(float)
        self.nonedges = m - self.edges
        self.n_obs = m.sum()

    @classmethod
    def of(cls, net, level):
        return cls(*net.level(level))

    def density(self):
        return float(self.edges.sum() / self.n_obs) if self.n_obs else 0.0

    def prods(self, tau):
        """Adjacency-times-responsibility products reused by the other methods."""
        et, ot = self.edges @ tau, self.obs @ tau
        if self.directed:
            return et, ot, self.edges.T @ tau, self.obs.T @ tau
        return et, ot

    def counts(self, tau, prods=None):
        """Expected edge and non-edge counts between block pairs (ordered pairs)."""
        et, ot = (prods or self.prods(tau))[:2]
        e1 = tau.T @ et
        return e1, tau.T @ ot - e1

    def loglik(self, tau, alpha, prods=None, logs=None):
        """Expected log-likelihood of the level; ``logs`` = (log a, log(1 - a))
        may be passed precomputed."""
        e1, e0 = self.counts(tau, prods)
        if logs is None:
            return self.half * float(np.sum(xlogy(e1, alpha)) + np.sum(xlogy(e0, 1.0 - alpha)))
        la, lb = logs
        with np.errstate(invalid="ignore"):
            t = np.where(e1 > 0, e1 * la, 0.0).sum() + np.where(e0 > 0, e0 * lb, 0.0).sum()
        return self.half * float(t)

    def tau_gradient(self, tau, alpha, prods=None):
        """Derivative of :meth:`loglik` with respect to each entry of ``tau``."""
        prods = prods or self.prods(tau)
        a = np.clip(alpha, ALPHA_CLAMP, 1 - ALPHA_CLAMP)
        la, lb = np.log(a), np.log1p(-a)
        et, ot = prods[:2]
        if not self.directed:
            la, lb = 0.5 * (la + la.T), 0.5 * (lb + lb.T)
            return et @ la.T + (ot - et) @ lb.T
        g = et @ la.T + (ot - et) @ lb.T
        return g + prods[2] @ la + (prods[3] - prods[2]) @ lb

    def alpha_hat(self, tau):
        """Block-pair connection frequencies; empty pairs get the level density."""
        e1 = tau.T @ self.edges @ tau
        den = tau.T @ self.obs @ tau
        empty = den < EMPTY_WEIGHT
        alpha = np.where(empty, self.density(), e1 / np.where(empty, 1.0, den))
        if not self.directed:
            alpha = 0.5 * (alpha + alpha.T)
        return np.clip(alpha, ALPHA_CLAMP, 1 - ALPHA_CLAMP), empty


def entropy(tau):
    return -float(np.sum(xlogy(tau, tau)))


def log_probs(alpha):
    """(log a, log(1 - a)) with -inf at the boundary."""
    with np.errstate(divide="ignore"):
        return np.log(alpha), np.log1p(-alpha)


# --------------------------------------------------------------------------
# multilevel model


def _levels(net):
    return LevelData.of(net, "ind"), LevelData.of(net, "org")


def _check_dims(net, params, n_ind=None, n_org=None):
    if params.directed_ind != net.directed_ind or params.directed_org != net.directed_org:
        raise ValueError("directedness of parameters and network disagree")
    if net.affiliation.shape != (net.n_ind, net.n_org):
        raise ValueError("affiliation shape does not match the adjacency matrices")


def _expected_terms(net, params, tau_ind, tau_org, lev=None):
    ind, org = lev or _levels(net)
    aff = net.affiliation.astype(float)
    t_pi = float(np.sum(xlogy(tau_org.sum(axis=0), params.pi_org)))
    t_gamma = float(np.sum(xlogy(tau_ind.T @ aff @ tau_org, params.gamma)))
    return t_pi, t_gamma, ind.loglik(tau_ind, params.alpha_ind), org.loglik(tau_org, params.alpha_org)


def complete_log_likelihood(net, params, z):
    """log p(X_ind, X_org, Z_ind, Z_org | A; params) over observed dyads."""
    _check_dims(net, params)
    if z.problems(params.q_ind, params.q_org):
        raise ValueError("; ".join(z.problems(params.q_ind, params.q_org)))
    if len(z.z_ind) != net.n_ind or len(z.z_org) != net.n_org:
        raise ValueError("assignment lengths do not match the network")
    terms = _expected_terms(net, params, onehot(z.z_ind, params.q_ind),
                            onehot(z.z_org, params.q_org))
    return float(sum(terms))


def variational_bound(net, params, state, lev=None):
    """Expected complete log-likelihood under the mean-field law plus its entropy."""
    terms = _expected_terms(net, params, state.tau_ind, state.tau_org, lev)
    return float(sum(terms)) + entropy(state.tau_ind) + entropy(state.tau_org)


def _mixed_radix(q, n, start, stop):
    """Rows ``start..stop-1`` of the lexicographic enumeration of {0..q-1}^n."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = idx % q
        idx //= q
    return out


def _configs_loglik(lev, alpha, configs):
    """Level log-likelihood for every row of ``configs`` (one label per node)."""
    with np.errstate(divide="ignore"):
        la, lb = np.log(alpha), np.log1p(-alpha)
    out = np.zeros(len(configs))
    rows, cols = np.nonzero(lev.obs)
    for i, j in zip(rows, cols):
        zi, zj = configs[:, i], configs[:, j]
        if lev.edges[i, j]:
            out += la[zi, zj]
        else:
            out += lb[zi, zj]
    return lev.half * out


def exact_log_likelihood(net, params, chunk=1 << 15):
    """log p(X | A; params) by summing over every joint block assignment.

    Only feasible on tiny instances: ``q_ind**n_ind * q_org**n_org`` must not
    exceed 10**7.
    """
    _check_dims(net, params)
    qi, qo, ni, no = params.q_ind, params.q_org, net.n_ind, net.n_org
    n_i, n_o = qi ** ni, qo ** no
    if n_i * n_o > EXACT_LIMIT:
        raise InstanceTooLarge(f"{n_i * n_o} joint assignments exceed the {EXACT_LIMIT} limit")
    ind, org = _levels(net)
    with np.errstate(divide="ignore"):
        lpi, lgam = np.log(params.pi_org), np.log(params.gamma)
    zo = _mixed_radix(qo, no, 0, n_o)
    # log p(Z_org) + log p(X_org | Z_org) for every organization configuration
    outer = lpi[zo].sum(axis=1) + _configs_loglik(org, params.alpha_org, zo)
    org_of = net.org_of
    inner = np.full(n_o, -np.inf)
    for start in range(0, n_i, chunk):
        zi = _mixed_radix(qi, ni, start, min(n_i, start + chunk))
        li = _configs_loglik(ind, params.alpha_ind, zi)
        g = np.zeros((len(zi), n_o))
        for i in range(ni):
            g += lgam[zi[:, i][:, None], zo[:, org_of[i]][None, :]]
        block = logsumexp(li[:, None] + g, axis=0)
        inner = np.logaddexp(inner, block)
    return float(logsumexp(outer + inner))


def m_step(net, state, independent=False, report=None):
    """Closed-form parameters maximizing the bound for fixed ``state``.

    With ``independent=True`` all columns of gamma are constrained equal
    (to the mean individual membership).  Block indices found empty are
    appended to ``report`` when a list is given.
    """
    ind, org = _levels(net)
    return _m_step(net, state.tau_ind, state.tau_org, ind, org, independent, report)


def _m_step(net, tau_ind, tau_org, ind, org, independent=False, report=None):
    q_ind, q_org = tau_ind.shape[1], tau_org.shape[1]
    pi = tau_org.mean(axis=0)
    pi = pi / pi.sum()
    if independent:
        col = tau_ind.mean(axis=0)
        gamma = np.tile((col / col.sum())[:, None], (1, q_org))
        empty_cols = np.zeros(q_org, dtype=bool)
    else:
        aff = net.affiliation.astype(float)
        num = tau_ind.T @ aff @ tau_org
        den = num.sum(axis=0)
        empty_cols = den < EMPTY_WEIGHT
        gamma = np.where(empty_cols[None, :], 1.0 / q_ind,
                         num / np.where(empty_cols, 1.0, den)[None, :])
    alpha_ind, e_ind = ind.alpha_hat(tau_ind)
    alpha_org, e_org = org.alpha_hat(tau_org)
    if report is not None:
        if empty_cols.any():
            report.append(("gamma", np.flatnonzero(empty_cols).tolist()))
        if e_ind.any():
            report.append(("alpha_ind", np.flatnonzero(e_ind.any(axis=1)).tolist()))
        if e_org.any():
            report.append(("alpha_org", np.flatnonzero(e_org.any(axis=1)).tolist()))
    return ModelParams(pi_org=pi, gamma=gamma, alpha_ind=alpha_ind, alpha_org=alpha_org,
                       directed_ind=net.directed_ind, directed_org=net.directed_org)


# --------------------------------------------------------------------------
# unilevel model


def sbm_complete_log_likelihood(x, mask, directed, params, z):
    lev = LevelData(x, mask, directed)
    tau = onehot(z, params.q)
    return float(np.sum(xlogy(tau.sum(axis=0), params.pi))) + lev.loglik(tau, params.alpha)


def sbm_bound(lev, params, tau):
    return (float(np.sum(xlogy(tau.sum(axis=0), params.pi)))
            + lev.loglik(tau, params.alpha) + entropy(tau))


def sbm_m_step(lev, tau, report=None):
    pi = tau.mean(axis=0)
    alpha, empty = lev.alpha_hat(tau)
    if report is not None and empty.any():
        report.append(("alpha", np.flatnonzero(empty.any(axis=1)).tolist()))
    return SBMParams(pi=pi / pi.sum(), alpha=alpha, directed=lev.directed)


def sbm_exact_log_likelihood(x, mask, directed, params):
    """Unilevel analogue of :func:`exact_log_likelihood` (test helper)."""
    lev = LevelData(x, mask, directed)
    if params.q ** lev.n > EXACT_LIMIT:
        raise InstanceTooLarge("too many assignments")
    z = np.array(list(itertools.product(range(params.q), repeat=lev.n)))
    with np.errstate(divide="ignore"):
        lp = np.log(params.pi)[z].sum(axis=1)
    return float(logsumexp(lp + _configs_loglik(lev, params.alpha, z)))
