"""Integrated classification likelihood for the multilevel and unilevel SBM.

The likelihood part is the complete log-likelihood at the MAP clustering
with the parameters re-estimated from that hard clustering, so an ICL value
depends on the clustering only.
"""
from __future__ import annotations

import math

import numpy as np

from mlvsbm.model import (
    LevelData, VariationalState, complete_log_likelihood, onehot, m_step,
    sbm_complete_log_likelihood, sbm_m_step,
)


def _alpha_penalty(q, n, directed):
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if directed:
        return 0.5 * q * q * math.log(n * (n - 1))
    return 0.5 * q * (q + 1) / 2 * math.log(n * (n - 1) / 2)


def penalty_sbm(q, n, directed=False):
    """BIC-type penalty of a unilevel SBM with ``q`` blocks on ``n`` nodes."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return _alpha_penalty(q, n, directed) + (q - 1) / 2 * math.log(n)


def penalty_mlvsbm(q_ind, q_org, n_ind, n_org, directed_ind=False, directed_org=False):
    """Penalty of the multilevel SBM; the gamma term counts
    ``q_org * (q_ind - 1)`` free parameters."""
    if q_ind < 1 or q_org < 1:
        raise ValueError("block counts must be >= 1")
    return (_alpha_penalty(q_ind, n_ind, directed_ind)
            + q_org * (q_ind - 1) / 2 * math.log(n_ind)
            + _alpha_penalty(q_org, n_org, directed_org)
            + (q_org - 1) / 2 * math.log(n_org))


def map_params(net, z, q_ind, q_org, independent=False):
    """Parameters re-estimated from a hard clustering."""
    state = VariationalState(onehot(z.z_ind, q_ind), onehot(z.z_org, q_org))
    return m_step(net, state, independent=independent)


def icl_mlvsbm(net, fit):
    """ICL of a multilevel fit: complete log-likelihood at the MAP minus the penalty."""
    q_ind, q_org = fit.params.q_ind, fit.params.q_org
    z = fit.state.map()
    params = map_params(net, z, q_ind, q_org)
    ll = complete_log_likelihood(net, params, z)
    return ll - penalty_mlvsbm(q_ind, q_org, net.n_ind, net.n_org,
                               net.directed_ind, net.directed_org)


def icl_sbm(x, mask, directed, fit):
    """ICL of a unilevel fit (``fit`` exposes ``tau``)."""
    x = np.asarray(x)
    mask = np.ones_like(x) if mask is None else mask
    q = fit.tau.shape[1]
    z = np.argmax(fit.tau, axis=1)
    lev = LevelData(x, mask, directed)
    params = sbm_m_step(lev, onehot(z, q))
    ll = sbm_complete_log_likelihood(x, mask, directed, params, z)
    return ll - penalty_sbm(q, x.shape[0], directed)
