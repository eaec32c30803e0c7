"""Sampling multilevel networks and building the standard simulation designs."""
from __future__ import annotations

import warnings

import numpy as np

from mlvsbm._random import make_rng
from mlvsbm.network import MultilevelNetwork, validate, NetworkError
from mlvsbm.params import Assignments, ModelParams

TOPOLOGIES = ("assortative", "disassortative", "core-periphery")


def topology_pattern(kind, eps, q):
    """Unscaled connectivity pattern with entries in {1, eps}.

    Block 0 is the core of the core-periphery pattern: pairs (k, l) with
    k + l < q - 1 get ``eps``.
    """
    k, l = np.indices((q, q))
    if kind == "assortative":
        high = k == l
    elif kind == "disassortative":
        high = k != l
    elif kind == "core-periphery":
        high = (k + l) < (q - 1)
    else:
        raise ValueError(f"unknown topology {kind!r}; expected one of {TOPOLOGIES}")
    return np.where(high, float(eps), 1.0)


def topology_alpha(kind, d, eps, q):
    """Connectivity matrix ``d * pattern`` for one of the canonical topologies."""
    if d <= 0:
        raise ValueError(f"density parameter d must be > 0, got {d}")
    if eps < 1:
        raise ValueError(f"eps must be >= 1, got {eps}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if d * eps > 1 + 1e-12:
        raise ValueError(f"d * eps = {d * eps} exceeds 1")
    return np.minimum(d * topology_pattern(kind, eps, q), 1.0)


def gamma_from_delta(delta, q):
    """Square mixing matrix with ``delta`` on the diagonal.

    ``delta = 1/q`` makes all columns equal (independent levels) and
    ``delta = 1`` gives the identity.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if q < 2:
        raise ValueError("gamma_from_delta needs q >= 2")
    g = np.full((q, q), (1.0 - delta) / (q - 1))
    np.fill_diagonal(g, delta)
    return g


# Steeper exponents concentrate individuals and leave more organizations empty.
POWER_LAW_EXPONENT = 1.5


def sample_affiliation(n_ind, n_org, law="power-law", exponent=POWER_LAW_EXPONENT, seed=0):
    """Affiliation matrix assigning each individual to one organization.

    ``power-law``: organization ``perm[r]`` gets weight ``(r + 1) ** -exponent``
    for a random permutation ``perm``; individuals are then placed i.i.d.
    with probability proportional to the weights.  ``uniform``: equal weights.
    """
    if n_ind < 1 or n_org < 1:
        raise ValueError("n_ind and n_org must be positive")
    if n_org > n_ind:
        warnings.warn(f"n_org={n_org} exceeds n_ind={n_ind}; some organizations stay empty",
                      stacklevel=2)
    rng = make_rng(seed)
    if law == "power-law":
        if not exponent > 1:
            raise ValueError(f"power-law exponent must be > 1, got {exponent}")
        perm = rng.permutation(n_org)
        w = np.empty(n_org)
        w[perm] = np.arange(1, n_org + 1, dtype=float) ** -exponent
    elif law == "uniform":
        w = np.ones(n_org)
    else:
        raise ValueError(f"unknown size law {law!r}")
    cdf = np.cumsum(w / w.sum())
    org = np.minimum(np.searchsorted(cdf, rng.random(n_ind), side="right"), n_org - 1)
    aff = np.zeros((n_ind, n_org), dtype=np.int8)
    aff[np.arange(n_ind), org] = 1
    return aff


def _categorical(rng, probs):
    """One draw per row of ``probs`` by inverse CDF on a single uniform each."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])
    z = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(z, probs.shape[1] - 1)


def sample_adjacency(rng, alpha, z, directed):
    """Bernoulli dyads given block labels; draws row-major over all n*n cells."""
    n = len(z)
    u = rng.random((n, n))
    x = (u < alpha[np.ix_(z, z)]).astype(np.int8)
    if not directed:
        x = np.triu(x, 1)
        x = x + x.T
    np.fill_diagonal(x, 0)
    return x


def sample_network(params, affiliation, seed=0):
    """Draw (network, true assignments) from the multilevel SBM.

    Order of draws: organization blocks, individual blocks in index order,
    individual dyads, organization dyads.
    """
    params.check()
    aff = np.asarray(affiliation)
    n_ind, n_org = aff.shape
    if np.any(aff.sum(axis=1) != 1):
        raise NetworkError("every affiliation row must contain exactly one 1")
    rng = make_rng(seed)
    z_org = _categorical(rng, np.tile(params.pi_org, (n_org, 1)))
    org_of = np.argmax(aff, axis=1)
    z_ind = _categorical(rng, params.gamma[:, z_org[org_of]].T)
    x_ind = sample_adjacency(rng, params.alpha_ind, z_ind, params.directed_ind)
    x_org = sample_adjacency(rng, params.alpha_org, z_org, params.directed_org)
    net = MultilevelNetwork(x_ind=x_ind, x_org=x_org, affiliation=aff,
                            directed_ind=params.directed_ind,
                            directed_org=params.directed_org)
    assert not validate(net)
    return net, Assignments(z_ind=z_ind, z_org=z_org)


def expected_density(pi, alpha):
    """Expected edge density of an SBM level with block proportions ``pi``."""
    pi = np.asarray(pi)
    return float(pi @ np.asarray(alpha) @ pi)


def design_params(topology_ind="assortative", d_ind=0.1, eps_ind=5.0, delta=0.8,
                  topology_org="assortative", d_org=0.1, eps_org=5.0, q=3,
                  directed_ind=False, directed_org=False):
    """Parameters of the standard two-level simulation design.

    Organization blocks are equiprobable; ``gamma`` comes from
    :func:`gamma_from_delta`.
    """
    return ModelParams(
        pi_org=np.full(q, 1.0 / q),
        gamma=gamma_from_delta(delta, q),
        alpha_ind=topology_alpha(topology_ind, d_ind, eps_ind, q),
        alpha_org=topology_alpha(topology_org, d_org, eps_org, q),
        directed_ind=directed_ind, directed_org=directed_org,
    ).check()


def simulate_design(seed, n_ind=180, n_org=60, law="power-law", exponent=POWER_LAW_EXPONENT,
                    **design):
    """Sample affiliation and network for one replicate of a design.

    The affiliation and the network use two independent child streams of
    ``seed``.
    """
    ss = np.random.SeedSequence(seed)
    aff_seed, net_seed = ss.spawn(2)
    params = design_params(**design)
    aff = sample_affiliation(n_ind, n_org, law=law, exponent=exponent, seed=aff_seed)
    net, truth = sample_network(params, aff, seed=net_seed)
    return net, truth, params
