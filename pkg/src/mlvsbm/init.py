"""Hard initial clusterings for the variational EM."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.cluster import AgglomerativeClustering, KMeans
from sklearn.exceptions import ConvergenceWarning

from mlvsbm._random import make_rng

METHODS = ("spectral", "hierarchical", "random")


def relabel(z):
    """Compact labels to 0..K-1 in order of first appearance."""
    z = np.asarray(z, dtype=int)
    _, first, inv = np.unique(z, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv.ravel()]


def profiles(x, mask=None):
    """Connection profile of each node: its observed out- and in-adjacency rows."""
    x = np.asarray(x, dtype=float)
    if mask is not None:
        x = x * np.asarray(mask)
    if x.shape[0] != x.shape[1]:
        return x
    return np.hstack([x, x.T])


def spectral_embedding(x, q, mask=None):
    """Leading ``q`` eigenvectors (by magnitude) of the degree-regularized
    normalized adjacency; singular vectors for a non-square profile."""
    x = np.asarray(x, dtype=float)
    if mask is not None and x.shape == np.shape(mask):
        x = x * np.asarray(mask)
    if x.shape[0] != x.shape[1]:
        u, s, _ = np.linalg.svd(x - x.mean(axis=0), full_matrices=False)
        return u[:, :q] * s[:q]
    s = 0.5 * (x + x.T)
    np.fill_diagonal(s, 0.0)
    deg = s.sum(axis=1)
    reg = deg + max(deg.mean(), 1e-12)
    dinv = 1.0 / np.sqrt(reg)
    lap = dinv[:, None] * s * dinv[None, :]
    vals, vecs = np.linalg.eigh(lap)
    top = np.argsort(-np.abs(vals), kind="stable")[:q]
    return vecs[:, top]


def _kmeans(emb, q, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        km = KMeans(n_clusters=q, n_init=20, random_state=int(seed) % (2 ** 32))
        return km.fit_predict(emb)


def ward(features, q):
    features = np.asarray(features, dtype=float)
    if q == 1:
        return np.zeros(len(features), dtype=int)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return AgglomerativeClustering(n_clusters=q, linkage="ward").fit_predict(features)


def init_clustering(x, q, method="spectral", seed=0, mask=None):
    """Hard labelling of the rows of ``x`` (adjacency or profile matrix) in ``q`` groups."""
    x = np.asarray(x)
    n = x.shape[0]
    if q < 1:
        raise ValueError("q must be >= 1")
    if q > n:
        raise ValueError(f"cannot form {q} blocks from {n} nodes")
    if q == 1:
        return np.zeros(n, dtype=int)
    if method == "spectral":
        z = _kmeans(spectral_embedding(x, q, mask), q, seed)
    elif method == "hierarchical":
        z = ward(profiles(x, mask), q)
    elif method == "random":
        z = make_rng(seed).integers(0, q, size=n)
    else:
        raise ValueError(f"unknown init method {method!r}; expected one of {METHODS}")
    return relabel(z)


def perturb(z, q, fraction, seed):
    """Reassign a random ``fraction`` of nodes to uniformly drawn blocks."""
    rng = make_rng(seed)
    z = np.array(z, dtype=int, copy=True)
    hit = rng.random(len(z)) < fraction
    z[hit] = rng.integers(0, q, size=int(hit.sum()))
    return z
