"""Multilevel network container, validation, file I/O and missingness masks.

A multilevel network couples an inter-individual adjacency matrix with an
inter-organizational one through an affiliation matrix mapping every
individual to exactly one organization.  Undirected levels are stored as
full symmetric matrices.  Unobserved dyads are flagged in a separate mask
(1 = observed); the diagonal is never a dyad.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from mlvsbm._random import make_rng

LEVELS = ("ind", "org")


class NetworkError(ValueError):
    """Raised for malformed input files or networks violating invariants."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


def _frozen(a, dtype=np.int8):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def full_mask(n):
    """Mask with every off-diagonal dyad observed."""
    m = np.ones((n, n), dtype=np.int8)
    np.fill_diagonal(m, 0)
    return m


@dataclass(frozen=True, eq=False)
class MultilevelNetwork:
    x_ind: np.ndarray
    x_org: np.ndarray
    affiliation: np.ndarray
    directed_ind: bool = False
    directed_org: bool = False
    mask_ind: np.ndarray = None
    mask_org: np.ndarray = None
    # (i, j) pairs removed in ``links`` masking mode, kept for scoring
    heldout_ind: tuple = field(default=())
    heldout_org: tuple = field(default=())

    def __post_init__(self):
        x_ind = np.asarray(self.x_ind)
        x_org = np.asarray(self.x_org)
        aff = np.asarray(self.affiliation)
        if x_ind.ndim != 2 or x_org.ndim != 2 or aff.ndim != 2:
            raise NetworkError("adjacency and affiliation matrices must be 2-d")
        object.__setattr__(self, "x_ind", _frozen(x_ind))
        object.__setattr__(self, "x_org", _frozen(x_org))
        object.__setattr__(self, "affiliation", _frozen(aff))
        for level, x in (("ind", x_ind), ("org", x_org)):
            name = f"mask_{level}"
            m = getattr(self, name)
            m = full_mask(x.shape[0]) if m is None else np.asarray(m)
            m = np.array(m, dtype=np.int8, copy=True)
            if m.shape == x.shape and m.shape[0] == m.shape[1]:
                np.fill_diagonal(m, 0)
            object.__setattr__(self, name, _frozen(m))
        object.__setattr__(self, "directed_ind", bool(self.directed_ind))
        object.__setattr__(self, "directed_org", bool(self.directed_org))
        object.__setattr__(
            self, "heldout_ind", tuple(tuple(map(int, p)) for p in self.heldout_ind))
        object.__setattr__(
            self, "heldout_org", tuple(tuple(map(int, p)) for p in self.heldout_org))

    @property
    def n_ind(self):
        return self.x_ind.shape[0]

    @property
    def n_org(self):
        return self.x_org.shape[0]

    @property
    def org_of(self):
        """Organization index of every individual (argmax of affiliation rows)."""
        return np.argmax(self.affiliation, axis=1)

    def adjacency(self, level):
        return self.x_ind if level == "ind" else self.x_org

    def mask(self, level):
        return self.mask_ind if level == "ind" else self.mask_org

    def directed(self, level):
        return self.directed_ind if level == "ind" else self.directed_org

    def heldout(self, level):
        return self.heldout_ind if level == "ind" else self.heldout_org

    def level(self, level):
        """(adjacency, mask, directed) triple for one level."""
        _check_level(level)
        return self.adjacency(level), self.mask(level), self.directed(level)

    def with_level(self, level, **changes):
        _check_level(level)
        return replace(self, **{f"{k}_{level}": v for k, v in changes.items()})


@dataclass(frozen=True)
class NetworkStats:
    density_ind: float
    density_org: float
    org_sizes: np.ndarray


def _check_level(level):
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")


def density(x, mask=None):
    """Observed edges over observed off-diagonal dyads."""
    x = np.asarray(x)
    m = full_mask(x.shape[0]) if mask is None else np.asarray(mask).copy()
    np.fill_diagonal(m, 0)
    n_obs = m.sum()
    if n_obs == 0:
        return 0.0
    return float((x * m).sum() / n_obs)


def network_stats(net):
    return NetworkStats(
        density_ind=density(net.x_ind, net.mask_ind),
        density_org=density(net.x_org, net.mask_org),
        org_sizes=net.affiliation.sum(axis=0).astype(int),
    )


def _binary_violations(name, a):
    bad = np.argwhere((a != 0) & (a != 1))
    return [f"{name} entry {tuple(map(int, idx))} is not binary" for idx in bad]


def _level_violations(level, x, m, directed):
    out = []
    name = f"x_{level}"
    if x.shape[0] != x.shape[1]:
        return [f"{name} is not square: shape {x.shape}"]
    if m.shape != x.shape:
        return [f"mask_{level} shape {m.shape} differs from {name} shape {x.shape}"]
    out += _binary_violations(name, x)
    out += _binary_violations(f"mask_{level}", m)
    for i in np.flatnonzero(np.diag(x)):
        out.append(f"nonzero diagonal at {level} {i}")
    if not directed:
        obs = (m == 1) & (m.T == 1)
        asym = np.argwhere(np.triu((x != x.T) & obs, 1))
        out += [f"{name} not symmetric at {tuple(map(int, p))}" for p in asym]
        masym = np.argwhere(np.triu(m != m.T, 1))
        out += [f"mask_{level} not symmetric at {tuple(map(int, p))}" for p in masym]
    return out


def validate(net):
    """List every broken invariant of ``net``; empty when well formed."""
    out = []
    out += _level_violations("ind", net.x_ind, net.mask_ind, net.directed_ind)
    out += _level_violations("org", net.x_org, net.mask_org, net.directed_org)
    aff = net.affiliation
    if aff.shape != (net.n_ind, net.n_org):
        out.append(
            f"affiliation shape {aff.shape} differs from ({net.n_ind}, {net.n_org})")
        return out
    out += _binary_violations("affiliation", aff)
    for i, s in enumerate(aff.sum(axis=1)):
        if s != 1:
            out.append(f"affiliation row {i} sums to {int(s)}")
    return out


def from_assignment(n_ind, n_org, x_ind, x_org, org_of, **kwargs):
    aff = np.zeros((n_ind, n_org), dtype=np.int8)
    aff[np.arange(n_ind), np.asarray(org_of, dtype=int)] = 1
    return MultilevelNetwork(x_ind=x_ind, x_org=x_org, affiliation=aff, **kwargs)


def _checked(net):
    problems = validate(net)
    if problems:
        raise NetworkError(f"invalid network: {problems[0]}", problems)
    return net


# --------------------------------------------------------------------------
# edge lists


def edges_to_matrix(edges, n, directed, what="edge"):
    x = np.zeros((n, n), dtype=np.int8)
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n):
            raise NetworkError(f"{what} ({a}, {b}) references a node >= {n}")
        x[a, b] = 1
        if not directed:
            x[b, a] = 1
    return x


def matrix_to_edges(x, directed):
    x = np.asarray(x)
    if not directed:
        x = np.triu(x, 1)
    return [(int(a), int(b)) for a, b in np.argwhere(x == 1)]


def _read_pairs(text, header, source):
    rows = []
    lines = text.splitlines()
    if not lines:
        return rows
    if lines[0].strip().replace(" ", "") != header:
        raise NetworkError(f"{source}: line 1: expected header {header!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise NetworkError(f"{source}: line {lineno}: malformed line {line!r}") from None
        if a < 0 or b < 0:
            raise NetworkError(f"{source}: line {lineno}: negative node id")
        rows.append((a, b))
    return rows


def _read_text(path_or_text):
    if isinstance(path_or_text, Path) or (
            isinstance(path_or_text, str) and "\n" not in path_or_text
            and Path(path_or_text).exists()):
        p = Path(path_or_text)
        return p.read_text(encoding="utf-8"), str(p)
    return str(path_or_text), "<string>"


def load_network(edges_ind, edges_org, affiliation, n_ind=None, n_org=None,
                 directed_ind=False, directed_org=False):
    """Read a network from the three CSV files (paths or CSV text).

    ``n_ind`` defaults to the number of affiliation lines and ``n_org`` to
    the largest organization index referenced plus one.
    """
    text, src = _read_text(affiliation)
    aff_pairs = _read_pairs(text, "individual,organization", src)
    if n_ind is None:
        n_ind = len(aff_pairs)
    text_ind, src_ind = _read_text(edges_ind)
    text_org, src_org = _read_text(edges_org)
    e_ind = _read_pairs(text_ind, "from,to", src_ind)
    e_org = _read_pairs(text_org, "from,to", src_org)
    if n_org is None:
        n_org = 1 + max([o for _, o in aff_pairs] + [max(p) for p in e_org], default=-1)
    seen = {}
    for i, o in aff_pairs:
        if i >= n_ind:
            raise NetworkError(f"{src}: individual {i} >= n_ind={n_ind}")
        if o >= n_org:
            raise NetworkError(f"{src}: organization {o} >= n_org={n_org}")
        if i in seen:
            raise NetworkError(f"{src}: individual {i} listed more than once")
        seen[i] = o
    aff = np.zeros((n_ind, n_org), dtype=np.int8)
    for i, o in seen.items():
        aff[i, o] = 1
    net = MultilevelNetwork(
        x_ind=edges_to_matrix(e_ind, n_ind, directed_ind),
        x_org=edges_to_matrix(e_org, n_org, directed_org),
        affiliation=aff, directed_ind=directed_ind, directed_org=directed_org)
    return _checked(net)


def _pairs_csv(header, pairs):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header.split(","))
    w.writerows(pairs)
    return buf.getvalue()


def save_network(net, edges_ind, edges_org, affiliation):
    """Write the three CSV files read back by :func:`load_network`."""
    Path(edges_ind).write_text(
        _pairs_csv("from,to", matrix_to_edges(net.x_ind * net.mask_ind, net.directed_ind)),
        encoding="utf-8")
    Path(edges_org).write_text(
        _pairs_csv("from,to", matrix_to_edges(net.x_org * net.mask_org, net.directed_org)),
        encoding="utf-8")
    Path(affiliation).write_text(
        _pairs_csv("individual,organization", list(enumerate(map(int, net.org_of)))),
        encoding="utf-8")


def _masked_pairs(mask, directed):
    miss = (np.asarray(mask) == 0)
    np.fill_diagonal(miss, False)
    if not directed:
        miss = np.triu(miss, 1)
    return [[int(a), int(b)] for a, b in np.argwhere(miss)]


def network_to_dict(net):
    d = {
        "n_ind": net.n_ind,
        "n_org": net.n_org,
        "directed_ind": net.directed_ind,
        "directed_org": net.directed_org,
        "edges_ind": [list(e) for e in matrix_to_edges(net.x_ind * net.mask_ind, net.directed_ind)],
        "edges_org": [list(e) for e in matrix_to_edges(net.x_org * net.mask_org, net.directed_org)],
        "affiliation": [int(o) for o in net.org_of],
    }
    for level in LEVELS:
        pairs = _masked_pairs(net.mask(level), net.directed(level))
        if pairs:
            d[f"mask_{level}"] = pairs
        if net.heldout(level):
            d[f"heldout_{level}"] = [list(p) for p in net.heldout(level)]
    return d


def network_from_dict(d):
    n_ind, n_org = int(d["n_ind"]), int(d["n_org"])
    directed_ind, directed_org = bool(d["directed_ind"]), bool(d["directed_org"])
    org_of = [int(o) for o in d["affiliation"]]
    if len(org_of) != n_ind:
        raise NetworkError(f"affiliation has {len(org_of)} entries, expected {n_ind}")
    if any(o < 0 or o >= n_org for o in org_of):
        raise NetworkError(f"affiliation references an organization >= {n_org}")
    masks = {}
    for level, n, directed in (("ind", n_ind, directed_ind), ("org", n_org, directed_org)):
        m = full_mask(n)
        for a, b in d.get(f"mask_{level}", []):
            if not (0 <= a < n and 0 <= b < n):
                raise NetworkError(f"mask_{level} pair ({a}, {b}) references a node >= {n}")
            m[a, b] = 0
            if not directed:
                m[b, a] = 0
        masks[level] = m
    net = from_assignment(
        n_ind, n_org,
        edges_to_matrix(d["edges_ind"], n_ind, directed_ind),
        edges_to_matrix(d["edges_org"], n_org, directed_org),
        org_of, directed_ind=directed_ind, directed_org=directed_org,
        mask_ind=masks["ind"], mask_org=masks["org"],
        heldout_ind=d.get("heldout_ind", ()), heldout_org=d.get("heldout_org", ()))
    return _checked(net)


def save_bundle(net, path):
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n", encoding="utf-8")


def load_bundle(path):
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# missingness


def _candidate_pairs(mask, directed):
    m = np.asarray(mask).astype(bool)
    m = m.copy()
    np.fill_diagonal(m, False)
    if not directed:
        m = np.triu(m, 1)
    return np.argwhere(m)


def apply_mask(net, level, fraction=None, pairs=None, mode="dyads", seed=0):
    """Hide dyads (``dyads`` mode) or delete existing links (``links`` mode).

    Either ``fraction`` (share of eligible dyads/links, rounded down) or an
    explicit list of ``pairs`` selects the targets.  For undirected levels an
    unordered dyad counts once and both orientations are changed.  Deleted
    links are appended to the level's held-out set.
    """
    _check_level(level)
    if mode not in ("dyads", "links"):
        raise ValueError(f"mode must be 'dyads' or 'links', got {mode!r}")
    x, m, directed = net.level(level)
    if pairs is None:
        if fraction is None:
            raise ValueError("give either fraction or pairs")
        upper = 1.0 if mode == "links" else 1.0 - 1e-15
        if not (0.0 <= fraction <= upper):
            raise ValueError(f"fraction {fraction} out of range")
        cand = _candidate_pairs(m, directed)
        if mode == "links":
            cand = cand[x[cand[:, 0], cand[:, 1]] == 1]
            if len(cand) == 0:
                raise ValueError(f"no existing observed links on level {level!r}")
        k = math.floor(fraction * len(cand))
        rng = make_rng(seed)
        chosen = cand[np.sort(rng.permutation(len(cand))[:k])]
    else:
        chosen = np.asarray(pairs, dtype=int).reshape(-1, 2)
        if np.any(chosen[:, 0] == chosen[:, 1]):
            raise ValueError("diagonal dyads cannot be masked")
        if mode == "links" and np.any(x[chosen[:, 0], chosen[:, 1]] != 1):
            raise ValueError("links mode targets must be existing edges")
    if len(chosen) == 0:
        return net
    a, b = chosen[:, 0], chosen[:, 1]
    if mode == "dyads":
        m = m.copy()
        m[a, b] = 0
        if not directed:
            m[b, a] = 0
        return net.with_level(level, mask=m)
    x = x.copy()
    x[a, b] = 0
    if not directed:
        x[b, a] = 0
    held = tuple(net.heldout(level)) + tuple(map(tuple, chosen.tolist()))
    return net.with_level(level, x=x, heldout=held)
