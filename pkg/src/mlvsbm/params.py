"""Parameter and assignment containers shared by the sampler and the fitter.

Block labels are 0-based everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ATOL = 1e-8


def _arr(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _alpha_problems(name, alpha, directed):
    out = []
    if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1]:
        return [f"{name} must be square, got shape {alpha.shape}"]
    if np.any(alpha < 0) or np.any(alpha > 1) or not np.all(np.isfinite(alpha)):
        out.append(f"{name} entries must lie in [0, 1]")
    if not directed and not np.allclose(alpha, alpha.T, atol=_ATOL, rtol=0):
        out.append(f"{name} must be symmetric for an undirected level")
    return out


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Multilevel SBM parameters.

    ``gamma[k, l]`` is the probability that an individual affiliated to an
    organization of block ``l`` falls in individual block ``k``.
    """
    pi_org: np.ndarray
    gamma: np.ndarray
    alpha_ind: np.ndarray
    alpha_org: np.ndarray
    directed_ind: bool = False
    directed_org: bool = False

    def __post_init__(self):
        for name in ("pi_org", "gamma", "alpha_ind", "alpha_org"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        object.__setattr__(self, "directed_ind", bool(self.directed_ind))
        object.__setattr__(self, "directed_org", bool(self.directed_org))

    @property
    def q_ind(self):
        return self.gamma.shape[0]

    @property
    def q_org(self):
        return self.gamma.shape[1]

    def problems(self):
        out = []
        if self.gamma.ndim != 2:
            return ["gamma must be a matrix"]
        if self.pi_org.shape != (self.q_org,):
            out.append(f"pi_org has shape {self.pi_org.shape}, expected ({self.q_org},)")
        elif np.any(self.pi_org < 0) or abs(self.pi_org.sum() - 1) > _ATOL:
            out.append("pi_org must be a probability vector")
        if np.any(self.gamma < 0) or np.any(np.abs(self.gamma.sum(axis=0) - 1) > _ATOL):
            out.append("every column of gamma must be a probability vector")
        out += _alpha_problems("alpha_ind", self.alpha_ind, self.directed_ind)
        out += _alpha_problems("alpha_org", self.alpha_org, self.directed_org)
        if self.alpha_ind.shape[0] != self.q_ind:
            out.append(f"alpha_ind is {self.alpha_ind.shape}, gamma has {self.q_ind} rows")
        if self.alpha_org.shape[0] != self.q_org:
            out.append(f"alpha_org is {self.alpha_org.shape}, gamma has {self.q_org} columns")
        return out

    def check(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def permuted(self, perm_ind, perm_org):
        """Relabel blocks: new block ``k`` is old block ``perm[k]``."""
        pi, po = np.asarray(perm_ind), np.asarray(perm_org)
        return ModelParams(
            pi_org=self.pi_org[po],
            gamma=self.gamma[np.ix_(pi, po)],
            alpha_ind=self.alpha_ind[np.ix_(pi, pi)],
            alpha_org=self.alpha_org[np.ix_(po, po)],
            directed_ind=self.directed_ind, directed_org=self.directed_org)

    def to_dict(self):
        return {
            "q_ind": int(self.q_ind),
            "q_org": int(self.q_org),
            "pi_org": self.pi_org.tolist(),
            "gamma": self.gamma.tolist(),
            "alpha_ind": self.alpha_ind.tolist(),
            "alpha_org": self.alpha_org.tolist(),
            "directed_ind": self.directed_ind,
            "directed_org": self.directed_org,
        }

    @classmethod
    def from_dict(cls, d):
        p = cls(pi_org=d["pi_org"], gamma=d["gamma"], alpha_ind=d["alpha_ind"],
                alpha_org=d["alpha_org"], directed_ind=d.get("directed_ind", False),
                directed_org=d.get("directed_org", False))
        if "q_ind" in d and int(d["q_ind"]) != p.q_ind:
            raise ValueError("q_ind disagrees with gamma")
        if "q_org" in d and int(d["q_org"]) != p.q_org:
            raise ValueError("q_org disagrees with gamma")
        return p.check()


@dataclass(frozen=True, eq=False)
class SBMParams:
    """Unilevel SBM: block proportions and connectivity."""
    pi: np.ndarray
    alpha: np.ndarray
    directed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pi", _arr(self.pi))
        object.__setattr__(self, "alpha", _arr(self.alpha))
        object.__setattr__(self, "directed", bool(self.directed))

    @property
    def q(self):
        return self.pi.shape[0]

    def to_dict(self):
        return {"q": int(self.q), "pi": self.pi.tolist(), "alpha": self.alpha.tolist(),
                "directed": self.directed}

    @classmethod
    def from_dict(cls, d):
        return cls(pi=d["pi"], alpha=d["alpha"], directed=d.get("directed", False))


@dataclass(frozen=True, eq=False)
class Assignments:
    z_ind: np.ndarray
    z_org: np.ndarray

    def __post_init__(self):
        for name in ("z_ind", "z_org"):
            a = np.array(getattr(self, name), dtype=int, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def problems(self, q_ind, q_org):
        out = []
        if self.z_ind.size and (self.z_ind.min() < 0 or self.z_ind.max() >= q_ind):
            out.append(f"z_ind values outside 0..{q_ind - 1}")
        if self.z_org.size and (self.z_org.min() < 0 or self.z_org.max() >= q_org):
            out.append(f"z_org values outside 0..{q_org - 1}")
        return out

    def to_dict(self):
        return {"z_ind": self.z_ind.tolist(), "z_org": self.z_org.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(z_ind=d["z_ind"], z_org=d["z_org"])
