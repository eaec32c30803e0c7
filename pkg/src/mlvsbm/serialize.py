"""JSON and CSV forms of fits, selection results and experiment tables."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from mlvsbm.model import VariationalState
from mlvsbm.params import Assignments, ModelParams, SBMParams
from mlvsbm.vem import FitOptions, FitResult, SBMFit


def _finite(v):
    v = float(v)
    return v if math.isfinite(v) else None


def fit_to_dict(fit, options=None):
    z = fit.state.map()
    opts = options or fit.options
    return {
        "params": fit.params.to_dict(),
        "tau_ind": fit.state.tau_ind.tolist(),
        "tau_org": fit.state.tau_org.tolist(),
        "map_z_ind": z.z_ind.tolist(),
        "map_z_org": z.z_org.tolist(),
        "bound": _finite(fit.bound),
        "bound_trace": [_finite(b) for b in fit.bound_trace],
        "icl": None if fit.icl is None else _finite(fit.icl),
        "converged": bool(fit.converged),
        "n_iterations": int(fit.n_iterations),
        "independent": bool(fit.independent),
        "restart": int(fit.restart),
        "notes": list(fit.notes),
        "options_echo": None if opts is None else opts.to_dict(),
    }


def fit_from_dict(d):
    opts = d.get("options_echo")
    return FitResult(
        params=ModelParams.from_dict(d["params"]),
        state=VariationalState(np.asarray(d["tau_ind"], dtype=float),
                               np.asarray(d["tau_org"], dtype=float)),
        bound=d["bound"], bound_trace=list(d["bound_trace"]),
        n_iterations=d["n_iterations"], converged=d["converged"],
        independent=d.get("independent", False), restart=d.get("restart", 0),
        icl=d.get("icl"), notes=list(d.get("notes", [])),
        options=None if opts is None else FitOptions(**opts))


def sbm_fit_to_dict(fit):
    return {
        "params": fit.params.to_dict(),
        "tau": fit.tau.tolist(),
        "map_z": fit.z.tolist(),
        "bound": _finite(fit.bound),
        "bound_trace": [_finite(b) for b in fit.bound_trace],
        "icl": None if fit.icl is None else _finite(fit.icl),
        "converged": bool(fit.converged),
        "n_iterations": int(fit.n_iterations),
    }


def sbm_fit_from_dict(d):
    return SBMFit(params=SBMParams.from_dict(d["params"]), tau=np.asarray(d["tau"], dtype=float),
                  bound=d["bound"], bound_trace=list(d["bound_trace"]),
                  n_iterations=d["n_iterations"], converged=d["converged"], icl=d.get("icl"))


def _key(q):
    return f"{q[0]},{q[1]}"


def selection_to_dict(res, options=None):
    return {
        "best_q": list(res.best_q),
        "best_icl": res.best_icl,
        "verdict": res.verdict,
        "independent_q": list(res.independent_q),
        "icl_independent": res.icl_independent,
        "explored": {_key(k): v for k, v in sorted(res.explored.items())},
        "sbm_icl_ind": {str(q): v for q, v in sorted(res.sbm_ind.icl.items())},
        "sbm_icl_org": {str(q): v for q, v in sorted(res.sbm_org.icl.items())},
        "search_trace": [
            {"move": m, "q": None if q is None else list(q), "icl": v}
            for m, q, v in res.search_trace
        ],
        "best_fit": fit_to_dict(res.best_fit),
        "options_echo": None if options is None else _select_options_dict(options),
    }


def _select_options_dict(options):
    return {"q_max": options.q_max, "sbm_patience": options.sbm_patience,
            "exhaustive": options.exhaustive, "fit": options.fit.to_dict()}


def assignments_to_dict(z):
    return z.to_dict()


def assignments_from_dict(d):
    """Accepts an Assignments dict or a fit dict carrying ``map_z_*``."""
    if "z_ind" in d:
        return Assignments.from_dict(d)
    if "map_z_ind" in d:
        return Assignments(d["map_z_ind"], d["map_z_org"])
    if "best_fit" in d:
        return assignments_from_dict(d["best_fit"])
    raise ValueError("no assignments found (expected z_ind/z_org or map_z_ind/map_z_org)")


def dumps(obj):
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def rows_to_csv(rows, header):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


ROW_HEADER = ["fraction", "mode", "model", "repeat", "auc"]
SUMMARY_HEADER = ["fraction", "mode", "model", "mean_auc", "stderr"]
