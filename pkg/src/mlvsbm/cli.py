"""Command line entry point: ``mlvsbm <subcommand> ...``.

Machine artifacts go to the output directory, a short summary to stdout.
Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from mlvsbm import serialize as mio
from mlvsbm._random import DEFAULT_SEED, STREAM_VERSION
from mlvsbm.generate import simulate_design
from mlvsbm.model import DegenerateFitError, InstanceTooLarge
from mlvsbm.network import NetworkError, load_bundle, load_network, network_to_dict
from mlvsbm.predict import TARGETS, ari, dyad_probabilities, prediction_experiment
from mlvsbm.selection import SelectOptions, select
from mlvsbm.vem import FitOptions, fit

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64

PRESETS = {
    "s4-assortative": "assortative",
    "s4-disassortative": "disassortative",
    "s4-coreperiphery": "core-periphery",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _shared(p, needs_input=True):
    if needs_input:
        p.add_argument("-i", "--input", help="network bundle JSON")
        p.add_argument("--csv", nargs=3, metavar=("EDGES_IND", "EDGES_ORG", "AFFILIATION"),
                       help="network as three CSV files instead of a bundle")
        p.add_argument("--directed-ind", action="store_true")
        p.add_argument("--directed-org", action="store_true")
    p.add_argument("-o", "--output", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-6,
                   help="relative bound tolerance of the outer loop")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--q-max", type=int, default=10)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser():
    parser = _Parser(prog="mlvsbm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample a network from a preset design")
    _shared(p, needs_input=False)
    p.add_argument("--preset", choices=sorted(PRESETS), default="s4-assortative")
    p.add_argument("--delta", type=float, default=0.8)
    p.add_argument("--d", type=float, default=0.1, help="individual level density scale")
    p.add_argument("--eps", type=float, default=5.0, help="individual level contrast")
    p.add_argument("--n-ind", type=int, default=180)
    p.add_argument("--n-org", type=int, default=60)
    p.add_argument("--q", type=int, default=3)

    p = sub.add_parser("fit", help="variational EM at fixed block counts")
    _shared(p)
    p.add_argument("--q-ind", type=int, required=True)
    p.add_argument("--q-org", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--init", choices=("spectral", "hierarchical", "random"), default="spectral")
    p.add_argument("--independent", action="store_true", help="fit with gamma columns tied")

    p = sub.add_parser("select", help="choose block counts by ICL and decide on dependence")
    _shared(p)
    p.add_argument("--restarts", type=int, default=4)

    p = sub.add_parser("predict", help="edge probabilities from a fit")
    _shared(p)
    p.add_argument("--fit", required=True, help="fit JSON (from fit or select)")
    p.add_argument("--level", choices=("ind", "org"), default="ind")
    p.add_argument("--target", choices=TARGETS, default="masked")

    p = sub.add_parser("evaluate", help="ARI of a fit against true assignments")
    _shared(p, needs_input=False)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)

    p = sub.add_parser("experiment", help="masking and link prediction experiment")
    _shared(p)
    p.add_argument("--fractions", default="0.1,0.2,0.3")
    p.add_argument("--mode", choices=("dyads", "links"), default="dyads")
    p.add_argument("--models", default="mlvsbm,sbm")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--level", choices=("ind", "org"), default="ind")
    p.add_argument("--restarts", type=int, default=4)
    return parser


def _fit_options(args):
    return FitOptions(max_outer_iterations=args.max_iter, bound_rel_tolerance=args.tolerance,
                      n_random_restarts=args.restarts, seed=args.seed,
                      init_method=getattr(args, "init", "spectral"))


def _select_options(args):
    return SelectOptions(q_max=args.q_max, fit=_fit_options(args), jobs=args.jobs)


def _network(args):
    if args.csv:
        return load_network(*args.csv, directed_ind=args.directed_ind,
                            directed_org=args.directed_org)
    if not args.input:
        raise UsageError("an input network is required (-i bundle.json or --csv ...)")
    return load_bundle(args.input)


def _versions():
    import scipy
    import sklearn

    from mlvsbm import __version__
    return {"mlvsbm": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "random_stream": STREAM_VERSION}


def cmd_simulate(args, out):
    net, truth, params = simulate_design(
        args.seed, n_ind=args.n_ind, n_org=args.n_org, topology_ind=PRESETS[args.preset],
        d_ind=args.d, eps_ind=args.eps, delta=args.delta, q=args.q)
    mio.write_json(out / "network.json", network_to_dict(net))
    mio.write_json(out / "truth.json", truth.to_dict())
    mio.write_json(out / "params.json", params.to_dict())
    print(f"simulated {net.n_ind} individuals, {net.n_org} organizations "
          f"({args.preset}, delta={args.delta}) -> {out}")
    return ["network.json", "truth.json", "params.json"]


def cmd_fit(args, out):
    net = _network(args)
    opts = _fit_options(args)
    from mlvsbm.icl import icl_mlvsbm
    res = fit(net, args.q_ind, args.q_org, opts, independent=args.independent, jobs=args.jobs)
    res.icl = icl_mlvsbm(net, res)
    mio.write_json(out / "fit.json", mio.fit_to_dict(res, opts))
    print(f"fit q=({args.q_ind},{args.q_org}) bound={res.bound:.6f} icl={res.icl:.6f} "
          f"iterations={res.n_iterations} converged={res.converged}")
    return ["fit.json"]


def cmd_select(args, out):
    net = _network(args)
    opts = _select_options(args)
    res = select(net, opts)
    mio.write_json(out / "selection.json", mio.selection_to_dict(res, opts))
    mio.write_json(out / "fit.json", mio.fit_to_dict(res.best_fit, opts.fit))
    print(f"selected q=({res.best_q[0]},{res.best_q[1]}) icl={res.best_icl:.6f} "
          f"independent icl={res.icl_independent:.6f} verdict={res.verdict}")
    return ["selection.json", "fit.json"]


def cmd_predict(args, out):
    net = _network(args)
    d = mio.read_json(args.fit)
    fitres = mio.fit_from_dict(d["best_fit"] if "best_fit" in d else d)
    scores = dyad_probabilities(fitres, args.level, net=net, target=args.target)
    rows = [{"i": int(a), "j": int(b), "score": float(s)}
            for (a, b), s in zip(scores.pairs, scores.scores)]
    if args.format == "csv":
        name = "predictions.csv"
        (out / name).write_text(mio.rows_to_csv(rows, ["i", "j", "score"]), encoding="utf-8")
    else:
        name = "predictions.json"
        mio.write_json(out / name, {"level": args.level, "target": args.target, "scores": rows})
    print(f"scored {len(rows)} {args.target} dyads on the {args.level} level")
    return [name]


def cmd_evaluate(args, out):
    truth = mio.assignments_from_dict(mio.read_json(args.truth))
    pred = mio.assignments_from_dict(mio.read_json(args.pred))
    res = {"ari_ind": ari(truth.z_ind, pred.z_ind), "ari_org": ari(truth.z_org, pred.z_org)}
    mio.write_json(out / "evaluation.json", res)
    print(f"ARI individuals: {res['ari_ind']:.6f}")
    print(f"ARI organizations: {res['ari_org']:.6f}")
    return ["evaluation.json"]


def cmd_experiment(args, out):
    net = _network(args)
    try:
        fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    except ValueError as exc:
        raise UsageError(f"--fractions: {exc}") from None
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    bad = set(models) - {"mlvsbm", "sbm"}
    if bad:
        raise UsageError(f"unknown models: {sorted(bad)}")
    rows, summary = prediction_experiment(net, fractions, mode=args.mode, models=models,
                                          repeats=args.repeats, seed=args.seed,
                                          level=args.level, options=_select_options(args),
                                          jobs=args.jobs)
    (out / "auc.csv").write_text(mio.rows_to_csv(rows, mio.ROW_HEADER), encoding="utf-8")
    (out / "auc-summary.csv").write_text(mio.rows_to_csv(summary, mio.SUMMARY_HEADER),
                                         encoding="utf-8")
    for s in summary:
        print(f"fraction={s['fraction']} model={s['model']} "
              f"mean_auc={s['mean_auc']:.4f} stderr={s['stderr']:.4f}")
    return ["auc.csv", "auc-summary.csv"]


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "select": cmd_select,
            "predict": cmd_predict, "evaluate": cmd_evaluate, "experiment": cmd_experiment}


def run(argv=None):
    """Run one subcommand and return its exit code."""
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    out = Path(args.output)
    code, error, written = EXIT_OK, None, []
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateFitError, InstanceTooLarge, FloatingPointError) as exc:
        code, error = EXIT_NUMERIC, f"numerical failure: {exc}"
    except (NetworkError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        code, error = EXIT_INVALID, f"invalid input: {exc}"
    if error:
        print(error, file=sys.stderr)
    manifest = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "command"},
        "seed": args.seed,
        "versions": _versions(),
        "artifacts": written,
        "exit_code": code,
        "error": error,
        "wall_time_seconds": round(time.perf_counter() - start, 3),
    }
    try:
        mio.write_json(out / "run-manifest.json", manifest)
    except OSError as exc:
        print(f"could not write run-manifest.json: {exc}", file=sys.stderr)
        code = code or EXIT_INVALID
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
