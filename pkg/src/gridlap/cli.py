"""Command-line interface: ``gridlap experiment|symbol|check|export``.

Exit codes: 0 on success, 1 on errors, 2 when ``--check`` finds a value
outside its tolerance (or ``check projector`` fails).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import symbols as sy
from .experiments import EXPERIMENTS, ExperimentConfig, build_problem, run_experiment
from .graphs import write_edge_list
from .operators import write_matrix_market, write_vector_csv

EXIT_OK, EXIT_ERROR, EXIT_CHECK = 0, 1, 2

SYMBOLS = {
    "laplacian-1d": sy.laplacian_1d_symbol,
    "linear": sy.linear_interpolation_symbol,
    "q": sy.q_symbol,
    "five-point": sy.five_point_symbol,
    "disk": sy.disk_symbol,
    "iga": sy.iga_symbol,
    "fem": sy.fem_symbol,
    "diamond": sy.diamond_symbol,
    "diamond-projector": sy.diamond_projector_symbol,
    "theta-squared": lambda: sy.theta_squared_symbol(32),
}

# flag name -> (config field, type)
CONFIG_KEYS = {
    "t-min": ("t_min", int),
    "t-max": ("t_max", int),
    "tol": ("tol", float),
    "maxiter": ("maxiter", int),
    "g": ("g", int),
    "smoother": ("smoother", str),
    "omega-pre": ("omega_pre", float),
    "omega-post": ("omega_post", float),
    "seed": ("seed", int),
    "oracle": ("oracle", str),
    "out": ("out", str),
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys mirror the long flags."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().lstrip("-").replace("_", "-")
        if not sep or key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown or malformed entry {raw!r}")
        field, typ = CONFIG_KEYS[key]
        values[field] = typ(val.strip())
    return values


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-min", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--tol", type=float, help="relative tolerance (default 1e-6)")
    p.add_argument("--maxiter", type=int, help="iteration cap (default 100)")
    p.add_argument("--g", type=int, help="keep only multigrid columns with this coarsening factor")
    p.add_argument("--smoother", choices=["gs", "sgs", "richardson"])
    p.add_argument("--omega-pre", type=float)
    p.add_argument("--omega-post", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--oracle", choices=["closed-form", "reference"], help="continuous spectrum for triangle-eigs")
    p.add_argument("--out", help="directory for tableNN.csv / tableNN.md")
    p.add_argument("--config", help="key=value file with defaults for the flags above")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridlap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run one experiment and print its table")
    p.add_argument("id", choices=sorted(EXPERIMENTS))
    _add_run_flags(p)
    p.add_argument("--check", action="store_true", help="compare with the reference values (exit 2 on mismatch)")

    p = sub.add_parser("list", help="list experiment ids")

    p = sub.add_parser("symbol", help="sample the eigenvalue curves of a symbol")
    p.add_argument("name", choices=sorted(SYMBOLS))
    p.add_argument("--plot-csv", required=True, help="output CSV (theta columns, then lambda_1..lambda_nu)")
    p.add_argument("--resolution", type=int, default=256, help="points per angle")
    p.add_argument("--full", action="store_true", help="sample [-pi, pi] instead of [0, pi]")
    p.add_argument("--x-points", type=int, default=8,
                   help="space points per axis for symbols with a space factor")

    p = sub.add_parser("check", help="numerical checks")
    csub = p.add_subparsers(dest="what", required=True)
    cp = csub.add_parser("projector", help="grid-transfer conditions for a scalar symbol and projector")
    cp.add_argument("--symbol", choices=sorted(SYMBOLS), default="laplacian-1d")
    cp.add_argument("--projector", choices=sorted(SYMBOLS), default="linear",
                    help="a 1-D projector is tensorized to the dimension of --symbol")
    cp.add_argument("--g", type=int, default=2)
    cp.add_argument("--theta0", type=float, nargs="+", default=[0.0])

    p = sub.add_parser("export", help="export assembled data")
    esub = p.add_subparsers(dest="what", required=True)
    ep = esub.add_parser("matrix", help="Matrix Market file of an experiment's system")
    ep.add_argument("id", choices=sorted(EXPERIMENTS))
    ep.add_argument("--t", type=int, required=True)
    ep.add_argument("--out", required=True, help="output .mtx path")
    ep.add_argument("--rhs", help="also write the right-hand side as CSV")
    ep.add_argument("--edges", help="also write the graph edge list")
    ep.add_argument("--seed", type=int, default=0)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for _, (field, _typ) in CONFIG_KEYS.items():
        v = getattr(args, field, None)
        if v is not None:
            values[field] = v
    return ExperimentConfig(args.id, **values)


def cmd_experiment(args) -> int:
    config = _config_from_args(args)
    res = run_experiment(config)
    print(f"{args.id} ({res.table}), {res.seconds:.1f} s")
    print(res.to_markdown())
    if config.out:
        print(f"wrote {Path(config.out) / (res.table + '.csv')}")
    if args.check:
        checks = res.check()
        for c in checks:
            print(c.line())
        if not all(c.passed for c in checks):
            return EXIT_CHECK
    return EXIT_OK


def cmd_symbol(args) -> int:
    f = SYMBOLS[args.name]()
    xs = None
    if f.a is not None:
        c = (np.arange(args.x_points) + 0.5) / args.x_points
        grids = np.meshgrid(*([c] * f.d), indexing="ij")
        xs = np.stack([g.ravel() for g in grids], axis=1)
    sample = sy.symbol_eigencurves(f, args.resolution, full=args.full, x_points=xs)
    sample.write_csv(args.plot_csv)
    print(f"wrote {len(sample.theta)} samples of {args.name} to {args.plot_csv}; "
          f"min per curve {np.round(sample.curve_min, 6).tolist()}")
    return EXIT_OK


def cmd_check(args) -> int:
    f, p = SYMBOLS[args.symbol](), SYMBOLS[args.projector]()
    if p.d == 1 and f.d > 1:
        # a 1-D projector acts in every direction
        p = sy.tensor_symbol(*([p] * f.d))
    theta0 = args.theta0 if len(args.theta0) == f.d else args.theta0 * f.d
    rep = sy.check_projector_conditions(f, p, theta0, args.g)
    print(f"ring sups (radius -> sup |p(eta)|^2/f): "
          + ", ".join(f"{r:.2e}:{s:.4g}" for r, s in zip(rep.radii, rep.ring_sup)))
    print(f"(i) bounded: {rep.bounded}  (ii) min corner sum: {rep.min_corner_sum:.4g}  -> "
          + ("PASS" if rep.passed else "FAIL"))
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_export(args) -> int:
    prob = build_problem(args.id, args.t, args.seed)
    write_matrix_market(prob.A, args.out, comment=f"{args.id} t={args.t} d_n={prob.dim}")
    print(f"wrote {args.out} ({prob.dim} x {prob.dim})")
    if args.rhs:
        write_vector_csv(prob.b, args.rhs, header="b")
        print(f"wrote {args.rhs}")
    if args.edges:
        if prob.graph is None:
            raise ValueError(f"{args.id} has no graph to export")
        write_edge_list(prob.graph, args.edges)
        print(f"wrote {args.edges}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for k, e in EXPERIMENTS.items():
                print(f"{k:20s} {e.table}  t={e.t_range[0]}..{e.t_range[1]}  {e.description}")
            return EXIT_OK
        handler = {"experiment": cmd_experiment, "symbol": cmd_symbol, "check": cmd_check, "export": cmd_export}
        return handler[args.command](args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
