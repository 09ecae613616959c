"""``solgas`` command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 run completed but a soft check failed (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, check_writable, load_config, parse_overrides
from .engine import evaluate_field
from .errors import SolgasError
from .experiments import run_drift, run_elliptic, run_fluctuations, run_shielding
from .sampling import fekete_points
from .types import Grid, ScatteringData

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_SOFT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on worker threads (default: all cores)")


def _experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'section.key = value' file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--seed", type=int, help="overrides run.seed")
    p.add_argument("--out", help="raw-data CSV (overrides output.csv)")
    p.add_argument("--report", help="JSON report (overrides output.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="solgas", description="Soliton gases and shielding experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("fekete", help="weighted Fekete points")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="points CSV; a .json sidecar is written next to it")

    p = sub.add_parser("evaluate", help="psi_N on an (x, t) grid")
    _common(p)
    p.add_argument("--spectrum", required=True, help="CSV with re_z,im_z,re_c,im_c")
    p.add_argument("--xmin", type=float, required=True)
    p.add_argument("--xmax", type=float)
    p.add_argument("--nx", type=int, default=1)
    p.add_argument("--tmin", type=float, default=0.0)
    p.add_argument("--tmax", type=float)
    p.add_argument("--nt", type=int, default=1)
    p.add_argument("--method", choices=("full", "reduced"), default="full")
    p.add_argument("--out", required=True)

    for name, help_ in [("shield", "shielding convergence"), ("drift", "soliton-train drift"),
                        ("fluctuate", "random-gas fluctuations"), ("elliptic", "elliptic profile")]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        _experiment(p)
    return parser


def _workers(threads):
    n = threads if threads else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigError("--threads must be positive")
    return n


def _sidecar(path: str) -> str:
    p = Path(path)
    return str(p.with_suffix(".json")) if p.suffix.lower() == ".csv" else str(p) + ".json"


def cmd_fekete(args) -> int:
    if args.n < 1 or not args.tol > 0 or args.max_iter < 1:
        raise ConfigError("need --n >= 1, --tol > 0 and --max-iter >= 1")
    check_writable(args.out)
    res = fekete_points(args.n, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    res.write(args.out, _sidecar(args.out))
    if not res.converged:
        print(f"solgas fekete: not converged after {res.iterations} iterations "
              f"(gradient norm {res.gradient_norm:.3e}); best configuration written",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def read_spectrum_csv(path) -> ScatteringData:
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or not "".join(row).strip():
                    continue
                rows.append([c.strip() for c in row])
    except OSError as exc:
        raise ConfigError(f"cannot read spectrum {path}: {exc}") from exc
    if rows and rows[0][0].lower().startswith("re"):
        rows = rows[1:]
    try:
        vals = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"spectrum {path}: {exc}") from exc
    if vals.ndim != 2 or vals.shape[0] == 0 or vals.shape[1] != 4:
        raise ConfigError(f"spectrum {path} must have four columns re_z,im_z,re_c,im_c")
    return ScatteringData(vals[:, 0] + 1j * vals[:, 1], vals[:, 2] + 1j * vals[:, 3])


def cmd_evaluate(args) -> int:
    xmax = args.xmin if args.xmax is None else args.xmax
    tmax = args.tmin if args.tmax is None else args.tmax
    if args.nx < 1 or args.nt < 1:
        raise ConfigError("--nx and --nt must be positive")
    check_writable(args.out)
    data = read_spectrum_csv(args.spectrum)
    grid = Grid.uniform(args.xmin, xmax, args.nx, args.tmin, tmax, args.nt)
    field = evaluate_field(data, grid, method=args.method, workers=_workers(args.threads))
    field.write_csv(args.out)
    return EXIT_OK


def _experiment_config(args):
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out:
        overrides["output.csv"] = args.out
    if args.report:
        overrides["output.json"] = args.report
    return load_config(args.command, args.config, overrides)


def _finish(report, cfg, checks=None) -> int:
    out_csv = cfg.get("output.csv") or f"{cfg.command}.csv"
    out_json = cfg.get("output.json") or _sidecar(out_csv)
    report.write_csv(out_csv)
    payload = report.to_dict()
    if checks is not None:
        payload["checks"] = checks
    payload["seed"] = cfg.seed
    payload["version"] = __version__
    with open(out_json, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    failed = [k for k, v in payload["checks"].items() if not v]
    if failed:
        print(f"solgas {cfg.command}: soft checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SOFT
    return EXIT_OK


def cmd_shield(args) -> int:
    cfg = _experiment_config(args)
    dom = cfg.domain()
    table = run_shielding(dom, cfg.density(dom), ns=cfg.get("run.ns"),
                          grid_window=(cfg.get("run.x_min"), cfg.get("run.x_max")),
                          sampler=cfg.get("run.sampler"), seed=cfg.seed, nx=cfg.get("run.nx"),
                          method=cfg.method, workers=_workers(args.threads))
    return _finish(table, cfg, table.checks(cfg.get("run.threshold")))


def cmd_drift(args) -> int:
    cfg = _experiment_config(args)
    dom = cfg.domain()
    fit = run_drift(dom, cfg.density(dom), ns=cfg.get("run.ns"),
                    x_window=(cfg.get("run.x_min"), cfg.get("run.x_max")), seed=cfg.seed,
                    sampler=cfg.get("run.sampler"), spacing=cfg.get("run.spacing"),
                    method=cfg.method, workers=_workers(args.threads))
    return _finish(fit, cfg)


def cmd_fluctuate(args) -> int:
    cfg = _experiment_config(args)
    dom = cfg.domain()
    rep = run_fluctuations(dom, cfg.density(dom), ns=cfg.get("run.ns"),
                           trials=cfg.get("run.trials"), at=cfg.evaluation_point(),
                           sampler=cfg.get("run.sampler"), seed=cfg.seed,
                           config=cfg.sampler_config(), method=cfg.method)
    return _finish(rep, cfg)


def cmd_elliptic(args) -> int:
    cfg = _experiment_config(args)
    dom = cfg.domain()
    rep = run_elliptic(dom, cfg.density(dom), n=cfg.get("run.n"),
                       x_probe_window=(cfg.get("run.x_min"), cfg.get("run.x_max")),
                       seed=cfg.seed, spacing=cfg.get("run.spacing"),
                       decay_window=(cfg.get("run.decay_min"), cfg.get("run.decay_max")),
                       method=cfg.method, workers=_workers(args.threads))
    return _finish(rep, cfg)


COMMANDS = {
    "fekete": cmd_fekete, "evaluate": cmd_evaluate, "shield": cmd_shield,
    "drift": cmd_drift, "fluctuate": cmd_fluctuate, "elliptic": cmd_elliptic,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "threads", None):
            _set_numba_threads(args.threads)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"solgas {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolgasError as exc:
        print(f"solgas {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _set_numba_threads(k: int) -> None:
    if k < 1:
        raise ConfigError("--threads must be positive")
    import numba

    numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
