"""Command line: ``jdqml simulate | estimate | test | study``.

Exit codes: 0 success, 1 degenerate data or numerical failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, ConstraintError, DegenerateFilterError, InvalidParameterError, JdqmlError
from .estimate import EstimationConfig, estimate_adaptive, estimate_joint
from .inference import adaptive_qlr_test
from .likelihood import QllContext
from .montecarlo import Scenario, StudyConfig, export_report, run_estimation_study, run_test_study
from .simulate import PathConfig, read_path_csv, simulate_generic, simulate_levy_ou, write_path_csv

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write_json(target: str, doc: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(target)), exist_ok=True)
    tmp = target + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, target)


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _thresholds(cfg: RunConfig, args):
    return cfg.thresholds(rho1=args.rho1, rho2=args.rho2, rho3=args.rho3,
                          rho1_bar=args.rho1_bar, rho2_bar=args.rho2_bar)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n is not None:
        cfg.n = args.n
    if args.h is not None:
        cfg.h, cfg.h_exponent = args.h, None
    theta = cfg.theta()
    pc = PathConfig(n=cfg.n if cfg.n is not None else 0, h=cfg.step(), seed=cfg.seed,
                    burn_in_time=cfg.burn_in_time, substeps=cfg.substeps, x0=cfg.x0)
    model = cfg.model
    path = simulate_levy_ou(theta, pc) if model.name == "levy_ou" else simulate_generic(model, theta, pc)
    out = args.output or os.path.join(cfg.out_dir, "path.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    tmp = out + ".tmp"
    write_path_csv(path, tmp)
    os.replace(tmp, out)
    _write_json(out + ".manifest.json", {
        "command": "simulate",
        "version": __version__,
        "config": cfg.source,
        "model": model.name,
        "params": dict(zip(model.param_names, theta.flat.tolist())),
        "n": pc.n,
        "h": pc.h,
        "seed": pc.seed,
        "burn_in_time": pc.burn_in_time,
        "x0": pc.x0,
        "substeps": pc.substeps,
        "jumps_total": int(path.jump_marks.sum()) if path.jump_marks is not None else None,
    })
    print(out)
    return EXIT_OK


def _load_path(cfg: RunConfig, file: str) -> QllContext:
    try:
        path = read_path_csv(file)
    except FileNotFoundError:
        raise UsageError(f"path file not found: {file}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return QllContext(cfg.model, path)


def cmd_estimate(args) -> int:
    cfg = _config(args)
    ctx = _load_path(cfg, args.path)
    ecfg = EstimationConfig(_thresholds(cfg, args), cfg.param_bounds())
    if args.joint:
        res = estimate_joint(ctx, ecfg, method=args.method)
    else:
        res = estimate_adaptive(ctx, ecfg, method=args.method)
    doc = res.to_dict()
    doc.update(command="estimate", version=__version__, source=os.path.abspath(args.path), config=cfg.source,
               n=ctx.n, h=ctx.h)
    print(json.dumps(doc, indent=2, sort_keys=True))
    _write_json(args.output or os.path.join(cfg.out_dir, "estimate.json"), doc)
    return EXIT_OK


def cmd_test(args) -> int:
    cfg = _config(args)
    if not cfg.fix:
        raise UsageError("test requires constraints: set [test] fix = {name = value, ...} in the config")
    ctx = _load_path(cfg, args.path)
    eps = args.eps if args.eps is not None else cfg.eps
    ecfg = EstimationConfig(_thresholds(cfg, args), cfg.param_bounds(), constraints=cfg.constraints())
    res = adaptive_qlr_test(ctx, ecfg, eps=eps, method=args.method)
    doc = res.to_dict()
    doc.update(command="test", version=__version__, source=os.path.abspath(args.path), config=cfg.source,
               constraints=dict(cfg.fix), n=ctx.n, h=ctx.h)
    print(json.dumps(doc, indent=2, sort_keys=True))
    _write_json(args.output or os.path.join(cfg.out_dir, "test.json"), doc)
    return EXIT_OK


def cmd_study(args) -> int:
    if not args.config:
        raise UsageError("study requires --config")
    cfg = load_config(args.config)
    if args.reps is not None:
        cfg.reps = args.reps
    if args.parallel is not None:
        cfg.workers = args.parallel
    if cfg.n is None:
        raise ConfigError("[sampling] n is required")
    if cfg.study_kind == "test" and not cfg.fix:
        raise UsageError("test study requires constraints: set [test] fix in the config")
    study = StudyConfig(
        scenario=Scenario(cfg.theta(), cfg.constraints() if cfg.study_kind == "test" else {}, cfg.eps),
        cells=cfg.grid_cells(),
        reps=cfg.reps,
        n=cfg.n,
        h=cfg.h,
        h_exponent=cfg.h_exponent,
        base_seed=cfg.seed,
        workers=cfg.workers,
        share_paths=cfg.share_paths,
        burn_in_time=cfg.burn_in_time,
        substeps=cfg.substeps,
        model=cfg.model_name,
        bounds=cfg.param_bounds(),
    )

    def progress(done, total):
        if done == total or done % max(1, total // 20) == 0:
            print(f"[study] {done}/{total} tasks", file=sys.stderr, flush=True)

    runner = run_test_study if cfg.study_kind == "test" else run_estimation_study
    report = runner(study, progress=progress)
    out = args.output or cfg.out_dir
    files = export_report(report, out)
    print(f"[study] wrote {len(files)} files to {out}; failures: {report.failures}", file=sys.stderr)
    return EXIT_OK if report.failures == 0 else EXIT_FAILURE


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    for slot in ("rho1", "rho2", "rho3", "rho1_bar", "rho2_bar"):
        p.add_argument(f"--{slot.replace('_', '-')}", dest=slot, type=float, help=f"override thresholds.{slot}")
    p.add_argument("--method", choices=("auto", "closed-form", "optimizer"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jdqml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jdqml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a path and write it as CSV")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("-o", "--output", help="CSV target (default <output.dir>/path.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="adaptive (default) or joint estimate from a path CSV")
    p.add_argument("path")
    p.add_argument("-c", "--config")
    p.add_argument("--joint", action="store_true")
    p.add_argument("-o", "--output", help="JSON target (default <output.dir>/estimate.json)")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="quasi-likelihood ratio test of the config's [test] fix constraints")
    p.add_argument("path")
    p.add_argument("-c", "--config")
    p.add_argument("--eps", type=float)
    p.add_argument("-o", "--output", help="JSON target (default <output.dir>/test.json)")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("study", help="run an estimation or test study from a config")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--parallel", type=int, help="worker processes")
    p.add_argument("-o", "--output", help="output directory (default output.dir)")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ConstraintError) as exc:
        print(f"jdqml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateFilterError as exc:
        print(f"jdqml {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except InvalidParameterError as exc:
        print(f"jdqml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (JdqmlError, ArithmeticError) as exc:
        print(f"jdqml {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"jdqml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
