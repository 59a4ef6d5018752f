"""Replication harness for estimation and test studies.

A study is a list of threshold cells evaluated on M simulated paths each.
Replication ``rep`` of cell ``c`` simulates with seed
``derive_seed(base_seed, c, rep)`` (or ``derive_seed(base_seed, SHARED_CELL, rep)``
when ``share_paths`` is set, so every cell sees the same M paths).  Seeds
depend only on labels, and results are gathered by index before reduction,
so a report does not depend on the number of workers.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import platform
import tempfile
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy
from scipy.special import ndtri

from .errors import InvalidParameterError, JdqmlError
from .estimate import EstimationConfig, estimate_adaptive, estimate_constrained
from .filters import ThresholdSet
from .inference import (
    asymptotic_covariance_levy_ou,
    chi2_quantile,
    estimate_mu2,
    qlr_statistic,
    decide_test,
    standardize,
)
from .likelihood import QllContext
from .model import ParamBounds, ParamVector, get_model
from .rng import derive_seed
from .simulate import PathConfig, simulate_generic, simulate_levy_ou

__all__ = [
    "Scenario",
    "StudyConfig",
    "CellReport",
    "StudyReport",
    "run_estimation_study",
    "run_test_study",
    "export_report",
    "table1_cells",
    "test_grid_cells",
    "TABLE1_RHOS",
    "SHARED_CELL",
    "qq_points",
]

TABLE1_RHOS = tuple(round(0.255 + 0.005 * k, 3) for k in range(10))
SHARED_CELL = 0xC0FFEE


@dataclass(frozen=True)
class Scenario:
    """True parameter, optional null constraints {flat index: value} and test level."""

    theta: ParamVector
    constraints: Mapping[int, float] = field(default_factory=dict)
    eps: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "constraints", {int(k): float(v) for k, v in dict(self.constraints).items()})
        if not 0.0 < self.eps < 1.0:
            raise InvalidParameterError("eps must lie in (0, 1)")


@dataclass(frozen=True)
class StudyConfig:
    scenario: Scenario
    cells: tuple[ThresholdSet, ...]
    reps: int
    n: int
    h: float | None = None
    h_exponent: float | None = None
    base_seed: int = 0
    workers: int = 1
    share_paths: bool = False
    burn_in_time: float | None = None
    substeps: int = 1
    model: str = "levy_ou"
    bounds: ParamBounds | None = None
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if int(self.reps) < 1:
            raise InvalidParameterError("reps must be at least 1")
        if int(self.n) < 1:
            raise InvalidParameterError("n must be at least 1")
        if (self.h is None) == (self.h_exponent is None):
            raise InvalidParameterError("give exactly one of h and h_exponent")
        if not 0.0 < self.step < 1.0:
            raise InvalidParameterError(f"step size must lie in (0, 1), got {self.step}")
        if int(self.workers) < 1:
            raise InvalidParameterError("workers must be at least 1")

    @property
    def step(self) -> float:
        if self.h is not None:
            return float(self.h)
        return float(self.n) ** (-float(self.h_exponent))

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "model": self.model,
            "theta": sc.theta.flat.tolist(),
            "layout": list(sc.theta.layout),
            "constraints": {str(k): v for k, v in sc.constraints.items()},
            "eps": sc.eps,
            "cells": [c.to_dict() for c in self.cells],
            "reps": int(self.reps),
            "n": int(self.n),
            "h": self.h,
            "h_exponent": self.h_exponent,
            "step": self.step,
            "base_seed": int(self.base_seed),
            "share_paths": bool(self.share_paths),
            "burn_in_time": self.burn_in_time,
            "substeps": int(self.substeps),
            "bounds": None if self.bounds is None else {"lower": list(self.bounds.lower), "upper": list(self.bounds.upper)},
            "method": self.method,
        }


def table1_cells(rhos: Sequence[float] = TABLE1_RHOS, D: float = 1.0) -> tuple[ThresholdSet, ...]:
    """rho1 = rho2 = rho3 = rho for each grid value."""
    return tuple(ThresholdSet.from_rhos(r, r, r, D=D) for r in rhos)


def test_grid_cells(rho1: float, rho2: float, rho3: float, bar1: Sequence[float], bar2: Sequence[float],
                    D: float = 1.0) -> tuple[ThresholdSet, ...]:
    """Fixed estimation thresholds crossed with a (rho1_bar x rho2_bar) grid, rho1_bar varying slowest."""
    return tuple(ThresholdSet.from_rhos(rho1, rho2, rho3, b1, b2, D=D) for b1, b2 in itertools.product(bar1, bar2))


# Per-replication work, run in worker processes


def _seed(cfg: StudyConfig, cell: int, rep: int) -> int:
    return derive_seed(cfg.base_seed, SHARED_CELL if cfg.share_paths else cell, rep)


def _simulate(cfg: StudyConfig, model, seed: int):
    pc = PathConfig(n=cfg.n, h=cfg.step, seed=seed, burn_in_time=cfg.burn_in_time, substeps=cfg.substeps)
    if model.has_closed_form and model.name == "levy_ou":
        return simulate_levy_ou(cfg.scenario.theta, pc)
    return simulate_generic(model, cfg.scenario.theta, pc)


def _standardized(model, path, cfg: StudyConfig, est) -> list[float] | None:
    if model.name != "levy_ou":
        return None
    info = asymptotic_covariance_levy_ou(cfg.scenario.theta, estimate_mu2(path))
    return standardize(est, cfg.scenario.theta, info, path.n, path.h).tolist()


def _evaluate(cfg: StudyConfig, kind: str, model, ctx, cell: int) -> dict:
    th = cfg.cells[cell]
    free = EstimationConfig(th, cfg.bounds)
    est = estimate_adaptive(ctx, free, method=cfg.method)
    out = {"theta": est.values.tolist(), "standardized": _standardized(model, ctx.path, cfg, est)}
    if kind == "test":
        star = estimate_constrained(ctx, free.with_constraints(cfg.scenario.constraints), method=cfg.method)
        lam = qlr_statistic(ctx, est, star, th.th1_bar, th.th2_bar)
        res = decide_test(lam, len(cfg.scenario.constraints), cfg.scenario.eps)
        out.update(lambda_n=res.lambda_n, reject=res.reject)
    return out


def _run_task(args) -> list[tuple[int, int, int, dict]]:
    """Simulate one path and evaluate it on the given cells."""
    cfg, kind, cells, rep = args
    model = get_model(cfg.model)
    seed = _seed(cfg, cells[0], rep)
    results = []
    t0 = time.perf_counter()
    try:
        ctx = QllContext(model, _simulate(cfg, model, seed))
    except (JdqmlError, ArithmeticError, ValueError) as exc:
        failure = {"error": f"{type(exc).__name__}: {exc}"}
        return [(c, rep, seed, dict(failure, seconds=0.0)) for c in cells]
    sim_time = (time.perf_counter() - t0) / len(cells)
    for c in cells:
        t1 = time.perf_counter()
        try:
            out = _evaluate(cfg, kind, model, ctx, c)
        except (JdqmlError, ArithmeticError, ValueError) as exc:
            out = {"error": f"{type(exc).__name__}: {exc}"}
        out["seconds"] = sim_time + time.perf_counter() - t1
        results.append((c, rep, seed, out))
    return results


# Reports


@dataclass
class CellReport:
    index: int
    thresholds: ThresholdSet
    seeds: tuple[int, ...]
    estimates: np.ndarray
    standardized: np.ndarray | None
    lambda_n: np.ndarray | None
    rejections: int
    failures: int
    failure_reasons: dict
    wall_time: float

    @property
    def n_ok(self) -> int:
        return int(self.estimates.shape[0])

    @property
    def means(self) -> np.ndarray:
        if self.n_ok == 0:
            return np.full(self.estimates.shape[1], np.nan)
        return self.estimates.mean(axis=0)

    @property
    def sds(self) -> np.ndarray:
        if self.n_ok < 2:
            return np.full(self.estimates.shape[1], np.nan)
        return self.estimates.std(axis=0, ddof=1)

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.n_ok if self.n_ok else float("nan")


@dataclass
class StudyReport:
    kind: str
    config: StudyConfig
    param_names: tuple[str, ...]
    cells: list[CellReport]
    df: int | None = None
    wall_time: float = 0.0

    @property
    def failures(self) -> int:
        return sum(c.failures for c in self.cells)

    def means_table(self) -> np.ndarray:
        return np.array([c.means for c in self.cells]).reshape(len(self.cells), len(self.param_names))


def _run(cfg: StudyConfig, kind: str, progress=None) -> StudyReport:
    model = get_model(cfg.model)
    ncell = len(cfg.cells)
    if cfg.share_paths:
        tasks = [(cfg, kind, tuple(range(ncell)), rep) for rep in range(cfg.reps)] if ncell else []
    else:
        tasks = [(cfg, kind, (c,), rep) for c in range(ncell) for rep in range(cfg.reps)]

    t0 = time.perf_counter()
    gathered: dict[tuple[int, int], tuple[int, dict]] = {}
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for done, batch in enumerate(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers)))):
                for c, rep, seed, out in batch:
                    gathered[(c, rep)] = (seed, out)
                if progress:
                    progress(done + 1, len(tasks))
    else:
        for done, task in enumerate(tasks):
            for c, rep, seed, out in _run_task(task):
                gathered[(c, rep)] = (seed, out)
            if progress:
                progress(done + 1, len(tasks))
    total = time.perf_counter() - t0

    p = len(model.param_names)
    cells = []
    for c in range(ncell):
        rows = [gathered[(c, rep)] for rep in range(cfg.reps)]
        ok = [out for _, out in rows if "error" not in out]
        reasons = Counter(out["error"].split(":")[0] for _, out in rows if "error" in out)
        std = None
        if ok and ok[0]["standardized"] is not None:
            std = np.array([o["standardized"] for o in ok], dtype=float).reshape(len(ok), p)
        cells.append(
            CellReport(
                index=c,
                thresholds=cfg.cells[c],
                seeds=tuple(seed for seed, _ in rows),
                estimates=np.array([o["theta"] for o in ok], dtype=float).reshape(len(ok), p),
                standardized=std,
                lambda_n=np.array([o["lambda_n"] for o in ok], dtype=float) if kind == "test" else None,
                rejections=sum(bool(o.get("reject")) for o in ok),
                failures=len(rows) - len(ok),
                failure_reasons=dict(sorted(reasons.items())),
                wall_time=float(sum(out["seconds"] for _, out in rows)),
            )
        )
    df = len(cfg.scenario.constraints) if kind == "test" else None
    return StudyReport(kind=kind, config=cfg, param_names=model.param_names, cells=cells, df=df, wall_time=total)


def run_estimation_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """Adaptive estimates per cell and replication; means, SDs and standardized samples."""
    if cfg.scenario.constraints:
        raise InvalidParameterError("an estimation study takes an unconstrained scenario")
    return _run(cfg, "estimation", progress)


def run_test_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """Lambda_n and the decision at eps per cell and replication."""
    if not cfg.scenario.constraints:
        raise InvalidParameterError("a test study needs null constraints")
    return _run(cfg, "test", progress)


# Export


def qq_points(sample: np.ndarray, df: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(theoretical, empirical) quantiles with plotting positions (i - 0.5)/M.

    Theoretical quantiles are standard normal, or chi-square with ``df``
    degrees of freedom when given.
    """
    emp = np.sort(np.asarray(sample, dtype=float))
    m = emp.size
    probs = (np.arange(1, m + 1) - 0.5) / m
    if df is None:
        theo = ndtri(probs)
    else:
        theo = np.array([chi2_quantile(1.0 - p, df) for p in probs])
    return theo, emp


def _atomic_write(target: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(target))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(target))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else "%.6f" % v


def _means_csv(report: StudyReport) -> str:
    names = list(report.param_names)
    lines = [",".join(["cell", "rho1", "rho2", "rho3", "rho1_bar", "rho2_bar"] + names + ["reps_ok", "failures"])]
    for c in report.cells:
        rhos = ["%g" % th.rho for th in c.thresholds.as_tuple()]
        lines.append(",".join([str(c.index)] + rhos + [_fmt(v) for v in c.means] + [str(c.n_ok), str(c.failures)]))
    return "\n".join(lines) + "\n"


def _sds_csv(report: StudyReport) -> str:
    lines = [",".join(["cell"] + list(report.param_names))]
    for c in report.cells:
        lines.append(",".join([str(c.index)] + [_fmt(v) for v in c.sds]))
    return "\n".join(lines) + "\n"


def _rejections_csv(report: StudyReport) -> str:
    bar1 = sorted({c.thresholds.th1_bar.rho for c in report.cells})
    bar2 = sorted({c.thresholds.th2_bar.rho for c in report.cells})
    grid = {(c.thresholds.th1_bar.rho, c.thresholds.th2_bar.rho): c.rejection_rate for c in report.cells}
    lines = [",".join(["rho1_bar\\rho2_bar"] + ["%g" % b for b in bar2])]
    for b1 in bar1:
        lines.append(",".join(["%g" % b1] + [_fmt(grid.get((b1, b2), float("nan"))) for b2 in bar2]))
    return "\n".join(lines) + "\n"


def _qq_csv(sample, df=None) -> str:
    theo, emp = qq_points(sample, df)
    lines = ["theoretical,empirical"] + ["%.17g,%.17g" % (t, e) for t, e in zip(theo, emp)]
    return "\n".join(lines) + "\n"


def _manifest(report: StudyReport, files: list[str]) -> str:
    from . import __version__

    doc = {
        "kind": report.kind,
        "config": report.config.to_dict(),
        "seed_rule": "derive_seed(base_seed, cell or SHARED_CELL, rep) via splitmix64; Philox generator keyed by the seed",
        "shared_cell_label": SHARED_CELL,
        "df": report.df,
        "cells": [
            {
                "index": c.index,
                "thresholds": c.thresholds.to_dict(),
                "reps": [0, len(c.seeds)],
                "seeds": [str(s) for s in c.seeds],
                "reps_ok": c.n_ok,
                "failures": c.failures,
                "failure_reasons": c.failure_reasons,
                "rejections": c.rejections if report.kind == "test" else None,
                "wall_time_seconds": round(c.wall_time, 6),
            }
            for c in report.cells
        ],
        "wall_time_seconds": round(report.wall_time, 6),
        "files": files,
        "versions": {
            "jdqml": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_report(report: StudyReport, out_dir) -> list[str]:
    """Write means.csv, sds.csv, rejections.csv (test studies), qq_cellNN_<name>.csv and manifest.json.

    Every file is written to a temporary name and renamed into place.
    Returns the written file names.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    docs: dict[str, str] = {"means.csv": _means_csv(report), "sds.csv": _sds_csv(report)}
    if report.kind == "test":
        docs["rejections.csv"] = _rejections_csv(report)
    for c in report.cells:
        if report.kind == "test":
            docs[f"qq_cell{c.index:02d}_lambda_n.csv"] = _qq_csv(c.lambda_n, report.df)
        elif c.standardized is not None:
            for k, name in enumerate(report.param_names):
                docs[f"qq_cell{c.index:02d}_{name}.csv"] = _qq_csv(c.standardized[:, k])
    names = sorted(docs) + ["manifest.json"]
    for name in sorted(docs):
        _atomic_write(os.path.join(out_dir, name), docs[name])
    _atomic_write(os.path.join(out_dir, "manifest.json"), _manifest(report, names))
    return names
