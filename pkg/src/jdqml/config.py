"""TOML run configuration with strict key checking.

Layout (every section optional unless a command needs it)::

    model = "levy_ou"

    [params]                  # true values for simulate/study, one key per parameter
    alpha = 2.0
    beta = 2.5
    lambda = 6.0
    mu = 0.0
    sigma2 = 20.25

    [bounds]                  # per-parameter [lower, upper]; defaults to the model box
    alpha = [0.001, 100.0]

    [thresholds]
    D = 1.0
    rho1 = 0.285
    rho2 = 0.26
    rho3 = 0.255
    rho1_bar = 0.26           # defaults to rho3
    rho2_bar = 0.26           # defaults to rho2

    [sampling]
    n = 1000000
    h_exponent = 0.6666666666666666   # h = n^-h_exponent; or give h directly
    seed = 0
    burn_in_time = 20.0       # defaults to 50/beta
    x0 = 0.0                  # skip the burn-in and start here
    substeps = 1              # Euler substeps for models without an exact scheme

    [test]
    eps = 0.05
    fix = { alpha = 2.0, beta = 2.5, lambda = 6.0, mu = 0.0, sigma2 = 20.25 }

    [study]
    kind = "estimation"       # or "test"
    reps = 100
    workers = 1
    share_paths = false
    [study.grid]              # keys are comma-joined threshold slots that move together
    "rho1,rho2,rho3" = [0.255, 0.26, 0.265]

    [output]
    dir = "out"

Grid keys are crossed in file order; slots missing from the grid keep their
``[thresholds]`` value.  Unknown keys anywhere raise ConfigError.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, InvalidParameterError
from .filters import ThresholdSet
from .model import ModelSpec, ParamBounds, ParamVector, get_model

__all__ = ["RunConfig", "load_config", "parse_config", "SLOTS"]

SLOTS = ("rho1", "rho2", "rho3", "rho1_bar", "rho2_bar")

_TOP = {"model", "params", "bounds", "thresholds", "sampling", "test", "study", "output"}
_SECTIONS = {
    "thresholds": {"D", *SLOTS},
    "sampling": {"n", "h", "h_exponent", "seed", "burn_in_time", "x0", "substeps"},
    "test": {"eps", "fix"},
    "study": {"kind", "reps", "workers", "share_paths", "grid"},
    "output": {"dir"},
}


@dataclass
class RunConfig:
    model_name: str = "levy_ou"
    params: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    D: float = 1.0
    rhos: dict = field(default_factory=dict)
    n: int | None = None
    h: float | None = None
    h_exponent: float | None = None
    seed: int = 0
    burn_in_time: float | None = None
    x0: float | None = None
    substeps: int = 1
    eps: float = 0.05
    fix: dict = field(default_factory=dict)
    study_kind: str = "estimation"
    reps: int = 100
    workers: int = 1
    share_paths: bool = False
    grid: list = field(default_factory=list)
    out_dir: str = "out"
    source: str | None = None

    @property
    def model(self) -> ModelSpec:
        return get_model(self.model_name)

    def theta(self) -> ParamVector:
        model = self.model
        missing = [k for k in model.param_names if k not in self.params]
        if missing:
            raise ConfigError(f"[params] is missing {missing}")
        return model.params(**self.params)

    def param_bounds(self) -> ParamBounds | None:
        if not self.bounds:
            return None
        model = self.model
        lo, hi = (list(v) for v in model.default_bounds.arrays())
        for name, (a, b) in self.bounds.items():
            k = model.index_of(name)
            lo[k], hi[k] = a, b
        try:
            return ParamBounds(tuple(lo), tuple(hi))
        except InvalidParameterError as exc:
            raise ConfigError(f"[bounds]: {exc}") from None

    def step(self) -> float:
        if self.n is None:
            raise ConfigError("[sampling] n is required")
        if self.h is not None:
            return self.h
        if self.h_exponent is not None:
            return float(self.n) ** (-self.h_exponent)
        raise ConfigError("[sampling] needs h or h_exponent")

    def thresholds(self, **overrides) -> ThresholdSet:
        rhos = dict(self.rhos)
        rhos.update({k: v for k, v in overrides.items() if v is not None})
        missing = [s for s in ("rho1", "rho2", "rho3") if s not in rhos]
        if missing:
            raise ConfigError(f"thresholds {missing} not given (config [thresholds] or --rho flags)")
        try:
            return ThresholdSet.from_rhos(*(rhos.get(s) for s in SLOTS), D=self.D)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from None

    def constraints(self) -> dict[int, float]:
        model = self.model
        return {model.index_of(k): v for k, v in self.fix.items()}

    def grid_cells(self) -> tuple[ThresholdSet, ...]:
        """Cartesian product of the grid axes over the base thresholds."""
        if not self.grid:
            return (self.thresholds(),)
        cells = []
        for combo in itertools.product(*(values for _, values in self.grid)):
            rhos = {}
            for (slots, _), v in zip(self.grid, combo):
                rhos.update({s: v for s in slots})
            cells.append(self.thresholds(**rhos))
        return tuple(cells)


def _check_keys(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")


def _num(value, where: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _table(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    if name in _SECTIONS:
        _check_keys(value, _SECTIONS[name], f"[{name}]")
    return value


def parse_config(doc: dict, source: str | None = None) -> RunConfig:
    _check_keys(doc, _TOP, "top level")
    cfg = RunConfig(source=source)
    if "model" in doc:
        if not isinstance(doc["model"], str):
            raise ConfigError("model must be a string")
        cfg.model_name = doc["model"]
    try:
        model = get_model(cfg.model_name)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from None
    names = set(model.param_names)

    params = _table(doc, "params")
    _check_keys(params, names, "[params]")
    cfg.params = {k: _num(v, f"params.{k}") for k, v in params.items()}

    bounds = _table(doc, "bounds")
    _check_keys(bounds, names, "[bounds]")
    for k, v in bounds.items():
        if not (isinstance(v, list) and len(v) == 2):
            raise ConfigError(f"bounds.{k}: expected [lower, upper]")
        cfg.bounds[k] = (_num(v[0], f"bounds.{k}"), _num(v[1], f"bounds.{k}"))

    th = _table(doc, "thresholds")
    if "D" in th:
        cfg.D = _num(th["D"], "thresholds.D")
    cfg.rhos = {s: _num(th[s], f"thresholds.{s}") for s in SLOTS if s in th}

    sm = _table(doc, "sampling")
    if "h" in sm and "h_exponent" in sm:
        raise ConfigError("[sampling]: give h or h_exponent, not both")
    if "n" in sm:
        cfg.n = _num(sm["n"], "sampling.n", integer=True)
    if "h" in sm:
        cfg.h = _num(sm["h"], "sampling.h")
    if "h_exponent" in sm:
        cfg.h_exponent = _num(sm["h_exponent"], "sampling.h_exponent")
    if "seed" in sm:
        cfg.seed = _num(sm["seed"], "sampling.seed", integer=True)
    if "burn_in_time" in sm:
        cfg.burn_in_time = _num(sm["burn_in_time"], "sampling.burn_in_time")
    if "x0" in sm:
        cfg.x0 = _num(sm["x0"], "sampling.x0")
    if "substeps" in sm:
        cfg.substeps = _num(sm["substeps"], "sampling.substeps", integer=True)

    test = _table(doc, "test")
    if "eps" in test:
        cfg.eps = _num(test["eps"], "test.eps")
    fix = test.get("fix", {})
    if not isinstance(fix, dict):
        raise ConfigError("test.fix must be a table of parameter = value")
    _check_keys(fix, names, "test.fix")
    cfg.fix = {k: _num(v, f"test.fix.{k}") for k, v in fix.items()}

    st = _table(doc, "study")
    if "kind" in st:
        if st["kind"] not in ("estimation", "test"):
            raise ConfigError(f"study.kind must be 'estimation' or 'test', got {st['kind']!r}")
        cfg.study_kind = st["kind"]
    if "reps" in st:
        cfg.reps = _num(st["reps"], "study.reps", integer=True)
    if "workers" in st:
        cfg.workers = _num(st["workers"], "study.workers", integer=True)
    if "share_paths" in st:
        if not isinstance(st["share_paths"], bool):
            raise ConfigError("study.share_paths must be true or false")
        cfg.share_paths = st["share_paths"]
    grid = st.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("study.grid must be a table")
    seen: set[str] = set()
    for key, values in grid.items():
        slots = tuple(s.strip() for s in key.split(","))
        bad = [s for s in slots if s not in SLOTS]
        if bad:
            raise ConfigError(f"study.grid: unknown threshold slot(s) {bad} in {key!r}")
        if seen & set(slots):
            raise ConfigError(f"study.grid: slot(s) {sorted(seen & set(slots))} appear in more than one key")
        seen |= set(slots)
        if not (isinstance(values, list) and values):
            raise ConfigError(f"study.grid.{key!r}: expected a non-empty list of rho values")
        cfg.grid.append((slots, [_num(v, f"study.grid.{key!r}") for v in values]))

    out = _table(doc, "output")
    if "dir" in out:
        if not isinstance(out["dir"], str):
            raise ConfigError("output.dir must be a string")
        cfg.out_dir = out["dir"]
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, source=path)
