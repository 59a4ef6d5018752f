"""Sample paths of jump-diffusions observed on the grid t_i = i h.

The Levy-OU model is simulated exactly: over one grid step the OU flow is
linear, so

    X_{t+h} = e^{-beta h} X_t + N(0, alpha^2 (1 - e^{-2 beta h}) / (2 beta))
              + sum_{jumps tau in (t, t+h]} e^{-beta (t + h - tau)} z,

which is the event-driven scheme (exact OU transitions between jump epochs)
collapsed onto the observation grid.  Generic models use Euler-Maruyama on a
finer grid with compound-Poisson jumps applied at the end of their substep.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidParameterError, NonFiniteStateError
from .model import ModelSpec, ParamVector
from .rng import BURN_IN_STREAM, derive_seed, make_rng

__all__ = [
    "PathConfig",
    "Path",
    "simulate_levy_ou",
    "simulate_generic",
    "stationary_start",
    "write_path_csv",
    "read_path_csv",
]


@dataclass(frozen=True)
class PathConfig:
    """n increments of size h.  ``x0=None`` starts from ``stationary_start``."""

    n: int
    h: float
    seed: int = 0
    burn_in_time: float | None = None
    substeps: int = 1
    x0: float | tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidParameterError("n must be at least 1")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InvalidParameterError("h must be positive")
        if int(self.substeps) < 1:
            raise InvalidParameterError("substeps must be at least 1")
        if self.burn_in_time is not None and self.burn_in_time < 0:
            raise InvalidParameterError("burn_in_time must be nonnegative")

    @property
    def horizon(self) -> float:
        return self.n * self.h


@dataclass(frozen=True)
class Path:
    times: np.ndarray
    values: np.ndarray
    h: float
    jump_marks: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.times.shape[0] != values.shape[0]:
            raise InvalidParameterError("times and values differ in length")
        if values.shape[0] < 2:
            raise InvalidParameterError("a path needs at least one increment")
        if self.jump_marks is not None:
            marks = np.asarray(self.jump_marks, dtype=np.int64)
            if marks.shape != (values.shape[0] - 1,):
                raise InvalidParameterError("jump_marks must have one entry per increment")
            object.__setattr__(self, "jump_marks", marks)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        """Observations of a one-dimensional path as a flat array."""
        return self.values[:, 0]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def _levy_ou_params(params: ParamVector, allow_zero_beta: bool = True):
    if params.layout != (1, 1, 3):
        raise InvalidParameterError(f"Levy-OU expects layout (1, 1, 3), got {params.layout}")
    alpha, beta, lam, mu, s2 = params.flat.tolist()
    if alpha < 0 or lam < 0 or s2 <= 0 or beta < 0 or (beta == 0 and not allow_zero_beta):
        raise InvalidParameterError(
            f"Levy-OU needs alpha >= 0, beta > 0, lambda >= 0, sigma2 > 0; got {params.flat.tolist()}"
        )
    return alpha, beta, lam, mu, s2


def _ou_noise_var(alpha: float, beta: float, dt: float) -> float:
    if beta == 0:
        return alpha * alpha * dt
    return alpha * alpha * (-math.expm1(-2.0 * beta * dt)) / (2.0 * beta)


def stationary_start(params: ParamVector, cfg: PathConfig) -> float:
    """Levy-OU state after a burn-in of ``burn_in_time`` (default 50/beta) from 0.

    The burn-in transition is sampled exactly in one shot with a stream
    derived from ``cfg.seed``.
    """
    alpha, beta, lam, mu, s2 = _levy_ou_params(params, allow_zero_beta=False)
    horizon = 50.0 / beta if cfg.burn_in_time is None else float(cfg.burn_in_time)
    rng = make_rng(derive_seed(cfg.seed, BURN_IN_STREAM))
    g = rng.standard_normal()
    k = rng.poisson(lam * horizon)
    tau = rng.random(k) * horizon
    z = rng.normal(mu, math.sqrt(s2), size=k)
    x = math.sqrt(_ou_noise_var(alpha, beta, horizon)) * g
    if k:
        x += float(np.sum(np.exp(-beta * (horizon - tau)) * z))
    return x


def simulate_levy_ou(params: ParamVector, cfg: PathConfig) -> Path:
    """Exact discretely observed Levy-OU path; jump_marks holds per-step jump counts."""
    alpha, beta, lam, mu, s2 = _levy_ou_params(params)
    n, h = int(cfg.n), float(cfg.h)
    if cfg.x0 is None:
        x0 = stationary_start(params, cfg)
    else:
        x0 = float(np.asarray(cfg.x0, dtype=float).ravel()[0])

    rng = make_rng(cfg.seed)
    counts = rng.poisson(lam * h, size=n) if lam > 0 else np.zeros(n, dtype=np.int64)
    noise = rng.standard_normal(n) * math.sqrt(_ou_noise_var(alpha, beta, h))
    total = int(counts.sum())
    if total:
        offsets = rng.random(total) * h
        marks = rng.normal(mu, math.sqrt(s2), size=total)
        owner = np.repeat(np.arange(n), counts)
        noise += np.bincount(owner, weights=np.exp(-beta * (h - offsets)) * marks, minlength=n)

    decay = math.exp(-beta * h)
    x = lfilter([1.0], [1.0, -decay], noise, zi=[decay * x0])[0]
    values = np.concatenate(([x0], x))
    if not np.all(np.isfinite(values)):
        raise NonFiniteStateError("Levy-OU path is not finite")
    return Path(times=np.arange(n + 1) * h, values=values, h=h, jump_marks=counts, seed=cfg.seed)


def simulate_generic(model: ModelSpec, params: ParamVector, cfg: PathConfig) -> Path:
    """Euler-Maruyama with ``cfg.substeps`` substeps per observation step.

    Jumps arrive at rate intensity(gamma); a jump falling inside a substep is
    applied at the end of that substep through ``model.jump_map``.  Without
    ``x0`` the chain starts at the origin after ``burn_in_time`` (default 0).
    """
    if model.sample_marks is None:
        raise InvalidParameterError(f"model {model.name!r} has no mark sampler")
    alpha, beta, gamma = model.split(params)
    d, s = model.dimension, model.noise_dimension
    lam = float(model.intensity(gamma))
    if lam < 0:
        raise InvalidParameterError("jump intensity must be nonnegative")

    n, m = int(cfg.n), int(cfg.substeps)
    dt = cfg.h / m
    rng = make_rng(cfg.seed)

    def run(x, steps, stream):
        counts = stream.poisson(lam * dt, size=steps) if lam > 0 else np.zeros(steps, dtype=np.int64)
        dW = stream.standard_normal((steps, s)) * math.sqrt(dt)
        marks = model.sample_marks(stream, int(counts.sum()), gamma).reshape(-1, d)
        out = np.empty((steps // m, d))
        j = 0
        for k in range(steps):
            xb = x[None, :]
            x = x + model.drift(xb, beta)[0] * dt + model.diffusion(xb, alpha)[0] @ dW[k]
            for _ in range(counts[k]):
                x = x + model.jump_map(x[None, :], marks[j][None, :], gamma)[0]
                j += 1
            if (k + 1) % m == 0:
                if not np.all(np.isfinite(x)):
                    raise NonFiniteStateError(f"path left the finite range at step {(k + 1) // m}")
                out[(k + 1) // m - 1] = x
        return x, out, counts

    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float).reshape(d)
    else:
        x0 = np.zeros(d)
        burn = int(round((cfg.burn_in_time or 0.0) / cfg.h)) * m
        if burn:
            x0, _, _ = run(x0, burn, make_rng(derive_seed(cfg.seed, BURN_IN_STREAM)))

    _, obs, counts = run(x0.copy(), n * m, rng)
    jump_marks = counts.reshape(n, m).sum(axis=1)
    values = np.vstack([x0[None, :], obs])
    return Path(times=np.arange(n + 1) * cfg.h, values=values, h=cfg.h, jump_marks=jump_marks, seed=cfg.seed)


# --- CSV export ---------------------------------------------------------------

def _value_columns(d: int) -> list[str]:
    return ["x"] if d == 1 else [f"x{k + 1}" for k in range(d)]


def write_path_csv(path: Path, target, include_jumps: bool = True) -> None:
    """Write ``t,x[,jumps]`` rows with ``%.17g`` floats.

    The jump column of row i holds the count over (t_{i-1}, t_i]; row 0 has 0.
    """
    jumps = include_jumps and path.jump_marks is not None
    header = ["t"] + _value_columns(path.dimension) + (["jumps"] if jumps else [])
    marks = np.concatenate(([0], path.jump_marks)) if jumps else None
    with open(target, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(path.n + 1):
            row = ["%.17g" % path.times[i]] + ["%.17g" % v for v in path.values[i]]
            if jumps:
                row.append("%d" % marks[i])
            fh.write(",".join(row) + "\n")


def read_path_csv(source) -> Path:
    """Read a path CSV written by ``write_path_csv``.

    Raises ValueError naming the offending line for malformed input.
    """
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{source}: empty file") from None
        if not header or header[0] != "t":
            raise ValueError(f"{source}: line 1: header must start with 't'")
        has_jumps = header[-1] == "jumps"
        value_cols = header[1:-1] if has_jumps else header[1:]
        if value_cols != _value_columns(len(value_cols)) or not value_cols:
            raise ValueError(f"{source}: line 1: unexpected columns {header}")
        width = len(header)
        t, x, j = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(f"{source}: line {lineno}: expected {width} fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                x.append([float(v) for v in row[1:1 + len(value_cols)]])
                if has_jumps:
                    j.append(int(row[-1]))
            except ValueError:
                raise ValueError(f"{source}: line {lineno}: non-numeric field") from None
            if not (math.isfinite(t[-1]) and all(math.isfinite(v) for v in x[-1])):
                raise ValueError(f"{source}: line {lineno}: non-finite value")
    if len(t) < 2:
        raise ValueError(f"{source}: need at least two observations")
    times = np.array(t)
    h = (times[-1] - times[0]) / (times.size - 1)
    steps = np.diff(times)
    if h <= 0 or not np.allclose(steps, h, rtol=1e-6, atol=0.0):
        raise ValueError(f"{source}: observation times are not an equispaced increasing grid")
    marks = np.array(j[1:]) if has_jumps else None
    return Path(times=times, values=np.array(x), h=float(h), jump_marks=marks)
