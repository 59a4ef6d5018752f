"""Parameter containers and jump-diffusion model specifications.

A model is the SDE

    dX_t = b(X_{t-}, beta) dt + a(X_{t-}, alpha) dW_t + int_E c(X_{t-}, z, gamma) p(dt, dz)

with jump density f_gamma(z) = lambda(gamma) F_gamma(z).  Everything the
likelihood code needs about the jump part is carried as log Psi_gamma(y, x),
the log density of the jump *size* y seen from state x, together with its
total mass int_B Psi_gamma(y, x) dy.

All model callables are vectorised over a leading batch axis:

    drift(x, beta)                  x: (m, d)            -> (m, d)
    diffusion(x, alpha)             x: (m, d)            -> (m, d, s)
    jump_map(x, z, gamma)           x, z: (m, d)         -> (m, d)
    log_jump_density(y, x, gamma)   y, x: (m, d)         -> (m,)
    jump_mass(x, gamma)             x: (m, d)            -> (m,)
    intensity(gamma)                                     -> float
    sample_marks(rng, size, gamma)                       -> (size, d)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameterError, SingularDiffusionError

__all__ = [
    "ParamBounds",
    "ParamVector",
    "ModelSpec",
    "levy_ou_model",
    "eval_S",
    "check_diffusion",
    "get_model",
    "register_model",
]


@dataclass(frozen=True)
class ParamVector:
    """theta = (alpha, beta, gamma): diffusion, drift and jump parameters."""

    alpha: tuple[float, ...] = ()
    beta: tuple[float, ...] = ()
    gamma: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        if not (self.alpha or self.beta or self.gamma):
            raise InvalidParameterError("ParamVector needs at least one component")

    @property
    def layout(self) -> tuple[int, int, int]:
        return (len(self.alpha), len(self.beta), len(self.gamma))

    @property
    def flat(self) -> np.ndarray:
        return np.array(self.alpha + self.beta + self.gamma, dtype=float)

    def __len__(self) -> int:
        return sum(self.layout)

    @classmethod
    def from_flat(cls, values: Sequence[float], layout: tuple[int, int, int]) -> "ParamVector":
        values = np.asarray(values, dtype=float).ravel()
        p, q, r = layout
        if values.size != p + q + r:
            raise InvalidParameterError(f"expected {p + q + r} values for layout {layout}, got {values.size}")
        return cls(tuple(values[:p]), tuple(values[p:p + q]), tuple(values[p + q:]))

    def replace_flat(self, index: int, value: float) -> "ParamVector":
        v = self.flat
        v[index] = value
        return ParamVector.from_flat(v, self.layout)


@dataclass(frozen=True)
class ParamBounds:
    """Compact box [lower, upper] in the flat (alpha, beta, gamma) layout."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise InvalidParameterError("lower and upper bounds differ in length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidParameterError("bounds must be finite")
        if not np.all(lo < hi):
            raise InvalidParameterError("bounds need lower < upper componentwise")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    def __len__(self) -> int:
        return len(self.lower)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lower), np.array(self.upper)

    def contains(self, theta: ParamVector | np.ndarray) -> bool:
        v = theta.flat if isinstance(theta, ParamVector) else np.asarray(theta, dtype=float)
        lo, hi = self.arrays()
        return bool(np.all(v >= lo) and np.all(v <= hi))

    def project(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clip onto the box; also return which components moved."""
        values = np.asarray(values, dtype=float)
        lo, hi = self.arrays()
        clipped = np.clip(values, lo, hi)
        return clipped, clipped != values


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dimension: int
    layout: tuple[int, int, int]
    param_names: tuple[str, ...]
    drift: Callable
    diffusion: Callable
    jump_map: Callable
    log_jump_density: Callable
    intensity: Callable
    jump_mass: Callable
    sample_marks: Callable | None = None
    default_bounds: ParamBounds | None = None
    noise_dimension: int | None = None
    state_independent_diffusion: bool = False
    has_closed_form: bool = False
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidParameterError("model dimension must be positive")
        if len(self.param_names) != sum(self.layout):
            raise InvalidParameterError("param_names does not match layout")
        if self.noise_dimension is None:
            object.__setattr__(self, "noise_dimension", self.dimension)

    def split(self, theta: ParamVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if theta.layout != self.layout:
            raise InvalidParameterError(f"parameter layout {theta.layout} != model layout {self.layout}")
        return np.array(theta.alpha), np.array(theta.beta), np.array(theta.gamma)

    def params(self, **values: float) -> ParamVector:
        """Build a ParamVector from keyword names, e.g. ``alpha=2, beta=2.5``."""
        missing = set(self.param_names) - set(values)
        unknown = set(values) - set(self.param_names)
        if missing or unknown:
            raise InvalidParameterError(f"missing {sorted(missing)}, unknown {sorted(unknown)}")
        return ParamVector.from_flat([values[k] for k in self.param_names], self.layout)

    def index_of(self, name: str) -> int:
        try:
            return self.param_names.index(name)
        except ValueError:
            raise InvalidParameterError(f"unknown parameter {name!r}; known: {self.param_names}") from None


def eval_S(model: ModelSpec, x, alpha) -> np.ndarray:
    """S(x, alpha) = a(x, alpha) a(x, alpha)^T.

    ``x`` may be a single state (d,) or a batch (m, d); the result is (d, d)
    or (m, d, d) accordingly.  Raises SingularDiffusionError when any S has
    a non-positive determinant.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    xb = x.reshape(1, model.dimension) if single else x
    a = np.asarray(model.diffusion(xb, np.atleast_1d(np.asarray(alpha, dtype=float))), dtype=float)
    S = np.einsum("mik,mjk->mij", a, a)
    sign, _ = np.linalg.slogdet(S)
    if np.any(sign <= 0):
        raise SingularDiffusionError(f"S(x, alpha) singular for alpha={np.asarray(alpha).tolist()}")
    return S[0] if single else S


def check_diffusion(model: ModelSpec, bounds: ParamBounds, states: np.ndarray, n_alpha: int = 7) -> bool:
    """Diagnostic: S positive definite at sampled states over a grid of in-bound alphas.

    Returns True when every sampled S is positive definite.  Advisory only.
    """
    lo, hi = bounds.arrays()
    p = model.layout[0]
    if p == 0:
        return True
    grid = np.linspace(lo[:p], hi[:p], n_alpha)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    try:
        for alpha in grid:
            eval_S(model, states, alpha)
    except SingularDiffusionError:
        return False
    return True


# --- built-in Levy-OU model -------------------------------------------------

_LOG_2PI = math.log(2.0 * math.pi)


def _ou_drift(x, beta):
    return -beta[0] * x


def _ou_diffusion(x, alpha):
    return np.full((x.shape[0], 1, 1), alpha[0])


def _additive_jump(x, z, gamma):
    return z


def _gaussian_log_psi(y, x, gamma):
    lam, mu, s2 = gamma
    y = np.asarray(y, dtype=float).reshape(-1)
    return math.log(lam) - 0.5 * (_LOG_2PI + math.log(s2)) - (y - mu) ** 2 / (2.0 * s2)


def _gaussian_intensity(gamma):
    return float(gamma[0])


def _gaussian_jump_mass(x, gamma):
    return np.full(np.asarray(x).shape[0], float(gamma[0]))


def _gaussian_marks(rng, size, gamma):
    _, mu, s2 = gamma
    return rng.normal(mu, math.sqrt(s2), size=(size, 1))


LEVY_OU_BOUNDS = ParamBounds(
    lower=(1e-3, 1e-3, 1e-3, -100.0, 1e-4),
    upper=(100.0, 1000.0, 1e4, 100.0, 1e4),
)


def levy_ou_model() -> ModelSpec:
    """One-dimensional OU process with Gaussian compound-Poisson jumps.

    dX_t = -beta X_{t-} dt + alpha dW_t + int z p(dt, dz),
    gamma = (lambda, mu, sigma2), jump sizes N(mu, sigma2) at rate lambda.
    """
    return ModelSpec(
        name="levy_ou",
        dimension=1,
        layout=(1, 1, 3),
        param_names=("alpha", "beta", "lambda", "mu", "sigma2"),
        drift=_ou_drift,
        diffusion=_ou_diffusion,
        jump_map=_additive_jump,
        log_jump_density=_gaussian_log_psi,
        intensity=_gaussian_intensity,
        jump_mass=_gaussian_jump_mass,
        sample_marks=_gaussian_marks,
        default_bounds=LEVY_OU_BOUNDS,
        state_independent_diffusion=True,
        has_closed_form=True,
    )


_REGISTRY: dict[str, Callable[[], ModelSpec]] = {"levy_ou": levy_ou_model}


def register_model(name: str, factory: Callable[[], ModelSpec]) -> None:
    _REGISTRY[name] = factory


def get_model(name: str) -> ModelSpec:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise InvalidParameterError(f"unknown model {name!r}; registered: {sorted(_REGISTRY)}") from None
