"""Threshold classification of increments.

An increment is "small" (attributed to the continuous part) when
|Delta X_i| <= D h^rho and "large" (attributed to a jump) otherwise.  Ties
go to the small class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "Threshold",
    "ThresholdSet",
    "IncrementClassification",
    "cutoff",
    "classify",
    "classify_norms",
    "increment_norms",
    "BalanceReport",
    "balance_diagnostics",
    "write_classification_csv",
]


@dataclass(frozen=True)
class Threshold:
    rho: float
    D: float = 1.0

    def __post_init__(self):
        if not (self.D > 0 and math.isfinite(self.D)):
            raise InvalidParameterError(f"threshold constant D must be positive, got {self.D}")
        if not (0.0 < self.rho < 0.5):
            raise InvalidParameterError(f"threshold exponent rho must lie in (0, 1/2), got {self.rho}")

    @property
    def key(self) -> tuple[float, float]:
        return (float(self.D), float(self.rho))


@dataclass(frozen=True)
class ThresholdSet:
    """The five filters: th1, th2, th3 for adaptive estimation, th1_bar, th2_bar for the joint likelihood.

    When the joint slots are omitted they default to th1_bar = th3 and
    th2_bar = th2.
    """

    th1: Threshold
    th2: Threshold
    th3: Threshold
    th1_bar: Threshold | None = None
    th2_bar: Threshold | None = None

    def __post_init__(self):
        if self.th1_bar is None:
            object.__setattr__(self, "th1_bar", self.th3)
        if self.th2_bar is None:
            object.__setattr__(self, "th2_bar", self.th2)

    @classmethod
    def from_rhos(cls, rho1, rho2, rho3, rho1_bar=None, rho2_bar=None, D: float = 1.0) -> "ThresholdSet":
        opt = lambda r: None if r is None else Threshold(r, D)
        return cls(Threshold(rho1, D), Threshold(rho2, D), Threshold(rho3, D), opt(rho1_bar), opt(rho2_bar))

    @classmethod
    def uniform(cls, rho: float, D: float = 1.0) -> "ThresholdSet":
        return cls.from_rhos(rho, rho, rho, rho, rho, D)

    def as_tuple(self) -> tuple[Threshold, ...]:
        return (self.th1, self.th2, self.th3, self.th1_bar, self.th2_bar)

    def to_dict(self) -> dict:
        names = ("rho1", "rho2", "rho3", "rho1_bar", "rho2_bar")
        return {k: {"D": th.D, "rho": th.rho} for k, th in zip(names, self.as_tuple())}


@dataclass(frozen=True)
class IncrementClassification:
    small_mask: np.ndarray = field(repr=False)
    cutoff: float

    @property
    def large_mask(self) -> np.ndarray:
        return ~self.small_mask

    @property
    def n_small(self) -> int:
        return int(np.count_nonzero(self.small_mask))

    @property
    def n_large(self) -> int:
        return int(self.small_mask.size - self.n_small)


def cutoff(th: Threshold, h: float) -> float:
    """D * h**rho."""
    if not h > 0:
        raise InvalidParameterError("step size h must be positive")
    return th.D * h ** th.rho


def increment_norms(increments: np.ndarray) -> np.ndarray:
    """Euclidean norm of each increment row (absolute value when d = 1)."""
    increments = np.asarray(increments, dtype=float)
    if increments.ndim == 1:
        return np.abs(increments)
    if increments.shape[1] == 1:
        return np.abs(increments[:, 0])
    return np.sqrt(np.einsum("ij,ij->i", increments, increments))


def classify_norms(norms: np.ndarray, cut: float) -> IncrementClassification:
    mask = np.asarray(norms) <= cut
    mask.setflags(write=False)
    return IncrementClassification(small_mask=mask, cutoff=float(cut))


def classify(path, th: Threshold) -> IncrementClassification:
    """Classify the increments of ``path`` against D h^rho."""
    return classify_norms(increment_norms(path.increments), cutoff(th, path.h))


@dataclass(frozen=True)
class BalanceReport:
    n: int
    h: float
    delta: float
    nh: float
    nh2: float
    nh_1_delta: float
    rate_exponent: float
    slots: dict = field(default_factory=dict)

    @property
    def all_admissible(self) -> bool:
        return all(s["admissible"] for s in self.slots.values())


def _window(slot: str, delta: float) -> tuple[float, bool]:
    """Lower end of the admissible rho window and whether it is open."""
    if slot in ("rho1", "rho1_bar"):
        lo_a, lo_b = 0.2, (1.0 + delta) / 6.0
        return (lo_a, True) if lo_a >= lo_b else (lo_b, False)
    if slot in ("rho2", "rho2_bar"):
        return delta / 2.0, False
    if slot == "rho3":
        return delta / 4.0, False
    raise InvalidParameterError(f"unknown threshold slot {slot!r}")


_SLOTS = ("rho1", "rho2", "rho3", "rho1_bar", "rho2_bar")


def balance_diagnostics(n: int, h: float, thresholds: Sequence, delta: float) -> BalanceReport:
    """Sampling-design and threshold-window diagnostics.  Never raises on a bad design.

    ``thresholds`` is positional: (th1, th2, th3[, th1_bar, th2_bar]); entries
    may be Threshold objects or bare rho values.  For each slot the report
    states whether rho sits in its asymptotic-normality window:
    rho1 in (1/5, 1/2) and >= (1+delta)/6, rho2 >= delta/2, rho3 >= delta/4
    (joint slots reuse the rho1/rho2 windows).
    ``rate_exponent`` is log(n h^(1+delta)) / log(n); negative values are
    consistent with n h^(1+delta) -> 0 under a power-law design.
    """
    nh = n * h
    nh1d = n * h ** (1.0 + delta)
    slots = {}
    for slot, th in zip(_SLOTS, thresholds):
        rho = th.rho if isinstance(th, Threshold) else float(th)
        lo, open_lo = _window(slot, delta)
        in_unit = 0.0 < rho < 0.5
        above = rho > lo if open_lo else rho >= lo
        slots[slot] = {"rho": rho, "lower": lo, "lower_open": open_lo, "admissible": bool(in_unit and above)}
    return BalanceReport(
        n=int(n),
        h=float(h),
        delta=float(delta),
        nh=nh,
        nh2=n * h * h,
        nh_1_delta=nh1d,
        rate_exponent=math.log(nh1d) / math.log(n) if n > 1 else float("nan"),
        slots=slots,
    )


def write_classification_csv(path, thresholds: Sequence[Threshold], target) -> None:
    """One row per increment: index i (1-based), |dX_i| and a 0/1 small flag per threshold."""
    norms = increment_norms(path.increments)
    masks = [classify_norms(norms, cutoff(th, path.h)).small_mask for th in thresholds]
    with open(target, "w", newline="") as fh:
        fh.write(",".join(["i", "abs_dx"] + [f"small_rho{th.rho:g}_D{th.D:g}" for th in thresholds]) + "\n")
        for i in range(norms.size):
            fh.write(",".join([str(i + 1), "%.17g" % norms[i]] + [str(int(m[i])) for m in masks]) + "\n")
