"""Capacity scaling relations and bits-per-weight estimation.

A stored pattern carries I_p bits (exact binomial for K-of-N coding,
H*log2(M) for block coding); a network of N units offers N^2/2 free
weights. Capacity is modeled as P = N^2 / (2 * I_p) * I_w with a single
coefficient I_w, the information stored per weight, fitted by closed-form
least squares against measured capacities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .patterns import Architecture, Layout
from .plasticity import Rule


@dataclass(frozen=True)
class CapacityPoint:
    layout: Layout
    p90: float

    def __post_init__(self):
        if self.p90 <= 0:
            raise ValueError("measured capacity must be positive")


@dataclass(frozen=True)
class BitsPerWeight:
    i_w: float
    residual: float
    n_points: int


class UndefinedModelError(ValueError):
    """Raised when a layout carries zero bits per pattern."""


# typical measured bits-per-weight values, used only to seed capacity
# searches; any measurement overrides them
REFERENCE_BITS_PER_WEIGHT: dict[tuple[Architecture, Rule], float] = {
    (Architecture.NON_MODULAR, Rule.HEBB): 0.14,
    (Architecture.NON_MODULAR, Rule.HOPF): 0.20,
    (Architecture.NON_MODULAR, Rule.COV): 0.22,
    (Architecture.NON_MODULAR, Rule.PRCOV): 0.24,
    (Architecture.NON_MODULAR, Rule.WILL): 0.41,
    (Architecture.NON_MODULAR, Rule.BCPNN): 0.60,
    (Architecture.MODULAR, Rule.HEBB): 0.13,
    (Architecture.MODULAR, Rule.HOPF): 0.17,
    (Architecture.MODULAR, Rule.COV): 0.18,
    (Architecture.MODULAR, Rule.PRCOV): 0.20,
    (Architecture.MODULAR, Rule.WILL): 0.37,
    (Architecture.MODULAR, Rule.BCPNN): 0.57,
}


def pattern_information(layout: Layout) -> float:
    """Bits per stored pattern.

    Non-modular: log2 of the exact binomial C(N, K), computed with integer
    arithmetic before taking the logarithm. Modular: H * log2(M).
    """
    if layout.modular:
        return layout.H * math.log2(layout.M)
    return math.log2(math.comb(layout.N, layout.K))


def capacity_model(layout: Layout, i_w: float) -> float:
    """Patterns storable at i_w bits per weight: N^2 / (2 * I_p) * i_w."""
    if i_w < 0:
        raise ValueError("bits per weight must be non-negative")
    i_p = pattern_information(layout)
    if i_p == 0:
        raise UndefinedModelError("layout stores zero bits per pattern")
    return layout.N**2 / (2.0 * i_p) * i_w


def model_gain(layout: Layout) -> float:
    """Capacity per bit-per-weight: the model's slope N^2 / (2 * I_p)."""
    i_p = pattern_information(layout)
    if i_p == 0:
        raise UndefinedModelError("layout stores zero bits per pattern")
    return layout.N**2 / (2.0 * i_p)


def fit_bits_per_weight(points: Sequence[CapacityPoint]) -> BitsPerWeight:
    """Closed-form least squares for the single scaling coefficient.

    With g(N) = N^2 / (2 * I_p), the estimate is
    i_w = sum(g_i * P_i) / sum(g_i^2), and the residual is the summed
    squared error of the fitted curve.
    """
    if not points:
        raise ValueError("need at least one capacity point")
    archs = {p.layout.architecture for p in points}
    if len(archs) > 1:
        raise ValueError("all capacity points must share an architecture")
    gains = [model_gain(p.layout) for p in points]
    denom = sum(g * g for g in gains)
    if denom == 0:
        raise ValueError("all model gains are zero; fit undefined")
    i_w = sum(g * p.p90 for g, p in zip(gains, points)) / denom
    residual = sum((p.p90 - g * i_w) ** 2 for g, p in zip(gains, points))
    return BitsPerWeight(i_w=i_w, residual=residual, n_points=len(points))


def reference_capacity(layout: Layout, rule: Rule) -> float:
    """Model capacity at the reference bits-per-weight for (layout, rule)."""
    i_w = REFERENCE_BITS_PER_WEIGHT[(layout.architecture, rule)]
    return capacity_model(layout, i_w)


def fit_from_measurements(
    measurements: Iterable[tuple[Layout, float]]
) -> BitsPerWeight:
    return fit_bits_per_weight([CapacityPoint(lo, p) for lo, p in measurements])
