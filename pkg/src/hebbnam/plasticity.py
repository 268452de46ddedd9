"""Synaptic counters, probability estimates, and the six learning rules.

Training keeps exact activity counters (pattern count c, per-unit counts
c_i, coincidence counts c_ij). Probability estimates are floored ratios of
the counters, and each learning rule maps them to a weight matrix and, for
the Bayesian rule, a bias vector. Counters are the source of truth;
weights are derived on demand once training is finished.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .patterns import Layout, Pattern

EPSILON_DEFAULT = 1e-7

_DUMP_MAGIC = b"NAMS"
_DUMP_VERSION = 1


class Rule(str, Enum):
    WILL = "will"
    HEBB = "hebb"
    HOPF = "hopf"
    COV = "cov"
    PRCOV = "prcov"
    BCPNN = "bcpnn"


class DegenerateStateError(ValueError):
    """Raised when weights are requested from an untrained state."""


@dataclass
class SynapticState:
    """Exact activity counters accumulated by one-shot training."""

    c: int
    c_i: np.ndarray
    c_ij: np.ndarray

    @classmethod
    def empty(cls, n_units: int) -> "SynapticState":
        return cls(
            c=0,
            c_i=np.zeros(n_units, dtype=np.int64),
            c_ij=np.zeros((n_units, n_units), dtype=np.int64),
        )

    @property
    def n_units(self) -> int:
        return self.c_i.shape[0]


@dataclass
class PEstimates:
    """Floored activation and co-activation probability estimates."""

    p_i: np.ndarray
    p_ij: np.ndarray
    epsilon: float


@dataclass
class WeightState:
    """Weight matrix w[i, j] (pre i, post j) and bias b for one rule."""

    w: np.ndarray
    b: np.ndarray
    rule: Rule
    a: float | None = None


def epsilon_for(rule: Rule, c: int) -> float:
    """Probability floor: 1/(1+c) for the Bayesian rule, 1e-7 otherwise."""
    if c < 0:
        raise ValueError(f"pattern count must be non-negative, got {c}")
    if rule is Rule.BCPNN:
        return 1.0 / (1.0 + c)
    return EPSILON_DEFAULT


def train_pattern(state: SynapticState, x: Pattern | np.ndarray) -> SynapticState:
    """Accumulate one pattern into the counters (in place)."""
    bits = x.bits if isinstance(x, Pattern) else np.asarray(x)
    if bits.shape != (state.n_units,):
        raise ValueError(
            f"pattern length {bits.shape} does not match N={state.n_units}"
        )
    active = np.flatnonzero(bits)
    state.c += 1
    state.c_i[active] += 1
    state.c_ij[np.ix_(active, active)] += 1
    return state


def p_estimates(state: SynapticState, rule: Rule) -> PEstimates:
    """p_i = max(c_i/c, eps), p_ij = max(c_ij/c, eps^2)."""
    if state.c == 0:
        raise DegenerateStateError("no patterns trained; estimates undefined")
    eps = epsilon_for(rule, state.c)
    p_i = np.maximum(state.c_i / state.c, eps)
    p_ij = np.maximum(state.c_ij / state.c, eps * eps)
    return PEstimates(p_i=p_i, p_ij=p_ij, epsilon=eps)


def compute_weights(state: SynapticState, rule: Rule, layout: Layout) -> WeightState:
    """Weight matrix (and bias) for a finished training state.

    WILL thresholds the raw coincidence counters; the graded rules work on
    the floored probability estimates. The mean-activity parameter of the
    Hopfield rule is 1/M for modular layouts and K/N for non-modular ones
    (identical under the square partitioning H = M).
    """
    if state.c == 0:
        raise DegenerateStateError("no patterns trained; weights undefined")
    n = state.n_units
    b = np.zeros(n)
    if rule is Rule.WILL:
        return WeightState(w=(state.c_ij > 0).astype(np.float64), b=b, rule=rule)

    est = p_estimates(state, rule)
    p_i, p_ij = est.p_i, est.p_ij
    if rule is Rule.HEBB:
        w = p_ij.copy()
    elif rule is Rule.HOPF:
        a = 1.0 / layout.M if layout.modular else layout.K / layout.N
        w = p_ij - a * (p_i[:, None] + p_i[None, :]) + a * a
        return WeightState(w=w, b=b, rule=rule, a=a)
    elif rule is Rule.COV:
        w = p_ij - np.outer(p_i, p_i)
    elif rule is Rule.PRCOV:
        w = (p_ij - np.outer(p_i, p_i)) / p_i[None, :]
    elif rule is Rule.BCPNN:
        w = np.log(p_ij) - np.log(p_i)[:, None] - np.log(p_i)[None, :]
        b = np.log(p_i)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return WeightState(w=w, b=b, rule=rule)


def save_synaptic_state(state: SynapticState, path) -> None:
    """Checkpoint counters: magic, version u32, N u32, c u64, then c_i and
    c_ij as little-endian u32 in row-major order."""
    n = state.n_units
    limit = np.iinfo(np.uint32).max
    if state.c > limit or state.c_i.max(initial=0) > limit:
        raise ValueError("counters exceed the u32 checkpoint range")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIQ", _DUMP_MAGIC, _DUMP_VERSION, n, state.c))
        fh.write(state.c_i.astype("<u4").tobytes())
        fh.write(state.c_ij.astype("<u4").tobytes())


def load_synaptic_state(path) -> SynapticState:
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sIIQ"))
        magic, version, n, c = struct.unpack("<4sIIQ", header)
        if magic != _DUMP_MAGIC:
            raise ValueError(f"not a synaptic-state dump (magic {magic!r})")
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        c_i = np.frombuffer(fh.read(4 * n), dtype="<u4").astype(np.int64)
        c_ij = (
            np.frombuffer(fh.read(4 * n * n), dtype="<u4")
            .astype(np.int64)
            .reshape(n, n)
        )
    return SynapticState(c=int(c), c_i=c_i, c_ij=c_ij)
