"""Sparse binary pattern formats and distortion.

Patterns live on a layout of H hypercolumns with M units each (N = H*M).
Modular patterns activate exactly one unit per hypercolumn; non-modular
patterns activate exactly K = H units anywhere in the vector. The silent
format marks a hypercolumn as "not applicable" by activating its last
unit; correlated formats bias every pattern toward a shared parent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .rng import RngStream


class Architecture(str, Enum):
    MODULAR = "modular"
    NON_MODULAR = "non-modular"


class PatternKind(str, Enum):
    NRAND = "nrand"
    HRAND = "hrand"
    SILENT = "silent"
    CNRAND = "cnrand"
    CHRAND = "chrand"


# kinds with one-active-per-hypercolumn block structure; the rest move
# single active units within the full vector
BLOCK_KINDS = frozenset({PatternKind.HRAND, PatternKind.SILENT, PatternKind.CHRAND})

MODULAR_KINDS = frozenset({PatternKind.HRAND, PatternKind.SILENT, PatternKind.CHRAND})
NON_MODULAR_KINDS = frozenset({PatternKind.NRAND, PatternKind.SILENT, PatternKind.CNRAND})


@dataclass(frozen=True)
class Layout:
    """Network geometry: H blocks of M units; K = H active units total."""

    architecture: Architecture
    H: int
    M: int

    def __post_init__(self):
        if self.H < 1 or self.M < 1:
            raise ValueError(f"layout must have H >= 1 and M >= 1, got {self.H}x{self.M}")

    @property
    def N(self) -> int:
        return self.H * self.M

    @property
    def K(self) -> int:
        return self.H

    @property
    def modular(self) -> bool:
        return self.architecture is Architecture.MODULAR


def modular_layout(H: int, M: int) -> Layout:
    return Layout(Architecture.MODULAR, H, M)


def kofn_layout(H: int, M: int) -> Layout:
    """Non-modular layout; block structure is kept for pattern generation."""
    return Layout(Architecture.NON_MODULAR, H, M)


@dataclass(eq=False)
class Pattern:
    """Binary activity vector of length N with its layout."""

    bits: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (self.layout.N,):
            raise ValueError(
                f"pattern length {self.bits.shape} does not match N={self.layout.N}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.bits, other.bits)

    def copy(self) -> "Pattern":
        return Pattern(self.bits.copy(), self.layout)

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def active_unit_per_block(self) -> np.ndarray:
        """Index of the active unit within each block (block-form patterns)."""
        return self.bits.reshape(self.layout.H, self.layout.M).argmax(axis=1)

    def silent_blocks(self) -> np.ndarray:
        """Blocks whose last unit is active (the "na" marker)."""
        blocks = self.bits.reshape(self.layout.H, self.layout.M)
        return np.flatnonzero(blocks[:, self.layout.M - 1] == 1)


@dataclass(frozen=True)
class PatternSpec:
    """What kind of patterns to draw and with which parameters."""

    kind: PatternKind
    silent_fraction: float = 0.25
    f_p: float = 0.1
    parent: Pattern | None = field(default=None, compare=False)

    def with_parent(self, parent: Pattern) -> "PatternSpec":
        return replace(self, parent=parent)


def mixed_count(value: float, rng: RngStream) -> int:
    """Integer count from a possibly fractional target.

    Returns floor(value), bumped to ceil(value) with probability equal to
    the fractional part, so the mean over many draws equals the target.
    Consumes no randomness when the target is integral.
    """
    if value < 0:
        raise ValueError(f"count target must be non-negative, got {value}")
    base = math.floor(value)
    frac = value - base
    if frac > 0.0 and rng.rng.random() < frac:
        base += 1
    return int(base)


def generate_hrand(layout: Layout, rng: RngStream) -> Pattern:
    """One uniformly random active unit per hypercolumn block."""
    choices = rng.rng.integers(0, layout.M, size=layout.H)
    bits = np.zeros(layout.N, dtype=np.uint8)
    bits[np.arange(layout.H) * layout.M + choices] = 1
    return Pattern(bits, layout)


def generate_nrand(layout: Layout, rng: RngStream) -> Pattern:
    """Exactly K active units drawn without replacement from all N."""
    if layout.modular:
        raise ValueError("nrand patterns are defined for non-modular layouts")
    idx = rng.rng.choice(layout.N, size=layout.K, replace=False)
    bits = np.zeros(layout.N, dtype=np.uint8)
    bits[idx] = 1
    return Pattern(bits, layout)


def silent_counts(
    H: int, silent_fraction: float, n_patterns: int, rng: RngStream
) -> list[int]:
    """Per-pattern silent-block counts with floor/ceil mixing of H*fraction."""
    target = silent_fraction * H
    if not 0 <= target <= H:
        raise ValueError(f"silent target {target} outside [0, {H}]")
    return [mixed_count(target, rng) for _ in range(n_patterns)]


def generate_silent(layout: Layout, n_silent: int, rng: RngStream) -> Pattern:
    """n_silent random blocks get the marker unit; the rest draw among the
    first M-1 units, so the marker position is reserved."""
    if layout.M < 2:
        raise ValueError("silent patterns need M >= 2 to reserve the marker unit")
    if not 0 <= n_silent <= layout.H:
        raise ValueError(f"n_silent {n_silent} outside [0, {layout.H}]")
    silent = rng.rng.choice(layout.H, size=n_silent, replace=False)
    bits = np.zeros(layout.N, dtype=np.uint8)
    is_silent = np.zeros(layout.H, dtype=bool)
    is_silent[silent] = True
    for h in range(layout.H):
        if is_silent[h]:
            bits[h * layout.M + layout.M - 1] = 1
        else:
            bits[h * layout.M + rng.rng.integers(0, layout.M - 1)] = 1
    return Pattern(bits, layout)


def generate_correlated(
    layout: Layout, parent: Pattern, f_p: float, rng: RngStream
) -> Pattern:
    """Pattern biased toward a parent with mixing weight f_p.

    Modular: each block copies the parent's active unit with probability
    f_p, otherwise draws uniformly over all M units of the block.
    Non-modular: K active slots are filled one by one; each slot takes a
    not-yet-used unit from the parent's active set with probability f_p,
    otherwise a uniformly random unused unit, falling back to the uniform
    branch once the parent's set is exhausted.
    """
    if not 0 <= f_p <= 1:
        raise ValueError(f"f_p must lie in [0, 1], got {f_p}")
    if parent.layout != layout:
        raise ValueError("parent layout does not match")
    gen = rng.rng
    bits = np.zeros(layout.N, dtype=np.uint8)
    if layout.modular:
        parent_units = parent.active_unit_per_block()
        for h in range(layout.H):
            if gen.random() < f_p:
                unit = parent_units[h]
            else:
                unit = gen.integers(0, layout.M)
            bits[h * layout.M + unit] = 1
    else:
        parent_active = set(parent.active_indices().tolist())
        used: set[int] = set()
        for _ in range(layout.K):
            pool: list[int] | None = None
            if gen.random() < f_p:
                pool = sorted(parent_active - used)
            if not pool:
                pool = sorted(set(range(layout.N)) - used)
            unit = pool[gen.integers(0, len(pool))]
            used.add(unit)
            bits[unit] = 1
    return Pattern(bits, layout)


def sample_parent(layout: Layout, kind: PatternKind, rng: RngStream) -> Pattern:
    """Parent prototype for a correlated pattern set."""
    if kind is PatternKind.CHRAND:
        return generate_hrand(layout, rng)
    if kind is PatternKind.CNRAND:
        return generate_nrand(layout, rng)
    raise ValueError(f"{kind.value} patterns take no parent")


def generate_patterns(
    layout: Layout, spec: PatternSpec, count: int, rng: RngStream
) -> list[Pattern]:
    """Draw a pattern set of the given kind.

    Correlated kinds require spec.parent to be set; the parent itself is
    not part of the returned set.
    """
    kind = spec.kind
    if kind is PatternKind.HRAND:
        return [generate_hrand(layout, rng) for _ in range(count)]
    if kind is PatternKind.NRAND:
        return [generate_nrand(layout, rng) for _ in range(count)]
    if kind is PatternKind.SILENT:
        counts = silent_counts(layout.H, spec.silent_fraction, count, rng)
        return [generate_silent(layout, n, rng) for n in counts]
    if kind in (PatternKind.CNRAND, PatternKind.CHRAND):
        if spec.parent is None:
            raise ValueError("correlated pattern sets need spec.parent")
        return [
            generate_correlated(layout, spec.parent, spec.f_p, rng)
            for _ in range(count)
        ]
    raise ValueError(f"unknown pattern kind {kind!r}")


def eligible_blocks(p: Pattern, kind: PatternKind) -> np.ndarray:
    """Blocks (or active units, for pure K-of-N kinds) open to resampling."""
    if kind is PatternKind.SILENT:
        mask = np.ones(p.layout.H, dtype=bool)
        mask[p.silent_blocks()] = False
        return np.flatnonzero(mask)
    if kind in BLOCK_KINDS:
        return np.arange(p.layout.H)
    return p.active_indices()


def distort(
    p: Pattern, n_resample: float, rng: RngStream, spec: PatternSpec
) -> Pattern:
    """Resample a number of hypercolumns (or active units) of a pattern.

    Fractional counts are floor/ceil mixed like silent_counts. Each chosen
    block is redrawn from the pattern's own generative distribution, so
    the redraw may reproduce the original value: for hrand uniform over
    the block, for silent uniform over the block minus the marker (silent
    blocks are never touched), for correlated kinds via the parent-biased
    rule. Pure K-of-N kinds move a chosen active unit to a random unit
    that keeps the active count at K.
    """
    kind = spec.kind
    layout = p.layout
    eligible = eligible_blocks(p, kind)
    if not 0 <= n_resample <= len(eligible):
        raise ValueError(
            f"n_resample {n_resample} exceeds {len(eligible)} eligible targets"
        )
    count = mixed_count(n_resample, rng)
    if count == 0:
        return p.copy()
    gen = rng.rng
    chosen = np.sort(gen.choice(eligible, size=count, replace=False))
    bits = p.bits.copy()
    M = layout.M

    if kind in BLOCK_KINDS:
        if kind is PatternKind.CHRAND and spec.parent is None:
            raise ValueError("distorting correlated patterns needs spec.parent")
        parent_units = (
            spec.parent.active_unit_per_block() if kind is PatternKind.CHRAND else None
        )
        for h in chosen:
            lo = h * M
            bits[lo : lo + M] = 0
            if kind is PatternKind.SILENT:
                unit = gen.integers(0, M - 1)
            elif kind is PatternKind.CHRAND:
                if gen.random() < spec.f_p:
                    unit = parent_units[h]
                else:
                    unit = gen.integers(0, M)
            else:
                unit = gen.integers(0, M)
            bits[lo + unit] = 1
        return Pattern(bits, layout)

    # pure K-of-N: move each chosen active unit, keeping exactly K active
    if kind is PatternKind.CNRAND and spec.parent is None:
        raise ValueError("distorting correlated patterns needs spec.parent")
    parent_active = (
        set(spec.parent.active_indices().tolist())
        if kind is PatternKind.CNRAND
        else None
    )
    active = set(p.active_indices().tolist())
    for u in chosen:
        active.discard(int(u))
        pool: list[int] | None = None
        if kind is PatternKind.CNRAND and gen.random() < spec.f_p:
            pool = sorted(parent_active - active)
        if not pool:
            pool = sorted(set(range(layout.N)) - active)
        active.add(pool[gen.integers(0, len(pool))])
    bits = np.zeros(layout.N, dtype=np.uint8)
    bits[sorted(active)] = 1
    return Pattern(bits, layout)


def pattern_distance(a: Pattern, b: Pattern) -> int:
    """Number of disagreeing hypercolumns (modular) or missing active
    units (non-modular)."""
    if a.layout != b.layout:
        raise ValueError("patterns have different layouts")
    if a.layout.modular:
        return int(np.sum(a.active_unit_per_block() != b.active_unit_per_block()))
    shared = np.sum((a.bits == 1) & (b.bits == 1))
    return int(a.layout.K - shared)


def standard_kind(architecture: Architecture) -> PatternKind:
    """Uncorrelated full-activity kind for an architecture."""
    return PatternKind.HRAND if architecture is Architecture.MODULAR else PatternKind.NRAND


def kind_fits_architecture(kind: PatternKind, architecture: Architecture) -> bool:
    allowed = MODULAR_KINDS if architecture is Architecture.MODULAR else NON_MODULAR_KINDS
    return kind in allowed
