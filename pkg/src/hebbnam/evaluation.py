"""Recall measurement and stochastic bisection for the 90% capacity point.

A trial stores P fresh patterns one-shot, probes every stored pattern with
a distorted cue, and scores the exact-recall percentage. The bisection
walks P up or down by a step that halves on direction reversals; once the
step reaches one, the last `window` move directions are tracked and the
search stops when they balance out, leaving P at the threshold crossing.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import analysis
from .network import NetworkConfig, recall_batch
from .patterns import (
    Pattern,
    PatternKind,
    PatternSpec,
    distort,
    eligible_blocks,
    generate_patterns,
    sample_parent,
)
from .plasticity import SynapticState, WeightState, compute_weights, train_pattern
from .rng import RngStream

Oracle = Callable[[int], float]


@dataclass
class TrialSpec:
    """One capacity-measurement configuration.

    n_resample is the test distortion in hypercolumns (fractional values
    are floor/ceil mixed per probe). When resample_frac_of_eligible is
    set, it overrides n_resample with that fraction of each pattern's own
    resampling-eligible blocks, which is how silent patterns are probed at
    high silent fractions.
    """

    cfg: NetworkConfig
    pattern_spec: PatternSpec
    n_resample: float
    recall_threshold: float = 90.0
    repeats_per_point: int = 1
    resample_frac_of_eligible: float | None = None

    def __post_init__(self):
        if not 0 < self.recall_threshold < 100:
            raise ValueError("recall_threshold must lie strictly between 0 and 100")
        if self.repeats_per_point < 1:
            raise ValueError("repeats_per_point must be >= 1")


@dataclass
class BisectionParams:
    p0: int
    d0: int | None = None  # defaults to round(0.1 * p0), at least 1
    shrink: float = 0.5
    window: int = 20
    balance_tol: float = 0.1
    max_sim_calls: int = 500

    def __post_init__(self):
        if self.p0 < 1:
            raise ValueError("p0 must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")

    @property
    def initial_step(self) -> int:
        if self.d0 is not None:
            return max(1, int(self.d0))
        return max(1, round(0.1 * self.p0))


@dataclass
class CapacityEstimate:
    per_run_p: list[int]
    mean: float
    std: float
    sim_calls: list[int]


class BisectionNonConvergence(RuntimeError):
    """Search exceeded its simulation budget; carries the trajectory."""

    def __init__(self, message: str, trajectory: list[dict]):
        super().__init__(message)
        self.trajectory = trajectory


def probe_resample(p: Pattern, spec: TrialSpec) -> float:
    if spec.resample_frac_of_eligible is not None:
        return spec.resample_frac_of_eligible * len(
            eligible_blocks(p, spec.pattern_spec.kind)
        )
    return spec.n_resample


def recall_fraction(
    ws: WeightState,
    stored: Sequence[Pattern],
    spec: TrialSpec,
    rng: RngStream,
) -> float:
    """Fraction of stored patterns recalled exactly from distorted cues."""
    if not stored:
        raise ValueError("recall_fraction needs a non-empty stored set")
    originals = np.stack([p.bits for p in stored])
    cues = []
    for _ in range(spec.repeats_per_point):
        for p in stored:
            cue = distort(p, probe_resample(p, spec), rng, spec.pattern_spec)
            cues.append(cue.bits)
    states, _, _ = recall_batch(ws, np.stack(cues), spec.cfg)
    targets = np.tile(originals, (spec.repeats_per_point, 1))
    matches = np.all(states == targets, axis=1)
    return float(np.mean(matches))


def train_network(
    spec: TrialSpec, patterns: Sequence[Pattern]
) -> tuple[SynapticState, WeightState]:
    state = SynapticState.empty(spec.cfg.layout.N)
    for p in patterns:
        train_pattern(state, p)
    return state, compute_weights(state, spec.cfg.rule, spec.cfg.layout)


def materialize_spec(spec: TrialSpec, rng: RngStream) -> TrialSpec:
    """Draw the per-set parent for correlated kinds, if not already fixed."""
    pspec = spec.pattern_spec
    if pspec.kind in (PatternKind.CNRAND, PatternKind.CHRAND) and pspec.parent is None:
        parent = sample_parent(spec.cfg.layout, pspec.kind, rng)
        return replace(spec, pattern_spec=pspec.with_parent(parent))
    return spec

def simulate_point(spec: TrialSpec, P: int, rng: RngStream) -> float:
    """Store P fresh patterns in a fresh network; return the exact-recall
    percentage from distorted probes."""
    if P < 1:
        raise ValueError("P must be >= 1")
    spec = materialize_spec(spec, rng)
    patterns = generate_patterns(spec.cfg.layout, spec.pattern_spec, P, rng)
    _, ws = train_network(spec, patterns)
    return 100.0 * recall_fraction(ws, patterns, spec, rng)


def default_p0(spec: TrialSpec) -> int:
    """Search start from the capacity model at the rule's reference
    bits-per-weight."""
    cap = analysis.reference_capacity(spec.cfg.layout, spec.cfg.rule)
    return max(1, round(cap))


def bisect_p90(
    spec: TrialSpec,
    params: BisectionParams,
    rng: RngStream,
    oracle: Oracle | None = None,
    trace: list[dict] | None = None,
) -> int:
    """Stochastic bisection of the pattern count at the recall threshold.

    Each iteration simulates once at the current P and moves P by the
    step in the direction of the sign of (percent - threshold). The step
    halves (rounding up, never below 1) on direction reversals; once it
    reaches 1, directions enter a sliding window, and the search stops
    when the window is full and its mean is within balance_tol of zero.
    P never drops below 1.
    """
    if oracle is None:
        oracle = lambda P: simulate_point(spec, P, rng)  # noqa: E731
    threshold = spec.recall_threshold
    direction = 0
    dirs: deque[int] = deque(maxlen=params.window)
    P = params.p0
    d = params.initial_step
    calls = 0
    trajectory: list[dict] = [] if trace is None else trace
    while len(dirs) < params.window or abs(float(np.mean(dirs))) > params.balance_tol:
        if calls >= params.max_sim_calls:
            raise BisectionNonConvergence(
                f"no balanced crossing within {params.max_sim_calls} simulations",
                trajectory,
            )
        percent = oracle(P)
        calls += 1
        previous = direction
        direction = int(np.sign(percent - threshold))
        trajectory.append({"P": P, "percent": percent, "dir": direction, "d": d})
        P = max(1, P + direction * d)
        if d > 1 and direction * previous < 0:
            d = int(max(1, params.shrink * d + 0.5))
        elif d == 1:
            dirs.append(direction)
    return P


def capacity_estimate(
    spec: TrialSpec,
    params: BisectionParams,
    runs: int,
    rng: RngStream,
    oracle_factory: Callable[[RngStream], Oracle] | None = None,
) -> CapacityEstimate:
    """Mean and standard deviation of the bisection endpoint over
    independent runs, each on its own derived stream."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    per_run = []
    calls = []
    for r in range(runs):
        run_rng = rng.derive("run", r)
        oracle = oracle_factory(run_rng) if oracle_factory is not None else None
        trace: list[dict] = []
        p = bisect_p90(spec, params, run_rng, oracle=oracle, trace=trace)
        per_run.append(p)
        calls.append(len(trace))
    return CapacityEstimate(
        per_run_p=per_run,
        mean=float(np.mean(per_run)),
        std=float(np.std(per_run)),
        sim_calls=calls,
    )


def step_oracle(boundary: int, high: float = 100.0, low: float = 0.0) -> Oracle:
    """Deterministic oracle: `high` at or below the boundary, `low` above."""

    def oracle(P: int) -> float:
        return high if P <= boundary else low

    return oracle


def prototype_oracle_factory(spec, trial_fn) -> Callable[[RngStream], Oracle]:
    """Bisection oracles that rerun a prototype trial at varying counts.

    Each oracle call gets its own derived stream so repeated evaluations
    at the same count stay independent yet reproducible.
    """

    def factory(run_rng: RngStream) -> Oracle:
        counter = itertools.count()

        def oracle(count: int) -> float:
            call_rng = run_rng.derive("sim", next(counter))
            return 100.0 * trial_fn(replace(spec, Q=count), call_rng)

        return oracle

    return factory
