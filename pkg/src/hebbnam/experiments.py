"""Benchmark sweeps: capacity scaling, prototype extraction, distortion and
silent-fraction dependence, and weight trajectories.

Every sweep cell owns a random stream keyed by its coordinates and the
master seed, so results are independent of execution order, scheduling,
and worker count. Cells run on a process pool and rows are emitted in a
canonical sort order.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analysis
from .evaluation import (
    BisectionNonConvergence,
    BisectionParams,
    TrialSpec,
    bisect_p90,
    capacity_estimate,
    default_p0,
    prototype_oracle_factory,
)
from .network import NetworkConfig, recall_batch
from .patterns import (
    Architecture,
    Layout,
    Pattern,
    PatternKind,
    PatternSpec,
    distort,
    generate_patterns,
    kind_fits_architecture,
    sample_parent,
    standard_kind,
)
from .plasticity import Rule, SynapticState, compute_weights, train_pattern
from .rng import RngStream, stream_for

CAPACITY_FIELDS = [
    "rule",
    "arch",
    "kind",
    "H",
    "M",
    "N",
    "K",
    "distort",
    "silent_frac",
    "f_p",
    "run",
    "P90",
    "sim_calls",
    "seed",
]

TRAJECTORY_FIELDS = ["step", "pre_index", "post_index", "value"]

FIT_FIELDS = ["rule", "arch", "I_w", "residual", "n_points"]

ERROR_MARKER = "error"


@dataclass
class SweepSpec:
    """Grid of capacity cells: rules x architectures x kinds x sizes."""

    rules: list[Rule]
    architectures: list[Architecture]
    kinds: list[PatternKind]
    sizes: list[tuple[int, int]]
    distortion: float = 0.10
    silent_fraction: float = 0.25
    f_p: float = 0.10
    runs: int = 5
    master_seed: int = 0
    recall_threshold: float = 90.0
    max_iterations: int = 10
    zero_diagonal: bool = False
    max_sim_calls: int = 500
    p0_override: int | None = None
    workers: int = 1

    def __post_init__(self):
        if not (self.rules and self.architectures and self.kinds and self.sizes):
            raise ValueError("sweep selections must be non-empty")


@dataclass
class PrototypeSpec:
    """Prototype-extraction trial: Q prototypes, ninst instances each."""

    Q: int
    layout: Layout
    rule: Rule
    ninst: int = 10
    train_resample: float = 0.0
    test_resample: float = 0.0
    pattern_spec: PatternSpec | None = None
    max_iterations: int = 10
    zero_diagonal: bool = False

    def __post_init__(self):
        if self.Q < 1 or self.ninst < 1:
            raise ValueError("Q and ninst must be >= 1")

    def effective_pattern_spec(self) -> PatternSpec:
        if self.pattern_spec is not None:
            return self.pattern_spec
        return PatternSpec(standard_kind(self.layout.architecture))

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            layout=self.layout,
            rule=self.rule,
            max_iterations=self.max_iterations,
            zero_diagonal=self.zero_diagonal,
        )


def prototype_trial(
    spec: PrototypeSpec, rng: RngStream, stats: dict | None = None
) -> float:
    """Train on shuffled distorted instances, probe with fresh instances,
    and score exact prototype recovery.

    Prototypes are never shown to the network. Each stage (prototype
    draw, instance draw, shuffle, probes) uses its own derived stream so
    the training order is itself reproducible. When a stats dict is
    given, recalls that land exactly on a training instance instead of
    the prototype are counted under "instance_recalls".
    """
    layout = spec.layout
    pspec = spec.effective_pattern_spec()
    proto_rng = rng.derive("protos")
    inst_rng = rng.derive("instances")
    shuffle_rng = rng.derive("shuffle")
    probe_rng = rng.derive("probes")
    if pspec.kind in (PatternKind.CNRAND, PatternKind.CHRAND) and pspec.parent is None:
        pspec = pspec.with_parent(sample_parent(layout, pspec.kind, proto_rng))
    protos = generate_patterns(layout, pspec, spec.Q, proto_rng)
    instances = [
        distort(p, spec.train_resample, inst_rng, pspec)
        for p in protos
        for _ in range(spec.ninst)
    ]
    order = shuffle_rng.rng.permutation(len(instances))
    state = SynapticState.empty(layout.N)
    for idx in order:
        train_pattern(state, instances[idx])
    ws = compute_weights(state, spec.rule, layout)
    cues = np.stack(
        [distort(p, spec.test_resample, probe_rng, pspec).bits for p in protos]
    )
    states, _, _ = recall_batch(ws, cues, spec.network_config())
    targets = np.stack([p.bits for p in protos])
    correct = np.all(states == targets, axis=1)
    if stats is not None:
        instance_keys = {inst.bits.tobytes() for inst in instances}
        stats["instance_recalls"] = int(
            sum(
                1
                for row, ok in zip(states, correct)
                if not ok and row.tobytes() in instance_keys
            )
        )
    return float(np.mean(correct))


def prototype_trial_spec(spec: PrototypeSpec, threshold: float = 90.0) -> TrialSpec:
    """Probe description of a prototype trial, for the bisection loop."""
    return TrialSpec(
        cfg=spec.network_config(),
        pattern_spec=spec.effective_pattern_spec(),
        n_resample=spec.test_resample,
        recall_threshold=threshold,
    )


def prototype_capacity(
    spec: PrototypeSpec,
    params: BisectionParams,
    runs: int,
    rng: RngStream,
    threshold: float = 90.0,
):
    """Bisect the prototype count at the recall threshold, reusing the
    capacity-search loop with prototype trials as the oracle."""
    trial = prototype_trial_spec(spec, threshold)
    factory = prototype_oracle_factory(spec, prototype_trial)
    return capacity_estimate(trial, params, runs, rng, oracle_factory=factory)


@dataclass(frozen=True)
class CapacityTask:
    """One bisection run, self-contained and picklable."""

    key: tuple
    mode: str  # "storage" or "prototype"
    params: BisectionParams
    master_seed: int
    row_base: dict
    trial: TrialSpec | None = None
    proto: PrototypeSpec | None = None
    threshold: float = 90.0


def run_capacity_task(task: CapacityTask) -> dict:
    rng = stream_for(task.master_seed, *task.key)
    row = dict(task.row_base)
    trace: list[dict] = []
    try:
        if task.mode == "storage":
            p90 = bisect_p90(task.trial, task.params, rng, trace=trace)
        else:
            trial = prototype_trial_spec(task.proto, task.threshold)
            factory = prototype_oracle_factory(task.proto, prototype_trial)
            p90 = bisect_p90(
                trial, task.params, rng, oracle=factory(rng), trace=trace
            )
        row["P90"] = p90
        row["sim_calls"] = len(trace)
    except BisectionNonConvergence as exc:
        row["P90"] = ERROR_MARKER
        row["sim_calls"] = len(exc.trajectory)
    return row


def run_tasks(tasks: list[CapacityTask], workers: int = 1) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        return [run_capacity_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_capacity_task, tasks, chunksize=1))


def row_sort_key(row: dict):
    run = row["run"]
    run_key = (1, 0) if run == "mean" else (0, int(run))
    return (
        str(row["rule"]),
        str(row["arch"]),
        str(row["kind"]),
        int(row["H"]),
        int(row["M"]),
        float(row["distort"]),
        float(row["silent_frac"]),
        float(row["f_p"]),
        run_key,
    )


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Append one mean row per cell; errored cells aggregate to the
    error marker."""
    by_cell: dict[tuple, list[dict]] = {}
    for row in rows:
        cell = tuple(
            row[k]
            for k in ("rule", "arch", "kind", "H", "M", "distort", "silent_frac", "f_p")
        )
        by_cell.setdefault(cell, []).append(row)
    out = list(rows)
    for cell_rows in by_cell.values():
        agg = dict(cell_rows[0])
        agg["run"] = "mean"
        values = [r["P90"] for r in cell_rows]
        if any(v == ERROR_MARKER for v in values):
            agg["P90"] = ERROR_MARKER
        else:
            agg["P90"] = float(np.mean([float(v) for v in values]))
        agg["sim_calls"] = int(sum(int(r["sim_calls"]) for r in cell_rows))
        out.append(agg)
    out.sort(key=row_sort_key)
    return out


def _capacity_row_base(
    rule: Rule,
    layout: Layout,
    kind: PatternKind,
    distortion: float,
    silent_fraction: float,
    f_p: float,
    run: int,
    master_seed: int,
) -> dict:
    return {
        "rule": rule.value,
        "arch": layout.architecture.value,
        "kind": kind.value,
        "H": layout.H,
        "M": layout.M,
        "N": layout.N,
        "K": layout.K,
        "distort": distortion,
        "silent_frac": silent_fraction,
        "f_p": f_p,
        "run": run,
        "seed": master_seed,
    }


def _storage_task(
    spec: SweepSpec,
    rule: Rule,
    arch: Architecture,
    kind: PatternKind,
    H: int,
    M: int,
    run: int,
    verb: str = "capacity",
    distortion: float | None = None,
    silent_fraction: float | None = None,
    resample_frac_of_eligible: float | None = None,
) -> CapacityTask:
    distortion = spec.distortion if distortion is None else distortion
    silent_fraction = (
        spec.silent_fraction if silent_fraction is None else silent_fraction
    )
    layout = Layout(arch, H, M)
    cfg = NetworkConfig(
        layout=layout,
        rule=rule,
        max_iterations=spec.max_iterations,
        zero_diagonal=spec.zero_diagonal,
    )
    trial = TrialSpec(
        cfg=cfg,
        pattern_spec=PatternSpec(
            kind, silent_fraction=silent_fraction, f_p=spec.f_p
        ),
        n_resample=distortion * H,
        recall_threshold=spec.recall_threshold,
        resample_frac_of_eligible=resample_frac_of_eligible,
    )
    p0 = spec.p0_override if spec.p0_override is not None else default_p0(trial)
    params = BisectionParams(p0=p0, max_sim_calls=spec.max_sim_calls)
    key = (
        verb,
        rule.value,
        arch.value,
        kind.value,
        H,
        M,
        float(distortion),
        float(silent_fraction),
        float(spec.f_p),
        run,
        "bisect",
    )
    row = _capacity_row_base(
        rule, layout, kind, distortion, silent_fraction, spec.f_p, run, spec.master_seed
    )
    return CapacityTask(
        key=key,
        mode="storage",
        params=params,
        master_seed=spec.master_seed,
        row_base=row,
        trial=trial,
    )


def storage_scaling(spec: SweepSpec) -> list[dict]:
    """Capacity rows over the full (rule, arch, kind, size) grid; kinds
    incompatible with an architecture are skipped."""
    tasks = []
    for rule, arch, kind, (H, M) in itertools.product(
        spec.rules, spec.architectures, spec.kinds, spec.sizes
    ):
        if not kind_fits_architecture(kind, arch):
            continue
        for run in range(spec.runs):
            tasks.append(_storage_task(spec, rule, arch, kind, H, M, run))
    rows = run_tasks(tasks, spec.workers)
    return aggregate_rows(rows)


def distortion_sweep(
    rule: Rule,
    sizes: list[tuple[int, int]],
    levels: list[float],
    runs: int,
    master_seed: int,
    arch: Architecture = Architecture.MODULAR,
    workers: int = 1,
    **sweep_kwargs,
) -> tuple[list[dict], list[dict]]:
    """Capacity vs test distortion, plus a bits-per-weight fit per level.

    Levels must be positive: undistorted cues sit in their own attractor
    basin, so the zero-distortion capacity is not measurable this way.
    """
    if any(level <= 0 for level in levels):
        raise ValueError("distortion levels must be positive")
    kind = standard_kind(arch)
    spec = SweepSpec(
        rules=[rule],
        architectures=[arch],
        kinds=[kind],
        sizes=sizes,
        runs=runs,
        master_seed=master_seed,
        workers=workers,
        **sweep_kwargs,
    )
    tasks = []
    for (H, M), level, run in itertools.product(sizes, levels, range(runs)):
        tasks.append(
            _storage_task(
                spec, rule, arch, kind, H, M, run,
                verb="sweep-distort", distortion=level,
            )
        )
    rows = aggregate_rows(run_tasks(tasks, workers))
    fit_rows = []
    for level in sorted(levels):
        points = []
        for row in rows:
            if row["run"] != "mean" or float(row["distort"]) != float(level):
                continue
            if row["P90"] == ERROR_MARKER:
                continue
            layout = Layout(arch, int(row["H"]), int(row["M"]))
            points.append(analysis.CapacityPoint(layout, float(row["P90"])))
        if not points:
            continue
        fit = analysis.fit_bits_per_weight(points)
        fit_rows.append(
            {
                "rule": rule.value,
                "arch": arch.value,
                "distort": level,
                "I_w": fit.i_w,
                "residual": fit.residual,
                "n_points": fit.n_points,
            }
        )
    return rows, fit_rows


def silent_sweep(
    rules: list[Rule],
    fractions: list[float],
    runs: int,
    master_seed: int,
    H: int = 19,
    M: int = 19,
    arch: Architecture = Architecture.MODULAR,
    distort_frac_of_active: float = 0.10,
    workers: int = 1,
    **sweep_kwargs,
) -> list[dict]:
    """Capacity of silent-format patterns over silent fractions; probes
    resample the given fraction of each pattern's own active blocks."""
    if any(not 0 <= f < 1 for f in fractions):
        raise ValueError("silent fractions must lie in [0, 1)")
    spec = SweepSpec(
        rules=rules,
        architectures=[arch],
        kinds=[PatternKind.SILENT],
        sizes=[(H, M)],
        distortion=distort_frac_of_active,
        runs=runs,
        master_seed=master_seed,
        workers=workers,
        **sweep_kwargs,
    )
    tasks = []
    for rule, frac, run in itertools.product(rules, fractions, range(runs)):
        tasks.append(
            _storage_task(
                spec, rule, arch, PatternKind.SILENT, H, M, run,
                verb="sweep-silent", silent_fraction=frac,
                resample_frac_of_eligible=distort_frac_of_active,
            )
        )
    return aggregate_rows(run_tasks(tasks, workers))


def default_watched_pairs(n_units: int, count: int = 40) -> list[tuple[int, int]]:
    """Evenly spaced (pre, post) index pairs across the weight matrix."""
    flat = np.linspace(0, n_units * n_units - 1, num=count).round().astype(int)
    return [divmod(int(f), n_units) for f in flat]


def weight_trajectories(
    cfg: NetworkConfig,
    training: list[Pattern],
    watched: list[tuple[int, int]] | None = None,
) -> list[dict]:
    """Recompute watched weights after every training pattern."""
    n = cfg.layout.N
    if watched is None:
        watched = default_watched_pairs(n)
    for i, j in watched:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"watched pair ({i}, {j}) outside {n}x{n}")
    state = SynapticState.empty(n)
    rows = []
    for step, pattern in enumerate(training, start=1):
        train_pattern(state, pattern)
        ws = compute_weights(state, cfg.rule, cfg.layout)
        for i, j in watched:
            rows.append(
                {
                    "step": step,
                    "pre_index": i,
                    "post_index": j,
                    "value": float(ws.w[i, j]),
                }
            )
    return rows
