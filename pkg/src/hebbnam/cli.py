"""Command-line surface: pattern dumps, capacity and prototype benchmarks,
distortion and silent-fraction sweeps, weight trajectories, and scaling fits.

Every CSV starts with a '#' comment echoing the verb and all flags that
shape its content (output path and worker count excluded), so any file can
be regenerated bit-identically. Outputs are rendered in memory and written
in one shot; failed invocations never leave partial files.
"""
from __future__ import annotations

import argparse
import csv
import io
import shlex
import sys
from collections.abc import Sequence

from .evaluation import BisectionParams, default_p0
from .experiments import (
    CAPACITY_FIELDS,
    ERROR_MARKER,
    FIT_FIELDS,
    TRAJECTORY_FIELDS,
    CapacityTask,
    PrototypeSpec,
    SweepSpec,
    aggregate_rows,
    default_watched_pairs,
    distortion_sweep,
    prototype_trial_spec,
    run_tasks,
    silent_sweep,
    storage_scaling,
    weight_trajectories,
)
from .network import NetworkConfig
from .patterns import (
    Architecture,
    Layout,
    PatternKind,
    PatternSpec,
    generate_hrand,
    generate_patterns,
    kind_fits_architecture,
    sample_parent,
    standard_kind,
)
from .plasticity import Rule
from .rng import RngStream, stream_for

RULE_NAMES = [r.value for r in Rule]
ARCH_NAMES = [a.value for a in Architecture]
KIND_NAMES = [k.value for k in PatternKind]

DESCRIPTION = "Associative-memory benchmarks for six Hebbian learning rules."


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


def seed_derivation(master_seed: int, cell_key: Sequence) -> RngStream:
    """Stream for a sweep cell, stable across releases and worker counts."""
    return stream_for(master_seed, *cell_key)


def _emit(out_path: str, text: str) -> None:
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def render_csv(echo_argv: list[str], fieldnames: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("# " + shlex.join(echo_argv) + "\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _parse_size_flags(args) -> list[tuple[int, int]]:
    if getattr(args, "sizes", None):
        return [(h, h) for h in args.sizes]
    return [tuple(args.hm)]


def _resolve_kinds(pattern_names: list[str], archs: list[Architecture]) -> list[PatternKind]:
    kinds: list[PatternKind] = []
    for name in pattern_names:
        if name == "auto":
            kinds.extend(standard_kind(a) for a in archs)
        else:
            kinds.append(PatternKind(name))
    seen: list[PatternKind] = []
    for k in kinds:
        if k not in seen:
            seen.append(k)
    return seen


def _check_cells(kinds, archs) -> None:
    if not any(kind_fits_architecture(k, a) for k in kinds for a in archs):
        raise UsageError(
            "no compatible (architecture, pattern) cells; modular takes "
            "hrand/silent/chrand, non-modular takes nrand/silent/cnrand"
        )


def _float_arg(value: float) -> str:
    return str(value)


# ---------------------------------------------------------------- gen


def _run_gen(args) -> int:
    kind = PatternKind(args.pattern)
    arch = Architecture(args.arch) if args.arch else _default_arch(kind)
    H, M = args.hm
    layout = Layout(arch, H, M)
    if not kind_fits_architecture(kind, arch):
        raise UsageError(f"{kind.value} patterns do not fit the {arch.value} architecture")
    rng = seed_derivation(
        args.seed, ("gen", kind.value, arch.value, H, M, args.count)
    )
    spec = PatternSpec(kind, silent_fraction=args.silent_frac, f_p=args.fp)
    if kind in (PatternKind.CNRAND, PatternKind.CHRAND):
        spec = spec.with_parent(sample_parent(layout, kind, rng))
    pats = generate_patterns(layout, spec, args.count, rng)
    lines = []
    for p in pats:
        chars = "".join("1" if b else "0" for b in p.bits)
        if args.pretty:
            chars = "|".join(
                chars[h * M : (h + 1) * M] for h in range(H)
            )
        lines.append(chars)
    _emit(args.out, "\n".join(lines) + "\n")
    return 0


def _default_arch(kind: PatternKind) -> Architecture:
    if kind in (PatternKind.NRAND, PatternKind.CNRAND):
        return Architecture.NON_MODULAR
    return Architecture.MODULAR


# ---------------------------------------------------------------- capacity


def _capacity_echo(verb: str, args) -> list[str]:
    echo = [verb, "--rule", *args.rule, "--arch", *args.arch, "--pattern", *args.pattern]
    if getattr(args, "sizes", None):
        echo += ["--sizes", *map(str, args.sizes)]
    else:
        echo += ["--hm", *map(str, args.hm)]
    if verb == "prototype":
        echo += ["--ninst", str(args.ninst)]
        echo += ["--train-distort", _float_arg(args.train_distort)]
        echo += ["--test-distort", _float_arg(args.test_distort)]
    echo += [
        "--distort", _float_arg(args.distort),
        "--silent-frac", _float_arg(args.silent_frac),
        "--fp", _float_arg(args.fp),
        "--runs", str(args.runs),
        "--threshold", _float_arg(args.threshold),
        "--max-iter", str(args.max_iter),
        "--max-sim-calls", str(args.max_sim_calls),
        "--seed", str(args.seed),
    ]
    if args.p0 is not None:
        echo += ["--p0", str(args.p0)]
    if args.zero_diagonal:
        echo += ["--zero-diagonal"]
    return echo


def _run_capacity(args) -> int:
    rules = [Rule(r) for r in args.rule]
    archs = [Architecture(a) for a in args.arch]
    kinds = _resolve_kinds(args.pattern, archs)
    _check_cells(kinds, archs)
    spec = SweepSpec(
        rules=rules,
        architectures=archs,
        kinds=kinds,
        sizes=_parse_size_flags(args),
        distortion=args.distort,
        silent_fraction=args.silent_frac,
        f_p=args.fp,
        runs=args.runs,
        master_seed=args.seed,
        recall_threshold=args.threshold,
        max_iterations=args.max_iter,
        zero_diagonal=args.zero_diagonal,
        max_sim_calls=args.max_sim_calls,
        p0_override=args.p0,
        workers=args.workers,
    )
    rows = storage_scaling(spec)
    _emit(args.out, render_csv(_capacity_echo("capacity", args), CAPACITY_FIELDS, rows))
    return 0


# ---------------------------------------------------------------- prototype


def _run_prototype(args) -> int:
    rules = [Rule(r) for r in args.rule]
    archs = [Architecture(a) for a in args.arch]
    kinds = _resolve_kinds(args.pattern, archs)
    _check_cells(kinds, archs)
    sizes = _parse_size_flags(args)
    tasks = []
    for rule in rules:
        for arch in archs:
            for kind in kinds:
                if not kind_fits_architecture(kind, arch):
                    continue
                for H, M in sizes:
                    layout = Layout(arch, H, M)
                    pspec = PatternSpec(
                        kind, silent_fraction=args.silent_frac, f_p=args.fp
                    )
                    proto = PrototypeSpec(
                        Q=1,
                        layout=layout,
                        rule=rule,
                        ninst=args.ninst,
                        train_resample=args.train_distort * H,
                        test_resample=args.test_distort * H,
                        pattern_spec=pspec,
                        max_iterations=args.max_iter,
                        zero_diagonal=args.zero_diagonal,
                    )
                    p0 = args.p0 if args.p0 is not None else default_p0(
                        prototype_trial_spec(proto, args.threshold)
                    )
                    params = BisectionParams(p0=p0, max_sim_calls=args.max_sim_calls)
                    for run in range(args.runs):
                        key = (
                            "prototype", rule.value, arch.value, kind.value,
                            H, M, float(args.train_distort), float(args.test_distort),
                            float(args.silent_frac), float(args.fp), args.ninst,
                            run, "bisect",
                        )
                        row = {
                            "rule": rule.value,
                            "arch": arch.value,
                            "kind": kind.value,
                            "H": H,
                            "M": M,
                            "N": layout.N,
                            "K": layout.K,
                            "distort": args.test_distort,
                            "silent_frac": args.silent_frac,
                            "f_p": args.fp,
                            "run": run,
                            "seed": args.seed,
                        }
                        tasks.append(
                            CapacityTask(
                                key=key,
                                mode="prototype",
                                params=params,
                                master_seed=args.seed,
                                row_base=row,
                                proto=proto,
                                threshold=args.threshold,
                            )
                        )
    rows = aggregate_rows(run_tasks(tasks, args.workers))
    _emit(args.out, render_csv(_capacity_echo("prototype", args), CAPACITY_FIELDS, rows))
    return 0


# ---------------------------------------------------------------- sweeps


def _run_sweep_distort(args) -> int:
    rule = Rule(args.rule)
    arch = Architecture(args.arch)
    sizes = _parse_size_flags(args)
    rows, fit_rows = distortion_sweep(
        rule,
        sizes,
        levels=args.levels,
        runs=args.runs,
        master_seed=args.seed,
        arch=arch,
        workers=args.workers,
        recall_threshold=args.threshold,
        max_iterations=args.max_iter,
        max_sim_calls=args.max_sim_calls,
    )
    echo = ["sweep-distort", "--rule", args.rule, "--arch", args.arch]
    if getattr(args, "sizes", None):
        echo += ["--sizes", *map(str, args.sizes)]
    else:
        echo += ["--hm", *map(str, args.hm)]
    echo += [
        "--levels", *map(_float_arg, args.levels),
        "--runs", str(args.runs),
        "--threshold", _float_arg(args.threshold),
        "--max-iter", str(args.max_iter),
        "--max-sim-calls", str(args.max_sim_calls),
        "--seed", str(args.seed),
    ]
    _emit(args.out, render_csv(echo, CAPACITY_FIELDS, rows))
    fit_out = args.fit_out or (args.out + ".fit.csv" if args.out != "-" else "-")
    fit_fields = ["rule", "arch", "distort", "I_w", "residual", "n_points"]
    _emit(fit_out, render_csv(echo + ["(fit)"], fit_fields, fit_rows))
    return 0


def _run_sweep_silent(args) -> int:
    rules = [Rule(r) for r in args.rule]
    H, M = args.hm
    rows = silent_sweep(
        rules,
        fractions=args.fractions,
        runs=args.runs,
        master_seed=args.seed,
        H=H,
        M=M,
        distort_frac_of_active=args.distort,
        workers=args.workers,
        recall_threshold=args.threshold,
        max_iterations=args.max_iter,
        max_sim_calls=args.max_sim_calls,
    )
    echo = [
        "sweep-silent", "--rule", *args.rule,
        "--hm", *map(str, args.hm),
        "--fractions", *map(_float_arg, args.fractions),
        "--distort", _float_arg(args.distort),
        "--runs", str(args.runs),
        "--threshold", _float_arg(args.threshold),
        "--max-iter", str(args.max_iter),
        "--max-sim-calls", str(args.max_sim_calls),
        "--seed", str(args.seed),
    ]
    _emit(args.out, render_csv(echo, CAPACITY_FIELDS, rows))
    return 0


# ---------------------------------------------------------------- trajectory


def _run_trajectory(args) -> int:
    rule = Rule(args.rule)
    H, M = args.hm
    layout = Layout(Architecture.MODULAR, H, M)
    cfg = NetworkConfig(layout=layout, rule=rule, max_iterations=args.max_iter)
    rng = seed_derivation(args.seed, ("trajectory", "patterns", H, M, args.npatterns))
    training = [generate_hrand(layout, rng) for _ in range(args.npatterns)]
    rows = weight_trajectories(
        cfg, training, default_watched_pairs(layout.N, args.pairs)
    )
    echo = [
        "trajectory", "--rule", args.rule,
        "--hm", *map(str, args.hm),
        "--npatterns", str(args.npatterns),
        "--pairs", str(args.pairs),
        "--max-iter", str(args.max_iter),
        "--seed", str(args.seed),
    ]
    _emit(args.out, render_csv(echo, TRAJECTORY_FIELDS, rows))
    return 0


# ---------------------------------------------------------------- fit


def read_capacity_csv(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _run_fit(args) -> int:
    from .analysis import CapacityPoint, fit_bits_per_weight

    rows = read_capacity_csv(args.infile)
    means = [r for r in rows if r["run"] == "mean" and r["P90"] != ERROR_MARKER]
    if not means:
        raise UsageError(f"no aggregate rows to fit in {args.infile}")
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in means:
        groups.setdefault((row["rule"], row["arch"]), []).append(row)
    fit_rows = []
    for (rule, arch), cell_rows in sorted(groups.items()):
        kinds = {r["kind"] for r in cell_rows}
        if len(kinds) > 1:
            raise UsageError(
                f"group ({rule}, {arch}) mixes pattern kinds {sorted(kinds)}"
            )
        sizes = [(int(r["H"]), int(r["M"])) for r in cell_rows]
        if len(set(sizes)) != len(sizes):
            raise UsageError(
                f"group ({rule}, {arch}) has multiple cells per size; "
                "fit expects one capacity per network size"
            )
        points = [
            CapacityPoint(
                Layout(Architecture(arch), int(r["H"]), int(r["M"])), float(r["P90"])
            )
            for r in cell_rows
        ]
        fit = fit_bits_per_weight(points)
        fit_rows.append(
            {
                "rule": rule,
                "arch": arch,
                "I_w": fit.i_w,
                "residual": fit.residual,
                "n_points": fit.n_points,
            }
        )
    echo = ["fit", "--in", args.infile]
    _emit(args.out, render_csv(echo, FIT_FIELDS, fit_rows))
    return 0


# ---------------------------------------------------------------- parser


def _add_common_capacity_flags(sp, default_runs: int = 5) -> None:
    sp.add_argument("--distort", type=float, default=0.10,
                    help="fraction of hypercolumns resampled in test cues")
    sp.add_argument("--silent-frac", type=float, default=0.25,
                    help="fraction of silent hypercolumns (silent patterns)")
    sp.add_argument("--fp", type=float, default=0.10,
                    help="correlation parameter for c-type patterns")
    sp.add_argument("--runs", type=int, default=default_runs,
                    help="independent bisection runs per cell")
    sp.add_argument("--threshold", type=float, default=90.0,
                    help="exact-recall percentage defining capacity")
    sp.add_argument("--max-iter", type=int, default=10,
                    help="recall iteration cap")
    sp.add_argument("--zero-diagonal", action="store_true",
                    help="zero self-connections during recall")
    sp.add_argument("--p0", type=int, default=None,
                    help="bisection start (default: model estimate)")
    sp.add_argument("--max-sim-calls", type=int, default=500,
                    help="simulation budget per bisection run")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--workers", type=int, default=1,
                    help="parallel worker processes")
    sp.add_argument("--out", required=True, help="output CSV path ('-' = stdout)")


def _add_size_flags(sp, default_hm: tuple[int, int] | None = None) -> None:
    group = sp.add_mutually_exclusive_group(required=default_hm is None)
    group.add_argument("--hm", type=int, nargs=2, metavar=("H", "M"),
                       default=list(default_hm) if default_hm else None,
                       help="hypercolumns and units per hypercolumn")
    group.add_argument("--sizes", type=int, nargs="+", metavar="H",
                       help="square sizes H (=M), one cell per size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hebbnam", description=DESCRIPTION)
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("gen", help="dump generated patterns as text grids")
    gen.add_argument("--pattern", required=True, choices=KIND_NAMES)
    gen.add_argument("--hm", type=int, nargs=2, metavar=("H", "M"), default=[16, 16])
    gen.add_argument("--arch", choices=ARCH_NAMES, default=None,
                     help="architecture (default: inferred from pattern kind)")
    gen.add_argument("--count", type=int, default=40)
    gen.add_argument("--silent-frac", type=float, default=0.25)
    gen.add_argument("--fp", type=float, default=0.10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--pretty", action="store_true",
                     help="mark hypercolumn boundaries with '|'")
    gen.add_argument("--out", default="-")
    gen.set_defaults(func=_run_gen)

    cap = sub.add_parser("capacity", help="pattern storage capacity (P90)")
    cap.add_argument("--rule", nargs="+", required=True, choices=RULE_NAMES)
    cap.add_argument("--arch", nargs="+", choices=ARCH_NAMES, default=["modular"])
    cap.add_argument("--pattern", nargs="+", choices=KIND_NAMES + ["auto"],
                     default=["auto"])
    _add_size_flags(cap)
    _add_common_capacity_flags(cap)
    cap.set_defaults(func=_run_capacity)

    proto = sub.add_parser("prototype", help="prototype extraction capacity (Q90)")
    proto.add_argument("--rule", nargs="+", required=True, choices=RULE_NAMES)
    proto.add_argument("--arch", nargs="+", choices=ARCH_NAMES, default=["modular"])
    proto.add_argument("--pattern", nargs="+", choices=KIND_NAMES + ["auto"],
                       default=["auto"])
    _add_size_flags(proto)
    proto.add_argument("--ninst", type=int, default=10,
                       help="training instances per prototype")
    proto.add_argument("--train-distort", type=float, default=None,
                       help="instance distortion (default: --distort)")
    proto.add_argument("--test-distort", type=float, default=None,
                       help="probe distortion (default: --distort)")
    _add_common_capacity_flags(proto)
    proto.set_defaults(func=_run_prototype)

    swd = sub.add_parser("sweep-distort", help="capacity vs test distortion")
    swd.add_argument("--rule", choices=RULE_NAMES, default="bcpnn")
    swd.add_argument("--arch", choices=ARCH_NAMES, default="modular")
    _add_size_flags(swd)
    swd.add_argument("--levels", type=float, nargs="+", required=True,
                     help="distortion fractions (must be > 0)")
    swd.add_argument("--runs", type=int, default=5)
    swd.add_argument("--threshold", type=float, default=90.0)
    swd.add_argument("--max-iter", type=int, default=10)
    swd.add_argument("--max-sim-calls", type=int, default=500)
    swd.add_argument("--seed", type=int, default=0)
    swd.add_argument("--workers", type=int, default=1)
    swd.add_argument("--out", required=True)
    swd.add_argument("--fit-out", default=None,
                     help="bits-per-weight per level (default: <out>.fit.csv)")
    swd.set_defaults(func=_run_sweep_distort)

    sws = sub.add_parser("sweep-silent", help="capacity vs silent fraction")
    sws.add_argument("--rule", nargs="+", choices=RULE_NAMES, default=RULE_NAMES)
    sws.add_argument("--hm", type=int, nargs=2, metavar=("H", "M"), default=[19, 19])
    sws.add_argument("--fractions", type=float, nargs="+", required=True)
    sws.add_argument("--distort", type=float, default=0.10,
                     help="fraction of each pattern's active hypercolumns resampled")
    sws.add_argument("--runs", type=int, default=5)
    sws.add_argument("--threshold", type=float, default=90.0)
    sws.add_argument("--max-iter", type=int, default=10)
    sws.add_argument("--max-sim-calls", type=int, default=500)
    sws.add_argument("--seed", type=int, default=0)
    sws.add_argument("--workers", type=int, default=1)
    sws.add_argument("--out", required=True)
    sws.set_defaults(func=_run_sweep_silent)

    traj = sub.add_parser("trajectory", help="weight values after each pattern")
    traj.add_argument("--rule", required=True, choices=RULE_NAMES)
    traj.add_argument("--hm", type=int, nargs=2, metavar=("H", "M"), default=[10, 10])
    traj.add_argument("--npatterns", type=int, default=60)
    traj.add_argument("--pairs", type=int, default=40)
    traj.add_argument("--max-iter", type=int, default=10)
    traj.add_argument("--seed", type=int, default=0)
    traj.add_argument("--out", default="-")
    traj.set_defaults(func=_run_trajectory)

    fit = sub.add_parser("fit", help="bits-per-weight fit of a capacity CSV")
    fit.add_argument("--in", dest="infile", required=True)
    fit.add_argument("--out", default="-")
    fit.set_defaults(func=_run_fit)

    return parser


def parse_and_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "verb", None) == "prototype":
        if args.train_distort is None:
            args.train_distort = args.distort
        if args.test_distort is None:
            args.test_distort = args.distort
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, not a usage problem
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
