"""Command-line front end: ``lowrank {complete,benchmark,sweep,phase,gen}``.

Exit status is 0 on success, 1 for usage, configuration or input-format
errors and 2 when a solve fails numerically.
"""
import argparse
import datetime
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, LowRankError, NumericalError, ParameterError
from .experiments import (
    SWEEP_BASE,
    ProblemSpec,
    make_problem,
    relative_error,
    run_benchmark,
    run_phase_transition,
    run_sweep,
    comparison_specs,
    uniform_axis,
)
from .io import (
    RunConfig,
    atomic_write,
    benchmark_csv,
    emit_phase_pgm,
    load_config,
    phase_csv,
    read_matrix,
    read_observations,
    sweep_csv,
    write_json,
    write_matrix,
    write_observations,
)
from .operators import make_sampling_operator
from .solvers import ThresholdSchedule, solve

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n\n{self.format_help()}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _auto_float(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")


def _spec_arg(text):
    """``N1xN2:RANK:FRACTION``, e.g. ``500x500:10:0.15``."""
    try:
        dims, rank, frac = text.split(":")
        n1, n2 = dims.lower().split("x")
        return int(n1), int(n2), int(rank), float(frac)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected N1xN2:RANK:FRACTION (e.g. 500x500:10:0.15), got {text!r}"
        )


def _add_common(p):
    p.add_argument("--config", help="YAML/JSON run configuration")
    g = p.add_argument_group("solver")
    g.add_argument("--scale-b", type=_auto_float, help="initial threshold (or 'auto')")
    g.add_argument("--decay-a", type=_auto_float, help="threshold decay rate (or 'auto')")
    g.add_argument("--step-size", type=float, help="constant step size delta")
    g.add_argument("--max-iters", type=int, help="iteration budget K")
    g.add_argument("--tolerance", type=_auto_float, help="stopping tolerance (or 'auto')")
    g.add_argument("--svt-tau", type=_auto_float, help="SVT fixed threshold (or 'auto')")
    g.add_argument("--stop", choices=("absolute", "relative"))
    g.add_argument("--update", choices=("gradient", "accumulate"))
    g.add_argument("--residual-gate", type=_auto_float,
                   help="relative residual required to stop ('auto' = 1e-2, 0 = off)")


def build_parser():
    parser = _Parser(prog="lowrank", description="Low-rank matrix recovery toolkit.")
    parser.add_argument("--version", action="version", version=f"lowrank {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("complete", help="recover a matrix from an observation file")
    _add_common(p)
    p.add_argument("observations", help="observation file (n1 n2 m / row col value)")
    p.add_argument("-o", "--output", required=True, help="recovered matrix file")
    p.add_argument("--algorithm", choices=("asvt", "svt"), default="asvt")
    p.add_argument("--truth", help="ground-truth matrix file; prints the relative error")
    p.add_argument("--json", help="write a run summary sidecar")

    p = sub.add_parser("benchmark", help="ASVT vs SVT comparison runs -> CSV")
    _add_common(p)
    p.add_argument("--spec", action="append", type=_spec_arg, metavar="N1xN2:R:FRAC",
                   help="problem spec, repeatable (default: desk-scale table rows)")
    p.add_argument("--large", action="store_true", help="include rows of size >= 1500")
    p.add_argument("--algorithms", help="comma-separated subset of asvt,svt")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("--json", help="write a run summary sidecar")
    p.add_argument("--timing", action="store_true", default=None,
                   help="fill wall_time_ms (output no longer byte-reproducible)")

    p = sub.add_parser("sweep", help="ASVT parameter sweep -> CSV")
    _add_common(p)
    p.add_argument("--param", choices=("decay_a", "step_size"))
    p.add_argument("--values", type=_float_list, help="comma-separated values")
    p.add_argument("--base", type=_spec_arg, metavar="N1xN2:R:FRAC",
                   help="base problem (default 300x300:10:0.3333)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("--json", help="write a run summary sidecar")
    p.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                   help="leave wall_time_ms empty")

    p = sub.add_parser("phase", help="phase-transition grid -> CSV + PGM")
    _add_common(p)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--resolution", type=int, help="points per axis on (0, 1]")
    p.add_argument("--sampling", type=_float_list, help="explicit m/(n1 n2) axis")
    p.add_argument("--freedom", type=_float_list, help="explicit d_r/m axis")
    p.add_argument("--trials", type=int, help="trials per cell")
    p.add_argument("--threshold", type=float, help="success threshold on relative error")
    p.add_argument("--algorithm", choices=("asvt", "svt"))
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("--pgm", help="grayscale image of the grid")
    p.add_argument("--json", help="write a run summary sidecar")

    p = sub.add_parser("gen", help="write a random completion problem to files")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--fraction", type=float)
    g.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", help="directory for the output files")
    p.add_argument("--prefix", default="problem", help="file name prefix")
    return parser


def _solver_cfg(args, run):
    cfg = run.solver
    scale_b, decay_a = cfg.schedule.scale_b, cfg.schedule.decay_a
    if args.scale_b is not None:
        scale_b = None if args.scale_b == "auto" else args.scale_b
    if args.decay_a is not None:
        decay_a = None if args.decay_a == "auto" else args.decay_a
    changes = {"schedule": ThresholdSchedule(scale_b, decay_a)}
    if args.step_size is not None:
        changes["step_size"] = args.step_size
    if args.max_iters is not None:
        changes["max_iters"] = args.max_iters
    for name in ("tolerance", "svt_tau"):
        v = getattr(args, name)
        if v is not None:
            changes[name] = None if v == "auto" else v
    for name in ("stop", "update"):
        v = getattr(args, name)
        if v is not None:
            changes[name] = v
    if args.residual_gate is not None:
        g = args.residual_gate
        changes["residual_gate"] = 1e-2 if g == "auto" else (None if g == 0 else g)
    return cfg.replace(**changes)


def _pick(*values):
    for v in values:
        if v is not None:
            return v
    return None


def _emit(text, path):
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _summary(command, run, cfg, extra):
    return {
        "command": command,
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": run.source,
        "seed": run.seed,
        "solver": {
            "scale_b": cfg.schedule.scale_b,
            "decay_a": cfg.schedule.decay_a,
            "step_size": cfg.step_size,
            "max_iters": cfg.max_iters,
            "tolerance": cfg.tolerance,
            "svt_tau": cfg.svt_tau,
            "stop": cfg.stop,
            "update": cfg.update,
            "residual_gate": cfg.residual_gate,
        },
        **extra,
    }


def _record_dict(r):
    return {
        "n1": r.spec.n1, "n2": r.spec.n2, "rank": r.spec.rank,
        "sample_fraction": r.spec.sample_fraction, "algorithm": r.algorithm,
        "trial": r.trial, "seed": r.seed, "iterations": r.iterations,
        "relative_error": r.relative_error, "wall_time_ms": r.wall_time_ms,
        "converged": r.converged, "note": r.note, "param": r.param, "value": r.value,
    }


def cmd_complete(args, run):
    cfg = _solver_cfg(args, run)
    obs, b = read_observations(args.observations)
    op = make_sampling_operator(obs)
    result = solve(args.algorithm, op, b, cfg)
    write_matrix(args.output, result.x_hat)
    line = (f"{args.algorithm}: {result.iterations_run} iterations, "
            f"converged={str(result.converged).lower()}")
    extra = {"iterations": result.iterations_run, "converged": result.converged,
             "scale_b": result.resolved_scale_b, "decay_a": result.resolved_decay_a,
             "wall_time_ms": result.wall_time_ms}
    if args.truth:
        truth = read_matrix(args.truth)
        re = relative_error(truth, result.x_hat)
        line += f", relative_error={re:.6e}"
        extra["relative_error"] = re
    print(line, file=sys.stderr)
    if args.json:
        write_json(args.json, _summary("complete", run, cfg, extra))
    return EXIT_OK


def cmd_benchmark(args, run):
    cfg = _solver_cfg(args, run)
    seed = _pick(args.seed, run.seed)
    if args.spec:
        specs = [ProblemSpec(n1, n2, r, fraction=f, seed=seed) for n1, n2, r, f in args.spec]
    elif run.specs:
        specs = [ProblemSpec(s.n1, s.n2, s.rank, s.fraction, s.samples, seed) for s in run.specs]
    else:
        specs = comparison_specs(large=args.large or run.large, seed=seed)
    algorithms = tuple(args.algorithms.split(",")) if args.algorithms else run.algorithms
    trials = _pick(args.trials, run.trials, 1)
    timing = bool(_pick(args.timing, run.output.get("timing"), False))
    records = run_benchmark(specs, algorithms, cfg, trials)
    _emit(benchmark_csv(records, timing=timing), _pick(args.output, run.output.get("csv")))
    json_path = _pick(args.json, run.output.get("json"))
    if json_path:
        write_json(json_path, _summary("benchmark", run, cfg,
                                       {"records": [_record_dict(r) for r in records]}))
    return EXIT_OK


def cmd_sweep(args, run):
    cfg = _solver_cfg(args, run)
    seed = _pick(args.seed, run.seed)
    sw = run.sweep
    if args.base:
        n1, n2, r, f = args.base
        base = ProblemSpec(n1, n2, r, fraction=f, seed=seed)
    elif "base" in sw:
        b = sw["base"]
        base = ProblemSpec(b.n1, b.n2, b.rank, b.fraction, b.samples, seed)
    else:
        base = ProblemSpec(SWEEP_BASE.n1, SWEEP_BASE.n2, SWEEP_BASE.rank,
                           fraction=SWEEP_BASE.fraction, seed=seed)
    param = _pick(args.param, sw.get("param"))
    values = _pick(args.values, sw.get("values"))
    if param is None or not values:
        raise UsageError("sweep: --param and --values are required (or set them in the config)")
    trials = _pick(args.trials, sw.get("trials"), run.trials, 1)
    timing = bool(_pick(args.timing, run.output.get("timing"), True))
    records = run_sweep(base, param, values, cfg, trials)
    _emit(sweep_csv(records, timing=timing), _pick(args.output, run.output.get("csv")))
    json_path = _pick(args.json, run.output.get("json"))
    if json_path:
        write_json(json_path, _summary("sweep", run, cfg,
                                       {"records": [_record_dict(r) for r in records]}))
    return EXIT_OK


def cmd_phase(args, run):
    cfg = _solver_cfg(args, run)
    ph = run.phase
    n1 = _pick(args.n1, ph.get("n1"), 80)
    n2 = _pick(args.n2, ph.get("n2"), n1)
    resolution = _pick(args.resolution, ph.get("resolution"), 20)
    sampling = _pick(args.sampling, ph.get("sampling")) or uniform_axis(resolution)
    freedom = _pick(args.freedom, ph.get("freedom")) or uniform_axis(resolution)
    grid = run_phase_transition(
        n1, n2, sampling, freedom,
        trials_per_cell=_pick(args.trials, ph.get("trials_per_cell"), 100),
        success_threshold=_pick(args.threshold, ph.get("success_threshold"), 1e-3),
        cfg=cfg,
        seed=_pick(args.seed, run.seed),
        algorithm=_pick(args.algorithm, ph.get("algorithm"), "asvt"),
    )
    _emit(phase_csv(grid), _pick(args.output, run.output.get("csv")))
    pgm = _pick(args.pgm, run.output.get("pgm"))
    if pgm:
        emit_phase_pgm(pgm, grid)
    json_path = _pick(args.json, run.output.get("json"))
    if json_path:
        write_json(json_path, _summary("phase", run, cfg, {
            "n1": n1, "n2": n2, "cells": grid.cells,
            "axis_sampling": grid.axis_sampling, "axis_freedom": grid.axis_freedom,
        }))
    return EXIT_OK


def cmd_gen(args, run):
    spec = ProblemSpec(args.n1, args.n2, args.rank, fraction=args.fraction,
                       samples=args.samples, seed=args.seed)
    problem = make_problem(spec, spec.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / f"{args.prefix}_truth.txt", problem.matrix)
    write_observations(out / f"{args.prefix}_obs.txt", problem.obs, problem.b)
    return EXIT_OK


COMMANDS = {
    "complete": cmd_complete,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "phase": cmd_phase,
    "gen": cmd_gen,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        config_path = getattr(args, "config", None)
        run = load_config(config_path) if config_path else RunConfig()
        return COMMANDS[args.command](args, run)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        name = exc.filename or str(exc)
        print(f"lowrank: error: file not found: {name}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"lowrank: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FormatError, ParameterError, LowRankError, ValueError) as exc:
        print(f"lowrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
