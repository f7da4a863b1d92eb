"""Text file formats, result emission and run-configuration parsing.

Observation file (zero-based, whitespace separated, ``#`` starts a comment)::

    n1 n2 m
    row col value      # m lines

Matrix file::

    n1 n2
    v v ... v          # n1 lines of n2 values

Floats are written with 17 significant digits so 64-bit values survive a
round trip exactly. Every writer goes through a temporary file in the
target directory followed by a rename.
"""
import csv
import errno
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import FormatError, ParameterError
from .experiments import ProblemSpec
from .linalg import as_matrix
from .operators import ObservationSet
from .solvers import SolverConfig, ThresholdSchedule

__all__ = [
    "fmt_float",
    "atomic_write",
    "read_observations",
    "write_observations",
    "read_matrix",
    "write_matrix",
    "BENCHMARK_HEADER",
    "benchmark_csv",
    "sweep_csv",
    "phase_csv",
    "phase_pgm",
    "emit_phase_pgm",
    "write_json",
    "RunConfig",
    "load_config",
    "parse_config",
    "solver_config",
]

BENCHMARK_HEADER = [
    "n1", "n2", "rank", "sample_fraction", "algorithm", "trial",
    "iterations", "relative_error", "wall_time_ms", "converged", "seed",
]
SWEEP_HEADER = [
    "n1", "n2", "rank", "sample_fraction", "param", "value", "trial",
    "iterations", "relative_error", "wall_time_ms", "converged", "seed",
]
PHASE_HEADER = [
    "freedom_index", "sampling_index", "sampling_fraction", "freedom_ratio",
    "rank", "samples", "realized_sampling", "realized_freedom",
    "trials", "successes", "success_probability",
]


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def atomic_write(path, text):
    """Write `text` to `path` via a temporary sibling and ``os.replace``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _content_lines(path):
    """Yield ``(line_number, tokens)`` for non-blank, comment-stripped lines."""
    try:
        text = Path(path).read_text(encoding="ascii")
    except FileNotFoundError:
        raise
    except UnicodeDecodeError as exc:
        raise FormatError("file is not plain ASCII text", path) from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield lineno, tokens


def _parse_int(token, path, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"expected integer {what}, got {token!r}", path, lineno) from None


def _parse_float(token, path, lineno):
    try:
        v = float(token)
    except ValueError:
        raise FormatError(f"expected a number, got {token!r}", path, lineno) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {token!r}", path, lineno)
    return v


def read_observations(path):
    """Parse an observation file into ``(ObservationSet, values)``."""
    lines = _content_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise FormatError("empty observation file", path) from None
    if len(header) != 3:
        raise FormatError("header must be 'n1 n2 m'", path, lineno)
    n1, n2, m = (_parse_int(t, path, lineno, "header field") for t in header)
    if n1 < 1 or n2 < 1:
        raise FormatError(f"dimensions must be positive, got {n1}x{n2}", path, lineno)
    if not 1 <= m <= n1 * n2:
        raise FormatError(f"count m must be in [1, {n1 * n2}], got {m}", path, lineno)

    rows, cols, vals = [], [], []
    seen = {}
    for lineno, tokens in lines:
        if len(tokens) != 3:
            raise FormatError("expected 'row col value'", path, lineno)
        i = _parse_int(tokens[0], path, lineno, "row index")
        j = _parse_int(tokens[1], path, lineno, "column index")
        v = _parse_float(tokens[2], path, lineno)
        if not (0 <= i < n1 and 0 <= j < n2):
            raise FormatError(f"index ({i}, {j}) outside a {n1}x{n2} matrix", path, lineno)
        if (i, j) in seen:
            raise FormatError(
                f"duplicate index ({i}, {j}), first seen on line {seen[(i, j)]}",
                path, lineno,
            )
        if len(rows) == m:
            raise FormatError(f"more than the {m} entries announced in the header", path, lineno)
        seen[(i, j)] = lineno
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if len(rows) != m:
        raise FormatError(f"header announces {m} entries, found {len(rows)}", path)
    return ObservationSet((n1, n2), rows, cols), np.array(vals, dtype=np.float64)


def write_observations(path, obs, values):
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(obs),):
        raise ParameterError(f"need {len(obs)} values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ParameterError("observed values must be finite")
    n1, n2 = obs.dims
    out = [f"{n1} {n2} {len(obs)}"]
    out += [
        f"{i} {j} {fmt_float(v)}"
        for i, j, v in zip(obs.rows.tolist(), obs.cols.tolist(), values.tolist())
    ]
    atomic_write(path, "\n".join(out) + "\n")


def read_matrix(path):
    lines = _content_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise FormatError("empty matrix file", path) from None
    if len(header) != 2:
        raise FormatError("header must be 'n1 n2'", path, lineno)
    n1, n2 = (_parse_int(t, path, lineno, "dimension") for t in header)
    if n1 < 1 or n2 < 1:
        raise FormatError(f"dimensions must be positive, got {n1}x{n2}", path, lineno)
    out = np.empty((n1, n2))
    count = 0
    for lineno, tokens in lines:
        if count == n1:
            raise FormatError(f"more than the {n1} rows announced in the header", path, lineno)
        if len(tokens) != n2:
            raise FormatError(f"expected {n2} values, got {len(tokens)}", path, lineno)
        out[count] = [_parse_float(t, path, lineno) for t in tokens]
        count += 1
    if count != n1:
        raise FormatError(f"header announces {n1} rows, found {count}", path)
    return out


def write_matrix(path, m):
    m = as_matrix(m)
    out = [f"{m.shape[0]} {m.shape[1]}"]
    out += [" ".join(fmt_float(v) for v in row) for row in m.tolist()]
    atomic_write(path, "\n".join(out) + "\n")


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _bool(v):
    return "true" if v else "false"


def benchmark_csv(records, timing=False):
    """CSV text for benchmark records; ``wall_time_ms`` is left empty
    unless `timing` is set, which keeps the output reproducible."""
    rows = []
    for r in records:
        rows.append([
            r.spec.n1, r.spec.n2, r.spec.rank, fmt_float(r.spec.sample_fraction),
            r.algorithm, r.trial, r.iterations, fmt_float(r.relative_error),
            fmt_float(r.wall_time_ms) if timing else "", _bool(r.converged), r.seed,
        ])
    return _csv_text(BENCHMARK_HEADER, rows)


def sweep_csv(records, timing=True):
    rows = []
    for r in records:
        rows.append([
            r.spec.n1, r.spec.n2, r.spec.rank, fmt_float(r.spec.sample_fraction),
            r.param, fmt_float(r.value), r.trial, r.iterations,
            fmt_float(r.relative_error),
            fmt_float(r.wall_time_ms) if timing else "", _bool(r.converged), r.seed,
        ])
    return _csv_text(SWEEP_HEADER, rows)


def phase_csv(grid):
    rows = []
    rs, rf = grid.realized_sampling, grid.realized_freedom
    for i, fr in enumerate(grid.axis_freedom):
        for j, sf in enumerate(grid.axis_sampling):
            rows.append([
                i, j, fmt_float(sf), fmt_float(fr),
                int(grid.ranks[i, j]), int(grid.samples[i, j]),
                fmt_float(rs[i, j]), fmt_float(rf[i, j]),
                grid.trials_per_cell, int(grid.successes[i, j]),
                fmt_float(grid.cells[i, j]),
            ])
    return _csv_text(PHASE_HEADER, rows)


def _pixel(p):
    if math.isnan(p):
        return 0
    return int(math.floor(255.0 * p + 0.5))


def phase_pgm(grid):
    """Plain (P2) PGM text for a phase grid.

    One pixel per cell, ``round(255 * probability)`` with halves rounded up,
    so white is certain recovery. Columns follow the sampling axis left to
    right; rows follow the d_r/m axis with its largest value at the top.
    Skipped cells are black.
    """
    cells = np.asarray(grid.cells, dtype=float)
    if cells.ndim != 2 or cells.size == 0:
        raise ParameterError("phase grid must be a non-empty 2-D array")
    height, width = cells.shape
    lines = ["P2", f"{width} {height}", "255"]
    for i in reversed(range(height)):
        pixels = [str(_pixel(p)) for p in cells[i]]
        line = ""
        for px in pixels:
            if line and len(line) + 1 + len(px) > 70:
                lines.append(line)
                line = px
            else:
                line = f"{line} {px}" if line else px
        lines.append(line)
    return "\n".join(lines) + "\n"


def emit_phase_pgm(path, grid):
    atomic_write(path, phase_pgm(grid))


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# --- run configuration -----------------------------------------------------

_TOP_KEYS = {"seed", "solver", "experiment", "output"}
_SOLVER_KEYS = {
    "scale_b", "decay_a", "step_size", "max_iters", "tolerance", "svt_tau",
    "stop", "update", "residual_gate",
}
_EXPERIMENT_KEYS = {"specs", "large", "algorithms", "trials", "sweep", "phase"}
_SPEC_KEYS = {"n1", "n2", "rank", "fraction", "samples"}
_SWEEP_KEYS = {"base", "param", "values", "trials"}
_PHASE_KEYS = {
    "n1", "n2", "resolution", "sampling", "freedom", "trials_per_cell",
    "success_threshold", "algorithm",
}
_OUTPUT_KEYS = {"csv", "pgm", "json", "timing"}


@dataclass
class RunConfig:
    """Parsed configuration file.

    Only the sections present in the file are populated; the CLI fills the
    rest from its own flags and defaults.
    """

    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    specs: list = None
    large: bool = False
    algorithms: tuple = ("asvt", "svt")
    trials: int = None
    sweep: dict = field(default_factory=dict)
    phase: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = None


def _check_keys(section, allowed, where, path):
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise FormatError(f"section '{where}' must be a mapping", path)
    for key in section:
        if key not in allowed:
            raise FormatError(
                f"unknown key '{key}' in {where} (allowed: {', '.join(sorted(allowed))})",
                path,
            )
    return section


def _auto_or_float(value, name, path):
    if value is None or value == "auto":
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{name} must be a number or 'auto', got {value!r}", path)
    return float(value)


def _pos_int(value, name, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise FormatError(f"{name} must be a positive integer, got {value!r}", path)
    return value


def _spec(entry, where, seed, path):
    entry = _check_keys(entry, _SPEC_KEYS, where, path)
    try:
        return ProblemSpec(
            n1=_pos_int(entry.get("n1"), f"{where}.n1", path),
            n2=_pos_int(entry.get("n2"), f"{where}.n2", path),
            rank=_pos_int(entry.get("rank"), f"{where}.rank", path),
            fraction=entry.get("fraction"),
            samples=entry.get("samples"),
            seed=seed,
        )
    except ParameterError as exc:
        raise FormatError(f"{where}: {exc}", path) from None


def solver_config(section, path=None):
    """Build a SolverConfig from a ``solver`` mapping."""
    s = _check_keys(section, _SOLVER_KEYS, "solver", path)
    kwargs = {}
    schedule = ThresholdSchedule()
    try:
        schedule = ThresholdSchedule(
            _auto_or_float(s.get("scale_b"), "scale_b", path),
            _auto_or_float(s.get("decay_a"), "decay_a", path),
        )
        if "step_size" in s:
            step = s["step_size"]
            if isinstance(step, list):
                kwargs["step_size"] = [float(v) for v in step]
            else:
                kwargs["step_size"] = _auto_or_float(step, "step_size", path)
                if kwargs["step_size"] is None:
                    raise FormatError("step_size cannot be 'auto'", path)
        if "max_iters" in s:
            kwargs["max_iters"] = _pos_int(s["max_iters"], "max_iters", path)
        for key in ("tolerance", "svt_tau"):
            if key in s:
                kwargs[key] = _auto_or_float(s[key], key, path)
        for key in ("stop", "update"):
            if key in s:
                kwargs[key] = str(s[key])
        if "residual_gate" in s:
            gate = s["residual_gate"]
            kwargs["residual_gate"] = None if gate in (None, "off") else _auto_or_float(
                gate, "residual_gate", path
            )
        return SolverConfig(schedule=schedule, **kwargs)
    except ParameterError as exc:
        raise FormatError(f"solver: {exc}", path) from None


def parse_config(doc, path=None):
    """Validate a configuration mapping (as loaded from YAML/JSON)."""
    if doc is None:
        doc = {}
    doc = _check_keys(doc, _TOP_KEYS, "top level", path)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise FormatError(f"seed must be a 64-bit unsigned integer, got {seed!r}", path)
    cfg = RunConfig(seed=seed, source=None if path is None else str(path))
    cfg.solver = solver_config(doc.get("solver"), path)

    exp = _check_keys(doc.get("experiment"), _EXPERIMENT_KEYS, "experiment", path)
    if "specs" in exp:
        if not isinstance(exp["specs"], list) or not exp["specs"]:
            raise FormatError("experiment.specs must be a non-empty list", path)
        cfg.specs = [
            _spec(e, f"experiment.specs[{i}]", seed, path) for i, e in enumerate(exp["specs"])
        ]
    cfg.large = bool(exp.get("large", False))
    if "algorithms" in exp:
        algs = exp["algorithms"]
        if not isinstance(algs, list) or not algs or any(a not in ("asvt", "svt") for a in algs):
            raise FormatError("experiment.algorithms must list 'asvt' and/or 'svt'", path)
        cfg.algorithms = tuple(algs)
    if "trials" in exp:
        cfg.trials = _pos_int(exp["trials"], "experiment.trials", path)

    sweep = _check_keys(exp.get("sweep"), _SWEEP_KEYS, "experiment.sweep", path)
    if sweep:
        out = {}
        if "base" in sweep:
            out["base"] = _spec(sweep["base"], "experiment.sweep.base", seed, path)
        if "param" in sweep:
            if sweep["param"] not in ("decay_a", "step_size"):
                raise FormatError("experiment.sweep.param must be decay_a or step_size", path)
            out["param"] = sweep["param"]
        if "values" in sweep:
            vals = sweep["values"]
            if not isinstance(vals, list) or not vals or any(
                isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0 for v in vals
            ):
                raise FormatError("experiment.sweep.values must be positive numbers", path)
            out["values"] = [float(v) for v in vals]
        if "trials" in sweep:
            out["trials"] = _pos_int(sweep["trials"], "experiment.sweep.trials", path)
        cfg.sweep = out

    phase = _check_keys(exp.get("phase"), _PHASE_KEYS, "experiment.phase", path)
    if phase:
        out = {}
        for key in ("n1", "n2", "resolution", "trials_per_cell"):
            if key in phase:
                out[key] = _pos_int(phase[key], f"experiment.phase.{key}", path)
        for key in ("sampling", "freedom"):
            if key in phase:
                vals = phase[key]
                if not isinstance(vals, list) or not vals or any(
                    isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v <= 1
                    for v in vals
                ):
                    raise FormatError(f"experiment.phase.{key} must list values in (0, 1]", path)
                out[key] = [float(v) for v in vals]
        if "success_threshold" in phase:
            t = _auto_or_float(phase["success_threshold"], "success_threshold", path)
            if t is None or t <= 0:
                raise FormatError("experiment.phase.success_threshold must be positive", path)
            out["success_threshold"] = t
        if "algorithm" in phase:
            if phase["algorithm"] not in ("asvt", "svt"):
                raise FormatError("experiment.phase.algorithm must be asvt or svt", path)
            out["algorithm"] = phase["algorithm"]
        cfg.phase = out

    output = _check_keys(doc.get("output"), _OUTPUT_KEYS, "output", path)
    for key in ("csv", "pgm", "json"):
        if key in output and not isinstance(output[key], str):
            raise FormatError(f"output.{key} must be a path string", path)
    if "timing" in output and not isinstance(output["timing"], bool):
        raise FormatError("output.timing must be true or false", path)
    cfg.output = dict(output)
    return cfg


def load_config(path):
    """Read and validate a YAML (or JSON) run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(errno.ENOENT, "config file not found", str(path)) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FormatError(f"invalid YAML: {exc}", path) from None
    return parse_config(doc, path)

