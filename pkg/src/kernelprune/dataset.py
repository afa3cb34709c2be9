"""Benchmark dataset handling: config space, CSV ingestion, splits, synthesis.

The central object is :class:`PerfMatrix`, a dense problems-by-configs table
of achieved Gflops/s. Row and column identity is ordinal (first appearance in
the source), so downstream stages refer to configs by column index.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import IncompleteGridError, ParseError

# Work-group shapes that respect typical device limits on total group size.
DEFAULT_WG_PAIRS: tuple[tuple[int, int], ...] = (
    (1, 64),
    (1, 128),
    (8, 8),
    (8, 16),
    (8, 32),
    (16, 8),
    (16, 16),
    (32, 8),
    (64, 1),
    (128, 1),
)

# Tile sizes double as vector load widths, hence powers of two.
DEFAULT_TILE_SET: tuple[int, ...] = (1, 2, 4, 8)

CSV_HEADER = "m,k,n,batch,tile_rows,tile_acc,tile_cols,wg_rows,wg_cols,gflops"


@dataclass(frozen=True)
class KernelConfig:
    """One point in the tunable-parameter space of the matmul kernel.

    Each work item accumulates a ``tile_rows`` x ``tile_cols`` output tile,
    loading ``tile_rows`` x ``tile_acc`` and ``tile_acc`` x ``tile_cols``
    input tiles per step; the work-group shape is a launch-time choice.
    """

    tile_rows: int
    tile_acc: int
    tile_cols: int
    wg_rows: int
    wg_cols: int

    def __post_init__(self):
        for name in ("tile_rows", "tile_acc", "tile_cols", "wg_rows", "wg_cols"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class ProblemSize:
    """Input dimensions of one batched matrix multiplication."""

    m: int
    k: int
    n: int
    batch: int

    def __post_init__(self):
        for name in ("m", "k", "n", "batch"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True, eq=False)
class PerfMatrix:
    """Dense problems x configs table of achieved Gflops/s.

    All values are strictly positive and finite: a failed benchmark must be
    absent from the source data, never recorded as zero.
    """

    problems: tuple[ProblemSize, ...]
    configs: tuple[KernelConfig, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "configs", tuple(self.configs))
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != (len(self.problems), len(self.configs)):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"{len(self.problems)} problems x {len(self.configs)} configs"
            )
        if vals.size == 0:
            raise ValueError("empty performance matrix")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ValueError("all performance values must be finite and > 0")
        if len(set(self.problems)) != len(self.problems):
            raise ValueError("duplicate problem rows")
        if len(set(self.configs)) != len(self.configs):
            raise ValueError("duplicate config columns")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_problems(self) -> int:
        return len(self.problems)

    @property
    def n_configs(self) -> int:
        return len(self.configs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PerfMatrix):
            return NotImplemented
        return (
            self.problems == other.problems
            and self.configs == other.configs
            and np.array_equal(self.values, other.values)
        )

    def take_rows(self, indices) -> "PerfMatrix":
        idx = list(indices)
        return PerfMatrix(
            problems=tuple(self.problems[i] for i in idx),
            configs=self.configs,
            values=self.values[idx, :],
        )


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test split by problem row."""

    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0,1), got {self.test_fraction}")


@dataclass(frozen=True)
class SynthModel:
    """Analytic stand-in for hardware benchmarks, used to plant known structure.

    value(p, c) = peak * utilization * reuse * pressure * (1 + noise), where
    utilization saturates once a problem spawns enough work items to fill the
    device, reuse rewards larger output tiles, and pressure penalises configs
    whose per-item tile storage exceeds the register budget. This is a test
    harness, not a claim about real hardware.
    """

    device_parallelism: int = 4096
    reg_budget: int = 48
    peak: float = 1000.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.peak <= 0:
            raise ValueError("peak must be > 0")
        if not 0.0 <= self.noise_sigma < 0.5:
            raise ValueError("noise_sigma must be in [0, 0.5)")
        if self.device_parallelism < 1 or self.reg_budget < 1:
            raise ValueError("device_parallelism and reg_budget must be >= 1")


def enumerate_configs(
    tile_set=DEFAULT_TILE_SET,
    wg_pairs=DEFAULT_WG_PAIRS,
) -> list[KernelConfig]:
    """Enumerate the full config space in (tile_rows, tile_acc, tile_cols, wg) order.

    Returns |tile_set|^3 * |wg_pairs| configs; the work-group pair index varies
    fastest, tile_rows slowest.
    """
    tiles = sorted(set(int(t) for t in tile_set))
    pairs = [(int(a), int(b)) for a, b in wg_pairs]
    if not tiles:
        raise ValueError("tile_set must be non-empty")
    if not pairs:
        raise ValueError("wg_pairs must be non-empty")
    if len(set(pairs)) != len(pairs):
        raise ValueError("wg_pairs contains duplicates")
    return [
        KernelConfig(r, a, c, wr, wc)
        for r in tiles
        for a in tiles
        for c in tiles
        for wr, wc in pairs
    ]


def _parse_int(text: str, name: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad integer for {name}: {text!r}", line=line) from None


def parse_benchmark_csv(text: str | io.TextIOBase) -> PerfMatrix:
    """Parse benchmark CSV into a PerfMatrix.

    One row per (problem, config) measurement; rows and columns are ordered by
    first appearance. The grid must be complete and every gflops value > 0.
    """
    if isinstance(text, str):
        stream = io.StringIO(text)
    else:
        stream = text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected header row", line=1) from None
    if [h.strip() for h in header] != CSV_HEADER.split(","):
        raise ParseError(f"bad header, expected {CSV_HEADER!r}", line=1)

    problems: list[ProblemSize] = []
    configs: list[KernelConfig] = []
    prob_idx: dict[ProblemSize, int] = {}
    conf_idx: dict[KernelConfig, int] = {}
    cells: dict[tuple[int, int], float] = {}

    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # tolerate trailing blank line
        if len(row) != 10:
            raise ParseError(f"expected 10 fields, got {len(row)}", line=line_no)
        ints = [_parse_int(v, n, line_no) for v, n in zip(row[:9], CSV_HEADER.split(","))]
        try:
            gflops = float(row[9])
        except ValueError:
            raise ParseError(f"bad gflops value: {row[9]!r}", line=line_no) from None
        if not math.isfinite(gflops) or gflops <= 0.0:
            raise ParseError(f"gflops must be finite and > 0, got {row[9]}", line=line_no)
        try:
            problem = ProblemSize(*ints[:4])
            config = KernelConfig(*ints[4:9])
        except ValueError as exc:
            raise ParseError(str(exc), line=line_no) from None
        p = prob_idx.setdefault(problem, len(problems))
        if p == len(problems):
            problems.append(problem)
        c = conf_idx.setdefault(config, len(configs))
        if c == len(configs):
            configs.append(config)
        if (p, c) in cells:
            raise ParseError(f"duplicate measurement for {problem} / {config}", line=line_no)
        cells[(p, c)] = gflops

    if not problems:
        raise ParseError("no data rows", line=2)
    values = np.zeros((len(problems), len(configs)))
    for p, problem in enumerate(problems):
        for c, config in enumerate(configs):
            if (p, c) not in cells:
                raise IncompleteGridError(f"missing measurement for {problem} / {config}")
            values[p, c] = cells[(p, c)]
    return PerfMatrix(problems=tuple(problems), configs=tuple(configs), values=values)


def serialize_benchmark_csv(pm: PerfMatrix) -> str:
    """Serialize a PerfMatrix to benchmark CSV; round-trips bit-exactly."""
    out = [CSV_HEADER]
    for p, problem in enumerate(pm.problems):
        for c, config in enumerate(pm.configs):
            out.append(
                f"{problem.m},{problem.k},{problem.n},{problem.batch},"
                f"{config.tile_rows},{config.tile_acc},{config.tile_cols},"
                f"{config.wg_rows},{config.wg_cols},{float(pm.values[p, c])!r}"
            )
    return "\n".join(out) + "\n"


def split(pm: PerfMatrix, spec: SplitSpec) -> tuple[PerfMatrix, PerfMatrix]:
    """Partition problem rows into (train, test) by a seeded shuffle.

    The first ceil(test_fraction * rows) shuffled rows become the test set.
    Both sides are non-empty; columns are unchanged.
    """
    n = pm.n_problems
    if n < 2:
        raise ValueError("need at least 2 problem rows to split")
    n_test = math.ceil(spec.test_fraction * n)
    if n_test >= n:
        raise ValueError(
            f"test_fraction {spec.test_fraction} leaves no training rows for {n} problems"
        )
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    test_rows = sorted(perm[:n_test].tolist())
    train_rows = sorted(perm[n_test:].tolist())
    return pm.take_rows(train_rows), pm.take_rows(test_rows)


def _reuse_raw(config: KernelConfig) -> float:
    r, c = config.tile_rows, config.tile_cols
    return (r * c) / (r * c + r + c)


def _tile_storage(config: KernelConfig) -> int:
    r, a, c = config.tile_rows, config.tile_acc, config.tile_cols
    return r * a + a * c + r * c


def work_items(problem: ProblemSize, config: KernelConfig) -> int:
    """Work items launched for a problem under a config (full work groups)."""
    groups_m = math.ceil(problem.m / (config.tile_rows * config.wg_rows))
    groups_n = math.ceil(problem.n / (config.tile_cols * config.wg_cols))
    return problem.batch * groups_m * groups_n * config.wg_rows * config.wg_cols


def synth_generate(
    model: SynthModel,
    problems: list[ProblemSize],
    configs: list[KernelConfig],
) -> PerfMatrix:
    """Generate a synthetic PerfMatrix from the analytic model.

    Deterministic per seed; with noise_sigma=0 it is a pure function of
    (model, problems, configs). Values are clamped to >= peak * 1e-4 so the
    matrix invariants always hold.
    """
    if not problems or not configs:
        raise ValueError("problems and configs must be non-empty")
    reuse = np.array([_reuse_raw(c) for c in configs])
    reuse /= reuse.max()
    storage = np.array([_tile_storage(c) for c in configs], dtype=np.float64)
    pressure = np.where(storage <= model.reg_budget, 1.0, model.reg_budget / storage)

    values = np.zeros((len(problems), len(configs)))
    for i, p in enumerate(problems):
        wi = np.array([work_items(p, c) for c in configs], dtype=np.float64)
        util = np.minimum(1.0, wi / model.device_parallelism)
        values[i] = model.peak * util * reuse * pressure

    if model.noise_sigma > 0.0:
        rng = np.random.default_rng(model.seed)
        values *= 1.0 + rng.normal(0.0, model.noise_sigma, size=values.shape)
    values = np.maximum(values, model.peak * 1e-4)
    return PerfMatrix(problems=tuple(problems), configs=tuple(configs), values=values)


def synth_problems(n: int, seed: int = 0) -> list[ProblemSize]:
    """Draw n distinct problem sizes spanning square to skinny shapes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    seen: set[ProblemSize] = set()
    out: list[ProblemSize] = []
    batches = (1, 1, 4, 16, 64)
    while len(out) < n:
        m, k, nn = (int(round(2.0 ** e)) for e in rng.uniform(4.0, 13.0, size=3))
        p = ProblemSize(m=m, k=k, n=nn, batch=batches[rng.integers(len(batches))])
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out
