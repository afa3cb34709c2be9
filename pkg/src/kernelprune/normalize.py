"""Per-problem normalization of raw Gflops/s to relative performance in [0, 1].

Every scheme starts from the scaled ratio s = value / row_max, so the best
config of each row maps to (or near) 1. The cutoff schemes zero out kernels
below a threshold; the sigmoid scheme squashes mediocre kernels smoothly.
Normalized values feed clustering and classifier labels only -- evaluation
always scores against raw ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import KernelConfig, PerfMatrix, ProblemSize

SCHEME_KINDS = ("scaled", "raw_cutoff", "std_cutoff", "sigmoid")


@dataclass(frozen=True)
class NormScheme:
    """Normalization scheme selector with its parameters."""

    kind: str = "scaled"
    cutoff: float = 0.9
    sig_center: float = 0.85
    sig_steepness: float = 50.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}, expected one of {SCHEME_KINDS}")
        if not 0.0 < self.cutoff < 1.0:
            raise ValueError("cutoff must be in (0,1)")
        if not 0.0 < self.sig_center < 1.0:
            raise ValueError("sig_center must be in (0,1)")
        if self.sig_steepness <= 0.0:
            raise ValueError("sig_steepness must be > 0")


@dataclass(frozen=True, eq=False)
class NormMatrix:
    """Row-normalized performance values plus enough context to undo them.

    ``best_gflops`` stores each row's raw maximum so downstream evaluation can
    recover absolute performance.
    """

    problems: tuple[ProblemSize, ...]
    configs: tuple[KernelConfig, ...]
    values: np.ndarray
    scheme: NormScheme
    best_gflops: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        best = np.asarray(self.best_gflops, dtype=np.float64)
        if vals.shape != (len(self.problems), len(self.configs)):
            raise ValueError("values shape does not match problems x configs")
        if best.shape != (len(self.problems),):
            raise ValueError("best_gflops must have one entry per problem row")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("normalized values must lie in [0, 1]")
        vals.setflags(write=False)
        best.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "best_gflops", best)

    @property
    def n_problems(self) -> int:
        return len(self.problems)

    @property
    def n_configs(self) -> int:
        return len(self.configs)


def normalize(pm: PerfMatrix, scheme: NormScheme) -> NormMatrix:
    """Map each row of a PerfMatrix to [0, 1] under the given scheme."""
    row_max = pm.values.max(axis=1)
    s = pm.values / row_max[:, None]
    kind = scheme.kind
    if kind == "scaled":
        out = s
    elif kind == "raw_cutoff":
        out = np.where(s >= scheme.cutoff, s, 0.0)
    elif kind == "std_cutoff":
        out = np.where(s >= scheme.cutoff, (s - scheme.cutoff) / (1.0 - scheme.cutoff), 0.0)
    elif kind == "sigmoid":
        with np.errstate(over="ignore"):  # exp overflow saturates to 0, which is fine
            out = 1.0 / (1.0 + np.exp(scheme.sig_steepness * (scheme.sig_center - s)))
    else:  # pragma: no cover - guarded by NormScheme
        raise ValueError(f"unknown scheme kind {kind!r}")
    return NormMatrix(
        problems=pm.problems,
        configs=pm.configs,
        values=out,
        scheme=scheme,
        best_gflops=row_max,
    )
