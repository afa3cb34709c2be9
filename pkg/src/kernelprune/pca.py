"""Principal component analysis over problem rows.

Used twice in the pipeline: the cumulative variance report motivates how many
kernels are worth deploying, and the projection feeds the PCA+k-means
selection method. Implemented via SVD of the centered matrix for stability;
component signs are normalized so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .normalize import NormMatrix

VARIANCE_THRESHOLDS = (0.80, 0.90, 0.95)


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted principal components in descending explained-variance order."""

    mean: np.ndarray
    components: np.ndarray  # (n_retained, n_features), rows orthonormal
    explained_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class VarianceReport:
    """Cumulative explained variance and the component counts reaching
    the standard thresholds (None when a threshold is never reached)."""

    cumulative: tuple[float, ...]
    components_80: int | None
    components_90: int | None
    components_95: int | None


def _as_rows(data) -> np.ndarray:
    if isinstance(data, NormMatrix):
        return data.values
    return np.asarray(data, dtype=np.float64)


def fit_pca(nm: NormMatrix | np.ndarray) -> PcaModel:
    """Fit PCA on the rows of a normalized matrix.

    Retains min(rows - 1, cols) components. An all-constant input yields
    explained ratios of zero rather than an error so pipelines degrade
    gracefully.
    """
    rows = _as_rows(nm)
    n, d = rows.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    mean = rows.mean(axis=0)
    centered = rows - mean
    _, sing, vt = np.linalg.svd(centered, full_matrices=False)
    r = min(n - 1, d)
    sing = sing[:r]
    components = vt[:r].copy()
    # Fix the sign so the largest-magnitude entry of each component is positive.
    for i in range(r):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    var = sing**2
    total = var.sum()
    # Rounding in the column means leaves O(eps) residuals for constant input;
    # variance below (1e-12 * scale)^2 reports as zero rather than promoting
    # rounding noise to a spurious leading component.
    scale = max(1.0, float(np.abs(rows).max()))
    ratio = var / total if total > (1e-12 * scale) ** 2 else np.zeros(r)
    return PcaModel(mean=mean, components=components, explained_ratio=ratio)


def transform(model: PcaModel, nm: NormMatrix | np.ndarray, n_components: int) -> np.ndarray:
    """Project rows onto the first n_components principal axes."""
    if not 1 <= n_components <= model.n_components:
        raise ValueError(
            f"n_components must be in [1, {model.n_components}], got {n_components}"
        )
    rows = _as_rows(nm)
    return (rows - model.mean) @ model.components[:n_components].T


def variance_report(model: PcaModel) -> VarianceReport:
    """Running sums of explained variance plus threshold component counts."""
    cumulative = np.cumsum(model.explained_ratio)
    counts = []
    for thr in VARIANCE_THRESHOLDS:
        reached = np.nonzero(cumulative >= thr)[0]
        counts.append(int(reached[0]) + 1 if reached.size else None)
    return VarianceReport(
        cumulative=tuple(float(c) for c in cumulative),
        components_80=counts[0],
        components_90=counts[1],
        components_95=counts[2],
    )
