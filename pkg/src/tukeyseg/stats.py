"""Robust statistics kernel: quartiles, Tukey fences, and outlier scales.

Everything here is a pure function of its inputs and safe to call from any
number of threads. Samples may be passed as any array-like; indicator masks
returned by :func:`outlier_set` match the input's shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Quartiles:
    """First, second (median), and third quartiles of a sample."""

    q1: float
    q2: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


@dataclass(frozen=True)
class OutlierFences:
    """Tukey thresholds: values strictly outside (o1, o3) are outliers."""

    o1: float
    o3: float
    k: float


def quartiles(sample) -> Quartiles:
    """Compute Q1/Q2/Q3 by linear interpolation between order statistics.

    Uses the common "type 7" rule: the q-quantile sits at zero-based
    position (n - 1) * q of the sorted sample, interpolating linearly
    between neighbors. Deterministic for any input ordering.
    """
    data = np.asarray(sample, dtype=np.float64)
    if data.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite input")
    q1, q2, q3 = np.quantile(data, (0.25, 0.5, 0.75), method="linear")
    return Quartiles(float(q1), float(q2), float(q3))


def fences(q: Quartiles, k: float = 1.5) -> OutlierFences:
    """Tukey fences at Q1 - k*IQR and Q3 + k*IQR."""
    if not np.isfinite(k):
        raise ValueError("non-finite fence constant")
    if k < 0:
        raise ValueError("fence constant must be non-negative")
    iqr = q.q3 - q.q1
    return OutlierFences(q.q1 - k * iqr, q.q3 + k * iqr, float(k))


def outlier_set(data, f: OutlierFences) -> np.ndarray:
    """Indicator of values strictly below o1 or strictly above o3."""
    d = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite input")
    return ((d < f.o1) | (d > f.o3)).astype(np.uint8)


def outlier_scale(data, outliers) -> float:
    """Fraction of the data's total absolute magnitude carried by outliers.

    Returns 0 when the outlier set is empty, and also when the data sums to
    zero magnitude (an all-zero source carries no signal to weight).
    """
    d = np.asarray(data, dtype=np.float64)
    o = np.asarray(outliers)
    if d.shape != o.shape:
        raise ValueError(f"dimension mismatch: data {d.shape} vs outliers {o.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite input")
    magnitude = np.abs(d)
    total = float(magnitude.sum())
    if total == 0.0:
        return 0.0
    return float(magnitude[o != 0].sum() / total)


def mask_outlier_scales(counts, k: float = 1.5) -> np.ndarray:
    """Reliability weights for masks from their foreground-pixel counts.

    Each count is scored by proximity to the median count across all masks:
    1.0 at the median, falling linearly to 0 at the Tukey fences, and 0 for
    counts at or beyond a fence. Counts sitting exactly on the median always
    score 1, which also covers the degenerate zero-spread cases (for an
    all-equal count list every mask scores 1); counts away from a collapsed
    fence score 0, the limit of the linear ramp.
    """
    n = np.asarray(counts, dtype=np.float64)
    if n.size == 0:
        raise ValueError("empty count list")
    q = quartiles(n)
    f = fences(q, k)
    alphas = np.zeros(n.shape, dtype=np.float64)
    at_median = n == q.q2
    below = n < q.q2
    above = ~(at_median | below)
    alphas[at_median] = 1.0
    if q.q2 > f.o1:
        alphas[below] = np.maximum((n[below] - f.o1) / (q.q2 - f.o1), 0.0)
    if q.q2 < f.o3:
        alphas[above] = np.maximum((n[above] - f.o3) / (q.q2 - f.o3), 0.0)
    return alphas
