"""Foreground discovery from optical-flow and visual-saliency outliers.

Per frame, four flow measures (x, y, magnitude, angle) are screened for
statistical outliers; outlier pixels accumulate motion saliency weighted by
each measure's outlier scale, and a visual-saliency map modulates the
un-gated deviation sum. The combined foregroundness field is thresholded at
mean + standard deviation, with a half-threshold discount wherever the
previous frame's mask was foreground, and reduced to the single strongest
connected segment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from tukeyseg import stats
from tukeyseg.io import FlowField, FrameSequence
from tukeyseg.parallel import parallel_map

log = logging.getLogger(__name__)

COMPONENT_NAMES = ("x", "y", "magnitude", "angle")

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class SegmenterConfig:
    """Tuning knobs for the outlier segmenter."""

    k_fences: float = 1.5
    vs_exponents: tuple[float, ...] = (1.0, 0.5, 1.0 / 3.0)
    min_flow_scale: float = 0.5
    connectivity: int = 8

    def __post_init__(self):
        if not self.vs_exponents or any(k <= 0 for k in self.vs_exponents):
            raise ValueError("visual-saliency exponents must be positive")
        if not 0.0 <= self.min_flow_scale <= 1.0:
            raise ValueError("min_flow_scale must lie in [0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class FlowMeasures:
    """The four per-pixel scalar measures derived from one flow field."""

    x: np.ndarray
    y: np.ndarray
    magnitude: np.ndarray  # sqrt(x^2 + y^2), >= 0
    angle: np.ndarray      # atan2(y, x) in (-pi, pi]; zero vector maps to 0

    def as_tuple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.x, self.y, self.magnitude, self.angle)


def flow_measures(flow: FlowField) -> FlowMeasures:
    """Derive x/y components, Euclidean magnitude, and angle from a flow field."""
    u = np.asarray(flow.u, dtype=np.float64)
    v = np.asarray(flow.v, dtype=np.float64)
    magnitude = np.hypot(u, v)
    angle = np.arctan2(v, u)
    angle = np.where(angle == -np.pi, np.pi, angle)
    return FlowMeasures(x=u, y=v, magnitude=magnitude, angle=angle)


@dataclass(frozen=True)
class _FieldStats:
    """Per-frame outlier statistics of one scalar measure."""

    median: float
    alpha: float
    outliers: np.ndarray
    absdev: np.ndarray  # |d - median| at every pixel


def _field_stats(component, k_fences: float) -> _FieldStats:
    q = stats.quartiles(component)
    f = stats.fences(q, k_fences)
    outliers = stats.outlier_set(component, f)
    alpha = stats.outlier_scale(component, outliers)
    absdev = np.abs(np.asarray(component, dtype=np.float64) - q.q2)
    return _FieldStats(q.q2, alpha, outliers, absdev)


def _motion_from_stats(st: _FieldStats, min_scale: float) -> np.ndarray:
    if st.alpha < min_scale:
        return np.zeros_like(st.absdev)
    return np.where(st.outliers != 0, st.alpha * st.absdev, 0.0)


def motion_saliency(component, k_fences: float = 1.5, min_scale: float = 0.5) -> np.ndarray:
    """Outlier-gated deviation of a flow measure from its frame median.

    Outlier pixels receive alpha * |d - median|; everything else is 0, and
    the whole field is 0 when the measure's outlier scale falls below
    ``min_scale``.
    """
    return _motion_from_stats(_field_stats(component, k_fences), min_scale)


def deviation_sum(measures: FlowMeasures, k_fences: float = 1.5, min_scale: float = 0.5) -> np.ndarray:
    """Sum over flow measures of max(alpha, min_scale) * |d - median|.

    No outlier gating: the flooring keeps the sum alive even when every
    measure's outlier scale is 0.
    """
    field_stats = [_field_stats(c, k_fences) for c in measures.as_tuple()]
    return _deviation_from_stats(field_stats, min_scale)


def _deviation_from_stats(field_stats, min_scale: float) -> np.ndarray:
    return sum(max(st.alpha, min_scale) * st.absdev for st in field_stats)


def visual_saliency(
    vs,
    measures: FlowMeasures,
    exponent: float,
    k_fences: float = 1.5,
    min_scale: float = 0.5,
) -> np.ndarray:
    """Saliency map raised to ``exponent`` times the flow deviation sum."""
    v = np.asarray(vs, dtype=np.float64)
    if v.shape != measures.x.shape:
        raise ValueError(f"dimension mismatch: saliency {v.shape} vs flow {measures.x.shape}")
    if np.any((v < 0) | (v > 1)):
        raise ValueError("saliency values must lie in [0, 1]")
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    return np.power(v, exponent) * deviation_sum(measures, k_fences, min_scale)


def foregroundness(motion_fields, visual_fields) -> np.ndarray:
    """Pointwise sum of the motion and visual saliency measures."""
    fields = list(motion_fields) + list(visual_fields)
    if not fields:
        raise ValueError("no saliency fields to combine")
    total = np.zeros_like(np.asarray(fields[0], dtype=np.float64))
    for field in fields:
        f = np.asarray(field, dtype=np.float64)
        if f.shape != total.shape:
            raise ValueError("saliency fields must share one shape")
        total = total + f
    return total


def flow_component_scales(measures: FlowMeasures, k_fences: float = 1.5) -> dict[str, float]:
    """Outlier scale of each flow measure, keyed by component name."""
    return {
        name: _field_stats(component, k_fences).alpha
        for name, component in zip(COMPONENT_NAMES, measures.as_tuple())
    }


def threshold_mask(fore, previous_mask=None) -> np.ndarray:
    """Binarize foregroundness at mean + population standard deviation.

    Pixels under the previous frame's mask only need to clear half the
    threshold, which favors frame-to-frame continuity. Pass ``None`` for
    the first frame.
    """
    f = np.asarray(fore, dtype=np.float64)
    beta = float(f.mean() + f.std())
    if previous_mask is None:
        return (f > beta).astype(np.uint8)
    prev = np.asarray(previous_mask)
    if prev.shape != f.shape:
        raise ValueError(f"dimension mismatch: field {f.shape} vs previous mask {prev.shape}")
    threshold = np.where(prev != 0, 0.5 * beta, beta)
    return (f > threshold).astype(np.uint8)


def select_top_segments(mask, weight, n_segments: int = 1, connectivity: int = 8) -> np.ndarray:
    """Keep only the n connected components with the largest weight sums.

    Ties go to the larger component, then to the component whose first
    row-major pixel comes first, so the result is fully deterministic.
    """
    m = np.asarray(mask)
    w = np.asarray(weight, dtype=np.float64)
    if m.shape != w.shape:
        raise ValueError(f"dimension mismatch: mask {m.shape} vs weight {w.shape}")
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    labeled, count = ndimage.label(m != 0, structure=_STRUCTURES[connectivity])
    if count <= n_segments:
        return (m != 0).astype(np.uint8)
    flat = labeled.ravel()
    weight_sums = np.bincount(flat, weights=w.ravel(), minlength=count + 1)
    sizes = np.bincount(flat, minlength=count + 1)
    first_pixel = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first_pixel, flat, np.arange(flat.size))
    ranked = sorted(
        range(1, count + 1),
        key=lambda c: (-weight_sums[c], -sizes[c], first_pixel[c]),
    )
    keep = np.zeros(count + 1, dtype=bool)
    keep[ranked[:n_segments]] = True
    keep[0] = False
    return keep[labeled].astype(np.uint8)


@dataclass
class SegmentationResult:
    """Per-frame outputs of a segmentation run."""

    masks: list[np.ndarray]
    foregroundness: list[np.ndarray]
    flow_scales: list[dict[str, float]]  # per frame, per flow component


def frame_foregroundness(seq: FrameSequence, index: int, cfg: SegmenterConfig | None = None):
    """Foregroundness field and flow-component scales for one frame."""
    cfg = cfg or SegmenterConfig()
    measures = flow_measures(seq.flow(index))
    vs = seq.saliency(index)
    field_stats = [_field_stats(c, cfg.k_fences) for c in measures.as_tuple()]
    motion = [_motion_from_stats(st, cfg.min_flow_scale) for st in field_stats]
    deviations = _deviation_from_stats(field_stats, cfg.min_flow_scale)
    visual = [np.power(vs, k) * deviations for k in cfg.vs_exponents]
    fore = foregroundness(motion, visual)
    scales = {
        name: st.alpha for name, st in zip(COMPONENT_NAMES, field_stats)
    }
    return fore, scales


def segment_sequence(
    seq: FrameSequence,
    cfg: SegmenterConfig | None = None,
    jobs: int = 1,
) -> SegmentationResult:
    """Run the full segmenter over a sequence.

    Foregroundness fields are computed independently per frame (and may be
    fanned out over ``jobs`` threads); thresholding is a sequential fold
    because each frame's discount reads the previous frame's mask.
    """
    cfg = cfg or SegmenterConfig()
    if not seq.has_flow:
        raise ValueError(f"sequence '{seq.name}': flow rasters are required")
    if not seq.has_saliency:
        raise ValueError(f"sequence '{seq.name}': saliency rasters are required")
    per_frame = parallel_map(
        lambda i: frame_foregroundness(seq, i, cfg), range(seq.num_frames), jobs
    )
    masks: list[np.ndarray] = []
    previous = None
    for index, (fore, scales) in enumerate(per_frame):
        mask = threshold_mask(fore, previous)
        mask = select_top_segments(mask, fore, 1, cfg.connectivity)
        masks.append(mask)
        previous = mask
        log.debug("frame %d: %d foreground pixels, scales %s", index, int(mask.sum()), scales)
    return SegmentationResult(
        masks=masks,
        foregroundness=[fore for fore, _ in per_frame],
        flow_scales=[scales for _, scales in per_frame],
    )
