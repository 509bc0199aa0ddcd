"""Supervoxel consensus refinement of segmentation masks.

Supervoxels span many frames, so refinement is a two-pass affair: pass one
segments the whole video, pass two folds every frame's labels into
per-supervoxel consensus scores and rewrites each frame's mask. A
supervoxel's local consensus is its mean label polarity in [-1, 1]; its
non-local consensus is an inverse-square-distance weighted vote among its
nearest neighbors in mean-LAB color. Both are added to the (rescaled)
foregroundness field and the sign of the result decides each pixel, keeping
the two strongest segments per frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from tukeyseg.parallel import parallel_map
from tukeyseg.segment import (
    SegmenterConfig,
    SegmentationResult,
    segment_sequence,
    select_top_segments,
)

log = logging.getLogger(__name__)

NONLOCAL_WEIGHT_TOTAL = 2.0 / 3.0

# sRGB (D65) to XYZ, IEC 61966-2-1 primaries
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class RefineConfig:
    """Consensus mode and numeric guards for refinement."""

    mode: str = "nonlocal"   # "local": supervoxel-internal votes only; "nonlocal" adds neighbors
    epsilon: float = 1e-3    # floor on LAB distances before squaring
    w0: float | None = None  # local-consensus weight; None derives 1 (local) or 1/3 (nonlocal)

    def __post_init__(self):
        if self.mode not in ("local", "nonlocal"):
            raise ValueError("mode must be 'local' or 'nonlocal'")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def local_weight(self) -> float:
        if self.w0 is not None:
            return self.w0
        return 1.0 if self.mode == "local" else 1.0 / 3.0


def rgb_to_lab(rgb) -> np.ndarray:
    """Convert 8-bit sRGB to CIE L*a*b* under the D65 white point."""
    a = np.asarray(rgb)
    if a.ndim < 1 or a.shape[-1] != 3:
        raise ValueError("rgb array must have a trailing dimension of 3")
    c = a.astype(np.float64) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    lightness = 116.0 * f[..., 1] - 16.0
    a_axis = 500.0 * (f[..., 0] - f[..., 1])
    b_axis = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([lightness, a_axis, b_axis], axis=-1)


def normalize_lab(lab_frames) -> list[np.ndarray]:
    """Min-max map each LAB channel to [0, 1] over the whole video.

    A channel that is constant across the video maps to 0 everywhere.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in lab_frames]
    if not frames:
        raise ValueError("no frames to normalize")
    lows = np.min([f.min(axis=(0, 1)) for f in frames], axis=0)
    highs = np.max([f.max(axis=(0, 1)) for f in frames], axis=0)
    span = highs - lows
    safe = np.where(span > 0, span, 1.0)
    return [np.where(span > 0, (f - lows) / safe, 0.0) for f in frames]


@dataclass(frozen=True)
class SupervoxelStats:
    """Per-supervoxel pixel tallies over a supervoxel's full extent."""

    ids: np.ndarray           # (n,) distinct supervoxel ids, ascending
    pixel_counts: np.ndarray  # (n,) pixels carrying each id, all frames
    label_sums: np.ndarray    # (n,) of those, pixels labeled foreground
    mean_lab: np.ndarray      # (n, 3) mean normalized LAB color

    @property
    def local_consensus(self) -> np.ndarray:
        """Mean label polarity per supervoxel: (2 * fg - total) / total in [-1, 1]."""
        return (2.0 * self.label_sums - self.pixel_counts) / self.pixel_counts


@dataclass(frozen=True)
class ConsensusTable:
    """Local and non-local consensus per supervoxel id."""

    ids: np.ndarray
    f_local: np.ndarray
    f_nonlocal: np.ndarray


def supervoxel_stats(label_frames, lab_frames, mask_frames) -> SupervoxelStats:
    """Accumulate per-supervoxel tallies across all frames.

    Per-frame partial sums are merged in frame order, so the result does
    not depend on how the frames were scheduled.
    """
    if not (len(label_frames) == len(lab_frames) == len(mask_frames)):
        raise ValueError("label, LAB, and mask frame lists must have equal length")
    if not label_frames:
        raise ValueError("no frames")
    size = 0
    for labels, lab, mask in zip(label_frames, lab_frames, mask_frames):
        labels = np.asarray(labels)
        if labels.shape != np.asarray(mask).shape or labels.shape != np.asarray(lab).shape[:2]:
            raise ValueError(
                f"dimension mismatch: labels {labels.shape}, lab {np.asarray(lab).shape}, "
                f"mask {np.asarray(mask).shape}"
            )
        if labels.min() < 0:
            raise ValueError("supervoxel ids must be non-negative")
        size = max(size, int(labels.max()) + 1)
    counts = np.zeros(size, dtype=np.int64)
    label_sums = np.zeros(size, dtype=np.int64)
    lab_sums = np.zeros((size, 3), dtype=np.float64)
    for labels, lab, mask in zip(label_frames, lab_frames, mask_frames):
        flat = np.asarray(labels).ravel()
        counts += np.bincount(flat, minlength=size)
        label_sums += np.bincount(
            flat, weights=(np.asarray(mask).ravel() != 0).astype(np.float64), minlength=size
        ).astype(np.int64)
        lab = np.asarray(lab, dtype=np.float64)
        for channel in range(3):
            lab_sums[:, channel] += np.bincount(
                flat, weights=lab[..., channel].ravel(), minlength=size
            )
    present = np.nonzero(counts)[0]
    return SupervoxelStats(
        ids=present,
        pixel_counts=counts[present],
        label_sums=label_sums[present],
        mean_lab=lab_sums[present] / counts[present, None],
    )


def build_consensus(stats: SupervoxelStats, cfg: RefineConfig | None = None) -> ConsensusTable:
    """Compute local consensus and, in non-local mode, neighbor votes.

    Each supervoxel's neighbors are the ceil(n/100) others closest in
    city-block mean-LAB distance (ties by smaller id). Raw weights are
    1 / max(distance, epsilon)^2, rescaled to sum to 2/3.
    """
    cfg = cfg or RefineConfig()
    f_local = stats.local_consensus
    if cfg.mode == "local":
        return ConsensusTable(stats.ids, f_local, np.zeros_like(f_local))
    n = len(stats.ids)
    if n < 2:
        raise ValueError("non-local consensus needs at least 2 supervoxels")
    n_neighbors = math.ceil(n / 100)
    f_nonlocal = np.empty(n, dtype=np.float64)
    for i in range(n):
        distances = np.abs(stats.mean_lab - stats.mean_lab[i]).sum(axis=1)
        order = np.lexsort((stats.ids, distances))
        neighbors = order[order != i][:n_neighbors]
        weights = 1.0 / np.maximum(distances[neighbors], cfg.epsilon) ** 2
        weights *= NONLOCAL_WEIGHT_TOTAL / weights.sum()
        f_nonlocal[i] = float(weights @ f_local[neighbors])
    return ConsensusTable(stats.ids, f_local, f_nonlocal)


def adjusted_foregroundness(
    fore_frames,
    consensus: ConsensusTable,
    label_frames,
    cfg: RefineConfig | None = None,
) -> list[np.ndarray]:
    """Consensus-adjusted foregroundness fields, one per frame.

    Foregroundness is rescaled to [0, 1] by the video-wide maximum (an
    all-zero video stays all-zero), then per pixel the containing
    supervoxel's weighted local and non-local consensus are added.
    """
    cfg = cfg or RefineConfig()
    if len(fore_frames) != len(label_frames):
        raise ValueError("foregroundness and label frame lists must have equal length")
    fores = [np.asarray(f, dtype=np.float64) for f in fore_frames]
    labels = [np.asarray(frame) for frame in label_frames]
    if not fores:
        raise ValueError("no frames")
    video_max = max(float(f.max()) for f in fores)
    additive = cfg.local_weight * consensus.f_local + consensus.f_nonlocal
    size = max(
        int(consensus.ids.max()) + 1,
        max(int(frame.max()) + 1 for frame in labels),
    )
    lookup = np.full(size, np.nan)
    lookup[consensus.ids] = additive
    adjusted = []
    for fore, frame_labels in zip(fores, labels):
        if fore.shape != frame_labels.shape:
            raise ValueError(
                f"dimension mismatch: field {fore.shape} vs labels {frame_labels.shape}"
            )
        term = lookup[frame_labels]
        if np.any(np.isnan(term)):
            missing = np.unique(frame_labels[np.isnan(term)])
            raise ValueError(f"supervoxel ids missing from consensus table: {missing.tolist()}")
        scaled = fore / video_max if video_max > 0 else np.zeros_like(fore)
        adjusted.append(scaled + term)
    return adjusted


def refine_masks(
    fore_frames,
    consensus: ConsensusTable,
    label_frames,
    cfg: RefineConfig | None = None,
    n_segments: int = 2,
    connectivity: int = 8,
) -> list[np.ndarray]:
    """Rewrite per-frame masks from consensus-adjusted foregroundness.

    Pixels with a positive adjusted foregroundness are foreground; each
    frame then keeps its ``n_segments`` strongest segments.
    """
    refined = []
    for adjusted in adjusted_foregroundness(fore_frames, consensus, label_frames, cfg):
        mask = (adjusted > 0).astype(np.uint8)
        refined.append(select_top_segments(mask, adjusted, n_segments, connectivity))
    return refined


@dataclass
class RefinementResult:
    """Refined masks plus the intermediate products that shaped them."""

    masks: list[np.ndarray]
    initial: SegmentationResult
    consensus: ConsensusTable


def refine_sequence(
    seq,
    seg_cfg: SegmenterConfig | None = None,
    ref_cfg: RefineConfig | None = None,
    jobs: int = 1,
) -> RefinementResult:
    """Segment a sequence, then refine every frame with supervoxel consensus."""
    seg_cfg = seg_cfg or SegmenterConfig()
    ref_cfg = ref_cfg or RefineConfig()
    if not seq.has_labels:
        raise ValueError(f"sequence '{seq.name}': supervoxel label rasters are required")
    initial = segment_sequence(seq, seg_cfg, jobs)
    lab_frames = parallel_map(
        lambda i: rgb_to_lab(seq.frame(i)), range(seq.num_frames), jobs
    )
    lab_frames = normalize_lab(lab_frames)
    label_frames = [seq.labels(i) for i in range(seq.num_frames)]
    stats = supervoxel_stats(label_frames, lab_frames, initial.masks)
    table = build_consensus(stats, ref_cfg)
    log.info("consensus over %d supervoxels (mode=%s)", len(table.ids), ref_cfg.mode)
    masks = refine_masks(
        initial.foregroundness,
        table,
        label_frames,
        ref_cfg,
        connectivity=seg_cfg.connectivity,
    )
    return RefinementResult(masks=masks, initial=initial, consensus=table)
