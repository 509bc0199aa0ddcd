"""Region similarity and contour accuracy for binary mask sequences.

Region similarity is the Jaccard index (intersection over union); contour
accuracy is the boundary-matching F-measure under a pixel tolerance. Both
aggregate over a sequence as a mean, a recall indicator (sequence mean above
0.5), and a decay (mean of the first quarter of frames minus mean of the
last quarter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from tukeyseg.io import read_mask_dir
from tukeyseg.parallel import parallel_map

_CROSS = ndimage.generate_binary_structure(2, 1)

RECALL_THRESHOLD = 0.5


def jaccard(mask, reference) -> float:
    """Intersection over union; two empty masks score a perfect 1."""
    m = np.asarray(mask) != 0
    g = np.asarray(reference) != 0
    if m.shape != g.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {g.shape}")
    union = int(np.logical_or(m, g).sum())
    if union == 0:
        return 1.0
    return float(np.logical_and(m, g).sum() / union)


def mask_boundary(mask) -> np.ndarray:
    """Mask pixels with a background 4-neighbor or on the image border."""
    m = np.asarray(mask) != 0
    interior = ndimage.binary_erosion(m, structure=_CROSS, border_value=0)
    return m & ~interior


def default_tolerance(width: int, height: int) -> int:
    """Boundary-matching tolerance scaled to the image diagonal."""
    return math.ceil(0.0075 * math.hypot(width, height))


def contour_f(mask, reference, tolerance: float | None = None) -> float:
    """Boundary-matching F-measure between two masks.

    A boundary pixel matches when a boundary pixel of the other mask lies
    within ``tolerance`` (Euclidean distance). Two empty boundaries score
    1, one empty boundary scores 0.
    """
    m = np.asarray(mask) != 0
    g = np.asarray(reference) != 0
    if m.shape != g.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {g.shape}")
    if tolerance is None:
        tolerance = default_tolerance(m.shape[1], m.shape[0])
    boundary_m = mask_boundary(m)
    boundary_g = mask_boundary(g)
    if not boundary_m.any() and not boundary_g.any():
        return 1.0
    if not boundary_m.any() or not boundary_g.any():
        return 0.0
    distance_to_g = ndimage.distance_transform_edt(~boundary_g)
    distance_to_m = ndimage.distance_transform_edt(~boundary_m)
    precision = float((distance_to_g[boundary_m] <= tolerance).mean())
    recall = float((distance_to_m[boundary_g] <= tolerance).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_decay(series) -> float:
    """Mean of the first ceil(T/4) scores minus mean of the last ceil(T/4)."""
    values = [float(v) for v in series]
    if not values:
        raise ValueError("empty score series")
    quarter = math.ceil(len(values) / 4)
    return float(np.mean(values[:quarter]) - np.mean(values[-quarter:]))


@dataclass(frozen=True)
class SequenceScore:
    """Per-frame and aggregate scores for one sequence."""

    j_per_frame: tuple[float, ...]
    f_per_frame: tuple[float, ...]
    j_mean: float
    f_mean: float
    j_recall: bool
    f_recall: bool
    j_decay: float
    f_decay: float


def sequence_scores(masks, references, tolerance: float | None = None) -> SequenceScore:
    """Score a predicted mask sequence against its references."""
    masks = list(masks)
    references = list(references)
    if len(masks) != len(references):
        raise ValueError(
            f"length mismatch: {len(masks)} predictions vs {len(references)} references"
        )
    if not masks:
        raise ValueError("empty sequence")
    j = tuple(jaccard(m, g) for m, g in zip(masks, references))
    f = tuple(contour_f(m, g, tolerance) for m, g in zip(masks, references))
    j_mean = float(np.mean(j))
    f_mean = float(np.mean(f))
    return SequenceScore(
        j_per_frame=j,
        f_per_frame=f,
        j_mean=j_mean,
        f_mean=f_mean,
        j_recall=j_mean > RECALL_THRESHOLD,
        f_recall=f_mean > RECALL_THRESHOLD,
        j_decay=score_decay(j),
        f_decay=score_decay(f),
    )


@dataclass(frozen=True)
class DatasetRow:
    """One line of the evaluation table; recall is 0/1 per sequence and a fraction for ALL."""

    sequence: str
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float


def evaluate_dataset(
    prediction_root,
    ground_truth_root,
    tolerance: float | None = None,
    jobs: int = 1,
) -> list[DatasetRow]:
    """Score every sequence under a ground-truth root; appends an ALL row.

    Both roots hold one directory per sequence with %05d.pgm masks. Every
    ground-truth sequence must have a matching prediction directory with
    the same frame count.
    """
    prediction_root = Path(prediction_root)
    ground_truth_root = Path(ground_truth_root)
    if not ground_truth_root.is_dir():
        raise ValueError(f"not a directory: {ground_truth_root}")
    names = sorted(d.name for d in ground_truth_root.iterdir() if d.is_dir())
    if not names:
        raise ValueError(f"{ground_truth_root}: no ground-truth sequences")
    for name in names:
        if not (prediction_root / name).is_dir():
            raise ValueError(f"missing prediction directory for sequence '{name}'")

    def score_one(name: str) -> DatasetRow:
        references = read_mask_dir(ground_truth_root / name)
        predictions = read_mask_dir(prediction_root / name)
        if len(predictions) != len(references):
            raise ValueError(
                f"sequence '{name}': {len(predictions)} predictions for "
                f"{len(references)} ground-truth frames"
            )
        score = sequence_scores(predictions, references, tolerance)
        return DatasetRow(
            sequence=name,
            j_mean=score.j_mean,
            j_recall=float(score.j_recall),
            j_decay=score.j_decay,
            f_mean=score.f_mean,
            f_recall=float(score.f_recall),
            f_decay=score.f_decay,
        )

    rows = parallel_map(score_one, names, jobs)
    rows.append(
        DatasetRow(
            sequence="ALL",
            j_mean=float(np.mean([r.j_mean for r in rows])),
            j_recall=float(np.mean([r.j_recall for r in rows])),
            j_decay=float(np.mean([r.j_decay for r in rows])),
            f_mean=float(np.mean([r.f_mean for r in rows])),
            f_recall=float(np.mean([r.f_recall for r in rows])),
            f_decay=float(np.mean([r.f_decay for r in rows])),
        )
    )
    return rows


def rows_to_csv(rows) -> str:
    """Render evaluation rows as the canonical CSV table."""
    lines = ["sequence,J_mean,J_recall,J_decay,F_mean,F_recall,F_decay"]
    for r in rows:
        lines.append(
            f"{r.sequence},{r.j_mean:.6f},{r.j_recall:.6f},{r.j_decay:.6f},"
            f"{r.f_mean:.6f},{r.f_recall:.6f},{r.f_decay:.6f}"
        )
    return "\n".join(lines) + "\n"
