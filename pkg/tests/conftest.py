"""Shared fixtures: synthetic videos written through the package codecs."""

from __future__ import annotations

import numpy as np
import pytest

from tukeyseg.io import (
    FlowField,
    write_flo,
    write_mask_pgm,
    write_pgm16,
    write_ppm,
    write_saliency_pgm,
)


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def write_video_dir(
    root,
    frames=None,
    flows=None,
    saliencies=None,
    labels=None,
    masks=None,
):
    """Materialize a video directory from in-memory rasters.

    ``flows`` entries are (u, v) array pairs; ``masks`` maps method name to
    a list of {0,1} masks. Only the given components are written.
    """
    root.mkdir(parents=True, exist_ok=True)
    if frames is not None:
        d = root / "frames"
        d.mkdir()
        for i, frame in enumerate(frames):
            (d / f"{i:05d}.ppm").write_bytes(write_ppm(frame))
    if flows is not None:
        d = root / "flow"
        d.mkdir()
        for i, (u, v) in enumerate(flows):
            field = FlowField(u=np.asarray(u, np.float32), v=np.asarray(v, np.float32))
            (d / f"{i:05d}.flo").write_bytes(write_flo(field))
    if saliencies is not None:
        d = root / "saliency"
        d.mkdir()
        for i, sal in enumerate(saliencies):
            (d / f"{i:05d}.pgm").write_bytes(write_saliency_pgm(sal))
    if labels is not None:
        d = root / "svx"
        d.mkdir()
        for i, ids in enumerate(labels):
            (d / f"{i:05d}.pgm16").write_bytes(write_pgm16(ids))
    if masks is not None:
        for method, mask_list in masks.items():
            d = root / "masks" / method
            d.mkdir(parents=True)
            for i, mask in enumerate(mask_list):
                (d / f"{i:05d}.pgm").write_bytes(write_mask_pgm(mask))
    return root


def moving_block_arrays(
    height=30,
    width=40,
    block=(slice(10, 20), slice(15, 25)),
    background_flow=(1.0, 0.0),
    block_flow=(8.0, 0.0),
    saliency_value=0.5,
    num_frames=1,
):
    """The moving-block scene: uniform flow except a block moving differently."""
    u = np.full((height, width), background_flow[0], dtype=np.float32)
    v = np.full((height, width), background_flow[1], dtype=np.float32)
    u[block] = block_flow[0]
    v[block] = block_flow[1]
    saliency = np.full((height, width), saliency_value, dtype=np.float64)
    frame = np.zeros((height, width, 3), dtype=np.uint8)
    frame[..., 2] = 40
    frame[block] = (200, 60, 60)
    truth = np.zeros((height, width), dtype=np.uint8)
    truth[block] = 1
    return {
        "frames": [frame] * num_frames,
        "flows": [(u, v)] * max(num_frames - 1, 1),
        "saliencies": [saliency] * num_frames,
        "truth": truth,
    }


@pytest.fixture
def video_builder(tmp_path):
    def build(name="video", **kwargs):
        return write_video_dir(tmp_path / name, **kwargs)

    return build
