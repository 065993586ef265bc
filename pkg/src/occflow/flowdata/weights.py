"""Optical flow weight: mean flow-vector magnitude per frame."""

from __future__ import annotations

import logging

import numpy as np

from .dataset import FlowDataset, FlowFrame

log = logging.getLogger(__name__)

OUTLIER_PERCENTILE = 99.5


def flow_weight(frame) -> float:
    """Mean over all pixels of ``sqrt(h**2 + v**2)``.

    Takes a :class:`FlowFrame` or an ``(h, v)`` pair of grids.
    """
    if isinstance(frame, FlowFrame):
        h, v = frame.horizontal, frame.vertical
    else:
        h, v = frame
    return float(np.mean(np.hypot(h, v)))


def stack_weights(raw: np.ndarray) -> np.ndarray:
    """Per-stack mean frame weight for raw stacks ``(N, 64, 64, 2m)``."""
    mags = np.hypot(raw[..., 0::2], raw[..., 1::2])
    return mags.mean(axis=(1, 2, 3))


def standardize_weights(weights) -> np.ndarray:
    """Scale into ``[0, 1]`` by the global min and max after dropping extreme outliers.

    Values above the 99.5th percentile are excluded when finding the range
    and then clip to 1. A degenerate range maps everything to 0.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        return w
    cut = np.percentile(w, OUTLIER_PERCENTILE, method="higher")
    kept = w[w <= cut]
    lo, hi = kept.min(), kept.max()
    if hi == lo:
        log.warning("flow weights have a degenerate range; standardizing to zeros")
        return np.zeros_like(w)
    return np.clip((w - lo) / (hi - lo), 0.0, 1.0)


def flow_weight_series(dataset: FlowDataset) -> list[tuple[int, int, float]]:
    """``(timestamp, day_label, standardized weight)`` for every frame, in time order."""
    frames = dataset.frames()
    std = standardize_weights([flow_weight(f) for f in frames])
    return [(f.timestamp, f.day_label, float(s)) for f, s in zip(frames, std)]
