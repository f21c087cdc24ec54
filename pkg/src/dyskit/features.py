"""Utterance-level feature vectors and the Euclidean metric.

A feature vector is a plain 1-D float ``numpy`` array. Frame-level MFCCs are
collapsed to one vector per segment so utterances of different lengths
become comparable.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from dyskit.errors import DimensionMismatch, TooFewFrames


class AggregationStrategy(str, Enum):
    MEAN = "mean"
    MEAN_STD = "mean-std"

    def dimension(self, n_ceps: int) -> int:
        return n_ceps if self is AggregationStrategy.MEAN else 2 * n_ceps

    def __str__(self) -> str:
        return self.value


def aggregate(mfcc, strategy: AggregationStrategy = AggregationStrategy.MEAN) -> np.ndarray:
    """Collapse an ``[n_frames, n_ceps]`` matrix (or ``MfccMatrix``) to one vector.

    ``MEAN_STD`` appends the population standard deviation of each column.
    """
    coeffs = np.asarray(getattr(mfcc, "coeffs", mfcc), dtype=np.float64)
    strategy = AggregationStrategy(strategy)
    n_frames = coeffs.shape[0]
    if n_frames < 1:
        raise TooFewFrames("need at least one frame")
    means = coeffs.mean(axis=0)
    if strategy is AggregationStrategy.MEAN:
        return means
    if n_frames < 2:
        raise TooFewFrames("mean-std aggregation needs at least two frames")
    return np.concatenate([means, coeffs.std(axis=0, ddof=0)])


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape[-1]} vs {b.shape[-1]}")
    return float(np.sqrt(np.sum((b - a) ** 2)))


def distances_to(points: np.ndarray, query) -> np.ndarray:
    """Euclidean distance from ``query`` to every row of ``points``."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != points.shape[1]:
        raise DimensionMismatch(f"query dimension {q.shape[-1]} vs model dimension {points.shape[1]}")
    return np.sqrt(np.sum((points - q) ** 2, axis=1))
