"""Point-forecast accuracy metrics."""
from __future__ import annotations

import numpy as np

from ..errors import DataError

MAPE_EPS = 1e-6


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise DataError(f"length mismatch: {pred.size} vs {actual.size}")
    if pred.size == 0:
        raise DataError("empty input")
    return pred, actual


def mae(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def mape(pred, actual, eps: float = MAPE_EPS) -> float:
    """Mean absolute percentage error in percent; entries with |actual| < eps are skipped."""
    pred, actual = _pair(pred, actual)
    keep = np.abs(actual) >= eps
    if not keep.any():
        return float("nan")
    return float(100.0 * np.mean(np.abs(pred[keep] - actual[keep]) / np.abs(actual[keep])))


def relative_error_reduction(best: float, second: float) -> float:
    """Percent reduction of ``best`` relative to ``second``."""
    if second == 0:
        return float("nan")
    return 100.0 * (second - best) / second
