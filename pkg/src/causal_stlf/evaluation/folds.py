"""Rolling-origin fold plans over hourly rows."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class Fold:
    index: int
    train: tuple   # (start, stop) rows used for fitting
    val: tuple     # (start, stop) final slice of the training window
    test: tuple    # (start, stop)

    @property
    def window(self) -> tuple:
        """Full training window, fit rows plus validation slice."""
        return self.train[0], self.val[1]

    def timestamps(self, stamps: np.ndarray) -> dict:
        def span(r):
            return [str(stamps[r[0]]), str(stamps[r[1] - 1])]
        return {"train": span(self.train), "val": span(self.val), "test": span(self.test)}


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    train_span: int
    n_folds: int
    stride: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def plan_folds(n_rows: int, train_span: int = 2 * HOURS_PER_YEAR, n_folds: int = 6,
               val_frac: float = 0.1, min_test: int = 24) -> FoldPlan:
    """Sliding training windows of ``train_span`` rows, each followed by a test block.

    Origins are spaced ``stride = (n_rows - train_span) // n_folds`` apart so
    the test blocks tile the data after the first window; the last block also
    absorbs the remainder rows. The final ``val_frac`` of each training
    window is held out for validation.
    """
    if n_folds < 1 or train_span < 2:
        raise ValueError("n_folds must be >= 1 and train_span >= 2")
    if not 0.0 < val_frac < 1.0:
        raise ValueError("val_frac must lie in (0, 1)")
    required = train_span + n_folds * min_test
    if n_rows < required:
        raise DataError(f"need at least {required} rows for {n_folds} folds "
                        f"(train span {train_span}, min test block {min_test}); have {n_rows}")
    stride = (n_rows - train_span) // n_folds
    n_val = max(1, int(round(val_frac * train_span)))
    folds = []
    for k in range(n_folds):
        origin = train_span + k * stride
        stop = n_rows if k == n_folds - 1 else origin + stride
        start = origin - train_span
        folds.append(Fold(k, (start, origin - n_val), (origin - n_val, origin), (origin, stop)))
    return FoldPlan(tuple(folds), train_span, n_folds, stride)
