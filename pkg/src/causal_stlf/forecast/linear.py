"""Seasonal-naive and closed-form ridge forecasters."""
from __future__ import annotations

import json

import numpy as np

from ..errors import DataError, NumericalError
from .windows import Windows, WindowSample


def _as_batch(data) -> np.ndarray:
    if isinstance(data, WindowSample):
        return data.X[None]
    if isinstance(data, Windows):
        return data.X
    X = np.asarray(data, dtype=float)
    return X[None] if X.ndim == 2 else X


def _squeeze(data, out):
    return out[0] if isinstance(data, WindowSample) or np.ndim(getattr(data, "X", data)) == 2 else out


class SeasonalNaive:
    """Repeat the target value observed one season (default 168 h) earlier."""

    name = "seasonal_naive"

    def __init__(self, target_index: int, horizon: int, season: int = 168):
        self.target_index = target_index
        self.horizon = horizon
        self.season = season

    def fit(self, train=None, val=None):
        return self

    def predict(self, data) -> np.ndarray:
        X = _as_batch(data)
        L = X.shape[1]
        if L < self.season or self.horizon > self.season:
            raise DataError(f"seasonal naive needs lookback >= {self.season} >= horizon")
        # y_hat[t+h] = y[t+h-season]; lookback row L-1 is time t
        rows = L - self.season + np.arange(self.horizon)
        return _squeeze(data, X[:, rows, self.target_index].copy())

    def state_dict(self) -> dict:
        return {"target_index": self.target_index, "horizon": self.horizon, "season": self.season}


def ridge_solve(A: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(A'A + lam*D) W = A'Y`` where D is identity with D[0, 0] = 0.

    Column 0 of ``A`` is taken to be the intercept and is not penalised.
    """
    p = A.shape[1]
    if lam == 0 and np.linalg.matrix_rank(A) < p:
        raise NumericalError("design matrix is rank deficient; use a ridge penalty lam > 0")
    G = A.T @ A
    G[np.diag_indices(p)] += lam
    G[0, 0] -= lam
    try:
        return np.linalg.solve(G, A.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular ({exc}); use lam > 0") from exc


class Ridge:
    """Ridge regression on the flattened window, one output per horizon step."""

    name = "ridge"

    def __init__(self, lam: float = 1.0):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = lam
        self.coef_ = None       # (L*F, H)
        self.intercept_ = None  # (H,)

    @staticmethod
    def design(X: np.ndarray) -> np.ndarray:
        flat = X.reshape(X.shape[0], -1)
        return np.column_stack([np.ones(flat.shape[0]), flat])

    def fit(self, train: Windows, val=None):
        if len(train) < 2:
            raise DataError("ridge needs at least 2 training windows")
        W = ridge_solve(self.design(train.X), train.y, self.lam)
        self.intercept_, self.coef_ = W[0], W[1:]
        return self

    def predict(self, data) -> np.ndarray:
        if self.coef_ is None:
            raise RuntimeError("model is not fitted")
        X = _as_batch(data)
        out = X.reshape(X.shape[0], -1) @ self.coef_ + self.intercept_
        return _squeeze(data, out)

    def state_dict(self) -> dict:
        return {"lam": self.lam, "coef": self.coef_.tolist(), "intercept": self.intercept_.tolist()}

    def to_json(self) -> str:
        return json.dumps({"format": "causal_stlf.ridge", "version": 1, **self.state_dict()},
                          sort_keys=True)
