"""Sliding lookback/horizon windows over a panel."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..panel import Panel


@dataclass(frozen=True)
class WindowConfig:
    features: tuple
    target: str = "load"
    lookback: int = 168
    horizon: int = 24

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.lookback < 1 or self.horizon < 1:
            raise ValueError("lookback and horizon must be >= 1")
        if not self.features:
            raise ValueError("at least one feature column is required")


@dataclass(frozen=True)
class WindowSample:
    X: np.ndarray       # (lookback, n_features)
    y: np.ndarray       # (horizon,)
    origin: np.datetime64


@dataclass(frozen=True)
class Windows:
    """Stacked window samples: ``X`` (N, L, F), ``y`` (N, H), ``origins`` (N,).

    ``starts`` holds the panel row of each window's first lookback step.
    """

    X: np.ndarray
    y: np.ndarray
    origins: np.ndarray
    starts: np.ndarray
    features: tuple
    target: str

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, i) -> WindowSample:
        return WindowSample(self.X[i], self.y[i], self.origins[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "Windows":
        return Windows(self.X[idx], self.y[idx], self.origins[idx], self.starts[idx],
                       self.features, self.target)

    @classmethod
    def from_samples(cls, samples: Sequence[WindowSample], features, target) -> "Windows":
        return cls(np.stack([s.X for s in samples]), np.stack([s.y for s in samples]),
                   np.array([s.origin for s in samples]), np.arange(len(samples)),
                   tuple(features), target)


def _as_range(rows, n):
    if rows is None:
        return 0, n
    if isinstance(rows, slice):
        return rows.start or 0, n if rows.stop is None else rows.stop
    return int(rows[0]), int(rows[1])


def make_windows(panel: Panel, wcfg: WindowConfig, rows=None) -> Windows:
    """All stride-1 windows lying entirely inside ``rows``.

    A window spans ``lookback + horizon`` rows; its features are read over the
    lookback and the target over the horizon. Windows touching a masked cell
    in either part are dropped.
    """
    start, stop = _as_range(rows, len(panel))
    start, stop = max(start, 0), min(stop, len(panel))
    L, H = wcfg.lookback, wcfg.horizon
    if stop - start < L + H:
        raise DataError(f"row range of length {stop - start} is shorter than lookback + horizon = {L + H}")
    fidx = [panel.index(f) for f in wcfg.features]
    tidx = panel.index(wcfg.target)
    feat = panel.values[start:stop][:, fidx]
    targ = panel.values[start:stop, tidx]
    f_ok = panel.observed[start:stop][:, fidx].all(axis=1).astype(int)
    t_ok = panel.observed[start:stop, tidx].astype(int)
    n_win = stop - start - L - H + 1
    cf = np.concatenate([[0], np.cumsum(f_ok)])
    ct = np.concatenate([[0], np.cumsum(t_ok)])
    s = np.arange(n_win)
    good = ((cf[s + L] - cf[s]) == L) & ((ct[s + L + H] - ct[s + L]) == H)
    s = s[good]
    lb = s[:, None] + np.arange(L)
    hz = s[:, None] + L + np.arange(H)
    X = feat[lb] if s.size else np.empty((0, L, len(fidx)))
    y = targ[hz] if s.size else np.empty((0, H))
    origins = panel.timestamps[start:stop][s + L - 1]
    return Windows(X, y, origins, s + start, wcfg.features, wcfg.target)
