"""Windowed forecasters sharing a ``fit(train, val)`` / ``predict(data)`` contract."""
from .gru import GRUForecaster, GruConfig, TrainConfig
from .linear import Ridge, SeasonalNaive, ridge_solve
from .windows import WindowConfig, Windows, WindowSample, make_windows

__all__ = [
    "GRUForecaster", "GruConfig", "TrainConfig", "Ridge", "SeasonalNaive", "ridge_solve",
    "WindowConfig", "Windows", "WindowSample", "make_windows",
]
