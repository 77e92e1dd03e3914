"""Extreme-weather (out-of-distribution) windows and evaluation on them."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..forecast import WindowConfig, make_windows
from ..panel import Panel, apply_scaler, fit_scaler
from .compare import EvalConfig, build_model, derive_seed, predict_original_units
from .metrics import mae, mape, relative_error_reduction
from .regimes import REGIMES, resolve_regimes

NO_WINDOWS = "no windows"


@dataclass(frozen=True)
class OodConfig:
    lower: float = 0.05
    upper: float = 0.95
    variables: tuple = ("t2m", "tp")
    window: int = 24
    exceed_fraction: float = 0.5
    min_separation: int = 24

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not 0.0 < self.lower < self.upper < 1.0:
            raise ValueError("need 0 < lower < upper < 1")
        if self.window < 1 or self.min_separation < 0 or not 0.0 <= self.exceed_fraction < 1.0:
            raise ValueError("bad OOD window settings")
        if not self.variables:
            raise ValueError("at least one flag variable is required")


@dataclass(frozen=True)
class OodWindow:
    start_row: int
    start: np.datetime64
    end: np.datetime64        # last hour in the window
    trigger: str
    exceed_fraction: float


def ood_thresholds(panel: Panel, train_end: int, cfg: OodConfig) -> dict:
    """Per-variable (lower, upper) quantiles over observed training rows ``[0, train_end)``."""
    if train_end < 1:
        raise DataError("training range is empty")
    out = {}
    for v in cfg.variables:
        if v not in panel.columns:
            raise DataError(f"OOD flag variable {v!r} not in panel")
        vals = panel.column(v)[:train_end]
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            raise DataError(f"no observed training values for {v!r}")
        out[v] = (float(np.quantile(vals, cfg.lower)), float(np.quantile(vals, cfg.upper)))
    return out


def exceedance(panel: Panel, thresholds: dict) -> dict:
    """Per-variable boolean arrays, True where an observed value lies outside its band."""
    flags = {}
    for v, (lo, hi) in thresholds.items():
        x = panel.column(v)
        with np.errstate(invalid="ignore"):
            flags[v] = np.isfinite(x) & ((x < lo) | (x > hi))
    return flags


def detect_ood_windows(panel: Panel, train_end: int, cfg: OodConfig = OodConfig(),
                       stop: int | None = None) -> list:
    """Scan rows ``[train_end, stop)`` for extreme-weather windows.

    A window of ``cfg.window`` hours is flagged when more than
    ``exceed_fraction`` of its hours have any flag variable outside the
    training-period quantile band. Flagged windows are accepted left to right;
    after an accepted window the next one must start at least
    ``min_separation`` hours after it ends.
    """
    thr = ood_thresholds(panel, train_end, cfg)
    flags = exceedance(panel, thr)
    stop = len(panel) if stop is None else min(stop, len(panel))
    W = cfg.window
    any_flag = np.zeros(len(panel), dtype=bool)
    for f in flags.values():
        any_flag |= f
    csum = np.concatenate([[0], np.cumsum(any_flag)])
    windows = []
    next_ok = train_end
    for s in range(train_end, stop - W + 1):
        if s < next_ok:
            continue
        count = csum[s + W] - csum[s]
        if count > cfg.exceed_fraction * W:
            per_var = {v: int(f[s:s + W].sum()) for v, f in flags.items()}
            trig = "+".join(v for v, _ in sorted(per_var.items(), key=lambda kv: (-kv[1], kv[0]))
                            if per_var[v] > 0)
            windows.append(OodWindow(s, panel.timestamps[s], panel.timestamps[s + W - 1],
                                     trig, count / W))
            next_ok = s + W + cfg.min_separation
    return windows


def windows_to_csv(windows: Sequence[OodWindow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start", "end", "trigger", "exceed_fraction"])
    for win in windows:
        w.writerow([str(win.start) + "Z", str(win.end) + "Z", win.trigger, repr(win.exceed_fraction)])
    return buf.getvalue()


def rank_configs(results: dict, metric: str) -> dict:
    """Best and second-best configuration for ``metric`` plus the relative reduction."""
    scored = sorted(((v[metric], k) for k, v in results.items() if v.get(metric) is not None),
                    key=lambda t: (t[0], t[1]))
    if not scored:
        return {"best": None, "second": None, "reduction_pct": None}
    best = scored[0]
    if len(scored) < 2:
        return {"best": best[1], "second": None, "reduction_pct": None}
    second = scored[1]
    return {"best": best[1], "second": second[1],
            "reduction_pct": relative_error_reduction(best[0], second[0])}


def evaluate_ood(panel: Panel, windows: Sequence[OodWindow], train_end: int,
                 models: Sequence[str] = ("ridge",), regimes: Sequence[str] = REGIMES,
                 cfg: EvalConfig = EvalConfig()) -> dict:
    """Train every (model, regime) once on ``[0, train_end)`` and score the OOD windows.

    Each window is forecast from the hour just before it starts, so the
    forecast horizon must cover the window length.
    """
    if not windows:
        return {"status": NO_WINDOWS, "windows": [], "results": {}, "ranking": {}}
    W = windows[0].end - windows[0].start
    W = int(W // np.timedelta64(1, "h")) + 1
    if cfg.horizon < W:
        raise DataError(f"horizon {cfg.horizon} is shorter than the OOD window ({W} h)")
    n_val = max(1, int(round(cfg.val_frac * train_end)))
    fit_rows, val_rows = (0, train_end - n_val), (train_end - n_val, train_end)
    res = resolve_regimes(panel, cfg.target, rows=fit_rows, weather=cfg.weather,
                          mi_cfg=cfg.mi, pcmci_cfg=cfg.pcmci, names=regimes,
                          condition_on_calendar=cfg.condition_on_calendar)
    used = sorted({c for r in res.regimes.values() for c in r.columns})
    scaler = fit_scaler(panel, fit_rows, columns=used)
    scaled = apply_scaler(panel, scaler)
    L = cfg.lookback
    results = {}
    for rname in regimes:
        regime = res[rname]
        wcfg = WindowConfig(regime.columns, cfg.target, L, cfg.horizon)
        for mname in models:
            key = f"{mname}/{rname}"
            try:
                model = build_model(mname, regime, cfg, derive_seed(cfg.seed, "ood", panel.region, mname, rname))
                model.fit(make_windows(scaled, wcfg, fit_rows),
                          make_windows(scaled, wcfg, (val_rows[0] - L, val_rows[1])))
                maes, mapes = [], []
                for win in windows:
                    s0 = win.start_row - L
                    if s0 < 0 or win.start_row + cfg.horizon > len(panel):
                        continue
                    ws = make_windows(scaled, wcfg, (s0, win.start_row + cfg.horizon))
                    if len(ws) == 0:
                        continue
                    pred, actual = predict_original_units(model, ws.subset([0]), scaler, cfg.target)
                    maes.append(mae(pred[:, :W], actual[:, :W]))
                    mapes.append(mape(pred[:, :W], actual[:, :W]))
                results[key] = {"model": mname, "regime": rname,
                                "mae": float(np.mean(maes)) if maes else None,
                                "mape": float(np.nanmean(mapes)) if mapes else None,
                                "n_windows": len(maes), "error": None}
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                results[key] = {"model": mname, "regime": rname, "mae": None, "mape": None,
                                "n_windows": 0, "error": f"{type(exc).__name__}: {exc}"}
    return {
        "status": "ok",
        "windows": [{"start": str(w.start) + "Z", "end": str(w.end) + "Z", "trigger": w.trigger,
                     "exceed_fraction": w.exceed_fraction} for w in windows],
        "selection": {k: list(r.exogenous) for k, r in res.regimes.items()},
        "results": results,
        "ranking": {m: rank_configs(results, m) for m in ("mae", "mape")},
    }
