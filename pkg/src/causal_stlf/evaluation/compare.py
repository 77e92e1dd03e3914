"""Model x regime x fold x city comparison with rolling-origin folds."""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..forecast import GRUForecaster, GruConfig, Ridge, SeasonalNaive, TrainConfig, WindowConfig, make_windows
from ..mifilter import MiFilterConfig
from ..panel import Panel, ScalerParams, apply_scaler, fit_scaler
from ..pcmci import PcmciConfig
from .folds import Fold, plan_folds
from .metrics import mae, mape
from .regimes import REGIMES, FeatureRegime, resolve_regimes

MODELS = ("seasonal_naive", "ridge", "gru")


@dataclass(frozen=True)
class EvalConfig:
    target: str = "load"
    lookback: int = 168
    horizon: int = 24
    train_span: int = 2 * 8760
    n_folds: int = 6
    val_frac: float = 0.1
    ridge_lambda: float = 1.0
    season: int = 168
    weather: tuple | None = None
    condition_on_calendar: bool = False
    seed: int = 0
    workers: int = 1
    pcmci: PcmciConfig = PcmciConfig()
    mi: MiFilterConfig = MiFilterConfig()
    gru: GruConfig = GruConfig()
    train: TrainConfig = TrainConfig()

    def to_dict(self) -> dict:
        """Result-relevant settings; worker counts are left out so reports do not depend on them."""
        d = asdict(self)
        del d["workers"]
        del d["pcmci"]["workers"]
        d["weather"] = None if self.weather is None else list(self.weather)
        return d


def derive_seed(root: int, *labels) -> int:
    """Stable child seed from a root seed and string labels."""
    words = [int(root) & 0xFFFFFFFF] + [zlib.crc32(str(l).encode()) for l in labels]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def build_model(name: str, regime: FeatureRegime, cfg: EvalConfig, seed: int):
    if name == "seasonal_naive":
        return SeasonalNaive(regime.columns.index(cfg.target), cfg.horizon, cfg.season)
    if name == "ridge":
        return Ridge(cfg.ridge_lambda)
    if name == "gru":
        tc = asdict(cfg.train)
        tc["seed"] = seed
        return GRUForecaster(cfg.gru, TrainConfig(**tc))
    raise ValueError(f"unknown model {name!r}; choose from {MODELS}")


@dataclass
class FoldFit:
    """Everything fitted on one fold's training window."""

    scaler: ScalerParams
    regimes: dict
    models: dict            # (model, regime) -> fitted model or error string
    scaled: Panel
    selection: dict = field(default_factory=dict)


def fit_fold(panel: Panel, fold: Fold, models: Sequence[str], regimes: Sequence[str],
             cfg: EvalConfig, labels=()) -> FoldFit:
    """Fit scaler, feature selection and models strictly on ``fold``'s training window."""
    res = resolve_regimes(panel, cfg.target, rows=fold.train, weather=cfg.weather,
                          mi_cfg=cfg.mi, pcmci_cfg=cfg.pcmci, names=regimes,
                          condition_on_calendar=cfg.condition_on_calendar)
    used = sorted({c for r in res.regimes.values() for c in r.columns})
    scaler = fit_scaler(panel, fold.train, columns=used)
    scaled = apply_scaler(panel, scaler)
    fitted = {}
    for rname in regimes:
        regime = res[rname]
        wcfg = WindowConfig(regime.columns, cfg.target, cfg.lookback, cfg.horizon)
        for mname in models:
            key = (mname, rname)
            try:
                model = build_model(mname, regime, cfg, derive_seed(cfg.seed, *labels, mname, rname))
                train_w = make_windows(scaled, wcfg, fold.train)
                val_w = make_windows(scaled, wcfg, (fold.val[0] - cfg.lookback, fold.val[1]))
                fitted[key] = model.fit(train_w, val_w)
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                fitted[key] = f"{type(exc).__name__}: {exc}"
    selection = {
        "F2": list(res["F2"].exogenous) if "F2" in res.regimes else None,
        "F3": list(res["F3"].exogenous) if "F3" in res.regimes else None,
        "mi_scores": res.mi_scores,
    }
    return FoldFit(scaler, res.regimes, fitted, scaled, selection)


def _target_scale(scaler: ScalerParams, target: str):
    i = scaler.columns.index(target)
    return scaler.mean[i], scaler.std[i]


def predict_original_units(model, windows, scaler: ScalerParams, target: str):
    m, s = _target_scale(scaler, target)
    return model.predict(windows) * s + m, windows.y * s + m


def _run_fold(args):
    city, panel, fold, models, regimes, cfg = args
    cells = []
    try:
        fit = fit_fold(panel, fold, models, regimes, cfg, labels=(city, fold.index))
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        err = f"{type(exc).__name__}: {exc}"
        for mname in models:
            for rname in regimes:
                cells.append(_cell(city, fold.index, mname, rname, error=err))
        return cells, {"city": city, "fold": fold.index, "error": err}
    for rname in regimes:
        regime = fit.regimes[rname]
        wcfg = WindowConfig(regime.columns, cfg.target, cfg.lookback, cfg.horizon)
        for mname in models:
            model = fit.models[(mname, rname)]
            if isinstance(model, str):
                cells.append(_cell(city, fold.index, mname, rname, error=model))
                continue
            try:
                test_w = make_windows(fit.scaled, wcfg, (fold.test[0] - cfg.lookback, fold.test[1]))
                if len(test_w) == 0:
                    raise DataError("no fully observed test windows")
                pred, actual = predict_original_units(model, test_w, fit.scaler, cfg.target)
                cells.append(_cell(city, fold.index, mname, rname, mae(pred, actual),
                                   mape(pred, actual), len(test_w)))
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                cells.append(_cell(city, fold.index, mname, rname, error=f"{type(exc).__name__}: {exc}"))
    sel = {"city": city, "fold": fold.index, **fit.selection,
           "scaler": fit.scaler.to_dict()}
    return cells, sel


def _cell(city, fold, model, regime, mae_=None, mape_=None, n=0, error=None):
    return {"city": city, "fold": fold, "model": model, "regime": regime,
            "mae": mae_, "mape": mape_, "n_windows": n, "error": error}


def _finite(v):
    return v is not None and not (isinstance(v, float) and math.isnan(v))


def city_means(cells) -> list:
    """Fold-mean MAE/MAPE per (city, model, regime) over successful folds."""
    groups: dict = {}
    for c in cells:
        groups.setdefault((c["city"], c["model"], c["regime"]), []).append(c)
    out = []
    for (city, model, regime), cs in sorted(groups.items()):
        maes = [c["mae"] for c in cs if _finite(c["mae"])]
        mapes = [c["mape"] for c in cs if _finite(c["mape"])]
        out.append({"city": city, "model": model, "regime": regime,
                    "mae": float(np.mean(maes)) if maes else None,
                    "mape": float(np.mean(mapes)) if mapes else None,
                    "n_folds": len(maes)})
    return out


def top_counts(means: list, models: Sequence[str], regimes: Sequence[str]) -> dict:
    """Per model, the number of cities where each regime has the best fold-mean score.

    Ties go to the regime listed first.
    """
    counts = {m: {r: {"mae": 0, "mape": 0} for r in regimes} for m in models}
    cities = sorted({row["city"] for row in means})
    lookup = {(r["city"], r["model"], r["regime"]): r for r in means}
    for m in models:
        for city in cities:
            for metric in ("mae", "mape"):
                best, best_r = None, None
                for r in regimes:
                    v = lookup.get((city, m, r), {}).get(metric)
                    if _finite(v) and (best is None or v < best):
                        best, best_r = v, r
                if best_r is not None:
                    counts[m][best_r][metric] += 1
    return counts


def regime_means(means: list) -> list:
    groups: dict = {}
    for row in means:
        groups.setdefault((row["model"], row["regime"]), []).append(row)
    out = []
    for (model, regime), rows in sorted(groups.items()):
        maes = [r["mae"] for r in rows if _finite(r["mae"])]
        mapes = [r["mape"] for r in rows if _finite(r["mape"])]
        out.append({"model": model, "regime": regime,
                    "mae": float(np.mean(maes)) if maes else None,
                    "mape": float(np.mean(mapes)) if mapes else None})
    return out


@dataclass
class EvalReport:
    config: dict
    models: list
    regimes: list
    cities: list
    cells: list
    selections: list
    folds: dict = field(default_factory=dict)
    ood: dict | None = None

    @property
    def city_means(self):
        return city_means(self.cells)

    @property
    def top_counts(self):
        return top_counts(self.city_means, self.models, self.regimes)

    def to_dict(self) -> dict:
        means = self.city_means
        return {
            "config": self.config,
            "models": self.models,
            "regimes": self.regimes,
            "cities": self.cities,
            "folds": self.folds,
            "cells": self.cells,
            "city_means": means,
            "regime_means": regime_means(means),
            "top_counts": top_counts(means, self.models, self.regimes),
            "selections": self.selections,
            "ood": self.ood,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["city", "model", "regime", "fold", "mae", "mape", "n_windows", "error"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for c in self.cells:
            w.writerow({k: ("" if c[k] is None else c[k]) for k in cols})
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["config"], d["models"], d["regimes"], d["cities"], d["cells"],
                   d["selections"], d.get("folds", {}), d.get("ood"))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _as_city_dict(panels) -> dict:
    if isinstance(panels, Panel):
        panels = [panels]
    if isinstance(panels, dict):
        return dict(panels)
    out = {}
    for i, p in enumerate(panels):
        name = p.region or f"city{i}"
        if name in out:
            raise DataError(f"duplicate city/region name {name!r}")
        out[name] = p
    return out


def run_regime_comparison(panels, models: Sequence[str] = ("ridge",),
                          regimes: Sequence[str] = REGIMES,
                          cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Cross every model and regime over the rolling-origin folds of every city.

    Selection, scaling and training are redone per fold on that fold's
    training window. A failing cell is recorded with its error; the run
    continues.
    """
    cities = _as_city_dict(panels)
    for m in models:
        if m not in MODELS:
            raise ValueError(f"unknown model {m!r}; choose from {MODELS}")
    for r in regimes:
        if r not in REGIMES:
            raise ValueError(f"unknown regime {r!r}; choose from {REGIMES}")
    jobs, fold_info = [], {}
    for city in sorted(cities):
        panel = cities[city]
        if cfg.target not in panel.columns:
            raise DataError(f"panel {city!r} has no target column {cfg.target!r}")
        plan = plan_folds(len(panel), cfg.train_span, cfg.n_folds, cfg.val_frac,
                          min_test=cfg.horizon)
        fold_info[city] = [f.timestamps(panel.timestamps) for f in plan]
        for fold in plan:
            jobs.append((city, panel, fold, tuple(models), tuple(regimes), cfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    cells, selections = [], []
    for c, s in results:
        cells.extend(c)
        selections.append(s)
    cells.sort(key=lambda c: (c["city"], c["model"], c["regime"], c["fold"]))
    return EvalReport(cfg.to_dict(), list(models), list(regimes), sorted(cities),
                      cells, selections, fold_info)
