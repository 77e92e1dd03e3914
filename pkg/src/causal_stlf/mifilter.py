"""Mutual-information ranking with a correlation-based redundancy screen."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .assoc import knn_mutual_information, pearson
from .errors import DataError, DegenerateInputError
from .panel import Panel


@dataclass(frozen=True)
class MiFilterConfig:
    mi_thres: float = 0.025
    rho_max: float = 0.8
    knn_k: int = 3
    max_lag: int = 0  # >0: score = max MI over candidate lags 0..max_lag

    def __post_init__(self):
        if self.mi_thres < 0:
            raise ValueError("mi_thres must be >= 0")
        if not 0.0 < self.rho_max < 1.0:
            raise ValueError("rho_max must lie in (0, 1)")
        if self.knn_k < 1 or self.max_lag < 0:
            raise ValueError("knn_k must be >= 1 and max_lag >= 0")


@dataclass(frozen=True)
class MiSelection:
    target: str
    kept: tuple
    scores: dict
    config: MiFilterConfig

    def to_dict(self) -> dict:
        return {
            "method": "mi_filter",
            "target": self.target,
            "kept": list(self.kept),
            "scores": dict(sorted(self.scores.items())),
            "config": asdict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _shared_rows(panel: Panel, names, rows):
    ok = panel.fully_observed(names)
    if rows is not None:
        sel = np.zeros(len(panel), dtype=bool)
        sel[rows[0]:rows[1]] = True
        ok &= sel
    return np.flatnonzero(ok)


def mi_rank(panel: Panel, target: str, candidates: Sequence[str],
            cfg: MiFilterConfig = MiFilterConfig(), rows=None) -> list:
    """``[(name, mi), ...]`` sorted by MI descending, then name."""
    idx = _shared_rows(panel, [target, *candidates], rows)
    y_all = panel.column(target)
    scored = []
    for name in candidates:
        x_all = panel.column(name)
        best = 0.0
        for lag in range(cfg.max_lag + 1):
            use = idx[idx >= lag]
            if lag:
                # candidate at t-lag must be observed too
                use = use[np.isfinite(x_all[use - lag])]
            try:
                mi = knn_mutual_information(x_all[use - lag], y_all[use], cfg.knn_k)
            except DegenerateInputError:
                mi = 0.0
            best = max(best, mi)
        scored.append((name, best))
    scored.sort(key=lambda s: (-s[1], s[0]))
    return scored


def redundancy_screen(scored: Sequence, panel: Panel,
                      cfg: MiFilterConfig = MiFilterConfig(), rows=None) -> list:
    """Greedy pass in score order; keep a feature unless |rho| > rho_max with a kept one."""
    names = [s[0] for s in scored]
    if not names:
        return []
    idx = _shared_rows(panel, names, rows)
    kept: list = []
    for name in names:
        x = panel.column(name)[idx]
        redundant = False
        for other in kept:
            try:
                r = pearson(x, panel.column(other)[idx])
            except DegenerateInputError:
                continue
            if abs(r) > cfg.rho_max:
                redundant = True
                break
        if not redundant:
            kept.append(name)
    return kept


def select_noncausal(panel: Panel, target: str, candidates: Sequence[str],
                     cfg: MiFilterConfig = MiFilterConfig(), rows=None) -> MiSelection:
    """Threshold MI scores at ``mi_thres`` then screen redundant features."""
    if target in candidates:
        raise DataError("target must not be among the candidates")
    scored = mi_rank(panel, target, candidates, cfg, rows)
    passing = [s for s in scored if s[1] > cfg.mi_thres]
    kept = redundancy_screen(passing, panel, cfg, rows)
    return MiSelection(target, tuple(kept), {n: float(m) for n, m in scored}, cfg)
