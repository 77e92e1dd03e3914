"""Feature regimes F0-F3 resolved to concrete column lists."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..mifilter import MiFilterConfig, select_noncausal
from ..panel import CALENDAR_COLUMNS, PREMISE_COLUMN, Panel
from ..pcmci import PcmciConfig, causal_feature_set, run_pcmci

REGIMES = ("F0", "F1", "F2", "F3")


@dataclass(frozen=True)
class FeatureRegime:
    name: str
    columns: tuple
    exogenous: tuple = ()

    def to_dict(self):
        return {"name": self.name, "columns": list(self.columns), "exogenous": list(self.exogenous)}


@dataclass(frozen=True)
class Resolution:
    regimes: dict
    mi_scores: dict = field(default_factory=dict)
    graph: dict | None = None

    def __getitem__(self, name):
        return self.regimes[name]


def base_columns(panel: Panel, target: str) -> list:
    """Load history, calendar features and premise count that exist in ``panel``."""
    cols = [target]
    cols += [c for c in CALENDAR_COLUMNS if c in panel.columns]
    if PREMISE_COLUMN in panel.columns:
        cols.append(PREMISE_COLUMN)
    return cols


def weather_columns(panel: Panel, target: str) -> list:
    skip = set(base_columns(panel, target))
    return [c for c in panel.columns if c not in skip]


def resolve_regimes(panel: Panel, target: str, rows=None,
                    weather: Sequence[str] | None = None,
                    mi_cfg: MiFilterConfig = MiFilterConfig(),
                    pcmci_cfg: PcmciConfig = PcmciConfig(),
                    names: Sequence[str] = REGIMES,
                    condition_on_calendar: bool = False) -> Resolution:
    """Resolve regimes using only ``rows`` (a ``(start, stop)`` training range).

    F0 is the shared base; F1 adds every weather column; F2 adds the MI-filter
    selection; F3 adds the weather sources with a lagged causal link into the
    target.
    """
    base = base_columns(panel, target)
    weather = list(weather_columns(panel, target) if weather is None else weather)
    out, scores, graph = {}, {}, None
    for name in names:
        if name == "F0":
            out[name] = FeatureRegime("F0", tuple(base))
        elif name == "F1":
            out[name] = FeatureRegime("F1", tuple(base + weather), tuple(weather))
        elif name == "F2":
            kept = []
            if weather:
                sel = select_noncausal(panel, target, weather, mi_cfg, rows)
                kept, scores = list(sel.kept), sel.scores
            chosen = [w for w in weather if w in kept]
            out[name] = FeatureRegime("F2", tuple(base + chosen), tuple(chosen))
        elif name == "F3":
            chosen = []
            if weather:
                variables = [target] + weather
                if condition_on_calendar:
                    variables += [c for c in CALENDAR_COLUMNS if c in panel.columns]
                g = run_pcmci(panel, pcmci_cfg, variables=variables, rows=rows)
                graph = g.to_dict()
                found = causal_feature_set(g, target)
                chosen = [w for w in weather if w in found]
            out[name] = FeatureRegime("F3", tuple(base + chosen), tuple(chosen))
        else:
            raise ValueError(f"unknown regime {name!r}; choose from {REGIMES}")
    _check_nesting(out)
    return Resolution(out, scores, graph)


def _check_nesting(regimes: dict) -> None:
    f0 = set(regimes["F0"].columns) if "F0" in regimes else None
    f1 = set(regimes["F1"].columns) if "F1" in regimes else None
    for name in ("F2", "F3"):
        if name not in regimes:
            continue
        cols = set(regimes[name].columns)
        assert f0 is None or f0 <= cols, f"{name} does not contain F0"
        assert f1 is None or cols <= f1, f"{name} is not a subset of F1"
