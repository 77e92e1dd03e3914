"""Two-phase lagged causal discovery (PC1 condition selection + MCI tests).

Variables are columns of a :class:`~causal_stlf.panel.Panel`. A lagged node is
written ``(var, lag)`` meaning ``X^{var}_{t-lag}``. Every test for a given run
uses the same sample rows, ``[2 * tau_max, T)`` restricted to rows whose full
lag window is observed.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .assoc import CiResult, parcorr_test
from .errors import DataError, DegenerateInputError
from .panel import CALENDAR_COLUMNS, Panel

MIN_EFFECTIVE_SAMPLES = 50


@dataclass(frozen=True)
class PcmciConfig:
    tau_max: int = 5
    tau_min: int = 1
    pc_alpha: float = 0.05
    mci_alpha: float = 0.05
    max_cond_dim: int | None = None
    fdr: bool = False
    workers: int = 1

    def __post_init__(self):
        if not 1 <= self.tau_min <= self.tau_max:
            raise ValueError(f"need 1 <= tau_min <= tau_max, got {self.tau_min}, {self.tau_max}")
        for name in ("pc_alpha", "mci_alpha"):
            a = getattr(self, name)
            if not 0.0 < a < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {a}")
        if self.max_cond_dim is not None and self.max_cond_dim < 0:
            raise ValueError("max_cond_dim must be >= 0")


@dataclass(frozen=True)
class Link:
    src: str
    lag: int
    dst: str
    stat: float
    pval: float


@dataclass(frozen=True)
class LaggedGraph:
    variables: tuple
    tau_max: int
    tau_min: int
    links: tuple = field(default=())

    def parents(self, target: str) -> list:
        """``[(source, lag), ...]`` of links into ``target``, sorted."""
        return sorted((l.src, l.lag) for l in self.links if l.dst == target)

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "tau_max": self.tau_max,
            "tau_min": self.tau_min,
            "links": [
                {"src": l.src, "lag": l.lag, "dst": l.dst, "stat": l.stat, "pval": l.pval}
                for l in self.links
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LaggedGraph":
        links = tuple(Link(l["src"], int(l["lag"]), l["dst"], float(l["stat"]), float(l["pval"]))
                      for l in d["links"])
        return cls(tuple(d["variables"]), int(d["tau_max"]), int(d.get("tau_min", 1)), links)


class _LagData:
    """Lagged column views sharing one set of valid sample rows."""

    def __init__(self, panel: Panel, variables: Sequence[str], cfg: PcmciConfig, rows=None):
        self.variables = tuple(variables)
        data = np.column_stack([panel.column(v) for v in self.variables])
        obs = panel.fully_observed(self.variables)
        if rows is not None:
            start, stop = rows
            data, obs = data[start:stop], obs[start:stop]
        self.max_lag = 2 * cfg.tau_max
        T = len(data)
        # row t usable iff rows t - max_lag .. t are all observed
        window_ok = np.ones(max(T - self.max_lag, 0), dtype=bool)
        for l in range(self.max_lag + 1):
            window_ok &= obs[self.max_lag - l:T - l]
        self.rows = np.flatnonzero(window_ok) + self.max_lag
        if self.rows.size < MIN_EFFECTIVE_SAMPLES:
            raise DataError(
                f"only {self.rows.size} usable samples after lagging "
                f"(need >= {MIN_EFFECTIVE_SAMPLES})"
            )
        self.data = data
        self.index = {v: i for i, v in enumerate(self.variables)}
        for v in self.variables:
            col = data[self.rows, self.index[v]]
            if np.std(col) <= 1e-12 * max(1.0, float(np.abs(col).max())):
                raise DegenerateInputError(f"variable {v!r} is constant on the analysis range")

    def series(self, node) -> np.ndarray:
        var, lag = node
        return self.data[self.rows - lag, self.index[var]]

    def matrix(self, nodes) -> np.ndarray:
        if not nodes:
            return np.empty((self.rows.size, 0))
        return np.column_stack([self.series(n) for n in nodes])


def _sort_key(node, strength):
    # strongest first; name/lag break ties so variable order never matters
    return (-strength[node], node[0], node[1])


def _pc1_single(lag_data: _LagData, target: str, cfg: PcmciConfig) -> dict:
    """PC1 condition selection for one target; returns ``{node: (min |stat|, max p)}``."""
    y = lag_data.series((target, 0))
    candidates = [(v, tau) for v in lag_data.variables
                  for tau in range(cfg.tau_min, cfg.tau_max + 1)]
    strength = {n: np.inf for n in candidates}
    pmax = {n: 0.0 for n in candidates}
    parents = sorted(candidates, key=lambda n: (n[0], n[1]))
    q_cap = cfg.max_cond_dim if cfg.max_cond_dim is not None else np.inf
    q = 0
    while q <= q_cap and len(parents) - 1 >= q:
        removed = []
        for node in parents:
            conds = [p for p in parents if p != node][:q]
            res = parcorr_test(lag_data.series(node), y, lag_data.matrix(conds))
            strength[node] = min(strength[node], abs(res.statistic))
            pmax[node] = max(pmax[node], res.p_value)
            if res.p_value > cfg.pc_alpha:
                removed.append(node)
        parents = [p for p in parents if p not in removed]
        parents.sort(key=lambda n: _sort_key(n, strength))
        q += 1
    return {n: (strength[n], pmax[n]) for n in parents}


def _panel_vars(panel: Panel, variables):
    return tuple(panel.columns if variables is None else variables)


def pc1_condition_selection(panel: Panel, cfg: PcmciConfig = PcmciConfig(),
                            variables: Sequence[str] | None = None, rows=None,
                            _lag_data: _LagData | None = None) -> dict:
    """Candidate lagged parents per variable.

    Returns ``{target: [(source, lag), ...]}`` with each list ordered by
    decreasing association strength.
    """
    lag_data = _lag_data or _LagData(panel, _panel_vars(panel, variables), cfg, rows)
    targets = lag_data.variables

    def run(target):
        kept = _pc1_single(lag_data, target, cfg)
        return sorted(kept, key=lambda n: (-kept[n][0], n[0], n[1]))

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, targets))
    else:
        results = [run(t) for t in targets]
    return dict(zip(targets, results))


def _mci_conditions(source, target, candidates, cfg):
    var, tau = source
    conds = [p for p in candidates.get(target, []) if p != source]
    conds += [(k, lag + tau) for k, lag in candidates.get(var, [])]
    seen, out = set(), []
    for c in conds:
        if c not in seen and c != source and c != (target, 0):
            seen.add(c)
            out.append(c)
    return out


def mci_test(panel: Panel, source, target: str, candidates: dict,
             cfg: PcmciConfig = PcmciConfig(), variables: Sequence[str] | None = None,
             rows=None, _lag_data: _LagData | None = None) -> CiResult:
    """MCI test of ``source = (var, lag)`` -> ``target``.

    Conditions on the target's candidate parents (minus the source) and on
    the source's own candidate parents shifted back by the source lag.
    """
    lag_data = _lag_data or _LagData(panel, _panel_vars(panel, variables), cfg, rows)
    conds = _mci_conditions(tuple(source), target, candidates, cfg)
    return parcorr_test(lag_data.series(tuple(source)), lag_data.series((target, 0)),
                        lag_data.matrix(conds))


def _benjamini_hochberg(pvals: np.ndarray) -> np.ndarray:
    n = pvals.size
    if n == 0:
        return pvals
    order = np.argsort(pvals, kind="stable")
    ranked = pvals[order] * n / np.arange(1, n + 1)
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(n)
    out[order] = np.minimum(ranked, 1.0)
    return out


def run_pcmci(panel: Panel, cfg: PcmciConfig = PcmciConfig(),
              variables: Sequence[str] | None = None, rows=None,
              return_candidates: bool = False):
    """PC1 followed by MCI over the surviving candidate links.

    ``rows`` optionally restricts analysis to ``(start, stop)`` panel rows.
    """
    lag_data = _LagData(panel, _panel_vars(panel, variables), cfg, rows)
    candidates = pc1_condition_selection(panel, cfg, _lag_data=lag_data)
    jobs = [(src, dst) for dst in lag_data.variables for src in candidates[dst]]

    def run(job):
        src, dst = job
        return mci_test(panel, src, dst, candidates, cfg, _lag_data=lag_data)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    pvals = np.array([r.p_value for r in results])
    if cfg.fdr:
        pvals = _benjamini_hochberg(pvals)
    links = [
        Link(src[0], src[1], dst, float(r.statistic), float(p))
        for (src, dst), r, p in zip(jobs, results, pvals)
        if p <= cfg.mci_alpha
    ]
    links.sort(key=lambda l: (l.src, l.lag, l.dst))
    graph = LaggedGraph(lag_data.variables, cfg.tau_max, cfg.tau_min, tuple(links))
    return (graph, candidates) if return_candidates else graph


def causal_feature_set(graph: LaggedGraph, target: str,
                       exclude: Iterable[str] = CALENDAR_COLUMNS) -> set:
    """Exogenous sources with a lagged link into ``target``."""
    if target not in graph.variables:
        raise KeyError(f"target {target!r} not among graph variables")
    skip = set(exclude) | {target}
    return {l.src for l in graph.links
            if l.dst == target and l.lag >= graph.tau_min and l.src not in skip}


def autoregressive_lags(graph: LaggedGraph, target: str) -> list:
    """Lags at which ``target`` drives itself."""
    if target not in graph.variables:
        raise KeyError(f"target {target!r} not among graph variables")
    return sorted(l.lag for l in graph.links if l.dst == target and l.src == target)


def consensus_features(feature_sets: Sequence[set], min_share: float = 0.5) -> set:
    """Features chosen in more than ``min_share`` of the given sets (majority vote)."""
    if not feature_sets:
        return set()
    counts: dict = {}
    for s in feature_sets:
        for f in s:
            counts[f] = counts.get(f, 0) + 1
    return {f for f, c in counts.items() if c / len(feature_sets) > min_share}
