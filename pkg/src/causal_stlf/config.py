"""Run configuration: one INI-style key-value file, overridable from the command line.

Sections and keys (all optional, defaults shown by ``causal-stlf config``)::

    [run]      target, seed, workers, lookback, horizon, train_span, n_folds,
               val_frac, ridge_lambda, season, weather, models, regimes,
               condition_on_calendar
    [pcmci]    tau_max, tau_min, pc_alpha, mci_alpha, max_cond_dim, fdr
    [mifilter] mi_thres, rho_max, knn_k, max_lag
    [gru]      hidden, layers
    [train]    lr, beta1, beta2, batch_size, max_epochs, patience, min_delta, dropout
    [ood]      lower, upper, variables, window, exceed_fraction, min_separation

List values are comma separated.
"""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import asdict, dataclass, field, fields, replace

from .evaluation.compare import MODELS, EvalConfig
from .evaluation.ood import OodConfig
from .evaluation.regimes import REGIMES
from .forecast import GruConfig, TrainConfig
from .mifilter import MiFilterConfig
from .pcmci import PcmciConfig

CONFIG_ENV = "CAUSAL_STLF_CONFIG"


@dataclass(frozen=True)
class RunSettings:
    target: str = "load"
    seed: int = 0
    workers: int = 0          # 0 -> number of processors
    lookback: int = 168
    horizon: int = 24
    train_span: int = 2 * 8760
    n_folds: int = 6
    val_frac: float = 0.1
    ridge_lambda: float = 1.0
    season: int = 168
    weather: tuple | None = None
    models: tuple = MODELS
    regimes: tuple = REGIMES
    condition_on_calendar: bool = False


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    pcmci: PcmciConfig = field(default_factory=PcmciConfig)
    mifilter: MiFilterConfig = field(default_factory=MiFilterConfig)
    gru: GruConfig = field(default_factory=GruConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ood: OodConfig = field(default_factory=OodConfig)

    @property
    def workers(self) -> int:
        return self.run.workers or (os.cpu_count() or 1)

    def eval_config(self) -> EvalConfig:
        r = self.run
        return EvalConfig(
            target=r.target, lookback=r.lookback, horizon=r.horizon, train_span=r.train_span,
            n_folds=r.n_folds, val_frac=r.val_frac, ridge_lambda=r.ridge_lambda, season=r.season,
            weather=r.weather, condition_on_calendar=r.condition_on_calendar, seed=r.seed,
            workers=self.workers, pcmci=self.pcmci, mi=self.mifilter, gru=self.gru,
            train=replace(self.train, seed=r.seed),
        )

    def to_dict(self) -> dict:
        return {f.name: asdict(getattr(self, f.name)) for f in fields(self)}


SECTIONS = {
    "run": RunSettings,
    "pcmci": PcmciConfig,
    "mifilter": MiFilterConfig,
    "gru": GruConfig,
    "train": TrainConfig,
    "ood": OodConfig,
}


def _convert(cls, key: str, raw: str):
    ftypes = {f.name: f.type for f in fields(cls)}
    if key not in ftypes:
        raise ValueError(f"unknown config key {key!r} for section of {cls.__name__}")
    default = next(f.default for f in fields(cls) if f.name == key)
    t = str(ftypes[key])
    raw = raw.strip()
    if raw.lower() in ("none", "") and ("None" in t or default is None):
        return None
    if "bool" in t:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if "tuple" in t:
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if "int" in t and "float" not in t:
        return int(raw)
    if "float" in t:
        return float(raw)
    return raw


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (or ``$CAUSAL_STLF_CONFIG``) and apply ``{"section.key": value}`` overrides."""
    path = path or os.environ.get(CONFIG_ENV)
    values: dict = {s: {} for s in SECTIONS}
    if path:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise FileNotFoundError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            for key, raw in parser[section].items():
                values[section][key] = _convert(SECTIONS[section], key, raw)
    for dotted, raw in (overrides or {}).items():
        if raw is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in SECTIONS:
            raise ValueError(f"unknown config section {section!r} in override {dotted!r}")
        values[section][key] = _convert(SECTIONS[section], key, raw) if isinstance(raw, str) else raw
    return RunConfig(**{s: SECTIONS[s](**values[s]) for s in SECTIONS})


def dump_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    for section, d in cfg.to_dict().items():
        parser[section] = {
            k: ("none" if v is None else ",".join(v) if isinstance(v, (list, tuple)) else str(v))
            for k, v in d.items()
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
