"""Linear lagged structural causal models used as ground truth.

A spec lists lagged links ``(source, lag, target, coefficient)`` with
``lag >= 1``; simulation runs the Gaussian linear recursion and drops a
burn-in prefix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .panel import Panel

DEFAULT_START = np.datetime64("2020-01-01T00:00:00", "s")


@dataclass(frozen=True)
class ScmSpec:
    variables: tuple
    links: tuple
    noise_std: dict = field(default_factory=dict)
    seasonal: dict = field(default_factory=dict)
    burn_in: int = 200
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        variables = tuple(self.variables)
        if len(set(variables)) != len(variables):
            raise DataError("duplicate variable names")
        links = []
        seen = set()
        for src, lag, dst, coef in self.links:
            if src not in variables or dst not in variables:
                raise DataError(f"link ({src}, {lag}, {dst}) names an unknown variable")
            if int(lag) != lag or lag < 1:
                raise DataError(f"link ({src}, {lag}, {dst}): lag must be an integer >= 1")
            key = (src, int(lag), dst)
            if key in seen:
                raise DataError(f"duplicate link {key}")
            seen.add(key)
            links.append((src, int(lag), dst, float(coef)))
        noise = {v: float(self.noise_std.get(v, 1.0)) for v in variables}
        if any(s <= 0 for s in noise.values()):
            raise DataError("noise standard deviations must be positive")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "links", tuple(sorted(links)))
        object.__setattr__(self, "noise_std", noise)
        object.__setattr__(self, "seasonal", {k: tuple(v) for k, v in self.seasonal.items()})
        if self.burn_in < 0:
            raise DataError("burn_in must be >= 0")
        rho = self.spectral_radius()
        if not rho < 1.0:
            raise DataError(f"model is not stationary (companion spectral radius {rho:.4f} >= 1)")

    @property
    def max_lag(self) -> int:
        return max((lag for _, lag, _, _ in self.links), default=1)

    def coefficient_matrices(self) -> np.ndarray:
        """Array A of shape (max_lag, N, N) with A[l-1, dst, src] = coefficient."""
        idx = {v: i for i, v in enumerate(self.variables)}
        n = len(self.variables)
        A = np.zeros((self.max_lag, n, n))
        for src, lag, dst, coef in self.links:
            A[lag - 1, idx[dst], idx[src]] = coef
        return A

    def spectral_radius(self) -> float:
        A = self.coefficient_matrices()
        p, n, _ = A.shape
        comp = np.zeros((n * p, n * p))
        comp[:n, :] = np.hstack(list(A))
        if p > 1:
            comp[n:, :-n] = np.eye(n * (p - 1))
        return float(np.max(np.abs(np.linalg.eigvals(comp)))) if n else 0.0

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "links": [{"src": s, "lag": l, "dst": d, "coef": c} for s, l, d, c in self.links],
            "noise_std": dict(self.noise_std),
            "seasonal": {k: list(v) for k, v in self.seasonal.items()},
            "burn_in": self.burn_in,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScmSpec":
        try:
            links = [(l["src"], l["lag"], l["dst"], l["coef"]) for l in d["links"]]
            variables = tuple(d["variables"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed model spec: {exc!r}") from None
        return cls(variables, tuple(links), dict(d.get("noise_std", {})),
                   dict(d.get("seasonal", {})), int(d.get("burn_in", 200)), dict(d.get("meta", {})))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ScmSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def simulate(spec: ScmSpec, T: int, seed: int, start=DEFAULT_START, region: str = "synthetic") -> Panel:
    """Run the recursion for ``burn_in + T`` steps and return the last ``T`` rows."""
    if T < 1:
        raise DataError("T must be >= 1")
    rng = np.random.default_rng(seed)
    A = spec.coefficient_matrices()
    p, n, _ = A.shape
    total = spec.burn_in + T
    sd = np.array([spec.noise_std[v] for v in spec.variables])
    eps = rng.standard_normal((total + p, n)) * sd
    drive = np.zeros((total + p, n))
    t_abs = np.arange(total + p) - p - spec.burn_in
    for i, v in enumerate(spec.variables):
        if v in spec.seasonal:
            amp, period = spec.seasonal[v]
            drive[:, i] = amp * np.sin(2 * np.pi * t_abs / period)
    X = np.zeros((total + p, n))
    X[:p] = eps[:p]
    for t in range(p, total + p):
        acc = eps[t] + drive[t]
        for l in range(p):
            acc = acc + A[l] @ X[t - l - 1]
        X[t] = acc
    data = X[p + spec.burn_in:]
    stamps = np.datetime64(start, "s") + np.arange(T) * np.timedelta64(1, "h")
    return Panel(stamps, spec.variables, data, np.ones_like(data, dtype=bool), region)


def true_links(spec: ScmSpec) -> set:
    """Set of ``(source, lag, target)`` triples."""
    return {(s, l, d) for s, l, d, _ in spec.links}


def true_parents(spec: ScmSpec, target: str) -> set:
    """Exogenous direct parents of ``target`` (its own lags excluded)."""
    if target not in spec.variables:
        raise KeyError(f"unknown variable {target!r}")
    return {s for s, _, d, _ in spec.links if d == target and s != target}


WEATHER_VARS = ("tcc", "tcw", "skt", "avg-snlwrf", "avg-snswrf", "t2m", "d2m", "tp")


def _chain3() -> ScmSpec:
    links = [
        ("W", 1, "W", 0.5),
        ("V", 1, "V", 0.4),
        ("Y", 1, "Y", 0.3),
        ("W", 1, "V", 0.6),
        ("V", 1, "Y", 0.6),
    ]
    return ScmSpec(("W", "V", "Y"), tuple(links), meta={"fixture": "chain3", "version": 1})


def _independent6() -> ScmSpec:
    names = tuple(f"x{i}" for i in range(6))
    coefs = (0.0, 0.3, 0.5, 0.0, 0.6, 0.4)
    links = [(v, 1, v, c) for v, c in zip(names, coefs) if c]
    return ScmSpec(names, tuple(links), meta={"fixture": "independent6", "version": 1})


def _mediation8() -> ScmSpec:
    # Direct drivers of load: t2m and tp. Cloud/water/radiation reach load
    # only through t2m (cloud -> radiation -> temperature -> load).
    links = [
        ("tcc", 1, "tcc", 0.6),
        ("tcw", 1, "tcw", 0.6),
        ("avg-snswrf", 1, "avg-snswrf", 0.8),
        ("avg-snlwrf", 1, "avg-snlwrf", 0.8),
        ("t2m", 1, "t2m", 0.6),
        ("skt", 1, "skt", 0.4),
        ("d2m", 1, "d2m", 0.5),
        ("tp", 1, "tp", 0.3),
        ("load", 1, "load", 0.5),
        ("tcc", 1, "avg-snswrf", -0.5),
        ("tcc", 1, "avg-snlwrf", -0.4),
        ("tcw", 1, "tp", 0.4),
        ("tcw", 1, "d2m", 0.4),
        ("avg-snswrf", 1, "t2m", 0.4),
        ("avg-snlwrf", 1, "t2m", 0.3),
        ("t2m", 1, "skt", 0.5),
        ("t2m", 1, "load", 0.5),
        ("tp", 1, "load", -0.4),
    ]
    variables = WEATHER_VARS + ("load",)
    meta = {
        "fixture": "mediation8",
        "version": 1,
        "target": "load",
        "mediated": ["avg-snswrf", "avg-snlwrf"],
    }
    return ScmSpec(variables, tuple(links), meta=meta)


FIXTURES = {
    "chain3": _chain3,
    "independent6": _independent6,
    "mediation8": _mediation8,
}


def fixture_spec(name: str) -> ScmSpec:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def standard_fixture(name: str, seed: int, T: int = 2000) -> tuple:
    """Return ``(spec, panel)`` for a named fixture simulated with ``seed``."""
    spec = fixture_spec(name)
    return spec, simulate(spec, T, seed, region=name)
