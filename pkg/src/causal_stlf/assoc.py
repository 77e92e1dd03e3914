"""Association kernels: Pearson correlation, partial-correlation CI test, KSG mutual information.

All kernels standardise their inputs internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .errors import DataError, DegenerateInputError

JITTER_SEED = 20190417
JITTER_AMPLITUDE = 1e-10


@dataclass(frozen=True)
class CiResult:
    statistic: float
    p_value: float
    sample_size: int
    cond_dim: int


def _zscore(v: np.ndarray, name: str = "input") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    sd = v.std()
    if not np.isfinite(sd) or sd <= 1e-14 * max(1.0, float(np.abs(v).max(initial=0.0))):
        raise DegenerateInputError(f"{name} is constant or non-finite")
    return (v - v.mean()) / sd


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length samples."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise DataError("pearson needs at least 3 samples")
    zx, zy = _zscore(x, "x"), _zscore(y, "y")
    return float(np.clip(np.mean(zx * zy), -1.0, 1.0))


def _t_pvalue(r: float, dof: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt(dof / (1.0 - r * r))
    return float(np.clip(2.0 * stats.t.sf(abs(t), dof), 0.0, 1.0))


def parcorr_test(x, y, Z=None) -> CiResult:
    """Test x ⟂ y | Z by correlating least-squares residuals.

    The p-value is two-sided, from the Student-t transform of the residual
    correlation with ``n - dim(Z) - 2`` degrees of freedom.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise DataError(f"length mismatch: {n} vs {y.size}")
    if Z is None:
        Z = np.empty((n, 0))
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != n:
        raise DataError(f"conditioning matrix has {Z.shape[0]} rows, expected {n}")
    d = Z.shape[1]
    if n < d + 4:
        raise DataError(f"parcorr_test needs n >= dim(Z) + 4 (n={n}, dim={d})")
    zx, zy = _zscore(x, "x"), _zscore(y, "y")
    if d:
        Zs = np.column_stack([_zscore(Z[:, c], f"Z[:, {c}]") for c in range(d)])
        A = np.column_stack([np.ones(n), Zs])
        coef, _, rank, _ = np.linalg.lstsq(A, np.column_stack([zx, zy]), rcond=None)
        if rank < d + 1:
            raise DegenerateInputError(f"conditioning matrix is rank deficient (rank {rank - 1} < {d})")
        resid = np.column_stack([zx, zy]) - A @ coef
        rx, ry = resid[:, 0], resid[:, 1]
    else:
        rx, ry = zx, zy
    sx, sy = np.sqrt(rx @ rx), np.sqrt(ry @ ry)
    if sx <= 1e-12 * np.sqrt(n) or sy <= 1e-12 * np.sqrt(n):
        raise DegenerateInputError("x or y is fully explained by the conditioning set")
    r = float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))
    return CiResult(r, _t_pvalue(r, n - d - 2), n, d)


def digamma(x):
    """Digamma for arguments >= 1, via upward recurrence and the asymptotic series."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("digamma implemented for x >= 1 only")
    acc = np.zeros_like(x)
    x = x.copy()
    small = x < 6.0
    while np.any(small):
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
        small = x < 6.0
    inv2 = 1.0 / (x * x)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))))
    out = acc + np.log(x) - 0.5 / x - series
    return out if out.ndim else float(out)


def _jitter(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return v + JITTER_AMPLITUDE * rng.random(v.shape)


def _strict_counts(v: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Number of other points with |v_j - v_i| < radius_i."""
    s = np.sort(v)
    hi = np.searchsorted(s, v + radius, side="left")
    lo = np.searchsorted(s, v - radius, side="right")
    return hi - lo - 1


def knn_mutual_information(x, y, k: int = 3) -> float:
    """Kraskov-Stögbauer-Grassberger MI estimate (algorithm 1), in nats.

    Max-norm neighbourhoods in the joint space; marginal counts use strict
    inequality. Ties are broken by a fixed-seed jitter so results are
    reproducible for a given input order. Negative estimates are clamped to 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise DataError(f"length mismatch: {n} vs {y.size}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= k:
        raise DataError(f"knn_mutual_information needs n > k (n={n}, k={k})")
    rng = np.random.default_rng(JITTER_SEED)
    zx = _jitter(_zscore(x, "x"), rng)
    zy = _jitter(_zscore(y, "y"), rng)
    pts = np.column_stack([zx, zy])
    dist, _ = cKDTree(pts).query(pts, k=k + 1, p=np.inf)
    eps = dist[:, k]
    nx = _strict_counts(zx, eps)
    ny = _strict_counts(zy, eps)
    mi = digamma(k) + digamma(n) - np.mean(digamma(nx + 1.0) + digamma(ny + 1.0))
    return max(0.0, float(mi))
