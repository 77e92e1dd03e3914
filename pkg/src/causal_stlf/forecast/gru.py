"""Stacked GRU forecaster in plain numpy, trained with BPTT and Adam.

Gate layout per layer follows the common convention::

    r = sigmoid(W_xr x + b_xr + W_hr h + b_hr)
    z = sigmoid(W_xz x + b_xz + W_hz h + b_hz)
    n = tanh(W_xn x + b_xn + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h

A linear head maps the top layer's final hidden state to the horizon.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DataError, NumericalError
from .windows import Windows, WindowSample

CHECKPOINT_FORMAT = "causal_stlf.gru"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class GruConfig:
    hidden: int = 64
    layers: int = 4

    def __post_init__(self):
        if self.hidden < 1 or self.layers < 1:
            raise ValueError("hidden and layers must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 20
    min_delta: float = 1e-4
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("lr, batch_size, max_epochs and patience must be positive")
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ValueError("Adam betas must lie in (0, 1)")
        if not 0.0 <= self.dropout < 1.0 or self.min_delta < 0:
            raise ValueError("dropout must lie in [0, 1) and min_delta >= 0")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def init_params(n_features: int, horizon: int, gcfg: GruConfig, rng: np.random.Generator) -> dict:
    h = gcfg.hidden
    params = {}
    fan_in = n_features
    for l in range(gcfg.layers):
        bound = 1.0 / np.sqrt(fan_in)
        params[f"l{l}.W_x"] = rng.uniform(-bound, bound, (3 * h, fan_in))
        params[f"l{l}.W_h"] = np.vstack([_orthogonal(rng, h) for _ in range(3)])
        params[f"l{l}.b_x"] = np.zeros(3 * h)
        params[f"l{l}.b_h"] = np.zeros(3 * h)
        fan_in = h
    bound = 1.0 / np.sqrt(h)
    params["head.W"] = rng.uniform(-bound, bound, (horizon, h))
    params["head.b"] = np.zeros(horizon)
    return params


def _layer_forward(x, W_x, W_h, b_x, b_h):
    B, L, _ = x.shape
    h_dim = W_h.shape[1]
    gx = x @ W_x.T + b_x
    h = np.zeros((B, h_dim))
    hs = np.empty((B, L, h_dim))
    cache = {k: np.empty((B, L, h_dim)) for k in ("h_prev", "r", "z", "n", "ghn")}
    for t in range(L):
        gh = h @ W_h.T + b_h
        r = _sigmoid(gx[:, t, :h_dim] + gh[:, :h_dim])
        z = _sigmoid(gx[:, t, h_dim:2 * h_dim] + gh[:, h_dim:2 * h_dim])
        ghn = gh[:, 2 * h_dim:]
        n = np.tanh(gx[:, t, 2 * h_dim:] + r * ghn)
        cache["h_prev"][:, t] = h
        cache["r"][:, t], cache["z"][:, t], cache["n"][:, t], cache["ghn"][:, t] = r, z, n, ghn
        h = (1.0 - z) * n + z * h
        hs[:, t] = h
    return hs, cache


def _layer_backward(x, dhs, cache, W_x, W_h):
    B, L, h_dim = dhs.shape
    dgx = np.empty((B, L, 3 * h_dim))
    dW_h = np.zeros_like(W_h)
    db_h = np.zeros(3 * h_dim)
    dh_next = np.zeros((B, h_dim))
    for t in range(L - 1, -1, -1):
        r, z, n = cache["r"][:, t], cache["z"][:, t], cache["n"][:, t]
        h_prev, ghn = cache["h_prev"][:, t], cache["ghn"][:, t]
        dh = dhs[:, t] + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dan = dn * (1.0 - n * n)
        dar = dan * ghn * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dgh = np.concatenate([dar, daz, dan * r], axis=1)
        dgx[:, t] = np.concatenate([dar, daz, dan], axis=1)
        dW_h += dgh.T @ h_prev
        db_h += dgh.sum(axis=0)
        dh_next = dh * z + dgh @ W_h
    flat = dgx.reshape(-1, 3 * h_dim)
    dW_x = flat.T @ x.reshape(-1, x.shape[2])
    db_x = flat.sum(axis=0)
    dx = dgx @ W_x
    return dx, {"W_x": dW_x, "W_h": dW_h, "b_x": db_x, "b_h": db_h}


def forward(params: dict, X: np.ndarray, layers: int, dropout: float = 0.0, rng=None):
    """Return ``(prediction (B, H), cache)``; dropout acts between layers only."""
    inp = X
    caches = []
    for l in range(layers):
        hs, cache = _layer_forward(inp, params[f"l{l}.W_x"], params[f"l{l}.W_h"],
                                   params[f"l{l}.b_x"], params[f"l{l}.b_h"])
        mask = None
        if dropout > 0.0 and rng is not None and l < layers - 1:
            mask = (rng.random(hs.shape) >= dropout) / (1.0 - dropout)
            out = hs * mask
        else:
            out = hs
        caches.append((inp, cache, mask))
        inp = out
    h_last = inp[:, -1]
    pred = h_last @ params["head.W"].T + params["head.b"]
    return pred, (caches, h_last)


def backward(params: dict, cache, dpred: np.ndarray, layers: int) -> dict:
    caches, h_last = cache
    grads = {"head.W": dpred.T @ h_last, "head.b": dpred.sum(axis=0)}
    top_in = caches[-1][1]["r"]
    dseq = np.zeros(top_in.shape)
    dseq[:, -1] = dpred @ params["head.W"]
    for l in range(layers - 1, -1, -1):
        inp, lcache, _ = caches[l]
        dx, g = _layer_backward(inp, dseq, lcache, params[f"l{l}.W_x"], params[f"l{l}.W_h"])
        for k, v in g.items():
            grads[f"l{l}.{k}"] = v
        if l > 0:
            below_mask = caches[l - 1][2]
            dseq = dx * below_mask if below_mask is not None else dx
    return grads


def mse_loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray, layers: int,
                      dropout: float = 0.0, rng=None):
    pred, cache = forward(params, X, layers, dropout, rng)
    diff = pred - y
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.mean(diff * diff))
    grads = backward(params, cache, 2.0 * diff / diff.size, layers)
    return loss, grads


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float, beta2: float, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_mae: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


class GRUForecaster:
    """Stacked GRU with a linear head on the last hidden state."""

    name = "gru"

    def __init__(self, gcfg: GruConfig = GruConfig(), tcfg: TrainConfig = TrainConfig()):
        self.gcfg = gcfg
        self.tcfg = tcfg
        self.params = None
        self.history = TrainHistory()

    def _init(self, n_features, horizon):
        rng = np.random.default_rng([self.tcfg.seed, 0])
        self.params = init_params(n_features, horizon, self.gcfg, rng)

    def fit(self, train: Windows, val: Windows, on_epoch_end=None):
        """Train with Adam on MSE; stop on validation MAE and keep the best weights.

        ``on_epoch_end(epoch, val_mae, params)`` is called after every epoch.
        """
        if len(train) == 0 or len(val) == 0:
            raise DataError("GRU training needs non-empty train and validation windows")
        tc = self.tcfg
        self._init(train.X.shape[2], train.y.shape[1])
        opt = Adam(self.params, tc.lr, tc.beta1, tc.beta2)
        shuffle_rng = np.random.default_rng([tc.seed, 1])
        drop_rng = np.random.default_rng([tc.seed, 2])
        best = np.inf
        best_params = {k: v.copy() for k, v in self.params.items()}
        wait = 0
        self.history = TrainHistory()
        for epoch in range(tc.max_epochs):
            order = shuffle_rng.permutation(len(train))
            total = 0.0
            for b in range(0, len(order), tc.batch_size):
                idx = order[b:b + tc.batch_size]
                loss, grads = mse_loss_and_grad(self.params, train.X[idx], train.y[idx],
                                                self.gcfg.layers, tc.dropout, drop_rng)
                if not np.isfinite(loss):
                    raise NumericalError(f"training diverged (non-finite loss) at epoch {epoch}")
                opt.step(self.params, grads)
                total += loss * len(idx)
            self.history.train_loss.append(total / len(train))
            val_mae = float(np.mean(np.abs(self.predict(val) - val.y)))
            if not np.isfinite(val_mae):
                raise NumericalError(f"training diverged (non-finite validation MAE) at epoch {epoch}")
            self.history.val_mae.append(val_mae)
            if on_epoch_end is not None:
                on_epoch_end(epoch, val_mae, self.params)
            if val_mae < best - tc.min_delta:
                best = val_mae
                best_params = {k: v.copy() for k, v in self.params.items()}
                self.history.best_epoch = epoch
                wait = 0
            else:
                wait += 1
                if wait >= tc.patience:
                    self.history.stopped_early = True
                    break
        self.params = best_params
        return self

    def predict(self, data, batch_size: int = 1024) -> np.ndarray:
        if self.params is None:
            raise RuntimeError("model is not fitted")
        single = isinstance(data, WindowSample)
        X = data.X if isinstance(data, (Windows, WindowSample)) else np.asarray(data, dtype=float)
        if X.ndim == 2:
            single, X = True, X[None]
        out = np.concatenate([
            forward(self.params, X[b:b + batch_size], self.gcfg.layers)[0]
            for b in range(0, X.shape[0], batch_size)
        ]) if X.shape[0] else np.empty((0, self.params["head.b"].size))
        return out[0] if single else out

    # checkpoints -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "gru": asdict(self.gcfg),
            "train": asdict(self.tcfg),
            "weights": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                        for k, v in sorted(self.params.items())},
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GRUForecaster":
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise DataError("not a GRU checkpoint of a supported version")
        model = cls(GruConfig(**d["gru"]), TrainConfig(**d["train"]))
        model.params = {k: np.array(w["data"], dtype=float).reshape(w["shape"])
                        for k, w in d["weights"].items()}
        return model

    @classmethod
    def load(cls, path) -> "GRUForecaster":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
