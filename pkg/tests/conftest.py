from pathlib import Path

import numpy as np
import pytest

from causal_stlf.panel import Panel

DATA = Path(__file__).parent / "data"


def hourly(n, start="2023-01-01T00:00:00"):
    return np.datetime64(start, "s") + np.arange(n) * np.timedelta64(1, "h")


def make_panel(data: dict, start="2023-01-01T00:00:00", region="R"):
    cols = tuple(data)
    values = np.column_stack([np.asarray(data[c], float) for c in cols])
    return Panel(hourly(len(values), start), cols, values, np.isfinite(values), region)


@pytest.fixture
def data_dir():
    return DATA


def gru_gradient_error(layers=2, hidden=5, n_feat=3, horizon=2, L=6, B=4, seed=0, eps=1e-6):
    """Largest relative error between analytic and central-difference GRU gradients."""
    from causal_stlf.forecast.gru import GruConfig, init_params, mse_loss_and_grad

    rng = np.random.default_rng(seed)
    params = init_params(n_feat, horizon, GruConfig(hidden=hidden, layers=layers), rng)
    for k in params:            # non-zero biases exercise every term
        params[k] = params[k] + 0.1 * rng.standard_normal(params[k].shape)
    X = rng.standard_normal((B, L, n_feat))
    y = rng.standard_normal((B, horizon))
    _, grads = mse_loss_and_grad(params, X, y, layers)
    worst = 0.0
    for k, p in params.items():
        num = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            lp, _ = mse_loss_and_grad(params, X, y, layers)
            p[i] = old - eps
            lm, _ = mse_loss_and_grad(params, X, y, layers)
            p[i] = old
            num[i] = (lp - lm) / (2 * eps)
        denom = max(np.linalg.norm(num) + np.linalg.norm(grads[k]), 1e-12)
        worst = max(worst, np.linalg.norm(num - grads[k]) / denom)
    return worst


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
