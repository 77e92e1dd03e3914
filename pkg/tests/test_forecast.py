import json

import numpy as np
import pytest

from causal_stlf.errors import DataError, NumericalError
from causal_stlf.forecast import (
    GRUForecaster, GruConfig, Ridge, SeasonalNaive, TrainConfig, WindowConfig, make_windows, ridge_solve,
)
from causal_stlf.forecast.gru import init_params, mse_loss_and_grad
from causal_stlf.panel import Panel

from conftest import gru_gradient_error, make_panel

TINY = GruConfig(hidden=8, layers=1)


def ramp_panel(n=60):
    return make_panel({"load": np.arange(n, dtype=float), "t2m": np.arange(n) * 10.0})


def test_windows_count_and_alignment():
    p = ramp_panel(30)
    w = make_windows(p, WindowConfig(("load", "t2m"), "load", 5, 3))
    assert len(w) == 30 - 5 - 3 + 1
    assert w.X.shape == (23, 5, 2) and w.y.shape == (23, 3)
    np.testing.assert_array_equal(w.X[0, :, 0], [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(w.y[0], [5, 6, 7])
    assert w.origins[0] == p.timestamps[4]


def test_windows_drop_masked_hours():
    v = np.arange(30.0)
    v[10] = np.nan
    p = make_panel({"load": v})
    w = make_windows(p, WindowConfig(("load",), "load", 4, 2))
    # windows starting 5..10 contain row 10
    assert len(w) == 25 - 6
    assert not np.isnan(w.X).any() and not np.isnan(w.y).any()
    assert all(not (s <= 10 < s + 6) for s in w.starts)


def test_windows_rows_subrange():
    p = ramp_panel(40)
    w = make_windows(p, WindowConfig(("load",), "load", 4, 2), (10, 20))
    assert w.starts.min() == 10 and w.starts.max() + 6 <= 20


def test_windows_too_short():
    with pytest.raises(DataError):
        make_windows(ramp_panel(5), WindowConfig(("load",), "load", 4, 2))


def test_seasonal_naive_periodic_series_exact():
    t = np.arange(24 * 30)
    p = make_panel({"load": np.sin(2 * np.pi * t / 24) + (t % 168 == 5)})
    w = make_windows(p, WindowConfig(("load",), "load", 168, 24))
    pred = SeasonalNaive(0, 24, 168).predict(w)
    np.testing.assert_allclose(pred, w.y, atol=1e-12)


def test_seasonal_naive_single_sample_and_bad_lookback():
    w = make_windows(ramp_panel(50), WindowConfig(("load",), "load", 10, 2))
    out = SeasonalNaive(0, 2, 5).predict(w[0])
    np.testing.assert_array_equal(out, [5, 6])
    with pytest.raises(DataError):
        SeasonalNaive(0, 2, 20).predict(w)


def _ridge_fixture(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((50, 1, 3))
    y = X[:, 0] @ np.array([[1.0, 0.5], [-2.0, 0.0], [0.3, 1.0]]) + 0.7 + 0.1 * rng.standard_normal((50, 2))
    return X, y


def _windows(X, y):
    from causal_stlf.forecast import Windows
    n = len(X)
    return Windows(X, y, np.arange(n).astype("datetime64[h]"), np.arange(n), tuple(f"f{i}" for i in range(X.shape[2])), "f0")


def test_ridge_matches_augmented_least_squares():
    X, y = _ridge_fixture()
    lam = 2.5
    A = np.column_stack([np.ones(50), X[:, 0]])
    # augment rows sqrt(lam) * I on the slope block only
    A_aug = np.vstack([A, np.column_stack([np.zeros(3), np.sqrt(lam) * np.eye(3)])])
    y_aug = np.vstack([y, np.zeros((3, 2))])
    ref, *_ = np.linalg.lstsq(A_aug, y_aug, rcond=None)
    model = Ridge(lam).fit(_windows(X, y))
    np.testing.assert_allclose(model.intercept_, ref[0], atol=1e-10)
    np.testing.assert_allclose(model.coef_, ref[1:], atol=1e-10)


def test_ridge_zero_penalty_is_ols_and_large_penalty_is_mean():
    X, y = _ridge_fixture(1)
    ols = Ridge(0.0).fit(_windows(X, y))
    ref, *_ = np.linalg.lstsq(np.column_stack([np.ones(50), X[:, 0]]), y, rcond=None)
    np.testing.assert_allclose(ols.coef_, ref[1:], atol=1e-10)
    big = Ridge(1e12).fit(_windows(X, y))
    assert np.abs(big.coef_).max() < 1e-8
    np.testing.assert_allclose(big.intercept_, y.mean(0), atol=1e-6)


def test_ridge_gradient_zero_at_solution():
    X, y = _ridge_fixture(2)
    lam = 0.7
    m = Ridge(lam).fit(_windows(X, y))
    A = Ridge.design(X)
    W = np.vstack([m.intercept_, m.coef_])
    pen = lam * W
    pen[0] = 0.0
    grad = A.T @ (A @ W - y) + pen
    assert np.abs(grad).max() < 1e-9


def test_ridge_rank_deficient_without_penalty():
    X, y = _ridge_fixture(3)
    X = np.concatenate([X, X[:, :, :1]], axis=2)
    with pytest.raises(NumericalError, match="lam"):
        Ridge(0.0).fit(_windows(X, y))
    Ridge(0.1).fit(_windows(X, y))


def test_ridge_json_round_values():
    X, y = _ridge_fixture(4)
    d = json.loads(Ridge(1.0).fit(_windows(X, y)).to_json())
    assert d["format"] == "causal_stlf.ridge" and len(d["coef"]) == 3


def test_ridge_solve_shapes():
    A = np.column_stack([np.ones(10), np.arange(10.0)])
    W = ridge_solve(A, 3 + 2 * np.arange(10.0)[:, None], 0.0)
    np.testing.assert_allclose(W[:, 0], [3, 2], atol=1e-10)


def test_gru_gradient_check_one_and_two_layers():
    assert gru_gradient_error(layers=1) < 1e-6
    assert gru_gradient_error(layers=2) < 1e-6


def test_gru_output_shape():
    rng = np.random.default_rng(0)
    params = init_params(3, 4, TINY, rng)
    loss, grads = mse_loss_and_grad(params, rng.standard_normal((5, 7, 3)), np.zeros((5, 4)), 1)
    assert np.isfinite(loss) and set(grads) == set(params)


def _series_windows(n=400, seed=0, L=12, H=2):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    p = make_panel({"load": np.sin(2 * np.pi * t / 12) + 0.05 * rng.standard_normal(n)})
    w = make_windows(p, WindowConfig(("load",), "load", L, H))
    return w.subset(np.arange(300)), w.subset(np.arange(300, len(w)))


def test_gru_learns_constant_target():
    tr, va = _series_windows()
    tr = tr.__class__(tr.X, np.full_like(tr.y, 0.5), tr.origins, tr.starts, tr.features, tr.target)
    va = va.__class__(va.X, np.full_like(va.y, 0.5), va.origins, va.starts, va.features, va.target)
    m = GRUForecaster(TINY, TrainConfig(lr=1e-2, max_epochs=60, patience=10, dropout=0.0, batch_size=32))
    m.fit(tr, va)
    assert np.abs(m.predict(va) - 0.5).max() < 0.05


def test_gru_improves_on_periodic_series():
    tr, va = _series_windows()
    m = GRUForecaster(TINY, TrainConfig(lr=1e-2, max_epochs=40, patience=10, batch_size=32))
    m.fit(tr, va)
    assert m.history.val_mae[m.history.best_epoch] < 0.5 * m.history.val_mae[0] or \
        min(m.history.val_mae) < 0.2


def test_gru_early_stopping_patience():
    tr, va = _series_windows()
    seen = []
    m = GRUForecaster(TINY, TrainConfig(lr=1e-9, max_epochs=100, patience=3, min_delta=1e-2))
    m.fit(tr, va, on_epoch_end=lambda e, v, p: seen.append(e))
    assert m.history.stopped_early
    assert seen == [0, 1, 2, 3]
    assert m.history.best_epoch == 0


def test_gru_restores_best_weights():
    tr, va = _series_windows()
    snaps = {}
    m = GRUForecaster(TINY, TrainConfig(lr=1e-2, max_epochs=15, patience=14, batch_size=64))
    m.fit(tr, va, on_epoch_end=lambda e, v, p: snaps.__setitem__(e, {k: x.copy() for k, x in p.items()}))
    best = snaps[m.history.best_epoch]
    assert all(np.array_equal(best[k], m.params[k]) for k in best)


def test_gru_deterministic():
    tr, va = _series_windows()
    cfg = TrainConfig(lr=1e-2, max_epochs=3, patience=2, seed=5)
    a = GRUForecaster(TINY, cfg).fit(tr, va)
    b = GRUForecaster(TINY, cfg).fit(tr, va)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_gru_checkpoint_round_trip(tmp_path):
    tr, va = _series_windows()
    m = GRUForecaster(GruConfig(hidden=4, layers=2), TrainConfig(lr=1e-2, max_epochs=2, patience=1)).fit(tr, va)
    m.save(tmp_path / "m.json")
    back = GRUForecaster.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict(va), m.predict(va))


def test_gru_rejects_foreign_checkpoint():
    with pytest.raises(DataError):
        GRUForecaster.from_dict({"format": "other"})


def test_gru_divergence_raises():
    tr, va = _series_windows()
    bad = tr.__class__(tr.X, tr.y * 1e300, tr.origins, tr.starts, tr.features, tr.target)
    with pytest.raises(NumericalError, match="epoch"):
        GRUForecaster(TINY, TrainConfig(lr=1e-2, max_epochs=3, patience=2)).fit(bad, va)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=5, patience=5)
