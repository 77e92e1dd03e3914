import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causal_stlf.errors import DataError, DegenerateInputError
from causal_stlf.panel import Panel
from causal_stlf.pcmci import (
    LaggedGraph, PcmciConfig, autoregressive_lags, causal_feature_set, consensus_features,
    mci_test, pc1_condition_selection, run_pcmci,
)
from causal_stlf.scm import ScmSpec, fixture_spec, simulate, standard_fixture

from conftest import make_panel

CFG = PcmciConfig(tau_max=3)


def test_white_noise_no_links_mostly():
    rng = np.random.default_rng(0)
    panel = make_panel({f"x{i}": rng.standard_normal(1000) for i in range(3)})
    g = run_pcmci(panel, PcmciConfig(tau_max=2, mci_alpha=0.01))
    # 18 tests at 1%: expect at most a couple of false positives
    assert len(g.links) <= 2


def test_ar1_self_link_found():
    spec = ScmSpec(("x",), (("x", 1, "x", 0.7),))
    g = run_pcmci(simulate(spec, 1000, seed=1), CFG)
    assert ("x", 1) in g.parents("x")
    assert autoregressive_lags(g, "x")[0] == 1


def test_chain_indirect_link_pruned():
    _, panel = standard_fixture("chain3", seed=3)
    graph, cand = run_pcmci(panel, CFG, return_candidates=True)
    assert causal_feature_set(graph, "Y") == {"V"}
    assert ("W", 2) not in graph.parents("Y")
    # every MCI link was a PC1 candidate
    for l in graph.links:
        assert (l.src, l.lag) in cand[l.dst]


def test_chain_exact_recovery_rate():
    hits = 0
    for seed in range(20):
        _, panel = standard_fixture("chain3", seed=seed)
        hits += causal_feature_set(run_pcmci(panel), "Y") == {"V"}
    assert hits >= 16


def test_pc1_candidates_subset_of_lagged_nodes():
    _, panel = standard_fixture("chain3", seed=4, T=800)
    cand = pc1_condition_selection(panel, CFG)
    for target, parents in cand.items():
        for var, lag in parents:
            assert var in panel.columns and CFG.tau_min <= lag <= CFG.tau_max


def test_max_cond_dim_zero_keeps_marginal_dependencies():
    _, panel = standard_fixture("chain3", seed=5, T=1000)
    full = pc1_condition_selection(panel, CFG)
    marginal = pc1_condition_selection(panel, PcmciConfig(tau_max=3, max_cond_dim=0))
    for t in full:
        assert set(full[t]) <= set(marginal[t])


def test_mci_direct_vs_indirect():
    _, panel = standard_fixture("chain3", seed=6)
    cand = pc1_condition_selection(panel, CFG)
    assert mci_test(panel, ("V", 1), "Y", cand, CFG).p_value < 1e-6


def test_variable_permutation_invariance():
    _, panel = standard_fixture("chain3", seed=7, T=1000)
    g1 = run_pcmci(panel, CFG)
    g2 = run_pcmci(panel.select(["Y", "W", "V"]), CFG)
    assert {(l.src, l.lag, l.dst) for l in g1.links} == {(l.src, l.lag, l.dst) for l in g2.links}


def test_deterministic_and_worker_invariant():
    _, panel = standard_fixture("mediation8", seed=8, T=800)
    a = run_pcmci(panel, CFG).to_json()
    b = run_pcmci(panel, CFG).to_json()
    c = run_pcmci(panel, PcmciConfig(tau_max=3, workers=3)).to_json()
    assert a == b == c


def test_graph_json_format_round_trip():
    _, panel = standard_fixture("chain3", seed=9, T=600)
    g = run_pcmci(panel, CFG)
    d = json.loads(g.to_json())
    assert set(d) == {"variables", "tau_max", "tau_min", "links"}
    assert all(set(l) == {"src", "lag", "dst", "stat", "pval"} for l in d["links"])
    assert LaggedGraph.from_dict(d) == g


def test_fdr_never_adds_links():
    _, panel = standard_fixture("mediation8", seed=10, T=800)
    plain = {(l.src, l.lag, l.dst) for l in run_pcmci(panel, CFG).links}
    fdr = {(l.src, l.lag, l.dst) for l in run_pcmci(panel, PcmciConfig(tau_max=3, fdr=True)).links}
    assert fdr <= plain


def test_constant_variable_raises():
    rng = np.random.default_rng(0)
    panel = make_panel({"a": rng.standard_normal(200), "b": np.ones(200)})
    with pytest.raises(DegenerateInputError):
        run_pcmci(panel, CFG)


def test_too_short_raises():
    rng = np.random.default_rng(0)
    panel = make_panel({"a": rng.standard_normal(40), "b": rng.standard_normal(40)})
    with pytest.raises(DataError):
        run_pcmci(panel, CFG)


def test_masked_rows_excluded():
    _, panel = standard_fixture("chain3", seed=11, T=1000)
    vals = panel.values.copy()
    vals[500, 0] = np.nan
    masked = Panel(panel.timestamps, panel.columns, vals, np.isfinite(vals), panel.region)
    g = run_pcmci(masked, CFG)
    assert causal_feature_set(g, "Y") == {"V"}


def test_bad_config():
    with pytest.raises(ValueError):
        PcmciConfig(tau_min=0)
    with pytest.raises(ValueError):
        PcmciConfig(pc_alpha=1.5)


def test_causal_feature_set_unknown_target():
    g = LaggedGraph(("a",), 1, 1, ())
    with pytest.raises(KeyError):
        causal_feature_set(g, "zzz")


def test_consensus_majority():
    assert consensus_features([{"a", "b"}, {"a"}, {"a", "c"}]) == {"a"}
    assert consensus_features([{"a"}, {"b"}]) == set()
    assert consensus_features([]) == set()


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_links_have_valid_lags_and_pvalues(seed):
    _, panel = standard_fixture("chain3", seed=seed, T=400)
    g = run_pcmci(panel, PcmciConfig(tau_max=2))
    for l in g.links:
        assert 1 <= l.lag <= 2
        assert 0.0 <= l.pval <= 0.05
        assert -1.0 <= l.stat <= 1.0
