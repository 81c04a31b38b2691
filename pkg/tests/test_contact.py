import math

import numpy as np
import pytest

from geocp.contact import (ContactConfig, ContactEngine, TauSample,
                           birth_death_clique_simulate, dual_from_record,
                           forward_from_record, lit_snapshots, record_event_window,
                           sample_extinction_times, simulate_coupled, simulate_dual,
                           simulate_extinction, simulate_rate_coupled,
                           sizes_to_csv_text)
from geocp.exact import exact_clique_extinction, exact_expected_extinction_ctmc
from geocp.graphs import (CaterpillarSpec, Graph, build_caterpillar, build_complete,
                          random_connected_graph)


def test_config_validation():
    with pytest.raises(ValueError):
        ContactConfig(0.0)
    with pytest.raises(ValueError):
        ContactConfig(1.0, t_cap=-1.0)


def test_single_vertex_exponential():
    g = Graph.from_edges(1, [])
    taus, cens = sample_extinction_times(g, 2.0, None, 42, 20000)
    assert not cens.any()
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - 1.0) <= 3 * se


def test_isolated_vertices_order_statistics():
    # lam ~ 0: extinction is the max of three unit exponentials, mean 11/6
    g = Graph.from_edges(3, [])
    taus, _ = sample_extinction_times(g, 1e-9, None, 3, 30000)
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - 11 / 6) <= 3 * se


def test_k2_mean_two():
    taus, _ = sample_extinction_times(build_complete(2), 1.0, None, 7, 30000)
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - 2.0) <= 3 * se


def test_empty_graph_and_empty_initial():
    g = Graph.from_edges(0, [])
    s = simulate_extinction(g, ContactConfig(1.0, seed=1))
    assert s.tau == 0.0 and not s.censored
    g1 = Graph.from_edges(2, [(0, 1)])
    s = simulate_extinction(g1, ContactConfig(1.0, seed=1), initial=[])
    assert s.tau == 0.0 and not s.censored


def test_censoring_contract():
    s = simulate_extinction(build_complete(30), ContactConfig(1.0, t_cap=5.0, seed=2))
    assert s.censored and s.tau == 5.0
    with pytest.raises(ValueError):
        TauSample(math.inf, True, 0, "x")


def test_kernel_engine_oracle_triangle():
    # kernel and reference engine both agree with the CTMC oracle
    g = random_connected_graph(5, 2, 77)
    lam = 0.8
    exact = exact_expected_extinction_ctmc(g, lam)
    taus, _ = sample_extinction_times(g, lam, None, 5, 30000)
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - exact) <= 3 * se
    engine = ContactEngine(g, lam, 11)
    etaus = np.array([engine.run().tau for _ in range(4000)])
    ese = etaus.std(ddof=1) / math.sqrt(len(etaus))
    assert abs(etaus.mean() - exact) <= 3 * ese


def test_engine_audit_and_state():
    g = build_complete(6)
    engine = ContactEngine(g, 0.5, 3)
    run = engine.run(t_cap=5.0, size_log_limit=50)
    engine.audit()
    st = engine.state()
    assert st.infected <= set(range(6))
    text = sizes_to_csv_text(run)
    assert text.startswith("time,size\n")
    assert len(text.splitlines()) == len(run.sizes) + 1


def test_rate_monotonicity_pathwise():
    g = build_complete(5)
    for seed in range(60):
        taus = simulate_rate_coupled(g, [0.25, 0.5, 1.0], seed, 200.0)
        vals = [taus[0.25], taus[0.5], taus[1.0]]
        filled = [math.inf if v is None else v for v in vals]
        assert filled == sorted(filled)


def test_coupled_identical_and_empty():
    g = build_complete(5)
    cfg = ContactConfig(0.5, t_cap=3.0, seed=9)
    same = simulate_coupled(g, cfg, [0, 2], [0, 2])
    assert same.final_low == same.final_high and same.tau_low == same.tau_high
    empty = simulate_coupled(g, cfg, [], [0, 1])
    assert empty.tau_low == 0.0 and empty.final_low == frozenset()


def test_coupled_containment_battery():
    g = build_complete(5)
    for seed in range(1000):
        simulate_coupled(g, ContactConfig(0.5, t_cap=2.0, seed=seed), [0, 1], [0, 1, 2, 3])


def test_dual_degenerate_windows():
    g = build_complete(4)
    run = simulate_dual(g, ContactConfig(1.0, seed=3), target=2, window=0.0)
    assert run.final == frozenset({2})
    # lam -> 0: the dual holds the target until its recovery clock rings
    g2 = Graph.from_edges(2, [(0, 1)])
    run2 = simulate_dual(g2, ContactConfig(1e-12, seed=5), target=0, window=4.0)
    states = [s for _, s in run2.trajectory]
    assert states[0] == frozenset({0})
    assert all(s in (frozenset({0}), frozenset()) for s in states)


def test_dual_window_rejection():
    g = build_complete(3)
    rec = record_event_window(g, 1.0, 4, 1.0)
    with pytest.raises(ValueError):
        dual_from_record(rec, [0], 2.0)
    with pytest.raises(ValueError):
        forward_from_record(rec, [0], 2.0)


def test_pathwise_duality_identity():
    g = random_connected_graph(5, 2, 4242)
    a, b = {0, 2}, {1, 4}
    for seed in range(300):
        rec = record_event_window(g, 0.8, seed, 1.5)
        fwd_hits = len(forward_from_record(rec, a, 1.5) & b) > 0
        dual_hits = len(dual_from_record(rec, b, 1.5)[-1][1] & a) > 0
        assert fwd_hits == dual_hits


def test_duality_distributional():
    g = random_connected_graph(5, 2, 4242)
    a, b = {0, 2}, {1, 4}
    n = 6000
    fwd = sum(len(forward_from_record(record_event_window(g, 0.8, s, 1.2), a, 1.2) & b) > 0
              for s in range(n)) / n
    dual = sum(len(dual_from_record(record_event_window(g, 0.8, 10**6 + s, 1.2), b, 1.2)[-1][1] & a) > 0
               for s in range(n)) / n
    se = math.sqrt(2 * 0.25 / n)
    assert abs(fwd - dual) <= 3 * se


def test_birth_death_single_vertex():
    taus = np.array([birth_death_clique_simulate(1, 1.0, 1, seed=i).tau for i in range(20000)])
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - 1.0) <= 3 * se


def test_birth_death_matches_exact_mean():
    m, lam = 30, 0.05  # lam*m = 1.5: weakly supercritical, simulable
    exact = exact_clique_extinction(m, lam)
    taus = np.array([birth_death_clique_simulate(m, lam, m, seed=i).tau for i in range(4000)])
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - exact) <= 3 * se


def test_birth_death_matches_full_engine():
    m, lam = 10, 0.3
    bd = np.array([birth_death_clique_simulate(m, lam, m, seed=i).tau for i in range(4000)])
    full, _ = sample_extinction_times(build_complete(m), lam, None, 8, 4000)
    se = math.sqrt(bd.var(ddof=1) / len(bd) + full.var(ddof=1) / len(full))
    assert abs(bd.mean() - full.mean()) <= 3 * se


def test_lit_snapshots_contract():
    cat = build_caterpillar(CaterpillarSpec(4, 8))
    snaps = lit_snapshots(cat, ContactConfig(0.5, t_cap=2.0, seed=1))
    assert snaps[0].time == 0.0
    assert all(snaps[0].lit)  # full start: every clique fully infected
    with pytest.raises(ValueError):
        lit_snapshots(build_complete(5), ContactConfig(1.0, seed=0))
    with pytest.raises(ValueError, match="cadence"):
        lit_snapshots(cat, ContactConfig(0.01, seed=0))


def test_lit_snapshots_stop_at_extinction():
    cat = build_caterpillar(CaterpillarSpec(2, 4))
    cfg = ContactConfig(0.1, t_cap=500.0, seed=12)
    snaps = lit_snapshots(cat, cfg, cadence=0.5)
    engine = ContactEngine(cat.graph, 0.1, 12)
    run = engine.run(t_cap=500.0, snapshot_interval=0.5)
    assert not run.censored
    assert all(t <= run.tau for t, _ in [(s.time, s.lit) for s in snaps])


def test_lit_fraction_predicts_survival():
    # weakly supercritical caterpillar: the lit fraction a few persistence
    # times in is positively associated with surviving ten of them
    ell, m, lam = 8, 6, 0.28
    cat = build_caterpillar(CaterpillarSpec(ell, m))
    cadence = math.exp(m * math.log(lam * m) / 16)
    lit_frac, survived = [], []
    for seed in range(400):
        snaps = lit_snapshots(cat, ContactConfig(lam, t_cap=10 * cadence, seed=seed),
                              cadence=cadence)
        lit_frac.append(np.mean(snaps[3].lit) if len(snaps) > 3 else 0.0)
        survived.append(len(snaps) >= 11)
    corr = np.corrcoef(lit_frac, np.asarray(survived, float))[0, 1]
    assert corr > 0
