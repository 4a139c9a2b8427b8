import numpy as np
import pytest
from hypothesis import given, settings

from zealotvm.equilibrium import solve_opinions
from zealotvm.network import NodeRole, generate_complete, generate_erdos_renyi
from zealotvm.simulate import SimulationConfig, format_trace, replicate, run_seed, simulate

from conftest import random_networks


def short(**kw):
    base = dict(horizon=400.0, burn_in=100.0, sample_every=10, seed=1)
    base.update(kw)
    return SimulationConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(horizon=0), dict(burn_in=500), dict(burn_in=-1), dict(sample_every=0),
                                    dict(sample_every=2.5), dict(batches=1)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            short(**kw)

    def test_no_free_nodes(self):
        with pytest.raises(ValueError):
            simulate(generate_complete(3, 2, 1), short())

    def test_bad_initial_rule(self):
        with pytest.raises(ValueError):
            simulate(generate_complete(5, 1, 1), short(initial_opinions="random"))
        with pytest.raises(ValueError):
            simulate(generate_complete(5, 1, 1), short(initial_opinions=[0, 1]))


def test_absorbs_when_all_zealots_agree():
    net = generate_erdos_renyi(30, 0.2, 0, 4, "uniform", seed=2)
    tr = simulate(net, short(initial_opinions="zeros"))
    assert tr.absorbed_time is not None and tr.absorbed_time < tr.final_time
    assert tr.final_opinions.tolist() == [1] * 30
    assert tr.x_bar[-1] == 1.0 and tr.rho[-1] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_consensus_without_zealots(seed):
    net = generate_erdos_renyi(15, 0.3, 0, 0, "exponential", seed=seed)
    tr = simulate(net, short(seed=seed, horizon=5000.0))
    assert tr.absorbed_time is not None
    assert len(set(tr.final_opinions.tolist())) == 1


@given(random_networks())
@settings(max_examples=25, deadline=None)
def test_zealots_never_change(net):
    tr = simulate(net, short(horizon=60.0, burn_in=5.0, sample_every=1))
    z0, z1 = net.zealots0, net.zealots1
    assert np.all(tr.final_opinions[z0] == 0) and np.all(tr.final_opinions[z1] == 1)
    # node means are averages over every sample, so any flip would show
    assert np.all(tr.node_mean[z0] == 0.0) and np.all(tr.node_mean[z1] == 1.0)


def test_trace_invariants():
    net = generate_erdos_renyi(40, 0.15, 5, 5, "uniform", seed=0)
    tr = simulate(net, short())
    assert tr.n_samples > 0
    assert np.all(np.diff(tr.times) > 0) and tr.times[0] >= 100.0
    for vals in (tr.x_bar, tr.rho, tr.rho_w):
        assert np.all((vals >= 0) & (vals <= 1))
    text = format_trace(tr)
    assert text.splitlines()[0] == "time\tx_bar_emp\trho_emp\trho_w_emp"
    assert len(text.splitlines()) == tr.n_samples + 1


def test_incremental_counts_match_recount():
    net = generate_erdos_renyi(40, 0.15, 5, 5, "exponential", seed=4)
    tr = simulate(net, short(horizon=123.0, burn_in=0.0, sample_every=1))
    x = tr.final_opinions
    dst, src, w = net.edges()
    act = x[dst] != x[src]
    assert tr.rho[-1] == pytest.approx(act.mean(), abs=1e-12)
    assert tr.rho_w[-1] == pytest.approx(w[act].sum() / w.sum(), abs=1e-9)
    assert tr.x_bar[-1] == pytest.approx(x.mean(), abs=1e-15)


def test_deterministic():
    net = generate_erdos_renyi(40, 0.15, 5, 5, "uniform", seed=0)
    a, b = simulate(net, short()), simulate(net, short())
    np.testing.assert_array_equal(a.rho, b.rho)
    assert a.events == b.events
    c = simulate(net, short(seed=2))
    assert not np.array_equal(a.rho, c.rho)


def test_replicate():
    net = generate_erdos_renyi(40, 0.15, 5, 5, "uniform", seed=0)
    cfg = short()
    one = replicate(net, cfg, 1)
    assert one.mean == simulate(net, cfg).summary
    assert replicate(net, cfg, 3).mean == replicate(net, cfg, 3).mean
    seeds = {run_seed(cfg, r) for r in range(8)}
    assert len(seeds) == 8
    with pytest.raises(ValueError):
        replicate(net, cfg, 0)


def test_replicate_error_shrinks(er_validation_net):
    cfg = SimulationConfig(horizon=3000.0, burn_in=500.0, sample_every=100, seed=3)
    single = simulate(er_validation_net, cfg).stderr["rho"]
    many = replicate(er_validation_net, cfg, 8).stderr["rho"]
    # expected ratio is 1/sqrt(8) ~ 0.35; loose because both are noisy estimates
    assert 0.1 < many / single < 0.8


def test_complete_graph_mean_within_three_standard_errors():
    net = generate_complete(100, 20, 20)
    tr = simulate(net, SimulationConfig(horizon=20_000.0, burn_in=2_000.0, sample_every=100, seed=5))
    assert abs(tr.summary["x_bar"] - 0.5) <= 3 * tr.stderr["x_bar"]


def test_free_zealot_pair_disagreement_converges():
    net = generate_erdos_renyi(12, 0.4, 3, 3, "uniform", seed=8)
    eq = solve_opinions(net)
    tr = simulate(net, SimulationConfig(horizon=100_000.0, burn_in=1_000.0, sample_every=5, seed=0))
    # with a 0-zealot partner, disagreement is exactly "free node holds 1"
    np.testing.assert_allclose(tr.node_mean[net.free], eq.x_f, atol=0.02)
