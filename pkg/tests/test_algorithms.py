import numpy as np
import pytest

from fedsa import FederatedConfig, ProblemFleet, corollary1_eta, run, single_agent_sa
from fedsa.algorithms import fedhsa_round, init_state, local_sa_round
from fedsa.errors import DimensionMismatch, Diverged, InvalidParam
from fedsa.operators import QuadraticAgent, gen_mrp_fleet, gen_quadratic_fleet, measure_constants
from fedsa.rng import RngStream


def two_agent_fleet():
    """Scalar agents G_1 = 1 - t and G_2 = -3 t; the mean operator vanishes at 0.25."""
    return ProblemFleet([QuadraticAgent([[1.0]], [1.0]), QuadraticAgent([[3.0]], [0.0])])


def noiseless(H, T, eta, **kw):
    return FederatedConfig(H=H, T=T, eta=eta, sampling_mode="noiseless", **kw)


def test_local_sa_round_by_hand():
    # agent 1: 0 -> 0.1 -> 0.19; agent 2 stays at 0; average 0.095
    fleet = two_agent_fleet()
    cfg = noiseless(2, 1, 0.1)
    new = local_sa_round(init_state(fleet, cfg), fleet, cfg)
    assert new.theta_bar == pytest.approx([0.095], abs=1e-15)
    assert new.max_drift == pytest.approx(0.19, abs=1e-15)


def test_fedhsa_round_by_hand():
    # corrections c_1 = -0.5, c_2 = +0.5; agent 1: 0.05, 0.095; agent 2: 0.05, 0.085
    fleet = two_agent_fleet()
    cfg = noiseless(2, 1, 0.1)
    new = fedhsa_round(init_state(fleet, cfg), fleet, cfg)
    assert new.theta_bar == pytest.approx([0.09], abs=1e-15)
    assert new.max_drift == pytest.approx(0.095, abs=1e-15)


def test_server_step_scales_average_update():
    fleet = two_agent_fleet()
    cfg = noiseless(2, 1, 0.1, alpha_g=2.0)
    new = fedhsa_round(init_state(fleet, cfg), fleet, cfg)
    assert new.theta_bar == pytest.approx([0.18], abs=1e-15)


def test_fedhsa_converges_local_sa_is_biased():
    fleet = two_agent_fleet()
    f = run(fleet, noiseless(2, 400, 0.1), "fedhsa")
    g = run(fleet, noiseless(2, 400, 0.1), "local_sa")
    assert f.d[-1] < 1e-28
    # Local SA fixed point: 0.65 t + 0.095 = t, so t = 0.095 / 0.35
    assert g.theta_final == pytest.approx([0.095 / 0.35], abs=1e-14)


def test_fedhsa_stays_at_root():
    fleet = gen_quadratic_fleet(6, 4, 1.0, 3.0, None, seed=0)
    star = measure_constants(fleet).theta_star
    tr = run(fleet, noiseless(5, 100, 0.05), "fedhsa", theta0=star, theta_star=star)
    assert np.max(tr.d) <= 1e-28


def test_single_local_step_fedhsa_equals_local_sa_under_noise():
    fleet = gen_mrp_fleet(5, 8, 3, (0.5, 0.9), 1.0, seed=1)
    cfg = FederatedConfig(H=1, T=50, eta=0.3, sampling_mode="markov", master_seed=4)
    f = run(fleet, cfg, "fedhsa")
    g = run(fleet, cfg, "local_sa")
    assert np.max(np.abs(f.d - g.d) / np.maximum(g.d, 1e-300)) <= 1e-12


def test_homogeneous_traces_coincide():
    fleet = gen_quadratic_fleet(5, 4, 0.0, 3.0, None, seed=2)
    cfg = noiseless(4, 60, 0.05)
    assert np.array_equal(run(fleet, cfg, "fedhsa").d, run(fleet, cfg, "local_sa").d)


def test_same_sample_budget_and_determinism():
    fleet = gen_quadratic_fleet(4, 3, 1.0, 3.0, {"sigma_eps": 0.1}, seed=0)
    cfg = FederatedConfig(H=7, T=20, eta=0.01, master_seed=3)
    f = run(fleet, cfg, "fedhsa")
    g = run(fleet, cfg, "local_sa")
    assert f.samples == g.samples == 4 * 7 * 20
    assert f.advances_per_agent == g.advances_per_agent == 7 * 20
    again = run(fleet, cfg, "fedhsa")
    assert np.array_equal(f.d, again.d)
    other = run(fleet, FederatedConfig(H=7, T=20, eta=0.01, master_seed=4), "fedhsa")
    assert not np.array_equal(f.d, other.d)


def test_fresh_anchor_draws_one_extra_observation():
    fleet = gen_quadratic_fleet(3, 2, 1.0, 3.0, {"sigma_eps": 0.1}, seed=0)
    cfg = FederatedConfig(H=4, T=10, eta=0.01, fresh_anchor=True)
    assert run(fleet, cfg, "fedhsa").advances_per_agent == 5 * 10 + 1


def test_trace_layout():
    fleet = two_agent_fleet()
    tr = run(fleet, noiseless(2, 3, 0.1), "fedhsa")
    assert len(tr.d) == 4 and tr.T == 3
    assert tr.d[0] == pytest.approx(0.0625)
    assert tr.max_drift[0] == 0.0
    assert tr.rounds[1]["t"] == 1 and tr.rounds[1]["d_t"] == tr.d[1]


def test_corollary_schedule():
    assert corollary1_eta(2, 5, 10, 1.0) == pytest.approx(4 * np.log(100) / 50)
    cfg = FederatedConfig(H=5, T=10, eta=None, schedule="corollary1", schedule_mu=1.0)
    assert cfg.local_step(2) == pytest.approx(4 * np.log(100) / 50)
    assert cfg.effective_step(2) == pytest.approx(5 * 4 * np.log(100) / 50)
    with pytest.raises(InvalidParam):
        corollary1_eta(1, 1, 1, 1.0)
    with pytest.raises(InvalidParam):
        FederatedConfig(H=5, T=10, eta=None, schedule="corollary1")


def test_config_and_run_errors():
    with pytest.raises(InvalidParam):
        FederatedConfig(H=0, T=1, eta=0.1)
    with pytest.raises(InvalidParam):
        FederatedConfig(H=1, T=1, eta=0.1, sampling_mode="bogus")
    fleet = two_agent_fleet()
    with pytest.raises(InvalidParam):
        run(fleet, noiseless(1, 1, 0.1), "sgd")
    with pytest.raises(DimensionMismatch):
        run(fleet, noiseless(1, 1, 0.1), theta0=[0.0, 0.0])
    with pytest.raises(InvalidParam):
        run(fleet, noiseless(1, 1, 0.1, M=3))
    with pytest.raises(Diverged):
        run(fleet, noiseless(10, 200, 2.0), "local_sa", theta0=[1.0])


def test_single_agent_sa():
    agent = QuadraticAgent([[2.0]], [4.0])
    tr = single_agent_sa(agent, [0.0], 200, 0.1, mode="noiseless")
    # error contracts by (1 - 0.2)^2 per step in squared distance
    assert tr.d[1] == pytest.approx(4.0 * 0.64)
    assert tr.theta_final == pytest.approx([2.0], abs=1e-15)
    fleet = gen_quadratic_fleet(1, 3, 0.0, 2.0, {"sigma_eps": 0.1}, seed=0)
    tr = single_agent_sa(fleet.agents[0], np.zeros(3), 4000, 0.01, "markov", RngStream(0, 0, "sa"))
    assert tr.d[-1000:].mean() < 0.01
