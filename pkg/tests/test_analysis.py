import numpy as np
import pytest

from fedsa import FederatedConfig, ProblemFleet, run
from fedsa.analysis import (decay_phase_end, drift_scaling, error_floor, log_linear_fit,
                            prop1_limit, simulate_local_sa_limit, speedup_slope,
                            theorem_ingredients)
from fedsa.errors import EmptyInput, InvalidInput, InvalidParam, NotSchurStable
from fedsa.operators import (QuadraticAgent, gen_finitesum_fleet, gen_mrp_fleet,
                             gen_quadratic_fleet)


def two_agent_fleet():
    return ProblemFleet([QuadraticAgent([[1.0]], [1.0]), QuadraticAgent([[3.0]], [0.0])])


def test_prop1_scalar_by_hand():
    # A_bar = -2, A' = 5, F = 1 - 0.4 + 0.05; v = (1/2)(-1.5)/(-3.5) = 3/14
    rep = prop1_limit(two_agent_fleet(), 0.1)
    assert rep.F[0, 0] == pytest.approx(0.65, abs=1e-15)
    assert rep.schur_radius == pytest.approx(0.65, abs=1e-12)
    assert rep.theta_star == pytest.approx([0.25], abs=1e-15)
    assert rep.v == pytest.approx([3.0 / 14.0], abs=1e-14)
    assert rep.predicted_limit_point == pytest.approx([0.095 / 0.35], abs=1e-14)
    assert set(rep.to_dict()) >= {"F", "v", "predicted_limit_point", "convention"}


def test_prop1_scalar_worked_values():
    # mean of A_i is 1.5 and mean of A_i^2 is 2.5
    fleet = ProblemFleet([QuadraticAgent([[1.0]], [0.0]), QuadraticAgent([[2.0]], [0.0])])
    rep = prop1_limit(fleet, 0.1)
    assert rep.F[0, 0] == pytest.approx(1 + 2 * 0.1 * -1.5 + 0.01 * 2.5)
    assert rep.schur_radius == pytest.approx(0.725, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_prop1_matches_simulated_limit(seed):
    fleet = gen_quadratic_fleet(3, 4, 1.0, 3.0, None, seed=seed)
    rep = prop1_limit(fleet, 0.2)
    sim, rounds = simulate_local_sa_limit(fleet, 0.2)
    rel = np.linalg.norm(sim - rep.predicted_limit_point) / np.linalg.norm(rep.predicted_limit_point)
    assert rel <= 1e-8
    assert rounds < 1_000_000


def test_prop1_homogeneous_has_no_bias():
    fleet = gen_quadratic_fleet(3, 4, 0.0, 3.0, None, seed=1)
    rep = prop1_limit(fleet, 0.2)
    assert np.max(np.abs(rep.v)) <= 1e-12


def test_prop1_rejects_unstable_step():
    with pytest.raises(NotSchurStable):
        prop1_limit(two_agent_fleet(), 1.0)


def test_error_floor_by_hand():
    a = np.array([9.0, 9.0, 9.0, 1.0, 3.0])
    b = np.array([9.0, 9.0, 9.0, 5.0, 7.0])
    est = error_floor([a, b], window_fraction=0.4)
    assert est.floor == pytest.approx(4.0)
    assert est.per_seed == (2.0, 6.0)
    assert est.stderr == pytest.approx(np.std([2.0, 6.0], ddof=1) / np.sqrt(2))
    with pytest.raises(EmptyInput):
        error_floor([])
    with pytest.raises(InvalidParam):
        error_floor([a], 0.0)
    with pytest.raises(InvalidInput):
        error_floor([a, b[:3]])


def test_speedup_slope_exact():
    assert speedup_slope([(m, 3.0 / m) for m in (1, 4, 16, 64)]) == pytest.approx(-1.0)
    with pytest.raises(InvalidInput):
        speedup_slope([(1, 1.0), (2, 0.5)])
    with pytest.raises(InvalidInput):
        speedup_slope([(1, 1.0), (2, 0.0), (4, 0.1)])


def test_log_linear_fit_and_decay_end():
    d = 5.0 * 0.9 ** np.arange(50)
    rate, r2 = log_linear_fit(d)
    assert rate == pytest.approx(0.9, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
    assert decay_phase_end([1.0, 1e-10, 1e-21, 0.0]) == 2
    assert decay_phase_end([1.0, 2.0]) == 2


def test_theorem_ingredients():
    q = gen_quadratic_fleet(4, 3, 1.0, 3.0, {"sigma_eps": 0.1, "q": 0.5}, seed=0)
    cfg = FederatedConfig(H=10, T=100, eta=0.001)
    ing = theorem_ingredients(q, cfg)
    assert ing.alpha == pytest.approx(0.01)
    assert ing.rho_hat == pytest.approx(0.5, abs=1e-6)
    assert ing.tau_bar == int(np.ceil(np.log(1e-4) / np.log(ing.rho_hat)))
    assert ing.eta_suggest == pytest.approx(ing.mu_hat / (10 * ing.tau_bar * ing.L_hat**2 * 10))
    iid = theorem_ingredients(q, FederatedConfig(H=10, T=100, eta=0.001, sampling_mode="iid"))
    assert iid.tau_bar == 0
    m = gen_mrp_fleet(3, 6, 2, (0.5, 0.9), 1.0, seed=0)
    ing = theorem_ingredients(m, FederatedConfig(H=2, T=10, eta=0.05))
    assert ing.tau_bar >= 1 and 0.0 <= ing.rho_hat < 1.0
    assert ing.tau_source == "tv-measured"
    big = theorem_ingredients(m, FederatedConfig(H=10, T=10, eta=1.0))
    assert big.tau_bar == 0
    assert set(ing.to_dict()) == {"alpha", "tau_bar", "rho_hat", "L_hat", "mu_hat", "sigma_hat",
                                  "eta_suggest", "tau_source"}


def test_drift_is_linear_in_step_size():
    fleet = gen_finitesum_fleet(4, 2, 5, 1.0, seed=0)
    slope, drifts = drift_scaling(fleet, [1e-4, 1e-3, 1e-2], H=5)
    assert slope == pytest.approx(1.0, abs=0.05)
    assert drifts == sorted(drifts)


def test_floor_from_run_traces():
    fleet = gen_quadratic_fleet(4, 3, 1.0, 2.0, {"sigma_eps": 0.1}, seed=0)
    traces = [run(fleet, FederatedConfig(H=5, T=200, eta=0.01, master_seed=s)) for s in range(3)]
    est = error_floor(traces)
    assert est.n_seeds == 3 and est.floor > 0
