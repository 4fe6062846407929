"""Closed-form references, floor/speedup measurements and brute-force oracles.

Linear parts use the convention ``G_bar_i(theta) = A_bar_i theta - b_bar_i``
with ``A_bar_i`` Hurwitz; for quadratic agents that is ``A_bar_i = -A_i`` and
``b_bar_i = -b_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import FederatedConfig, init_state, local_sa_round, run
from .errors import EmptyInput, InvalidInput, InvalidParam, NotSchurStable
from .markov import mixing_time
from .numerics import solve_linear, spectral_radius
from .operators.agents import AgentOperator, QuadraticAgent
from .operators.fleet import ProblemConstants, ProblemFleet, measure_constants
from .rng import RngStream

DEFAULT_WINDOW = 0.2


@dataclass(frozen=True)
class Prop1Report:
    F: np.ndarray
    schur_radius: float
    v: np.ndarray
    predicted_limit_error: np.ndarray
    predicted_limit_point: np.ndarray
    theta_star: np.ndarray
    eta: float
    convention: str = "G_bar_i(theta) = A_bar_i theta - b_bar_i, A_bar_i Hurwitz"

    def to_dict(self) -> dict:
        return {"eta": self.eta, "schur_radius": self.schur_radius, "F": self.F.tolist(),
                "v": self.v.tolist(), "predicted_limit_error": self.predicted_limit_error.tolist(),
                "predicted_limit_point": self.predicted_limit_point.tolist(),
                "theta_star": self.theta_star.tolist(), "convention": self.convention}


def prop1_limit(fleet: ProblemFleet, eta: float) -> Prop1Report:
    """Limit of noiseless two-step Local SA: ``theta_star + eta v``."""
    A_i, b_i = fleet.linear_parts()
    M, d = fleet.M, fleet.dim
    A_bar = A_i.mean(axis=0)
    b_bar = b_i.mean(axis=0)
    A_sq = np.einsum("mij,mjk->mik", A_i, A_i)
    A_prime = A_sq.mean(axis=0)
    F = np.eye(d) + 2.0 * eta * A_bar + eta**2 * A_prime
    radius = spectral_radius(F)
    if radius >= 1.0 - 1e-9:
        raise NotSchurStable(f"spectral radius of I + 2 eta A + eta^2 A' is {radius:.9f}")
    theta_star = solve_linear(A_bar, b_bar)
    pull = np.zeros(d)
    for i in range(M):
        local_root = solve_linear(A_i[i], b_i[i])
        pull = pull + A_sq[i] @ (local_root - theta_star)
    v = solve_linear(2.0 * A_bar + eta * A_prime, pull) / M
    return Prop1Report(F=F, schur_radius=radius, v=v, predicted_limit_error=eta * v,
                       predicted_limit_point=theta_star + eta * v, theta_star=theta_star,
                       eta=float(eta))


def simulate_local_sa_limit(fleet: ProblemFleet, eta: float, H: int = 2, theta0=None,
                            max_rounds: int = 1_000_000, settle: int = 10) -> tuple[np.ndarray, int]:
    """Run noiseless Local SA until the global iterate stops moving.

    Stops once the per-round change stays below ``1e-15 (1 + ||theta||)`` for
    ``settle`` consecutive rounds. Returns ``(limit point, rounds used)``.
    """
    config = FederatedConfig(H=H, T=1, eta=eta, sampling_mode="noiseless")
    state = init_state(fleet, config, theta0)
    calm = 0
    for t in range(1, max_rounds + 1):
        new = local_sa_round(state, fleet, config)
        step = float(np.linalg.norm(new.theta_bar - state.theta_bar))
        state = new
        calm = calm + 1 if step <= 1e-15 * (1.0 + float(np.linalg.norm(state.theta_bar))) else 0
        if calm >= settle:
            return state.theta_bar, t
    return state.theta_bar, max_rounds


@dataclass(frozen=True)
class FloorEstimate:
    floor: float
    window_fraction: float
    n_seeds: int
    stderr: float
    per_seed: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"floor": self.floor, "stderr": self.stderr, "n_seeds": self.n_seeds,
                "window_fraction": self.window_fraction, "per_seed": list(self.per_seed)}


def error_floor(traces, window_fraction: float = DEFAULT_WINDOW) -> FloorEstimate:
    """Mean of ``d_t`` over the trailing window, averaged across seeds."""
    traces = list(traces)
    if not traces:
        raise EmptyInput("no traces given")
    if not 0.0 < window_fraction <= 1.0:
        raise InvalidParam("window_fraction must lie in (0, 1]")
    series = [np.asarray(getattr(t, "d", t), dtype=float) for t in traces]
    n = len(series[0])
    if any(len(s) != n for s in series):
        raise InvalidInput("traces have different lengths")
    width = max(1, int(math.ceil(window_fraction * n)))
    per_seed = np.array([s[-width:].mean() for s in series])
    stderr = float(per_seed.std(ddof=1) / math.sqrt(len(per_seed))) if len(per_seed) > 1 else 0.0
    return FloorEstimate(float(per_seed.mean()), window_fraction, len(per_seed), stderr,
                         tuple(float(x) for x in per_seed))


def speedup_slope(floors) -> float:
    """Least-squares slope of log(floor) against log(M)."""
    pts = [(float(m), float(f)) for m, f in floors]
    if len({m for m, _ in pts}) < 3:
        raise InvalidInput("need at least three distinct agent counts")
    if any(f <= 0 or m <= 0 for m, f in pts):
        raise InvalidInput("floors and agent counts must be positive")
    x = np.log([m for m, _ in pts])
    y = np.log([f for _, f in pts])
    return float(np.polyfit(x, y, 1)[0])


def exact_expectation_oracle(agent: AgentOperator, theta) -> np.ndarray:
    """Probability-weighted sum of ``G_i(theta, o)`` over every observation."""
    theta = np.asarray(theta, dtype=float)
    total = np.zeros(agent.dim)
    for prob, obs in agent.enumerate_observations():
        total = total + prob * agent.evaluate(theta, obs)
    return total


def log_linear_fit(values, start: int = 0, stop: int | None = None) -> tuple[float, float]:
    """Fit ``log(values[t]) ~ a + r t`` on ``[start, stop)``; returns ``(exp(r), R^2)``."""
    y = np.log(np.asarray(values[start:stop], dtype=float))
    t = np.arange(start, start + len(y), dtype=float)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (intercept + slope * t)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / total if total > 0 else 1.0
    return math.exp(slope), r2


def decay_phase_end(d, threshold: float = 1e-20) -> int:
    """Index of the first entry at or below ``threshold`` (``len(d)`` if none)."""
    hits = np.flatnonzero(np.asarray(d) <= threshold)
    return int(hits[0]) if hits.size else len(d)


@dataclass(frozen=True)
class TheoremIngredients:
    alpha: float
    tau_bar: int
    rho_hat: float
    L_hat: float
    mu_hat: float
    sigma_hat: float
    eta_suggest: float
    tau_source: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def theorem_ingredients(fleet: ProblemFleet, config: FederatedConfig,
                        constants: ProblemConstants | None = None,
                        suggest_c: float = 10.0) -> TheoremIngredients:
    """Every symbol of the Markov-sampling error bound, measured on this fleet.

    ``tau_bar`` is the worst agent mixing time at accuracy ``alpha^2``. It is
    0 for i.i.d./noiseless sampling and whenever ``alpha^2 >= 1``. Gauss-Markov
    agents use ``ceil(ln(alpha^2) / ln(rho_q))`` with ``rho_q`` the spectral
    radius of the AR matrix (model-derived, not TV-measured).
    """
    constants = constants or measure_constants(fleet)
    alpha = config.effective_step(fleet.M)
    eps = alpha**2
    tau_bar, rho_hat = 0, 0.0
    source = "convention"
    if config.sampling_mode == "markov":
        if isinstance(fleet.agents[0], QuadraticAgent):
            source = "ar1-contraction"
            rho_hat = max(a.noise.spectral_radius for a in fleet.agents)
            if 0.0 < eps < 1.0 and rho_hat > 0.0:
                tau_bar = max(0, math.ceil(math.log(eps) / math.log(rho_hat)))
        else:
            source = "tv-measured"
            chains = [getattr(a, "chain", None) or a.index_chain for a in fleet.agents]
            level = eps if 0.0 < eps < 1.0 else 0.5
            reports = [mixing_time(ch, level) for ch in chains]
            rho_hat = max(r.rho_hat for r in reports)
            if level == eps:
                tau_bar = max(r.tau for r in reports)
    eta_suggest = constants.mu_hat / (suggest_c * max(tau_bar, 1) * constants.L_hat**2 * config.H)
    return TheoremIngredients(alpha=alpha, tau_bar=tau_bar, rho_hat=rho_hat,
                              L_hat=constants.L_hat, mu_hat=constants.mu_hat,
                              sigma_hat=constants.sigma_hat, eta_suggest=eta_suggest,
                              tau_source=source)


def drift_scaling(fleet: ProblemFleet, etas, H: int, radius: float = 1.0,
                  seed: int = 0) -> tuple[float, list[float]]:
    """Slope of log(max local drift) vs log(eta) over one noiseless FedHSA round.

    Every round starts from the same point at distance ``radius`` from the root.
    """
    theta_star = measure_constants(fleet).theta_star
    u = RngStream(seed, 0, "drift-direction").normals(fleet.dim)
    start = theta_star + radius * u / np.linalg.norm(u)
    drifts = []
    for eta in etas:
        cfg = FederatedConfig(H=H, T=1, eta=float(eta), sampling_mode="noiseless")
        drifts.append(float(run(fleet, cfg, "fedhsa", theta0=start, theta_star=theta_star).max_drift[1]))
    slope = float(np.polyfit(np.log(etas), np.log(drifts), 1)[0])
    return slope, drifts
