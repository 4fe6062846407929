"""FedHSA, Local SA and single-agent SA iterations.

Observation schedule shared by every scheme: the operator used at global
step ``k = t*H + l`` is evaluated at the observation obtained after ``k``
advances of the agent's process. FedHSA's correction anchor for round ``t``
is evaluated at that same observation (``l = 0``) during the previous round's
closing exchange, so both federated schemes consume exactly ``H`` advances per
agent per round and, given the same master seed, see the same noise.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import Diverged, DimensionMismatch, InvalidParam
from .numerics import as_vector
from .operators.agents import MODES, AgentOperator
from .operators.fleet import FleetEngine, ProblemFleet, measure_constants
from .rng import RngStream

DIVERGENCE_NORM = 1e12
ALGORITHMS = ("fedhsa", "local_sa")
SCHEDULES = ("constant", "corollary1")


def corollary1_eta(M: int, H: int, T: int, mu: float) -> float:
    """Horizon-dependent constant step ``4 ln(MHT) / (mu H T)``."""
    if min(M, H, T) < 1 or mu <= 0 or M * H * T < 3:
        raise InvalidParam(f"need M, H, T >= 1, MHT >= 3 and mu > 0 (got {M}, {H}, {T}, {mu})")
    return 4.0 * math.log(M * H * T) / (mu * H * T)


@dataclass
class FederatedConfig:
    H: int
    T: int
    eta: float
    alpha_g: float = 1.0
    sampling_mode: str = "markov"
    schedule: str = "constant"
    schedule_mu: float | None = None
    master_seed: int = 0
    M: int | None = None
    stationary_start: bool = True
    fresh_anchor: bool = False

    def __post_init__(self):
        if self.H < 1 or self.T < 1:
            raise InvalidParam(f"H and T must be >= 1 (got H={self.H}, T={self.T})")
        if self.alpha_g <= 0:
            raise InvalidParam("alpha_g must be positive")
        if self.sampling_mode not in MODES:
            raise InvalidParam(f"sampling_mode must be one of {MODES}")
        if self.schedule not in SCHEDULES:
            raise InvalidParam(f"schedule must be one of {SCHEDULES}")
        if self.schedule == "corollary1":
            if self.schedule_mu is None or self.schedule_mu <= 0:
                raise InvalidParam("the corollary1 schedule needs schedule_mu > 0")
        elif self.eta is None or self.eta < 0:
            raise InvalidParam("eta must be nonnegative")

    def local_step(self, M: int) -> float:
        if self.schedule == "corollary1":
            return corollary1_eta(M, self.H, self.T, self.schedule_mu)
        return float(self.eta)

    def effective_step(self, M: int) -> float:
        return self.H * self.local_step(M) * self.alpha_g

    def echo(self, M: int) -> dict:
        out = asdict(self)
        out["M"] = M
        out["eta_effective"] = self.local_step(M)
        out["alpha"] = self.effective_step(M)
        return out


@dataclass
class RoundState:
    theta_bar: np.ndarray
    round_index: int
    engine: FleetEngine
    own_ops: np.ndarray | None = None
    cached_global_op: np.ndarray | None = None
    max_drift: float = 0.0


@dataclass
class RunTrace:
    algorithm: str
    d: np.ndarray
    max_drift: np.ndarray
    theta_norm: np.ndarray
    samples: int
    advances_per_agent: int
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    theta_final: np.ndarray | None = None

    @property
    def T(self) -> int:
        return len(self.d) - 1

    @property
    def rounds(self) -> list[dict]:
        return [{"t": t, "d_t": float(self.d[t]), "max_drift": float(self.max_drift[t]),
                 "theta_bar_norm": float(self.theta_norm[t])} for t in range(len(self.d))]


def _mean_rows(x: np.ndarray) -> np.ndarray:
    """Row mean written as ``x[0] + mean(x - x[0])``; exact when all rows are equal."""
    return x[0] + np.add.reduce(x - x[0], axis=0) / x.shape[0]


def _aggregate(theta_bar: np.ndarray, thetas: np.ndarray, alpha_g: float) -> np.ndarray:
    delta_sum = np.add.reduce(thetas - theta_bar, axis=0)
    new = theta_bar + alpha_g * (delta_sum / thetas.shape[0])
    norm = float(np.linalg.norm(new))
    if not math.isfinite(norm) or norm > DIVERGENCE_NORM:
        raise Diverged(f"global iterate norm {norm:.3e} exceeds {DIVERGENCE_NORM:.0e}")
    return new


def _drift(thetas: np.ndarray, theta_bar: np.ndarray) -> float:
    return float(np.sqrt(np.max(np.sum((thetas - theta_bar) ** 2, axis=1))))


def init_state(fleet: ProblemFleet, config: FederatedConfig, theta0=None) -> RoundState:
    """Round-0 state: observation processes at their initial draws, anchor operators evaluated."""
    theta = np.zeros(fleet.dim) if theta0 is None else as_vector(theta0, "theta0").copy()
    if theta.shape[0] != fleet.dim:
        raise DimensionMismatch(f"theta0 has length {theta.shape[0]}, fleet expects {fleet.dim}")
    if config.M is not None and config.M != fleet.M:
        raise InvalidParam(f"config says M={config.M} but the fleet has {fleet.M} agents")
    engine = fleet.engine(config.sampling_mode, config.master_seed, config.stationary_start)
    state = RoundState(theta, 0, engine)
    if config.fresh_anchor:
        engine.advance(engine.uniforms(1)[0])
    state.own_ops = engine.peek(np.tile(theta, (fleet.M, 1)))
    state.cached_global_op = _mean_rows(state.own_ops)
    return state


def fedhsa_round(state: RoundState, fleet: ProblemFleet, config: FederatedConfig) -> RoundState:
    """One FedHSA round: H corrected local steps, server averaging, anchor exchange."""
    engine = state.engine
    M, H = fleet.M, config.H
    eta = config.local_step(M)
    theta_bar = state.theta_bar
    if theta_bar.shape[0] != fleet.dim:
        raise DimensionMismatch("state dimension differs from the fleet")
    correction = state.cached_global_op - state.own_ops
    thetas = np.tile(theta_bar, (M, 1))
    # fresh-anchor mode draws one extra observation per round for the anchor
    u = engine.uniforms(H + 1 if config.fresh_anchor else H)
    drift = 0.0
    for ell in range(H):
        if config.fresh_anchor:
            engine.advance(u[ell])
            g = engine.peek(thetas)
        elif ell == 0:
            g = state.own_ops
        else:
            engine.advance(u[ell - 1])
            g = engine.peek(thetas)
        thetas = thetas + eta * (g + correction)
        drift = max(drift, _drift(thetas, theta_bar))
    new_bar = _aggregate(theta_bar, thetas, config.alpha_g)
    engine.advance(u[-1])
    own = engine.peek(np.tile(new_bar, (M, 1)))
    return RoundState(new_bar, state.round_index + 1, engine, own, _mean_rows(own), drift)


def local_sa_round(state: RoundState, fleet: ProblemFleet, config: FederatedConfig) -> RoundState:
    """One Local SA round: H uncorrected local steps followed by plain averaging."""
    engine = state.engine
    M, H = fleet.M, config.H
    eta = config.local_step(M)
    theta_bar = state.theta_bar
    if theta_bar.shape[0] != fleet.dim:
        raise DimensionMismatch("state dimension differs from the fleet")
    thetas = np.tile(theta_bar, (M, 1))
    u = engine.uniforms(H)
    drift = 0.0
    for ell in range(H):
        if ell > 0:
            engine.advance(u[ell - 1])
        thetas = thetas + eta * engine.peek(thetas)
        drift = max(drift, _drift(thetas, theta_bar))
    new_bar = _aggregate(theta_bar, thetas, 1.0)
    engine.advance(u[-1])
    return RoundState(new_bar, state.round_index + 1, engine, None, None, drift)


ROUND_FUNCS = {"fedhsa": fedhsa_round, "local_sa": local_sa_round}


def run(fleet: ProblemFleet, config: FederatedConfig, algo: str = "fedhsa", theta0=None,
        theta_star=None) -> RunTrace:
    """Execute ``config.T`` rounds and record ``||theta_bar - theta_star||^2`` per round.

    Row 0 of the trace is the initial point; row ``t`` holds the iterate after
    round ``t`` and the largest local drift observed during that round.
    """
    if algo not in ROUND_FUNCS:
        raise InvalidParam(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    started = time.perf_counter()
    if theta_star is None:
        theta_star = measure_constants(fleet).theta_star
    theta_star = as_vector(theta_star, "theta_star")
    step = ROUND_FUNCS[algo]
    state = init_state(fleet, config, theta0)
    T = config.T
    d = np.empty(T + 1)
    drift = np.zeros(T + 1)
    norms = np.empty(T + 1)
    d[0] = float(np.sum((state.theta_bar - theta_star) ** 2))
    norms[0] = float(np.linalg.norm(state.theta_bar))
    for t in range(1, T + 1):
        state = step(state, fleet, config)
        d[t] = float(np.sum((state.theta_bar - theta_star) ** 2))
        drift[t] = state.max_drift
        norms[t] = float(np.linalg.norm(state.theta_bar))
    return RunTrace(
        algorithm=algo, d=d, max_drift=drift, theta_norm=norms,
        samples=fleet.M * config.H * T, advances_per_agent=state.engine.advances,
        config=dict(config.echo(fleet.M), algorithm=algo),
        wall_time=time.perf_counter() - started, theta_final=state.theta_bar.copy())


def single_agent_sa(operator: AgentOperator, theta0, steps: int, eta: float,
                    mode: str = "markov", rng: RngStream | None = None,
                    theta_star=None) -> RunTrace:
    """Plain SA ``theta <- theta + eta G(theta, o_t)`` with a constant step.

    The observation process is reset from ``rng`` and then stepped once per
    iteration. Errors are measured against ``theta_star`` (default: the
    operator's own root).
    """
    if steps < 1:
        raise InvalidParam("steps must be >= 1")
    started = time.perf_counter()
    theta = as_vector(theta0, "theta0").copy()
    if theta.shape[0] != operator.dim:
        raise DimensionMismatch("theta0 dimension differs from the operator")
    if theta_star is None:
        A, b = operator.linear_part()
        theta_star = np.linalg.solve(A, b)
    rng = rng if rng is not None else RngStream(0, 0, "single-agent")
    operator.reset(rng, mode)
    d = np.empty(steps + 1)
    norms = np.empty(steps + 1)
    d[0] = float(np.sum((theta - theta_star) ** 2))
    norms[0] = float(np.linalg.norm(theta))
    for k in range(1, steps + 1):
        theta = theta + eta * operator.peek_noisy(theta)
        if mode != "noiseless":
            operator.advance(rng)
        d[k] = float(np.sum((theta - theta_star) ** 2))
        norms[k] = float(np.linalg.norm(theta))
    return RunTrace(algorithm="single_agent", d=d, max_drift=np.zeros(steps + 1),
                    theta_norm=norms, samples=steps, advances_per_agent=steps,
                    config={"eta": eta, "steps": steps, "mode": mode},
                    wall_time=time.perf_counter() - started, theta_final=theta)
