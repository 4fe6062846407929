"""Fleets of agents, measured problem constants, and vectorised observation engines."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, InvalidParam, NotStronglyMonotone
from ..numerics import as_vector, operator_norm, solve_linear, sym_eigen_range
from ..rng import RngStream, box_muller
from ..markov import inverse_cdf_rows
from .agents import MODES, AgentOperator, FiniteSumAgent, MrpAgent, QuadraticAgent

FAMILIES = {"quadratic": QuadraticAgent, "mrp": MrpAgent, "finitesum": FiniteSumAgent}


class ProblemFleet:
    """``M`` agents of a single family sharing the parameter dimension."""

    def __init__(self, agents: list[AgentOperator], family: str | None = None,
                 seed: int | None = None, generator_params: dict | None = None):
        if not agents:
            raise InvalidParam("a fleet needs at least one agent")
        family = family or agents[0].family
        if any(a.family != family for a in agents):
            raise InvalidParam("all agents of a fleet must belong to one family")
        d = agents[0].dim
        if any(a.dim != d for a in agents):
            raise DimensionMismatch("agents disagree on the parameter dimension")
        self.agents = list(agents)
        self.family = family
        self.dim = d
        self.seed = seed
        self.generator_params = dict(generator_params or {})

    def __len__(self) -> int:
        return len(self.agents)

    def __repr__(self) -> str:
        return f"ProblemFleet(family={self.family!r}, M={len(self)}, d={self.dim})"

    @property
    def M(self) -> int:
        return len(self.agents)

    def prefix(self, m: int) -> "ProblemFleet":
        params = dict(self.generator_params, M=m) if self.generator_params else None
        return ProblemFleet(self.agents[:m], self.family, self.seed, params)

    def clone(self) -> "ProblemFleet":
        """Copy with independent observation state; problem data arrays are shared."""
        return ProblemFleet([copy.copy(a) for a in self.agents], self.family, self.seed,
                            self.generator_params)

    def linear_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked ``(A_bar_i, b_bar_i)`` with ``G_bar_i(t) = A_bar_i t - b_bar_i``."""
        parts = [a.linear_part() for a in self.agents]
        return np.stack([p[0] for p in parts]), np.stack([p[1] for p in parts])

    def engine(self, mode: str, master_seed: int, stationary_start: bool = True) -> "FleetEngine":
        if mode not in MODES:
            raise InvalidParam(f"unknown sampling mode {mode!r}")
        if mode == "noiseless":
            return NoiselessEngine(self)
        cls = {"quadratic": QuadraticEngine, "mrp": MrpEngine, "finitesum": FiniteSumEngine}
        return cls[self.family](self, mode, master_seed, stationary_start)


def fleet_expected(fleet: ProblemFleet, theta) -> np.ndarray:
    """Mean of the agents' true operators, summed in ascending agent order."""
    th = as_vector(theta, "theta")
    if th.shape[0] != fleet.dim:
        raise DimensionMismatch(f"theta has length {th.shape[0]}, fleet expects {fleet.dim}")
    total = np.zeros(fleet.dim)
    for agent in fleet.agents:
        total = total + agent.expected(th)
    return total / fleet.M


@dataclass(frozen=True)
class ProblemConstants:
    L_hat: float
    mu_hat: float
    sigma_hat: float
    theta_star: np.ndarray
    A_bar: np.ndarray
    b_bar: np.ndarray


def _noise_scale(agent: AgentOperator, theta_star: np.ndarray) -> float:
    if isinstance(agent, QuadraticAgent):
        return math.sqrt(max(float(np.trace(agent.noise.stationary_covariance)), 0.0))
    g_bar = agent.expected(theta_star)
    spread = max(float(np.linalg.norm(agent.evaluate(theta_star, o) - g_bar))
                 for _, o in agent.enumerate_observations())
    if isinstance(agent, MrpAgent):
        spread = max(spread, float(np.max(np.abs(agent.reward))))
    return spread


def measure_constants(fleet: ProblemFleet) -> ProblemConstants:
    """Root and Lipschitz / monotonicity / noise constants of an affine fleet."""
    A_i, b_i = fleet.linear_parts()
    A_bar = A_i.mean(axis=0)
    b_bar = b_i.mean(axis=0)
    mu_hat = sym_eigen_range(-0.5 * (A_bar + A_bar.T))[0]
    if mu_hat <= 0:
        raise NotStronglyMonotone(f"symmetric part of the mean operator has lambda_min {-mu_hat:.3e}")
    theta_star = solve_linear(A_bar, b_bar)
    L_hat = max(max(operator_norm(a) for a in A_i),
                max(a.observation_lipschitz() for a in fleet.agents))
    sigma_hat = max(_noise_scale(a, theta_star) for a in fleet.agents)
    return ProblemConstants(L_hat=L_hat, mu_hat=mu_hat, sigma_hat=sigma_hat,
                            theta_star=theta_star, A_bar=A_bar, b_bar=b_bar)


class FleetEngine:
    """Observation state of every agent, stepped together.

    ``peek(thetas)`` returns ``G_i(thetas[i], o_i)`` for the current
    observations; ``advance(u)`` moves every agent one step using the
    uniforms ``u[i]`` (``draws_per_step`` of them per agent). Agent ``i``
    consumes exactly the same uniforms as ``AgentOperator.noisy`` would from
    the same stream, so both paths produce the same observation sequence.
    """

    draws_per_step = 0

    def __init__(self, fleet: ProblemFleet, mode: str = "noiseless", master_seed: int = 0,
                 stationary_start: bool = True):
        self.fleet = fleet
        self.mode = mode
        self.M = fleet.M
        self.dim = fleet.dim
        self.rows = np.arange(self.M)
        self.streams = [RngStream(master_seed, i, "obs") for i in range(self.M)]
        self.init_streams = [RngStream(master_seed, i, "obs-init") for i in range(self.M)]
        self.stationary_start = stationary_start
        self.advances = 0

    def uniforms(self, steps: int) -> np.ndarray:
        """Per-agent uniforms for ``steps`` advances, shape ``(steps, M, k)``."""
        k = self.draws_per_step
        if k == 0:
            return np.zeros((steps, self.M, 0))
        block = np.stack([s.uniforms(steps * k) for s in self.streams])
        return block.reshape(self.M, steps, k).transpose(1, 0, 2)

    def peek(self, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def advance(self, u: np.ndarray) -> None:
        self.advances += 1


class NoiselessEngine(FleetEngine):
    def __init__(self, fleet: ProblemFleet):
        super().__init__(fleet, "noiseless", 0, True)
        self.A, self.b = fleet.linear_parts()

    def peek(self, thetas):
        return np.matmul(self.A, thetas[:, :, None])[:, :, 0] - self.b


class QuadraticEngine(FleetEngine):
    def __init__(self, fleet, mode, master_seed, stationary_start=True):
        super().__init__(fleet, mode, master_seed, stationary_start)
        ags = fleet.agents
        d = self.dim
        self.A = np.stack([a.A for a in ags])
        self.b = np.stack([a.b for a in ags])
        self.Q = np.stack([a.noise.Q for a in ags])
        self.sig = np.array([a.noise.sigma_eps for a in ags])
        self.factor = np.stack([a.noise.stationary_factor for a in ags])
        self.draws_per_step = 2 * ((d + 1) // 2)
        if stationary_start:
            nrm = np.stack([s.normals(d) for s in self.init_streams])
            self.z = np.matmul(self.factor, nrm[:, :, None])[:, :, 0]
        else:
            self.z = np.zeros((self.M, d))

    def peek(self, thetas):
        return (self.b - np.matmul(self.A, thetas[:, :, None])[:, :, 0]) + self.z

    def advance(self, u):
        super().advance(u)
        nrm = box_muller(u)[:, :self.dim]
        if self.mode == "iid":
            self.z = np.matmul(self.factor, nrm[:, :, None])[:, :, 0]
        else:
            self.z = np.matmul(self.Q, self.z[:, :, None])[:, :, 0] + self.sig[:, None] * nrm


def _pi_cumulative(pis: np.ndarray) -> np.ndarray:
    return np.cumsum(pis, axis=1)


class MrpEngine(FleetEngine):
    def __init__(self, fleet, mode, master_seed, stationary_start=True):
        super().__init__(fleet, mode, master_seed, stationary_start)
        ags = fleet.agents
        self.Phi = np.stack([a.Phi for a in ags])
        self.reward = np.stack([a.reward for a in ags])
        self.gamma = np.array([a.gamma for a in ags])
        self.cum = np.stack([a.chain.cumulative for a in ags])
        self.pi_cum = _pi_cumulative(np.stack([a.pi for a in ags]))
        self.draws_per_step = 2 if mode == "iid" else 1
        if stationary_start:
            u0 = np.array([st.uniform() for st in self.init_streams])
            s = inverse_cdf_rows(self.pi_cum, u0)
        else:
            s = np.zeros(self.M, dtype=int)
        u1 = np.array([st.uniform() for st in self.init_streams])
        self.s_prev = s
        self.s = inverse_cdf_rows(self.cum[self.rows, s], u1)

    def peek(self, thetas):
        phi = self.Phi[self.rows, self.s_prev]
        phi_next = self.Phi[self.rows, self.s]
        td = (self.reward[self.rows, self.s_prev]
              + self.gamma * np.einsum("md,md->m", phi_next, thetas)
              - np.einsum("md,md->m", phi, thetas))
        return td[:, None] * phi

    def advance(self, u):
        super().advance(u)
        if self.mode == "iid":
            start = inverse_cdf_rows(self.pi_cum, u[:, 0])
            self.s_prev = start
            self.s = inverse_cdf_rows(self.cum[self.rows, start], u[:, 1])
        else:
            self.s_prev = self.s
            self.s = inverse_cdf_rows(self.cum[self.rows, self.s], u[:, 0])


class FiniteSumEngine(FleetEngine):
    def __init__(self, fleet, mode, master_seed, stationary_start=True):
        super().__init__(fleet, mode, master_seed, stationary_start)
        ags = fleet.agents
        if len({a.num_components for a in ags}) != 1:
            raise InvalidParam("all finite-sum agents must have the same number of components")
        self.A = np.stack([a.A for a in ags])
        self.b = np.stack([a.b for a in ags])
        self.cum = np.stack([a.index_chain.cumulative for a in ags])
        self.pi_cum = _pi_cumulative(np.stack([a.pi for a in ags]))
        self.draws_per_step = 1
        if stationary_start:
            u0 = np.array([s.uniform() for s in self.init_streams])
            self.j = inverse_cdf_rows(self.pi_cum, u0)
        else:
            self.j = np.zeros(self.M, dtype=int)

    def peek(self, thetas):
        A = self.A[self.rows, self.j]
        return self.b[self.rows, self.j] - np.matmul(A, thetas[:, :, None])[:, :, 0]

    def advance(self, u):
        super().advance(u)
        if self.mode == "iid":
            self.j = inverse_cdf_rows(self.pi_cum, u[:, 0])
        else:
            self.j = inverse_cdf_rows(self.cum[self.rows, self.j], u[:, 0])
