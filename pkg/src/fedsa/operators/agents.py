"""Agent-local operators: the true operator and its noisy, observation-driven version.

Every family here is affine in the parameter. ``linear_part`` reports the
true operator as ``G_bar(theta) = A_bar @ theta - b_bar`` (A_bar Hurwitz for
valid instances), which is the sign convention used by the analysis code.

Observation handling follows one rule for all families: ``peek_noisy``
evaluates at the current observation, ``advance`` moves the observation
process one step, and ``noisy`` is ``advance`` followed by ``peek_noisy``.
"""
from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, InvalidParam, NotEnumerable
from ..markov import (FiniteMarkovChain, GaussMarkovProcess, inverse_cdf, sample_next,
                      validate_chain)
from ..numerics import as_matrix, as_vector, operator_norm, sym_eigen_range
from ..rng import RngStream

MODES = ("noiseless", "iid", "markov")


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise InvalidParam(f"unknown sampling mode {mode!r}; expected one of {MODES}")
    return mode


class AgentOperator:
    """Shared observation bookkeeping; subclasses supply the family maths."""

    family: str = ""
    mode: str = "markov"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _theta(self, theta) -> np.ndarray:
        th = as_vector(theta, "theta")
        if th.shape[0] != self.dim:
            raise DimensionMismatch(f"theta has length {th.shape[0]}, agent expects {self.dim}")
        return th

    def linear_part(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def expected(self, theta) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, theta, obs) -> np.ndarray:
        """``G_i(theta, obs)`` for an explicit observation."""
        raise NotImplementedError

    def draws_per_step(self, mode: str | None = None) -> int:
        raise NotImplementedError

    def reset(self, rng: RngStream | None = None, mode: str = "markov",
              stationary_start: bool = True) -> None:
        raise NotImplementedError

    def advance(self, rng: RngStream) -> None:
        raise NotImplementedError

    @property
    def observation(self):
        raise NotImplementedError

    def peek_noisy(self, theta) -> np.ndarray:
        if self.mode == "noiseless":
            return self.expected(theta)
        return self.evaluate(theta, self.observation)

    def noisy(self, theta, rng: RngStream) -> np.ndarray:
        if self.mode != "noiseless":
            self.advance(rng)
        return self.peek_noisy(theta)

    def observation_lipschitz(self) -> float:
        """Largest operator norm of the linear part of ``G_i(., o)`` over observations."""
        raise NotImplementedError

    def enumerate_observations(self):
        """Pairs ``(probability, observation)`` under the stationary law."""
        raise NotEnumerable(f"{type(self).__name__} has a continuous observation space")


class QuadraticAgent(AgentOperator):
    """Negative gradient of ``0.5 t'At - b't + c`` plus additive Gauss-Markov noise."""

    family = "quadratic"

    def __init__(self, A, b, c: float = 0.0, noise: GaussMarkovProcess | None = None):
        self.A = as_matrix(A, "A", square=True)
        self.b = as_vector(b, "b")
        if self.b.shape[0] != self.A.shape[0]:
            raise DimensionMismatch("A and b disagree in dimension")
        self.c = float(c)
        d = self.A.shape[0]
        self.noise = noise if noise is not None else GaussMarkovProcess(np.zeros((d, d)), 0.0)
        if self.noise.dim != d:
            raise DimensionMismatch("noise process dimension differs from A")
        lo, _ = sym_eigen_range(0.5 * (self.A + self.A.T))
        if lo <= 0:
            raise InvalidParam(f"A is not positive definite (lambda_min = {lo:.3e})")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def linear_part(self):
        return -self.A, -self.b

    def local_root(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)

    def expected(self, theta) -> np.ndarray:
        th = self._theta(theta)
        return self.b - self.A @ th

    def evaluate(self, theta, obs) -> np.ndarray:
        return self.expected(theta) + obs

    def draws_per_step(self, mode=None):
        mode = mode or self.mode
        return 0 if mode == "noiseless" else 2 * ((self.dim + 1) // 2)

    def reset(self, rng=None, mode="markov", stationary_start=True):
        self.mode = _check_mode(mode)
        self.noise = self.noise.copy()
        if mode != "noiseless" and stationary_start and rng is not None:
            self.noise.z = self.noise.stationary_factor @ rng.normals(self.dim)
        else:
            self.noise.z = np.zeros(self.dim)

    def advance(self, rng):
        nrm = rng.normals(self.dim)
        if self.mode == "iid":
            self.noise.z = self.noise.stationary_factor @ nrm
        else:
            self.noise.z = self.noise.Q @ self.noise.z + self.noise.sigma_eps * nrm

    @property
    def observation(self):
        return self.noise.z

    def observation_lipschitz(self):
        return operator_norm(self.A)


class MrpAgent(AgentOperator):
    """TD(0) semi-gradient with linear features on a fixed-policy Markov reward process.

    The observation is the last transition ``(s, s_next)``; ``current_state`` is
    ``s_next``. Rewards are deterministic per departing state.
    """

    family = "mrp"

    def __init__(self, chain, reward, gamma: float, Phi):
        self.chain = chain if isinstance(chain, FiniteMarkovChain) else validate_chain(chain)
        self.reward = as_vector(reward, "reward")
        self.gamma = float(gamma)
        self.Phi = as_matrix(Phi, "Phi")
        S = self.chain.num_states
        if self.reward.shape[0] != S or self.Phi.shape[0] != S:
            raise DimensionMismatch("reward/Phi rows must match the number of states")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidParam(f"gamma must lie in (0, 1), got {gamma}")
        lo, _ = sym_eigen_range(self.Phi.T @ self.Phi)
        if lo <= 1e-10:
            raise InvalidParam("feature matrix columns are not linearly independent")
        self.pi = np.asarray(self.chain.stationary)
        self.last_transition = (0, 0)

    @property
    def dim(self) -> int:
        return self.Phi.shape[1]

    @property
    def current_state(self) -> int:
        return self.last_transition[1]

    def linear_part(self):
        D = np.diag(self.pi)
        P = self.chain.transition
        A = self.Phi.T @ D @ (self.gamma * P - np.eye(P.shape[0])) @ self.Phi
        b = -(self.Phi.T @ D @ self.reward)
        return A, b

    def expected(self, theta) -> np.ndarray:
        th = self._theta(theta)
        v = self.Phi @ th
        bellman = self.reward + self.gamma * (self.chain.transition @ v)
        return self.Phi.T @ (self.pi * (bellman - v))

    def evaluate(self, theta, obs) -> np.ndarray:
        th = self._theta(theta)
        s, s_next = obs
        phi = self.Phi[s]
        td = self.reward[s] + self.gamma * (self.Phi[s_next] @ th) - phi @ th
        return td * phi

    def draws_per_step(self, mode=None):
        mode = mode or self.mode
        return {"noiseless": 0, "iid": 2, "markov": 1}[mode]

    def reset(self, rng=None, mode="markov", stationary_start=True):
        self.mode = _check_mode(mode)
        if rng is None:
            self.last_transition = (0, 0)
            return
        s = inverse_cdf(np.cumsum(self.pi), rng.uniform()) if stationary_start else 0
        self.last_transition = (s, sample_next(self.chain, s, rng))

    def advance(self, rng):
        if self.mode == "iid":
            s = inverse_cdf(np.cumsum(self.pi), rng.uniform())
        else:
            s = self.current_state
        self.last_transition = (s, sample_next(self.chain, s, rng))

    @property
    def observation(self):
        return self.last_transition

    def observation_lipschitz(self):
        P = self.chain.transition
        best = 0.0
        for s in range(P.shape[0]):
            phi = self.Phi[s]
            for s2 in np.flatnonzero(P[s] > 0):
                # rank-one linear part phi (gamma phi' - phi)^T
                best = max(best, float(np.linalg.norm(phi)
                                       * np.linalg.norm(self.gamma * self.Phi[s2] - phi)))
        return best

    def enumerate_observations(self):
        P = self.chain.transition
        return [(self.pi[s] * P[s, s2], (s, int(s2)))
                for s in range(P.shape[0]) for s2 in np.flatnonzero(P[s] > 0)]


class FiniteSumAgent(AgentOperator):
    """Average of N quadratics; the observation is the component index drawn by a chain."""

    family = "finitesum"

    def __init__(self, A, b, c=None, index_chain=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.ndim != 3 or self.A.shape[1] != self.A.shape[2]:
            raise DimensionMismatch("components A must have shape (N, d, d)")
        N, d, _ = self.A.shape
        if self.b.shape != (N, d):
            raise DimensionMismatch("components b must have shape (N, d)")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise InvalidParam("non-finite component data")
        self.c = np.zeros(N) if c is None else as_vector(c, "c")
        if index_chain is None:
            index_chain = np.full((N, N), 1.0 / N)
        self.index_chain = (index_chain if isinstance(index_chain, FiniteMarkovChain)
                            else validate_chain(index_chain))
        if self.index_chain.num_states != N:
            raise DimensionMismatch("index chain size differs from the number of components")
        for j in range(N):
            lo, _ = sym_eigen_range(0.5 * (self.A[j] + self.A[j].T))
            if lo <= 0:
                raise InvalidParam(f"component {j} is not positive definite")
        self.pi = np.asarray(self.index_chain.stationary)
        self.current_index = 0

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_components(self) -> int:
        return self.A.shape[0]

    def linear_part(self):
        return -self.A.mean(axis=0), -self.b.mean(axis=0)

    def expected(self, theta) -> np.ndarray:
        th = self._theta(theta)
        return np.mean(self.b - self.A @ th, axis=0)

    def evaluate(self, theta, obs) -> np.ndarray:
        th = self._theta(theta)
        return self.b[obs] - self.A[obs] @ th

    def draws_per_step(self, mode=None):
        mode = mode or self.mode
        return 0 if mode == "noiseless" else 1

    def reset(self, rng=None, mode="markov", stationary_start=True):
        self.mode = _check_mode(mode)
        if rng is None or not stationary_start:
            self.current_index = 0
        else:
            self.current_index = inverse_cdf(np.cumsum(self.pi), rng.uniform())

    def advance(self, rng):
        if self.mode == "iid":
            self.current_index = inverse_cdf(np.cumsum(self.pi), rng.uniform())
        else:
            self.current_index = sample_next(self.index_chain, self.current_index, rng)

    @property
    def observation(self):
        return self.current_index

    def observation_lipschitz(self):
        return max(operator_norm(a) for a in self.A)

    def enumerate_observations(self):
        return [(self.pi[j], j) for j in range(self.num_components)]


def quadratic_expected(agent: QuadraticAgent, theta) -> np.ndarray:
    return agent.expected(theta)


def quadratic_noisy(agent: QuadraticAgent, theta, rng: RngStream) -> np.ndarray:
    return agent.noisy(theta, rng)


def mrp_expected(agent: MrpAgent, theta) -> np.ndarray:
    return agent.expected(theta)


def mrp_noisy(agent: MrpAgent, theta, rng: RngStream) -> np.ndarray:
    return agent.noisy(theta, rng)


def finitesum_noisy(agent: FiniteSumAgent, theta, rng: RngStream) -> np.ndarray:
    return agent.noisy(theta, rng)
