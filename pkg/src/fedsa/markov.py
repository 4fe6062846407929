"""Observation processes: finite ergodic chains and Gauss-Markov AR(1) noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import (DidNotMix, InvalidParam, LengthMismatch, NotStochastic, Periodic,
                     Reducible, StateOutOfRange)
from .numerics import as_matrix, as_vector, solve_linear, spectral_radius
from .rng import RngStream

ROW_SUM_TOL = 1e-12
TV_FIT_FLOOR = 1e-13


def _bool_square(b: np.ndarray) -> np.ndarray:
    return (b.astype(np.float64) @ b.astype(np.float64)) > 0


def _power_positive(b: np.ndarray, power: int) -> np.ndarray:
    """Sparsity pattern of ``B^(2^k)`` for the first ``2^k >= power``."""
    k = 1
    while k < power:
        b = _bool_square(b)
        k *= 2
    return b


class FiniteMarkovChain:
    """Validated irreducible, aperiodic chain with a row-stochastic kernel."""

    def __init__(self, transition):
        P = as_matrix(transition, "transition", square=True)
        S = P.shape[0]
        if S < 1:
            raise InvalidParam("a chain needs at least one state")
        if np.any(P < 0):
            raise NotStochastic("transition matrix has negative entries")
        worst = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
        if worst > ROW_SUM_TOL:
            raise NotStochastic(f"row sums deviate from 1 by {worst:.3e}")
        pattern = P > 0
        # reachability closure: (I + B)^(S-1) > 0 everywhere
        if not np.all(_power_positive(pattern | np.eye(S, dtype=bool), S - 1)):
            raise Reducible("some state cannot reach another")
        # Wielandt: primitive iff B^((S-1)^2 + 1) > 0
        if not np.all(_power_positive(pattern, (S - 1) ** 2 + 1)):
            raise Periodic("chain is irreducible but periodic")
        P = P.copy()
        P.setflags(write=False)
        self.transition = P
        self.num_states = S

    def __repr__(self) -> str:
        return f"FiniteMarkovChain(num_states={self.num_states})"

    @cached_property
    def cumulative(self) -> np.ndarray:
        c = np.cumsum(self.transition, axis=1)
        c[:, -1] = 1.0
        return c

    @cached_property
    def stationary(self) -> "StationaryDistribution":
        return stationary_distribution(self)


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probabilities, dtype=dtype)


@dataclass(frozen=True)
class MixingReport:
    epsilon: float
    tau: int
    rho_hat: float
    worst_tv_by_step: list[tuple[int, float]] = field(default_factory=list)


def validate_chain(P) -> FiniteMarkovChain:
    return FiniteMarkovChain(P)


def stationary_distribution(chain: FiniteMarkovChain) -> StationaryDistribution:
    """Solve ``(P^T - I) pi = 0`` with the last equation replaced by ``sum(pi) = 1``."""
    P = chain.transition
    S = chain.num_states
    system = P.T - np.eye(S)
    system[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    pi = solve_linear(system, rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    pi.setflags(write=False)
    return StationaryDistribution(pi)


def tv_distance(p, q) -> float:
    p = as_vector(p, "p")
    q = as_vector(q, "q")
    if p.shape != q.shape:
        raise LengthMismatch(f"distributions have lengths {p.shape[0]} and {q.shape[0]}")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise InvalidParam(f"{name} does not sum to 1")
    return 0.5 * float(np.abs(p - q).sum())


def _worst_tv(dist_rows: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.max(np.abs(dist_rows - pi).sum(axis=1)))


def mixing_time(chain: FiniteMarkovChain, epsilon: float) -> MixingReport:
    """Smallest ``t`` whose worst-start total-variation distance is within ``epsilon``.

    ``rho_hat`` is a least-squares geometric rate fitted to the log worst-case
    distances above 1e-13; it is 0.0 when the chain mixes exactly in fewer
    than two observable steps.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidParam(f"epsilon must lie in (0, 1), got {epsilon}")
    pi = np.asarray(chain.stationary)
    S = chain.num_states
    limit = 10 * S * S
    rows = np.eye(S)
    history: list[tuple[int, float]] = []
    tau = None
    t = 0
    while True:
        tv = _worst_tv(rows, pi)
        history.append((t, tv))
        if tau is None and tv <= epsilon:
            tau = t
        fit_pts = [h for h in history if h[1] > TV_FIT_FLOOR]
        if tau is not None and (len(fit_pts) >= 2 or tv <= TV_FIT_FLOOR or t >= tau + 3):
            break
        if tau is None and t >= limit:
            raise DidNotMix(f"worst-case TV still {tv:.3e} > {epsilon} after {t} steps")
        rows = rows @ chain.transition
        t += 1
    fit_pts = [h for h in history if h[1] > TV_FIT_FLOOR]
    if len(fit_pts) >= 2:
        ts = np.array([h[0] for h in fit_pts], dtype=float)
        logs = np.log([h[1] for h in fit_pts])
        slope = np.polyfit(ts, logs, 1)[0]
        rho_hat = float(min(math.exp(slope), 1.0))
    else:
        rho_hat = 0.0
    return MixingReport(epsilon=epsilon, tau=int(tau), rho_hat=rho_hat, worst_tv_by_step=history)


def sample_next(chain: FiniteMarkovChain, state: int, rng: RngStream) -> int:
    """Inverse-CDF draw of the successor of ``state``; consumes one uniform."""
    if not 0 <= state < chain.num_states:
        raise StateOutOfRange(f"state {state} outside [0, {chain.num_states})")
    return inverse_cdf(chain.cumulative[state], rng.uniform())


def inverse_cdf(cum_row: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cum_row, u, side="right")), cum_row.shape[0] - 1)


def inverse_cdf_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised inverse CDF: one draw per row of ``cum_rows``."""
    idx = (u[:, None] >= cum_rows).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


class GaussMarkovProcess:
    """AR(1) vector noise ``z <- Q z + eps`` with ``eps ~ N(0, sigma_eps^2 I)``."""

    def __init__(self, Q, sigma_eps: float, z=None):
        Q = as_matrix(Q, "Q", square=True)
        if sigma_eps < 0:
            raise InvalidParam("sigma_eps must be nonnegative")
        radius = spectral_radius(Q)
        if radius >= 1.0 - 1e-6:
            raise InvalidParam(f"Q is not Schur-stable (spectral radius {radius:.6f})")
        self.Q = Q
        self.sigma_eps = float(sigma_eps)
        self.spectral_radius = radius
        d = Q.shape[0]
        self.z = np.zeros(d) if z is None else as_vector(z, "z").copy()

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @cached_property
    def stationary_covariance(self) -> np.ndarray:
        """Solution of ``S = Q S Q^T + sigma_eps^2 I``."""
        sigma2 = self.sigma_eps ** 2
        return scipy.linalg.solve_discrete_lyapunov(self.Q, sigma2 * np.eye(self.dim))

    @cached_property
    def stationary_factor(self) -> np.ndarray:
        cov = self.stationary_covariance
        if not np.any(cov):
            return np.zeros_like(cov)
        return np.linalg.cholesky(0.5 * (cov + cov.T))

    def copy(self) -> "GaussMarkovProcess":
        return GaussMarkovProcess(self.Q, self.sigma_eps, self.z)


def gm_step(proc: GaussMarkovProcess, rng: RngStream) -> np.ndarray:
    proc.z = proc.Q @ proc.z + proc.sigma_eps * rng.normals(proc.dim)
    return proc.z
