"""Seeded problem generators for the three families.

Shared "base" data comes from stream ``(seed, -1, ...)``; agent ``i`` draws its
own data from stream ``(seed, i, ...)``. A fleet of ``m`` agents is therefore
exactly the first ``m`` agents of any larger fleet with the same seed.

``hetero`` controls how far agents depart from the base instance. For the
quadratic and finite-sum families it scales the displacement of the local
roots; in every family, agent-specific matrices, kernels and rewards are
blended with the base ones using weight ``min(hetero, 1)``, so ``hetero = 0``
yields identical agents.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidParam
from ..markov import GaussMarkovProcess, validate_chain
from ..numerics import sym_eigen_range
from ..rng import RngStream
from .agents import FiniteSumAgent, MrpAgent, QuadraticAgent
from .fleet import ProblemFleet

MRP_UNIFORM_MIX = 0.1
INDEX_UNIFORM_MIX = 0.1
MAX_REDRAWS = 100


def _gen(seed: int, agent: int, tag: str) -> np.random.Generator:
    return RngStream(seed, agent, tag).generator


def random_orthogonal(g: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(g.standard_normal((d, d)))
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def random_spd(g: np.random.Generator, d: int, cond: float) -> np.ndarray:
    """``R' diag(lam) R`` with eigenvalues log-uniform in ``[1/cond, 1]``."""
    R = random_orthogonal(g, d)
    lam = np.exp(g.uniform(-np.log(cond), 0.0, size=d))
    A = R.T @ (lam[:, None] * R)
    return 0.5 * (A + A.T)


def _blend(base, own, w: float):
    if w == 0.0:
        return base
    if w == 1.0:
        return own
    return (1.0 - w) * base + w * own


def _direction(seed: int, i: int, d: int) -> np.ndarray:
    """Unit direction of agent ``i``; agents ``2k`` and ``2k+1`` point in opposite directions."""
    g = _gen(seed, 2 * (i // 2), "gen:direction")
    u = g.standard_normal(d)
    u /= np.linalg.norm(u)
    return u if i % 2 == 0 else -u


def _check_common(M: int, d: int, hetero: float) -> float:
    if M < 1 or d < 1:
        raise InvalidParam(f"need M >= 1 and d >= 1, got M={M}, d={d}")
    if hetero < 0:
        raise InvalidParam(f"hetero must be nonnegative, got {hetero}")
    return min(float(hetero), 1.0)


def gen_quadratic_fleet(M: int, d: int, hetero: float, cond: float, noise_cfg: dict | None,
                        seed: int) -> ProblemFleet:
    """Quadratic fleet with Gauss-Markov additive noise.

    ``noise_cfg`` keys: ``sigma_eps`` (innovation std-dev, default 0) and ``q``
    (scale of the orthogonal AR matrix, default 0.5).
    """
    w = _check_common(M, d, hetero)
    if cond < 1:
        raise InvalidParam(f"cond must be >= 1, got {cond}")
    noise_cfg = dict(noise_cfg or {})
    sigma_eps = float(noise_cfg.get("sigma_eps", 0.0))
    q = float(noise_cfg.get("q", 0.5))
    if not 0.0 <= q < 1.0 or sigma_eps < 0:
        raise InvalidParam("noise needs 0 <= q < 1 and sigma_eps >= 0")
    base = _gen(seed, -1, "gen:base")
    theta_base = base.standard_normal(d)
    A_base = random_spd(base, d, cond)
    agents = []
    for i in range(M):
        g = _gen(seed, i, "gen:agent")
        A = _blend(A_base, random_spd(g, d, cond), w)
        root = theta_base + hetero * _direction(seed, i, d)
        Q = q * random_orthogonal(g, d)
        agents.append(QuadraticAgent(A, A @ root, float(g.standard_normal()),
                                     GaussMarkovProcess(Q, sigma_eps)))
    params = {"M": M, "d": d, "hetero": hetero, "cond": cond,
              "noise": {"sigma_eps": sigma_eps, "q": q}}
    return ProblemFleet(agents, "quadratic", seed, params)


def random_row_stochastic(g: np.random.Generator, S: int) -> np.ndarray:
    K = g.uniform(size=(S, S))
    return K / K.sum(axis=1, keepdims=True)


def _normalise_rows(P: np.ndarray) -> np.ndarray:
    return P / P.sum(axis=1, keepdims=True)


def _orthonormal_columns(X: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(X)
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def gen_mrp_fleet(M: int, S: int, d: int, gamma_range=(0.5, 0.9), hetero: float = 1.0,
                  seed: int = 0) -> ProblemFleet:
    w = _check_common(M, d, hetero)
    if not S > d:
        raise InvalidParam(f"need S > d, got S={S}, d={d}")
    lo, hi = (float(x) for x in gamma_range)
    if not 0.0 < lo <= hi < 1.0:
        raise InvalidParam(f"gamma_range must satisfy 0 < lo <= hi < 1, got {gamma_range}")
    base = _gen(seed, -1, "gen:base")
    K_base = random_row_stochastic(base, S)
    r_base = base.uniform(size=S)
    Phi_base = base.standard_normal((S, d))
    u_base = base.uniform()
    agents = []
    for i in range(M):
        for attempt in range(MAX_REDRAWS):
            g = _gen(seed, i, f"gen:agent:{attempt}")
            K = _blend(K_base, random_row_stochastic(g, S), w)
            P = _normalise_rows((1.0 - MRP_UNIFORM_MIX) * K + MRP_UNIFORM_MIX / S)
            reward = _blend(r_base, g.uniform(size=S), w)
            Phi = _orthonormal_columns(_blend(Phi_base, g.standard_normal((S, d)), w))
            gamma = lo + (hi - lo) * _blend(u_base, g.uniform(), w)
            agent = MrpAgent(validate_chain(P), reward, gamma, Phi)
            A, _ = agent.linear_part()
            if sym_eigen_range(0.5 * (A + A.T))[1] < 0:
                break
        else:
            raise InvalidParam(f"agent {i}: no negative-definite TD instance in {MAX_REDRAWS} draws")
        agents.append(agent)
    params = {"M": M, "S": S, "d": d, "gamma_range": [lo, hi], "hetero": hetero}
    return ProblemFleet(agents, "mrp", seed, params)


def symmetric_doubly_stochastic(g: np.random.Generator, N: int, n_perm: int = 3) -> np.ndarray:
    """Mixture of symmetrised permutation matrices and the uniform kernel."""
    if N == 1:
        return np.ones((1, 1))
    P = np.zeros((N, N))
    for _ in range(n_perm):
        pm = np.eye(N)[g.permutation(N)]
        P += 0.5 * (pm + pm.T)
    return (1.0 - INDEX_UNIFORM_MIX) * P / n_perm + INDEX_UNIFORM_MIX / N


def gen_finitesum_fleet(M: int, N: int, d: int, hetero: float, seed: int, cond: float = 10.0,
                        spread: float = 1.0) -> ProblemFleet:
    """Finite-sum fleet; ``spread`` scales how far component roots sit from the agent root."""
    w = _check_common(M, d, hetero)
    if N < 1:
        raise InvalidParam(f"need N >= 1, got {N}")
    base = _gen(seed, -1, "gen:base")
    theta_base = base.standard_normal(d)
    A_base = [random_spd(base, d, cond) for _ in range(N)]
    off_base = base.standard_normal((N, d))
    chain_base = symmetric_doubly_stochastic(base, N)
    agents = []
    for i in range(M):
        g = _gen(seed, i, "gen:agent")
        root = theta_base + hetero * _direction(seed, i, d)
        A = np.stack([_blend(A_base[j], random_spd(g, d, cond), w) for j in range(N)])
        offsets = _blend(off_base, g.standard_normal((N, d)), w)
        b = np.einsum("nij,nj->ni", A, root + spread * offsets)
        chain = _blend(chain_base, symmetric_doubly_stochastic(g, N), w)
        agents.append(FiniteSumAgent(A, b, g.standard_normal(N), validate_chain(chain)))
    params = {"M": M, "N": N, "d": d, "hetero": hetero, "cond": cond, "spread": spread}
    return ProblemFleet(agents, "finitesum", seed, params)


def generate(params: dict) -> ProblemFleet:
    """Dispatch on ``params['family']``; used by the harness and instance files."""
    p = dict(params)
    family = p.pop("family", None)
    seed = int(p.pop("seed", 0))
    if family == "quadratic":
        return gen_quadratic_fleet(int(p["M"]), int(p["d"]), float(p.get("hetero", 1.0)),
                                   float(p.get("cond", 10.0)), p.get("noise"), seed)
    if family == "mrp":
        return gen_mrp_fleet(int(p["M"]), int(p["S"]), int(p["d"]),
                             tuple(p.get("gamma_range", (0.5, 0.9))),
                             float(p.get("hetero", 1.0)), seed)
    if family == "finitesum":
        return gen_finitesum_fleet(int(p["M"]), int(p.get("N", 2)), int(p["d"]),
                                   float(p.get("hetero", 1.0)), seed,
                                   float(p.get("cond", 10.0)), float(p.get("spread", 1.0)))
    raise InvalidParam(f"unknown problem family {family!r}")
