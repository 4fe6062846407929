"""Small dense linear algebra: pivoted solves and spectral estimates.

Vectors and matrices are plain ``numpy`` float64 arrays. Every function is
pure; inputs are never modified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidInput, NotSymmetric, SingularMatrix


@dataclass(frozen=True)
class NumericSettings:
    """Tolerances used across the numerics module."""

    pivot_rel_tol: float = 1e-14
    symmetry_tol: float = 1e-10
    gelfand_tol: float = 1e-8
    gelfand_max_k: int = 60


SETTINGS = NumericSettings()


@dataclass(frozen=True)
class SpectrumReport:
    spectral_radius_estimate: float
    lambda_min_sym: float
    lambda_max_sym: float


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInput(f"{name} has non-finite entries")
    return v


def as_matrix(a, name: str = "matrix", square: bool = False) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput(f"{name} has non-finite entries")
    return m


def _lu_solve_once(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    y = b[perm].copy()
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y


def lu_factor(a) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle LU with partial pivoting; returns (packed LU, row permutation)."""
    lu = as_matrix(a, "A", square=True).copy()
    n = lu.shape[0]
    scale = float(np.max(np.abs(lu))) if lu.size else 0.0
    threshold = SETTINGS.pivot_rel_tol * scale
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= threshold or scale == 0.0:
            raise SingularMatrix(f"pivot {abs(lu[p, k]):.3e} at column {k} below {threshold:.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def solve_linear(a, b) -> np.ndarray:
    """Solve ``A x = b`` by pivoted LU plus one step of iterative refinement."""
    A = as_matrix(a, "A", square=True)
    rhs = as_vector(b, "b")
    if rhs.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, b has length {rhs.shape[0]}")
    lu, perm = lu_factor(A)
    x = _lu_solve_once(lu, perm, rhs)
    x += _lu_solve_once(lu, perm, rhs - A @ x)
    return x


def spectral_radius(a) -> float:
    """Estimate max |eigenvalue| from the Gelfand formula by repeated squaring.

    ``A^(2^k)`` is kept normalised; its log-scale is tracked separately so the
    estimate ``||A^(2^k)||_F^(1/2^k)`` never overflows.
    """
    A = as_matrix(a, "A", square=True)
    peak = float(np.max(np.abs(A), initial=0.0))
    if peak == 0.0:
        return 0.0
    # scale by the largest entry first so the Frobenius norm cannot overflow
    B = A / peak
    norm = float(np.linalg.norm(B))
    log_scale = math.log(peak) + math.log(norm)
    B /= norm
    norm = peak * norm
    estimate = norm
    for k in range(1, SETTINGS.gelfand_max_k + 1):
        B = B @ B
        n = float(np.linalg.norm(B))
        if n == 0.0 or not math.isfinite(n):
            return 0.0
        B /= n
        log_scale = 2.0 * log_scale + math.log(n)
        new = math.exp(log_scale / 2.0**k)
        if abs(new - estimate) < SETTINGS.gelfand_tol * max(1.0, new):
            return new
        estimate = new
    return estimate


def sym_eigen_range(a) -> tuple[float, float]:
    A = as_matrix(a, "A", square=True)
    if np.max(np.abs(A - A.T), initial=0.0) > SETTINGS.symmetry_tol:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(w[0]), float(w[-1])


def spectrum_report(a) -> SpectrumReport:
    """Spectral radius of ``A`` together with the eigen-range of its symmetric part."""
    A = as_matrix(a, "A", square=True)
    lo, hi = sym_eigen_range(0.5 * (A + A.T))
    return SpectrumReport(spectral_radius(A), lo, hi)


def operator_norm(a) -> float:
    A = as_matrix(a, "A")
    return math.sqrt(max(sym_eigen_range(A.T @ A)[1], 0.0))
