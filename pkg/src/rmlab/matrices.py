"""Square random matrices and their two extreme singular values.

The experiments only ever need the largest and smallest singular value, so
instead of a full SVD this module does one LU factorization with partial
pivoting per matrix and runs power iteration on A^T A (largest) and inverse
power iteration through the LU factors (smallest).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .distributions import EntryDistribution, sample
from .rng import (
    STREAM_ENTRIES,
    STREAM_OPNORM_START,
    STREAM_SIGMA_START,
    derive_stream,
)

_N_MAX = 4096
_DEFAULT_TOL = 1e-10
_DEFAULT_MAX_ITER = 10_000
_PIVOT_TOL_SCALE = 1e-12
# Start-vector seed used when the input is a bare array with no sample seed.
_FALLBACK_START_SEED = 0x5EED


@dataclass(frozen=True)
class MatrixSample:
    n: int
    entries: np.ndarray
    dist: EntryDistribution
    seed: int


@dataclass(frozen=True)
class IterationReport:
    """Result of one Rayleigh-quotient power iteration run."""

    value: float
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class SigmaMinReport:
    value: float
    singular_flag: bool
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class SpectralSummary:
    op_norm: float
    sigma_min: float
    singular_flag: bool
    op_norm_iterations: int
    sigma_min_iterations: int
    op_norm_residual: float
    sigma_min_residual: float
    op_norm_converged: bool
    sigma_min_converged: bool


def sample_matrix(dist: EntryDistribution, n: int, seed: int) -> MatrixSample:
    """n x n matrix of i.i.d. draws, filled row-major from a seed-derived stream."""
    if not 1 <= n <= _N_MAX:
        raise ValueError(f"dimension n={n} outside [1, {_N_MAX}]")
    rng = derive_stream(seed, STREAM_ENTRIES)
    entries = sample(dist, rng, size=(n, n))  # C-order fill is row-major
    return MatrixSample(n=n, entries=entries, dist=dist, seed=seed)


def _entries_and_start_seed(A) -> tuple[np.ndarray, int]:
    if isinstance(A, MatrixSample):
        return A.entries, A.seed
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square matrix")
    return arr, _FALLBACK_START_SEED


def _rayleigh_power(apply_op, v0: np.ndarray, tol: float, max_iter: int):
    """Power iteration with a relative Rayleigh-quotient stopping rule.

    apply_op must be a symmetric positive semidefinite operator. Returns
    (lam, iterations, residual, converged) where lam is the final Rayleigh
    quotient and residual the last relative change.
    """
    v = v0 / np.linalg.norm(v0)
    lam_old = None
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        z = apply_op(v)
        lam = float(v @ z)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return 0.0, it, 0.0, True
        v = z / nz
        if lam_old is not None:
            residual = abs(lam - lam_old) / max(abs(lam), np.finfo(float).tiny)
            if residual <= tol:
                return lam, it, residual, True
        lam_old = lam
    return lam, max_iter, residual, False


def operator_norm(
    A,
    tol: float = _DEFAULT_TOL,
    max_iter: int = _DEFAULT_MAX_ITER,
) -> IterationReport:
    """Largest singular value by power iteration on A^T A.

    Parameters
    ----------
    A : MatrixSample or square ndarray
        For a MatrixSample the start vector is derived from the sample seed,
        making the result a pure function of (dist, n, seed).
    tol : float
        Relative Rayleigh-quotient change at which iteration stops.
    max_iter : int
        Iteration cap; hitting it flags non-convergence but still returns
        the best estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    entries, start_seed = _entries_and_start_seed(A)
    n = entries.shape[0]
    v0 = derive_stream(start_seed, STREAM_OPNORM_START).standard_normal(n)
    lam, iters, residual, converged = _rayleigh_power(
        lambda v: entries.T @ (entries @ v), v0, tol, max_iter
    )
    return IterationReport(
        value=float(np.sqrt(max(lam, 0.0))),
        iterations=iters,
        residual=float(residual),
        converged=converged,
    )


def smallest_singular_value(
    A,
    pivot_tol: float | None = None,
    tol: float = _DEFAULT_TOL,
    max_iter: int = _DEFAULT_MAX_ITER,
) -> SigmaMinReport:
    """Smallest singular value via LU with partial pivoting.

    If any pivot magnitude falls below pivot_tol the matrix is reported
    singular as (0, flag). Otherwise inverse power iteration on (A^T A)^{-1}
    runs through the triangular factors, with the same stopping rule as
    operator_norm.

    pivot_tol defaults to 1e-12 * max|a_ij| * n.
    """
    entries, start_seed = _entries_and_start_seed(A)
    n = entries.shape[0]
    amax = float(np.max(np.abs(entries)))
    if pivot_tol is None:
        pivot_tol = _PIVOT_TOL_SCALE * amax * n
    elif pivot_tol <= 0:
        raise ValueError("pivot_tol must be positive")
    if amax == 0.0:
        return SigmaMinReport(0.0, True, 0, 0.0, True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(entries)
    if float(np.min(np.abs(np.diag(lu)))) < pivot_tol:
        return SigmaMinReport(0.0, True, 0, 0.0, True)

    def apply_inv_gram(v):
        # (A^T A)^{-1} v = A^{-1} A^{-T} v via two triangular solve pairs
        y = lu_solve((lu, piv), v, trans=1)
        return lu_solve((lu, piv), y, trans=0)

    v0 = derive_stream(start_seed, STREAM_SIGMA_START).standard_normal(n)
    lam_inv, iters, residual, converged = _rayleigh_power(
        apply_inv_gram, v0, tol, max_iter
    )
    value = 1.0 / np.sqrt(lam_inv) if lam_inv > 0 else 0.0
    return SigmaMinReport(
        value=float(value),
        singular_flag=False,
        iterations=iters,
        residual=float(residual),
        converged=converged,
    )


def spectral_summary(
    A,
    tol: float = _DEFAULT_TOL,
    max_iter: int = _DEFAULT_MAX_ITER,
    pivot_tol: float | None = None,
) -> SpectralSummary:
    """Both extreme singular values of one matrix."""
    top = operator_norm(A, tol=tol, max_iter=max_iter)
    bottom = smallest_singular_value(A, pivot_tol=pivot_tol, tol=tol, max_iter=max_iter)
    return SpectralSummary(
        op_norm=top.value,
        sigma_min=0.0 if bottom.singular_flag else bottom.value,
        singular_flag=bottom.singular_flag,
        op_norm_iterations=top.iterations,
        sigma_min_iterations=bottom.iterations,
        op_norm_residual=top.residual,
        sigma_min_residual=bottom.residual,
        op_norm_converged=top.converged,
        sigma_min_converged=bottom.converged,
    )
