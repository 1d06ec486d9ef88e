"""Spectral estimators and the population/first-order objects used to analyse them.

The estimators only see the data matrix.  ``population_*`` and
``first_order_*`` additionally use the mask and ground truth of the same
instance; they are diagnostics and never feed back into estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import stack_blocks, unstack_blocks
from .numlin import (
    EigenPair,
    EigenSpace,
    RankDeficient,
    polar_factor,
    project_to_stiefel,
    top_eigenpair,
    top_eigenspace,
)

__all__ = [
    "DegenerateImage",
    "PopulationEigenvector",
    "PopulationEigenspace",
    "normalize_phases",
    "normalize_blocks",
    "spectral_phase_estimate",
    "spectral_orthogonal_estimate",
    "population_eigenvector",
    "population_eigenspace",
    "first_order_phase",
    "first_order_orthogonal",
]

DEFAULT_EIG_TOL = 1e-12


class DegenerateImage(ArithmeticError):
    """``X u*`` vanished, so the first-order direction is undefined."""


@dataclass(frozen=True)
class PopulationEigenvector:
    u_star: np.ndarray
    check_u: np.ndarray
    lambda_star: float


@dataclass(frozen=True)
class PopulationEigenspace:
    U_star: np.ndarray
    check_u: np.ndarray
    lambda_star_1: float


def normalize_phases(u: np.ndarray, zero_tol: float = 1e-13) -> np.ndarray:
    """Entrywise ``u_j / |u_j|``; coordinates below ``zero_tol * max|u|`` map to 1."""
    u = np.asarray(u, dtype=complex)
    mag = np.abs(u)
    cutoff = zero_tol * mag.max() if mag.size else 0.0
    out = np.ones_like(u)
    keep = mag > cutoff
    out[keep] = u[keep] / mag[keep]
    return out


def normalize_blocks(U: np.ndarray, d: int, rank_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Polar factor of every d x d block of an (n*d, d) matrix.

    Returns the (n, d, d) estimate and a boolean array marking the blocks that
    failed the rank test and were replaced by the identity.
    """
    blocks = unstack_blocks(np.asarray(U), d)
    out = np.empty_like(blocks)
    fallback = np.zeros(len(blocks), dtype=bool)
    for j, B in enumerate(blocks):
        try:
            out[j] = polar_factor(B, rank_tol)
        except RankDeficient:
            out[j] = np.eye(d)
            fallback[j] = True
    return out, fallback


def spectral_phase_estimate(
    X: np.ndarray, zero_tol: float = 1e-13, tol: float = DEFAULT_EIG_TOL, rng=None
) -> tuple[np.ndarray, EigenPair]:
    """Phase estimate from the leading eigenvector of the Hermitian data matrix."""
    pair = top_eigenpair(X, tol=tol, rng=rng)
    return normalize_phases(pair.vector, zero_tol), pair


def spectral_orthogonal_estimate(
    Xcal: np.ndarray, d: int, rank_tol: float = 1e-12, tol: float = DEFAULT_EIG_TOL, rng=None
) -> tuple[np.ndarray, EigenSpace]:
    """Blockwise polar factors of the top-d eigenspace of the nd x nd data matrix.

    Blocks whose smallest singular value is below ``rank_tol`` times the largest
    are set to the identity.
    """
    if Xcal.shape[0] % d:
        raise ValueError(f"dimension {Xcal.shape[0]} not divisible by d={d}")
    space = top_eigenspace(Xcal, d, tol=tol, rng=rng)
    Z_hat, _ = normalize_blocks(np.real(space.basis), d, rank_tol)
    return Z_hat, space


def _leading_mask_vector(A: np.ndarray, tol: float, rng) -> tuple[np.ndarray, float]:
    pair = top_eigenpair(np.asarray(A, dtype=float), tol=tol, rng=rng)
    v = np.real(pair.vector)
    # fix the sign so the (Perron) vector is mostly non-negative
    if v.sum() < 0:
        v = -v
    return v / np.linalg.norm(v), pair.value


def population_eigenvector(
    A: np.ndarray, z_star: np.ndarray, tol: float = DEFAULT_EIG_TOL, rng=None
) -> PopulationEigenvector:
    check_u, lam = _leading_mask_vector(A, tol, rng)
    return PopulationEigenvector(np.asarray(z_star) * check_u, check_u, lam)


def population_eigenspace(
    A: np.ndarray, Z_star: np.ndarray, tol: float = DEFAULT_EIG_TOL, rng=None
) -> PopulationEigenspace:
    check_u, lam = _leading_mask_vector(A, tol, rng)
    U = stack_blocks(np.asarray(Z_star) * check_u[:, None, None])
    return PopulationEigenspace(U, check_u, lam)


def first_order_phase(X: np.ndarray, pop: PopulationEigenvector) -> np.ndarray:
    """``X u* / ||X u*||``."""
    image = X @ pop.u_star
    norm = np.linalg.norm(image)
    if norm <= 1e-300:
        raise DegenerateImage("X u* is numerically zero")
    return image / norm


def first_order_orthogonal(Xcal: np.ndarray, pop: PopulationEigenspace) -> np.ndarray:
    """Projection of ``Xcal U*`` onto matrices with orthonormal columns."""
    return project_to_stiefel(Xcal @ pop.U_star)
