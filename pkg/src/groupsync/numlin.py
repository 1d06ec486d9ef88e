"""Dense numerical kernels: top eigenpairs/eigenspaces, small SVD, polar factor,
Stiefel projection and operator norms.

The eigensolvers return the *algebraically* largest eigenvalues.  Matrices of
moderate size go through LAPACK (``numpy.linalg.eigh``); larger ones use a
Gershgorin-shifted block subspace iteration with Rayleigh-Ritz extraction,
which only needs matrix-block products and is much cheaper than a full
decomposition when a handful of leading eigenvectors is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, svds

__all__ = [
    "NonConvergence",
    "RankDeficient",
    "EigenPair",
    "EigenSpace",
    "SmallSvd",
    "DENSE_CUTOFF",
    "as_generator",
    "hermitian_from_upper",
    "gershgorin_bound",
    "top_eigenpair",
    "top_eigenspace",
    "small_svd",
    "polar_factor",
    "procrustes_factor",
    "project_to_stiefel",
    "operator_norm_estimate",
]

# Below this dimension a full LAPACK decomposition is cheaper than iterating.
DENSE_CUTOFF = 160


class NonConvergence(RuntimeError):
    """Iterative solver stopped at ``max_iter`` without meeting its residual target."""

    def __init__(self, max_iter: int, residual: float, target: float):
        self.max_iter = max_iter
        self.residual = residual
        self.target = target
        super().__init__(
            f"no convergence after {max_iter} iterations "
            f"(residual {residual:.3e}, target {target:.3e})"
        )


class RankDeficient(ValueError):
    """Matrix is numerically rank deficient where full rank is required."""


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float
    # estimate of (largest - second largest) eigenvalue; nan when n == 1
    gap: float
    gap_warning: bool
    iterations: int


@dataclass(frozen=True)
class EigenSpace:
    values: np.ndarray
    basis: np.ndarray
    residual: float
    next_value: float
    gap_warning: bool
    iterations: int


@dataclass(frozen=True)
class SmallSvd:
    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular) @ self.right.T


def as_generator(rng=None) -> np.random.Generator:
    """Coerce ``None``/int/Generator into a Generator (Philox, seed 0 by default)."""
    if isinstance(rng, np.random.Generator):
        return rng
    seed = 0 if rng is None else int(rng)
    return np.random.Generator(np.random.Philox(seed))


def hermitian_from_upper(upper) -> np.ndarray:
    """Build a Hermitian matrix from the strict upper triangle and the diagonal
    of ``upper``; the lower triangle of the input is ignored."""
    upper = np.asarray(upper)
    triu = np.triu(upper, 1)
    diag = np.real(np.diag(upper))
    out = triu + triu.conj().T
    out = out + np.diag(diag).astype(out.dtype)
    return out


def gershgorin_bound(Y: np.ndarray) -> float:
    """Upper bound on the spectral radius: the largest absolute row sum."""
    return float(np.max(np.sum(np.abs(Y), axis=1))) if Y.size else 0.0


def _check_square(Y: np.ndarray) -> int:
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1] or Y.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {Y.shape}")
    return Y.shape[0]


def _random_block(n: int, k: int, dtype, gen: np.random.Generator) -> np.ndarray:
    block = gen.standard_normal((n, k))
    if np.issubdtype(dtype, np.complexfloating):
        block = block + 1j * gen.standard_normal((n, k))
    q, _ = np.linalg.qr(block)
    return q


def _dense_top(Y: np.ndarray, k: int):
    vals, vecs = np.linalg.eigh(Y)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    return vals, vecs


def _subspace_iteration(
    apply: Callable[[np.ndarray], np.ndarray],
    n: int,
    k: int,
    block: int,
    shift: float,
    dtype,
    tol: float,
    max_iter: int,
    gen: np.random.Generator,
):
    """Shifted block power iteration with Rayleigh-Ritz at every step.

    Returns (ritz values desc, ritz vectors, residual of first k, scale, iters).
    One application of ``apply`` per iteration.
    """
    Q = _random_block(n, block, dtype, gen)
    residual = np.inf
    target = np.inf
    for it in range(1, max_iter + 1):
        YQ = apply(Q)
        H = Q.conj().T @ YQ
        H = 0.5 * (H + H.conj().T)
        theta, S = np.linalg.eigh(H)
        theta = theta[::-1]
        S = S[:, ::-1]
        V = Q @ S
        YV = YQ @ S
        R = YV[:, :k] - V[:, :k] * theta[:k]
        residual = float(np.linalg.norm(R))
        scale = float(np.max(np.abs(theta)))
        target = tol * scale
        if residual <= target:
            return theta, V, residual, scale, it
        Q, _ = np.linalg.qr(YV + shift * V)
    raise NonConvergence(max_iter, residual, target)


def _top_k(Y: np.ndarray, k: int, tol: float, max_iter: int | None, rng, method: str = "auto"):
    """Leading k (+1 lookahead when available) eigenvalues/vectors of Hermitian Y."""
    n = _check_square(Y)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if max_iter is None:
        max_iter = 10 * n + 1000
    guard = max(4, k)
    block = min(n, k + guard)
    dense = n <= DENSE_CUTOFF or 2 * block >= n
    if method == "dense" or (method == "auto" and dense):
        vals, vecs = _dense_top(Y, k)
        V = vecs[:, :k]
        resid = float(np.linalg.norm(Y @ V - V * vals[:k]))
        return vals, vecs, resid, 1
    gen = as_generator(rng)
    shift = gershgorin_bound(Y)
    theta, V, resid, _, iters = _subspace_iteration(
        lambda Q: Y @ Q, n, k, block, shift, np.result_type(Y.dtype, np.float64),
        tol, max_iter, gen,
    )
    return theta, V, resid, iters


def top_eigenpair(
    Y: np.ndarray, tol: float = 1e-10, max_iter: int | None = None, rng=None,
    method: str = "auto",
) -> EigenPair:
    """Leading (algebraically largest) eigenpair of a Hermitian matrix.

    ``method`` is "dense" (LAPACK), "iterative" (shifted subspace iteration) or
    "auto" (dense below ``DENSE_CUTOFF``).  Raises NonConvergence if the
    residual ``||Yv - lambda v||`` does not reach ``tol * ||Y||`` within
    ``max_iter`` iterations.
    """
    Y = np.asarray(Y)
    vals, vecs, resid, iters = _top_k(Y, 1, tol, max_iter, rng, method)
    v = vecs[:, 0]
    v = v / np.linalg.norm(v)
    value = float(vals[0])
    if len(vals) > 1:
        gap = value - float(vals[1])
        scale = max(abs(value), float(np.max(np.abs(vals))))
        warn = gap < 10 * tol * scale
    else:
        gap, warn = float("nan"), False
    return EigenPair(value, v, resid, gap, bool(warn), iters)


def top_eigenspace(
    Y: np.ndarray, d: int, tol: float = 1e-10, max_iter: int | None = None, rng=None,
    method: str = "auto",
) -> EigenSpace:
    """Invariant subspace of the ``d`` algebraically largest eigenvalues.

    The basis is orthonormal; its rotation within the span is arbitrary.
    ``next_value`` estimates the (d+1)-th eigenvalue.
    """
    Y = np.asarray(Y)
    vals, vecs, resid, iters = _top_k(Y, d, tol, max_iter, rng, method)
    basis = vecs[:, :d]
    values = np.asarray(vals[:d], dtype=float)
    if len(vals) > d:
        nxt = float(vals[d])
        scale = float(np.max(np.abs(vals)))
        warn = values[-1] - nxt < 10 * tol * scale
    else:
        nxt, warn = float("nan"), False
    return EigenSpace(values, basis, resid, nxt, bool(warn), iters)


def small_svd(B: np.ndarray) -> SmallSvd:
    """Full SVD ``B = left @ diag(singular) @ right.T`` of a small square matrix."""
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    left, singular, right_h = np.linalg.svd(B)
    return SmallSvd(left, singular, right_h.conj().T)


def procrustes_factor(M: np.ndarray) -> np.ndarray:
    """``U @ Vh`` from an SVD of M.  Always orthogonal/unitary, even when M is
    rank deficient (the completion of the null directions is arbitrary)."""
    U, _, Vh = np.linalg.svd(M, full_matrices=False)
    return U @ Vh


def polar_factor(B: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthogonal factor of the polar decomposition of a full-rank square matrix."""
    B = np.asarray(B)
    U, s, Vh = np.linalg.svd(B)
    if s[0] == 0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(
            f"smallest singular value {s[-1]:.3e} below {rank_tol:g} x largest"
        )
    return U @ Vh


def project_to_stiefel(T: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Nearest matrix with orthonormal columns: ``G @ N^H`` for the thin SVD
    ``T = G D N^H``.  Maximizes ``Re <V, T>`` over orthonormal-column V."""
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] < T.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {T.shape}")
    G, s, Nh = np.linalg.svd(T, full_matrices=False)
    if s[0] == 0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(
            f"smallest singular value {s[-1]:.3e} below {rank_tol:g} x largest"
        )
    return G @ Nh


def operator_norm_estimate(
    B: np.ndarray, tol: float = 1e-8, max_iter: int | None = None, rng=None
) -> float:
    """Largest singular value of B to relative accuracy ``tol``.

    Small matrices use a dense SVD.  Larger ones use ARPACK Lanczos
    (``eigsh`` on Hermitian input, ``svds`` otherwise); the start vector is
    drawn from ``rng`` so results are reproducible.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    B = np.atleast_2d(np.asarray(B))
    m, n = B.shape
    if m == 0 or n == 0 or not np.any(B):
        return 0.0
    if min(m, n) <= 16:
        return float(np.linalg.norm(B, 2))
    gen = as_generator(rng)
    hermitian = m == n and np.array_equal(B, B.conj().T)
    size = n if hermitian else min(m, n)
    v0 = gen.standard_normal(size)
    if np.iscomplexobj(B):
        v0 = v0 + 1j * gen.standard_normal(size)
    try:
        if hermitian:
            vals = eigsh(B, k=1, which="LM", tol=tol, maxiter=max_iter, v0=v0,
                         return_eigenvectors=False)
        else:
            vals = svds(B, k=1, tol=tol, maxiter=max_iter, v0=v0,
                        return_singular_vectors=False)
    except ArpackNoConvergence as exc:
        raise NonConvergence(max_iter or -1, float("nan"), tol) from exc
    return float(np.max(np.abs(vals)))
