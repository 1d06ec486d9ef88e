"""Gauge-aligned losses, minimax reference values and numerical auditors for the
eigenvector/eigenspace perturbation bounds and the random-matrix norm bounds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import SyncInstance, block_mask
from .numlin import (
    operator_norm_estimate,
    procrustes_factor,
    project_to_stiefel,
    top_eigenpair,
    top_eigenspace,
)

__all__ = [
    "LossReport",
    "SubspaceDistance",
    "PerturbationCertificate",
    "NORM_CEILINGS",
    "phase_loss",
    "orthogonal_loss",
    "minimax_reference",
    "gauge_distance_vector",
    "gauge_distance_subspace",
    "vector_perturbation_bound",
    "subspace_perturbation_bound",
    "subspace_bound_equal_top",
    "audit_vector_perturbation",
    "audit_subspace_perturbation",
    "audit_norm_lemmas",
    "imaginary_part_error_decomposition",
    "main_term_loss",
]

AUDIT_EIG_TOL = 1e-12
AUDIT_NORM_TOL = 1e-10
PASS_SLACK = 1e-8
# relative accuracy of the random-matrix norms in audit_norm_lemmas
NORM_LEMMA_TOL = 1e-8

# Ceilings on the normalized random-matrix norms checked by audit_norm_lemmas.
# Calibrated by pilot runs (n in [200, 2000], p in [0.1, 1]): observed maxima
# were about 2.0 for the three operator-norm ratios and 1.05 for the
# imaginary-energy ratio.
NORM_CEILINGS = {
    "mask_deviation": 3.0,
    "masked_noise": 3.0,
    "block_noise": 3.0,
    "imag_energy": 1.5,
}


@dataclass
class LossReport:
    loss: float
    aligner: np.ndarray | complex
    per_site: np.ndarray
    degenerate: bool = False

    def to_dict(self) -> dict:
        al = self.aligner
        if np.iscomplexobj(al):
            al = [float(np.real(al)), float(np.imag(al))]
        else:
            al = np.asarray(al).tolist()
        return {"loss": self.loss, "aligner": al, "degenerate": self.degenerate}


def phase_loss(z_hat: np.ndarray, z_star: np.ndarray) -> LossReport:
    """``min_a (1/n) sum_j |z_hat_j - z*_j a|^2`` over unit complex ``a``.

    The optimal ``a`` is ``s/|s|`` with ``s = sum_j conj(z*_j) z_hat_j``; the loss
    equals ``2 - 2|s|/n`` but is accumulated from per-site errors so that
    near-exact recoveries are not swamped by cancellation.
    """
    z_hat = np.asarray(z_hat, dtype=complex)
    z_star = np.asarray(z_star, dtype=complex)
    if z_hat.shape != z_star.shape:
        raise ValueError("z_hat and z_star must have equal length")
    s = np.vdot(z_star, z_hat)
    a = s / abs(s) if abs(s) > 0 else 1.0 + 0j
    per_site = np.abs(z_hat - z_star * a) ** 2
    return LossReport(float(per_site.mean()), complex(a), per_site)


def orthogonal_loss(Z_hat: np.ndarray, Z_star: np.ndarray) -> LossReport:
    """``min_O (1/n) sum_j ||Z_hat_j - Z*_j O||_F^2`` over orthogonal ``O``.

    The Procrustes optimum is the polar factor of ``M = sum_j Z*_j^T Z_hat_j``,
    giving ``2d - (2/n)||M||_*``.  When M is rank deficient the aligner is
    still optimal (any SVD completion) and ``degenerate`` is set.
    """
    Z_hat = np.asarray(Z_hat, dtype=float)
    Z_star = np.asarray(Z_star, dtype=float)
    if Z_hat.shape != Z_star.shape:
        raise ValueError("block arrays must have equal shapes")
    M = np.einsum("jab,jac->bc", Z_star, Z_hat)
    s = np.linalg.svd(M, compute_uv=False)
    degenerate = bool(s[0] == 0 or s[-1] <= 1e-12 * s[0])
    O = procrustes_factor(M)
    diff = Z_hat - Z_star @ O
    per_site = np.einsum("jab,jab->j", diff, diff)
    return LossReport(float(per_site.mean()), O, per_site, degenerate)


def minimax_reference(mode: str, n: int, p: float, sigma: float, d: int = 1) -> float:
    """``sigma^2/(2np)`` for phase and ``d(d-1) sigma^2/(2np)`` for O(d)."""
    base = sigma**2 / (2 * n * p)
    if mode == "phase":
        return base
    if mode == "orthogonal":
        return d * (d - 1) * base
    raise ValueError(f"unknown mode {mode!r}")


def gauge_distance_vector(v: np.ndarray, w: np.ndarray) -> float:
    """``inf_b ||v - w b||`` over unit complex b, for unit vectors v, w."""
    inner = abs(np.vdot(w, v))
    return math.sqrt(max(0.0, 2.0 - 2.0 * inner))


@dataclass(frozen=True)
class SubspaceDistance:
    lower: float   # ||(I - W W^H) V||, a lower bound over all aligners
    upper: float   # ||V - W O_F|| with the Frobenius-Procrustes aligner O_F


def gauge_distance_subspace(V: np.ndarray, W: np.ndarray) -> SubspaceDistance:
    """Bracket ``inf_O ||V - W O||`` (operator norm) for orthonormal-column V, W.

    The operator-norm minimizer has no closed form, so both a lower bound (the
    sin-theta distance) and the value at the Frobenius-optimal aligner are
    returned.
    """
    V = np.atleast_2d(np.asarray(V).T).T
    W = np.atleast_2d(np.asarray(W).T).T
    C = W.conj().T @ V
    O = procrustes_factor(C)
    upper = np.linalg.norm(V - W @ O, 2)
    lower = np.linalg.norm(V - W @ C, 2)
    return SubspaceDistance(float(lower), float(upper))


def vector_perturbation_bound(mu1: float, mu2: float, eps: float) -> float:
    gap = mu1 - mu2
    return 80.0 / (9.0 * gap) * ((4.0 / gap + 2.0 / mu1) * eps**2 + (mu2 / mu1) * eps)


def subspace_perturbation_bound(mu1: float, mu_d: float, mu_next: float, eps: float) -> float:
    gap = mu_d - mu_next
    c = 8.0 * math.sqrt(2.0) / (3.0 * gap * mu_d)
    quad = c * (4.0 * mu1 / (3.0 * gap) + 1.0) * eps**2
    lin = c * (4.0 * mu1 * (mu1 - mu_d) / gap + mu_next) * eps
    return quad + lin


def subspace_bound_equal_top(mu_d: float, mu_next: float, eps: float) -> float:
    """The bound above specialised to ``mu1 == mu_d``."""
    gap = mu_d - mu_next
    c = 8.0 * math.sqrt(2.0) / (3.0 * gap)
    return c * ((4.0 / (3.0 * gap) + 1.0 / mu_d) * eps**2 + (mu_next / mu_d) * eps)


@dataclass
class PerturbationCertificate:
    mode: str
    mu_star: tuple
    perturbation_norm: float
    lhs: float
    rhs: float
    precondition_met: bool
    passed: bool | None
    numerical_floor: float = 0.0
    lhs_lower: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mu_star"] = [float(m) for m in self.mu_star]
        return out


def _verdict(lhs, rhs, floor, ok):
    if not ok:
        return None
    return bool(lhs <= rhs * (1 + PASS_SLACK) + floor)


def audit_vector_perturbation(Y: np.ndarray, Y_star: np.ndarray, rng=None) -> PerturbationCertificate:
    """Check ``inf_b ||v - b Y v*/||Y v*|| ||`` against the eigenvector bound.

    Eigenvalues come from a full dense decomposition: the second eigenvalue of
    structured inputs often sits in a near-degenerate cluster where subspace
    iteration is slow.

    ``numerical_floor`` absorbs the eigensolver error in v and v* (residual
    over eigengap); it is ~1e-14 for well-conditioned inputs.
    """
    Y = np.asarray(Y)
    Y_star = np.asarray(Y_star)
    if Y.shape != Y_star.shape:
        raise ValueError("Y and Y_star must have equal shapes")
    star = top_eigenspace(Y_star, 2, tol=AUDIT_EIG_TOL, method="dense")
    mu1, mu2 = (float(x) for x in star.values)
    v_star = star.basis[:, 0]
    pair = top_eigenpair(Y, tol=AUDIT_EIG_TOL, method="dense")
    eps = operator_norm_estimate(Y - Y_star, tol=AUDIT_NORM_TOL, rng=rng)
    image = Y @ v_star
    lhs = gauge_distance_vector(pair.vector, image / np.linalg.norm(image))
    gap = mu1 - mu2
    ok = bool(gap > 0 and mu1 > 0 and eps <= min(gap, mu1) / 4)
    rhs = vector_perturbation_bound(mu1, mu2, eps) if gap > 0 and mu1 > 0 else math.inf
    floor = 4 * (pair.residual + star.residual) / gap + 1e-14 if gap > 0 else math.inf
    return PerturbationCertificate(
        "vector", (mu1, mu2), eps, float(lhs), float(rhs), ok,
        _verdict(lhs, rhs, floor, ok), float(floor),
    )


def audit_subspace_perturbation(
    Y: np.ndarray, Y_star: np.ndarray, d: int, rng=None
) -> PerturbationCertificate:
    """Check ``inf_O ||V - Ṽ O||`` against the eigenspace bound, where Ṽ is the
    Stiefel projection of ``Y V*``.  The lhs is the Frobenius-aligner value,
    an upper bound on the infimum, so a pass is a sound verdict."""
    Y = np.asarray(Y)
    Y_star = np.asarray(Y_star)
    n = Y.shape[0]
    if not 1 <= d < n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    star = top_eigenspace(Y_star, d + 1, tol=AUDIT_EIG_TOL, method="dense")
    mus = [float(x) for x in star.values]
    mu1, mu_d, mu_next = mus[0], mus[d - 1], mus[d]
    V_star = star.basis[:, :d]
    space = top_eigenspace(Y, d, tol=AUDIT_EIG_TOL, method="dense")
    eps = operator_norm_estimate(Y - Y_star, tol=AUDIT_NORM_TOL, rng=rng)
    V_tilde = project_to_stiefel(Y @ V_star)
    dist = gauge_distance_subspace(space.basis, V_tilde)
    gap = mu_d - mu_next
    ok = bool(gap > 0 and mu_d > 0 and eps <= min(gap, mu_d) / 4)
    rhs = subspace_perturbation_bound(mu1, mu_d, mu_next, eps) if gap > 0 and mu_d > 0 else math.inf
    floor = 4 * (space.residual + star.residual) / gap + 1e-14 if gap > 0 else math.inf
    return PerturbationCertificate(
        "subspace", (mu1, mu_d, mu_next), eps, dist.upper, float(rhs), ok,
        _verdict(dist.upper, rhs, floor, ok), float(floor), lhs_lower=dist.lower,
        meta={"d": d},
    )


def audit_norm_lemmas(inst: SyncInstance, rng=None, keys=None) -> dict:
    """Normalized random-matrix norms of an instance.

    Keys: ``mask_deviation`` = ||A - E A|| / sqrt(np); ``masked_noise`` =
    ||A o W|| / sqrt(np) (phase); ``block_noise`` = ||(A kron J_d) o W|| /
    sqrt(dnp) (orthogonal); ``imag_energy`` = (2/(n^2 p)) sum_j |Im xi_j|^2
    (phase).  Entries not defined for the mode, or not listed in ``keys``
    when given, are None.
    """
    want = set(NORM_CEILINGS if keys is None else keys)
    unknown = want - set(NORM_CEILINGS)
    if unknown:
        raise ValueError(f"unknown norm keys {sorted(unknown)}")
    n, p, d = inst.n, inst.p, inst.d
    A = inst.A
    root = math.sqrt(n * p)
    out = dict.fromkeys(NORM_CEILINGS)
    if "mask_deviation" in want:
        EA = p * (np.ones((n, n)) - np.eye(n))
        out["mask_deviation"] = operator_norm_estimate(A - EA, tol=NORM_LEMMA_TOL, rng=rng) / root
    if inst.mode == "phase":
        if "masked_noise" in want:
            out["masked_noise"] = operator_norm_estimate(A * inst.noise, tol=NORM_LEMMA_TOL, rng=rng) / root
        if "imag_energy" in want:
            im = _imag_xi(inst)
            out["imag_energy"] = float(2.0 / (n * n * p) * np.sum(im**2))
    elif "block_noise" in want:
        masked = block_mask(A, d) * inst.noise
        out["block_noise"] = operator_norm_estimate(masked, tol=NORM_LEMMA_TOL, rng=rng) / math.sqrt(d * n * p)
    return out


def _imag_xi(inst: SyncInstance) -> np.ndarray:
    z = inst.truth
    # xi_j = sum_k A_jk W_jk conj(z_j) z_k
    xi = np.conj(z) * ((inst.A * inst.noise) @ z)
    return np.imag(xi)


def imaginary_part_error_decomposition(inst: SyncInstance, pop=None) -> np.ndarray:
    """Per-site ``Im(sum_{k != j} A_jk W_jk conj(z*_j) z*_k)``, multiplied by
    sigma (so it vanishes at sigma = 0).

    The realised noise enters the j-th coordinate of the first-order vector,
    after removing the phase of z*_j, as ``sigma * xi_j / sqrt(n)`` against a
    signal of ``lambda* / sqrt(n)``; the angular error is then approximately
    ``sigma Im(xi_j) / lambda*``.  ``pop`` is accepted for API symmetry and
    unused.
    """
    if inst.mode != "phase":
        raise ValueError("defined for phase instances only")
    return inst.sigma * _imag_xi(inst)


def main_term_loss(imag_terms: np.ndarray, lambda_star: float) -> float:
    """Loss predicted by the main error term alone:
    ``(1/n) sum_j (sigma Im xi_j / lambda*)^2``."""
    imag_terms = np.asarray(imag_terms)
    return float(np.mean((imag_terms / lambda_star) ** 2))
