"""Pilot-aided and iterative Wiener channel estimation with soft-symbol feedback."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg

from .channel import CovarianceModel
from .frame import PilotPattern
from .precoding import PrecodingBasis

ESTIMATION_MODES = ("perfect-csi", "pilot-only", "iterative")


class EstimationError(RuntimeError):
    """The Wiener system could not be solved."""


def build_feedback_matrix(
    pattern: PilotPattern, basis: PrecodingBasis, b_soft: np.ndarray, pilots: np.ndarray | None = None
) -> np.ndarray:
    """Diagonal of ``D~ = diag(P_p p + P_d S b~)`` as a grid vector."""
    b_soft = np.asarray(b_soft)
    if b_soft.shape[-1] != pattern.n_data:
        raise ValueError(f"expected {pattern.n_data} soft symbols, got {b_soft.shape[-1]}")
    return pattern.multiplex(basis.apply(b_soft), pilots)


def build_lambda(pattern: PilotPattern, soft_variance: float) -> np.ndarray:
    """Diagonal of ``Lambda``: 0 on pilots, ``1 - sigma_b~^2`` on data."""
    lam = np.zeros(pattern.grid_size)
    lam[pattern.data_index] = 1.0 - soft_variance
    return lam


def wiener_dense(
    y: np.ndarray, d: np.ndarray, lam: np.ndarray, R: np.ndarray, sigma2: float
) -> np.ndarray:
    """``R D^H (D R D^H + Lambda + sigma^2 I)^{-1} y`` by a Cholesky solve."""
    A = d[:, None] * R * d.conj()[None, :]
    A[np.diag_indices_from(A)] += lam + sigma2
    try:
        x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), y)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EstimationError(f"Wiener system not positive definite: {exc}") from exc
    return R @ (d.conj() * x)


def wiener_lowrank(
    y: np.ndarray, d: np.ndarray, lam: np.ndarray, eigvals: np.ndarray, U: np.ndarray, sigma2: float
) -> np.ndarray:
    """Wiener filter with ``R ~= U diag(eigvals) U^H`` via the matrix inversion lemma.

    Needs ``Lambda + sigma^2 I`` to be positive; costs ``O(MN r^2)``.
    """
    phi = lam + sigma2
    if np.any(phi <= 0):
        raise EstimationError("low-rank Wiener filter needs a positive noise floor")
    weight = np.abs(d) ** 2 / phi
    A = (U.conj().T * weight) @ U
    A[np.diag_indices_from(A)] += 1.0 / eigvals
    rhs = U.conj().T @ (d.conj() * y / phi)
    try:
        c = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EstimationError(f"reduced Wiener system not positive definite: {exc}") from exc
    return U @ c


def wiener_estimate(
    y: np.ndarray,
    d: np.ndarray,
    lam: np.ndarray,
    cov: CovarianceModel,
    sigma2: float,
    rel_cutoff: float | None = None,
) -> np.ndarray:
    """Wiener estimate of the full-grid channel vector.

    ``rel_cutoff=None`` solves the dense system; otherwise the covariance is
    truncated to eigenvalues above ``rel_cutoff * lam_max`` and the reduced
    system is solved (falling back to dense when there is no noise floor).
    """
    y, d, lam = np.asarray(y), np.asarray(d), np.asarray(lam, dtype=float)
    if not (y.shape == d.shape == lam.shape == (cov.size,)):
        raise ValueError("y, D~ and Lambda must all have one entry per grid point")
    if rel_cutoff is None or np.any(lam + sigma2 <= 0):
        return wiener_dense(y, d, lam, cov.matrix, sigma2)
    eigvals, U = cov.principal(rel_cutoff)
    return wiener_lowrank(y, d, lam, eigvals, U, sigma2)


class WienerEstimator:
    """Iterative Wiener estimator bound to one covariance model and pilot pattern.

    ``estimate(y, b_soft, soft_variance)`` rebuilds ``D~`` and ``Lambda`` from the
    decoder feedback; zero feedback gives the pilot-only estimate.
    """

    def __init__(
        self,
        cov: CovarianceModel,
        pattern: PilotPattern,
        basis: PrecodingBasis,
        sigma2: float,
        rel_cutoff: float | None = 1e-10,
        principal: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        if cov.size != pattern.grid_size:
            raise ValueError("covariance and pilot pattern describe different grids")
        self.cov = cov
        self.pattern = pattern
        self.basis = basis
        self.sigma2 = sigma2
        self.rel_cutoff = rel_cutoff
        if principal is not None:
            self.__dict__["_principal"] = principal

    @cached_property
    def _principal(self):
        # shareable across frames: pass ``principal=`` to skip the recomputation
        return self.cov.principal(self.rel_cutoff)

    def estimate(self, y, b_soft=None, soft_variance=0.0):
        if b_soft is None:
            b_soft = np.zeros(self.pattern.n_data, dtype=complex)
        d = build_feedback_matrix(self.pattern, self.basis, b_soft)
        lam = build_lambda(self.pattern, soft_variance)
        if self.rel_cutoff is None or self.sigma2 <= 0:
            return wiener_dense(np.asarray(y), d, lam, self.cov.matrix, self.sigma2)
        eigvals, U = self._principal
        return wiener_lowrank(np.asarray(y), d, lam, eigvals, U, self.sigma2)


class PilotOnlyEstimator(WienerEstimator):
    """Wiener estimator that ignores decoder feedback."""

    def estimate(self, y, b_soft=None, soft_variance=0.0):
        return super().estimate(y, None, 0.0)


def estimate_iteratively(
    y: np.ndarray, estimator: WienerEstimator, feedback: list[tuple[np.ndarray, float]]
) -> list[np.ndarray]:
    """Pilot-only estimate followed by one refined estimate per feedback pair."""
    estimates = [estimator.estimate(y)]
    for b_soft, var in feedback:
        estimates.append(estimator.estimate(y, b_soft, var))
    return estimates
