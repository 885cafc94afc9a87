"""Spectral quantities of consensus systems and the derived rate constants.

Everything downstream of the schedules hangs off three numbers per graph:
the smallest positive eigenvalue of A^T A (equivalently of W = A^T A / m and
of the Laplacian, all related by fixed factors) and the sampling constant nu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import IncidenceSystem

# relative cutoff separating numerical zeros from the positive spectrum
RANK_TOL_REL = 1e-9
# dense eigensolver guardrail; desk-scale systems stay far below this
DENSE_DIM_CAP = 2000


class ZeroMatrixError(ValueError):
    """The matrix has no eigenvalue above the rank tolerance."""


@dataclass(frozen=True)
class SpectralSummary:
    """Spectral constants of one incidence system."""

    n: int
    m: int
    lambda_min_plus_ata: float  # smallest positive eigenvalue of A^T A
    lambda_min_plus_w: float    # same for W = A^T A / m
    lambda_min_plus_l: float    # same for the Laplacian
    nu: float


@dataclass(frozen=True)
class TheoreticalRates:
    """Per-iteration contraction constants implied by a summary.

    rho bounds the expected squared error of plain RK; sigma1/sigma2 govern
    the accelerated recurrence-schedule bound (lam is the schedule's lambda
    parameter); option2_rate is the geometric factor in the Lyapunov bound
    for the fixed-constant schedule.
    """

    rho: float
    sigma1: float
    sigma2: float
    option2_rate: float
    lam: float


def _checked_symmetric(matrix: np.ndarray) -> np.ndarray:
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got shape {mat.shape}")
    if mat.shape[0] > DENSE_DIM_CAP:
        raise ValueError(f"dimension {mat.shape[0]} exceeds dense cap {DENSE_DIM_CAP}")
    if not np.isfinite(mat).all():
        raise ValueError("matrix has non-finite entries")
    if np.abs(mat - mat.T).max() > 1e-10:
        raise ValueError("matrix is not symmetric within 1e-10")
    return 0.5 * (mat + mat.T)


def eig_min_plus(matrix: np.ndarray, rank_tolerance: float | None = None) -> float:
    """Smallest eigenvalue strictly above the rank tolerance.

    The tolerance defaults to RANK_TOL_REL times the largest eigenvalue;
    pass an explicit nonnegative cutoff to override. Raises ZeroMatrixError
    when the whole spectrum sits at or below the cutoff.
    """
    sym = _checked_symmetric(matrix)
    eigs = np.linalg.eigvalsh(sym)
    if rank_tolerance is None:
        rank_tolerance = RANK_TOL_REL * max(float(eigs[-1]), 0.0)
    elif rank_tolerance < 0:
        raise ValueError("rank_tolerance must be nonnegative")
    positive = eigs[eigs > rank_tolerance]
    if positive.size == 0:
        raise ZeroMatrixError("matrix has no eigenvalue above the rank tolerance")
    return float(positive[0])


def _eigh_split(matrix: np.ndarray, rank_tolerance: float | None = None):
    """Eigendecomposition plus the boolean mask of the positive spectrum."""
    sym = _checked_symmetric(matrix)
    eigs, vecs = np.linalg.eigh(sym)
    if rank_tolerance is None:
        rank_tolerance = RANK_TOL_REL * max(float(eigs[-1]), 0.0)
    pos = eigs > rank_tolerance
    if not pos.any():
        raise ZeroMatrixError("matrix has no eigenvalue above the rank tolerance")
    return eigs, vecs, pos


def psd_pinv(matrix: np.ndarray, rank_tolerance: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix."""
    eigs, vecs, pos = _eigh_split(matrix, rank_tolerance)
    inv = np.where(pos, 1.0 / np.where(pos, eigs, 1.0), 0.0)
    return (vecs * inv) @ vecs.T


def compute_nu(system: IncidenceSystem) -> float:
    """Sampling constant nu of the incidence system.

    nu is the largest Rayleigh quotient u'Mu / u'Wu over u in Range(A'),
    with M = sum_i A_i' A_i (A'A)^+ A_i' A_i built from the unit rows and
    W = A'A/m. Substituting u = W^{+/2} z reduces it to the top eigenvalue
    of P W^{+/2} M W^{+/2} P with P the projector onto Range(A').
    """
    a = system.a
    m = a.shape[0]
    ata = a.T @ a
    eigs, vecs, pos = _eigh_split(ata)
    pinv_ata = (vecs * np.where(pos, 1.0 / np.where(pos, eigs, 1.0), 0.0)) @ vecs.T
    # leverage-style weights A_i (A'A)^+ A_i', one per row
    lever = np.einsum("ij,jk,ik->i", a, pinv_ata, a)
    mom = a.T @ (a * lever[:, None])
    # W = ata/m shares eigenvectors with ata, eigenvalues scaled by 1/m
    w_inv_half = (vecs * np.where(pos, np.sqrt(m / np.where(pos, eigs, 1.0)), 0.0)) @ vecs.T
    proj = (vecs * pos.astype(float)) @ vecs.T
    core = proj @ w_inv_half @ mom @ w_inv_half @ proj
    top = np.linalg.eigvalsh(0.5 * (core + core.T))[-1]
    return float(top)


def w_pinv(system: IncidenceSystem) -> np.ndarray:
    """Pseudoinverse of W = A'A/m, the Gram weighting of the Lyapunov norm."""
    m = system.a.shape[0]
    return psd_pinv(system.a.T @ system.a) * m


def summarize(system: IncidenceSystem) -> SpectralSummary:
    """All spectral constants of one system, each computed from its own matrix."""
    a = system.a
    m, n = a.shape
    ata = a.T @ a
    return SpectralSummary(
        n=n,
        m=m,
        lambda_min_plus_ata=eig_min_plus(ata),
        lambda_min_plus_w=eig_min_plus(ata / m),
        lambda_min_plus_l=eig_min_plus(system.laplacian),
        nu=compute_nu(system),
    )


def rates(summary: SpectralSummary, lam: float | None = None) -> TheoreticalRates:
    """Contraction constants for a schedule parameter lam.

    lam defaults to the smallest positive eigenvalue of A^T A, the value the
    recurrence schedule is tuned to; anything in (0, lambda_min_plus_ata]
    (with a hair of rounding slack) is accepted.
    """
    if lam is None:
        lam = summary.lambda_min_plus_ata
    if not 0.0 < lam <= summary.lambda_min_plus_ata * (1.0 + 1e-12):
        raise ValueError(
            f"lam must lie in (0, {summary.lambda_min_plus_ata!r}], got {lam!r}")
    m = summary.m
    half = np.sqrt(lam) / (2.0 * m)
    # both rates live in [0, 1) mathematically; clamp away eigensolver dust
    return TheoreticalRates(
        rho=max(0.0, 1.0 - summary.lambda_min_plus_ata / m),
        sigma1=1.0 + half,
        sigma2=1.0 - half,
        option2_rate=max(0.0, 1.0 - float(np.sqrt(summary.lambda_min_plus_w / summary.nu))),
        lam=float(lam),
    )
