"""Inertial reference directions and their body-frame measurements."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EIG_GAP_TOL = 1e-6


class MeasurementAssumptionError(ValueError):
    pass


class CollinearVectorsError(MeasurementAssumptionError):
    pass


class RepeatedEigenvalueError(MeasurementAssumptionError):
    pass


@dataclass(frozen=True)
class InertialVectorSet:
    """Unit directions ``a_l`` with weights ``rho_l`` and Gram ``A = sum rho_l a_l a_l^T``.

    ``eigenvalues`` are ascending; ``eigenvectors[:, b]`` pairs with
    ``eigenvalues[b]`` and has its largest-magnitude component positive.
    """

    vectors: np.ndarray
    weights: np.ndarray
    gram: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.weights)

    def eigenpairs(self):
        return [(float(self.eigenvalues[b]), self.eigenvectors[:, b]) for b in range(3)]


def build_vector_set(vectors, weights, eig_gap_tol=EIG_GAP_TOL):
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    weights = np.asarray(weights, dtype=float).ravel()
    if vectors.shape[-1] != 3 or vectors.shape[0] != weights.shape[0]:
        raise ValueError(f"need n vectors of length 3 and n weights, got {vectors.shape} and {weights.shape}")
    if len(weights) < 2:
        raise MeasurementAssumptionError("at least two inertial vectors are required")
    if np.any(np.abs(np.linalg.norm(vectors, axis=1) - 1.0) > 1e-9):
        raise ValueError("inertial vectors must be unit length")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")

    cross = np.cross(vectors[:, None, :], vectors[None, :, :])
    if np.max(np.linalg.norm(cross, axis=-1)) <= 1e-9:
        raise CollinearVectorsError("all inertial vectors are collinear; at least two must be non-collinear")

    A = np.einsum("l,li,lj->ij", weights, vectors, vectors)
    lam, U = np.linalg.eigh(A)
    gaps = np.diff(lam)
    if np.any(gaps <= eig_gap_tol):
        raise RepeatedEigenvalueError(
            f"A = sum rho a a^T must have three distinct eigenvalues, got {lam} (gap tol {eig_gap_tol:g})"
        )
    idx = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[idx, range(3)])
    return InertialVectorSet(vectors, weights, A, lam, U)


def measure(vs, R):
    """Body-frame measurements ``b_l = R^T a_l``; shape ``(..., n, 3)`` for ``R`` of shape ``(..., 3, 3)``."""
    return np.einsum("...ji,lj->...li", np.asarray(R, dtype=float), vs.vectors)
