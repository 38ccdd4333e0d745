"""Numerical kernel for SO(3) and its Lie algebra.

Rotations are plain ``(3, 3)`` float arrays. Most functions broadcast over
leading axes, so a stack of ``N`` attitudes is an ``(N, 3, 3)`` array and a
stack of angular velocities is ``(N, 3)``.
"""
from __future__ import annotations

import numpy as np

ORTHO_TOL = 1e-9
SMALL_ANGLE = 1e-8


class NotSkewSymmetricError(ValueError):
    """Raised when a matrix handed to ``vex`` is not in so(3)."""


class NotARotationError(ValueError):
    """Raised when a matrix fails the SO(3) membership check."""


class ProjectionError(ValueError):
    """Raised when a matrix cannot be projected onto SO(3).

    In practice this means the integrator has blown up (non-finite entries,
    a reflection, or a rank-deficient attitude).
    """


def hat(v):
    """Map ``v`` (shape ``(..., 3)``) to the skew matrix with ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vex(S, tol=ORTHO_TOL):
    """Inverse of :func:`hat`.

    Raises :class:`NotSkewSymmetricError` if ``S + S^T`` exceeds ``tol`` in
    any entry.
    """
    S = np.asarray(S, dtype=float)
    asym = np.abs(S + np.swapaxes(S, -1, -2))
    if np.any(asym > tol):
        raise NotSkewSymmetricError(
            f"matrix is not skew-symmetric (max |S + S^T| = {asym.max():.3e})"
        )
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def pa(M):
    """Skew-symmetric part ``(M - M^T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M - np.swapaxes(M, -1, -2))


def psi(C):
    """``vex(pa(C))``, read directly off the off-diagonal entries."""
    C = np.asarray(C, dtype=float)
    return 0.5 * np.stack(
        [
            C[..., 2, 1] - C[..., 1, 2],
            C[..., 0, 2] - C[..., 2, 0],
            C[..., 1, 0] - C[..., 0, 1],
        ],
        axis=-1,
    )


def check_rotation(R, tol=ORTHO_TOL):
    """Return ``R`` as a float array, raising if it is not in SO(3) within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise NotARotationError(f"expected (..., 3, 3), got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NotARotationError("rotation has non-finite entries")
    drift = ortho_drift(R)
    if np.any(drift > tol):
        raise NotARotationError(f"||R^T R - I||_F = {np.max(drift):.3e} exceeds {tol:g}")
    det = np.linalg.det(R)
    if np.any(np.abs(det - 1.0) > tol):
        raise NotARotationError(f"det(R) = {det} is not 1")
    return R


def ortho_drift(R):
    """Frobenius distance ``||R^T R - I||_F`` (broadcasts)."""
    R = np.asarray(R, dtype=float)
    G = np.swapaxes(R, -1, -2) @ R
    return np.linalg.norm(G - np.eye(3), axis=(-2, -1))


def rodrigues(theta, axis):
    """Angle-axis rotation ``I + sin(t) [v]x + (1 - cos(t)) [v]x^2``.

    ``axis`` must be a unit vector (within 1e-9); anything else raises
    ``ValueError``.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {axis.shape}")
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError(f"rotation axis must be unit length, got norm {np.linalg.norm(axis)}")
    K = hat(axis)
    R = np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)
    return check_rotation(R)


def _exp_coeffs(theta):
    # sin(t)/t and (1 - cos t)/t^2, the latter as 2 sin^2(t/2)/t^2 to avoid cancellation
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    half = np.sin(0.5 * safe) / safe
    b = np.where(small, 0.5 - theta**2 / 24.0, 2.0 * half * half)
    return a, b


def exp_so3(v):
    """Matrix exponential of ``hat(v)``; broadcasts over leading axes of ``v``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    a, b = _exp_coeffs(theta)
    K = hat(v)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def right_jacobian_inv(theta_vec, w):
    """Solve ``J_r(theta) x = w`` for ``x``.

    If ``R(t) = R0 exp(theta(t))`` and ``R^T dR/dt = hat(w)`` then
    ``dtheta/dt = right_jacobian_inv(theta, w)``.  This is the body-frame
    form of the inverse exponential differential used by the Lie-group
    Runge-Kutta stages.
    """
    theta_vec = np.asarray(theta_vec, dtype=float)
    w = np.asarray(w, dtype=float)
    t = np.linalg.norm(theta_vec, axis=-1)
    small = t < 1e-4
    safe = np.where(small, 1.0, t)
    # 1/t^2 - (1 + cos t) / (2 t sin t), series 1/12 + t^2/720 near zero
    c = np.where(
        small,
        1.0 / 12.0 + t**2 / 720.0,
        1.0 / safe**2 - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    tw = np.cross(theta_vec, w)
    return w + 0.5 * tw + c[..., None] * np.cross(theta_vec, tw)


def project_to_so3(M):
    """Nearest rotation to ``M`` in Frobenius norm (orthogonal polar factor).

    Requires ``det(M) > 0`` and full rank; otherwise :class:`ProjectionError`.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ProjectionError("matrix has non-finite entries")
    det = np.linalg.det(M)
    if np.any(det <= 0.0):
        raise ProjectionError(f"det(M) = {det} is not positive")
    U, s, Vt = np.linalg.svd(M)
    if np.any(s[..., -1] <= 1e-12 * s[..., 0]):
        raise ProjectionError("matrix is rank deficient")
    # det(M) > 0 already forces det(U Vt) = +1; the flip only guards roundoff
    d = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, -1] *= d[..., None]
    return U @ Vt


def quat_to_matrix(q):
    """Rotation matrix of unit quaternion(s) ``q = (w, x, y, z)``."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def random_rotation(rng, size=None):
    """Haar-uniform rotation(s) drawn from ``rng`` (a ``numpy.random.Generator``).

    A normalized 4D Gaussian is uniform on the unit quaternions, which maps
    to the Haar measure on SO(3).
    """
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return quat_to_matrix(q)


def attitude_error(R):
    """Normalized attitude distance ``tr(I - R) / 4`` in ``[0, 1]``.

    Evaluated as ``||R - I||_F^2 / 8`` (equal for rotations), which keeps
    full relative precision at small angles.
    """
    R = np.asarray(R, dtype=float)
    D = R - np.eye(3)
    return np.sum(D * D, axis=(-2, -1)) / 8.0
