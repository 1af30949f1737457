"""Rotation-group kernel: hat/vee, exp/log, chordal error function and its derivatives.

Rotations are plain ``(3, 3)`` float arrays and vectors are ``(3,)`` arrays.
Every function is pure and returns new arrays.
"""

from __future__ import annotations

import math

import numpy as np

_SMALL_ANGLE = 1e-6
_SKEW_TOL = 1e-9


def hat(v) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(v) @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    """Inverse of :func:`hat`. Raises ``ValueError`` if ``S`` is not skew."""
    S = np.asarray(S, dtype=float)
    if S.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {S.shape}")
    sym = 0.5 * (S + S.T)
    if np.max(np.abs(sym)) > _SKEW_TOL:
        raise ValueError("matrix is not skew-symmetric (symmetric part exceeds 1e-9)")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def exp_so3(v) -> np.ndarray:
    """Rodrigues formula; second-order Taylor coefficients below ``1e-6`` rad."""
    v = np.asarray(v, dtype=float)
    x, y, z = v
    theta2 = x * x + y * y + z * z
    theta = math.sqrt(theta2)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    # I + a K + b K^2 with K^2 = v v^T - theta^2 I
    c = 1.0 - b * theta2
    return np.array(
        [
            [c + b * x * x, b * x * y - a * z, b * x * z + a * y],
            [b * x * y + a * z, c + b * y * y, b * y * z - a * x],
            [b * x * z - a * y, b * y * z + a * x, c + b * z * z],
        ]
    )


def cross(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (cheaper than ``np.cross`` for single vectors)."""
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def dexp_inv(theta, v) -> np.ndarray:
    """Rate of the exponential coordinates: ``theta' = dexp_inv(theta, omega)``.

    For ``R = R0 exp(hat(theta))`` with body rate ``omega`` (``R' = R hat(omega)``)
    this is the inverse right Jacobian ``v + theta x v / 2 + c theta x (theta x v)``.
    """
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(v, dtype=float)
    t2 = float(theta @ theta)
    if t2 < 1e-4:
        c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        t = math.sqrt(t2)
        c = 1.0 / t2 - (1.0 + math.cos(t)) / (2.0 * t * math.sin(t))
    tv = cross(theta, v)
    return v + 0.5 * tv + c * cross(theta, tv)


def _rotation_angle(R: np.ndarray, w: np.ndarray) -> float:
    # atan2 of (sin, cos) stays accurate at 0 and pi, where arccos does not
    c = 0.5 * (np.trace(R) - 1.0)
    return math.atan2(float(np.linalg.norm(w)), float(c))


def log_so3(R) -> np.ndarray:
    """Rotation vector ``v`` with ``exp_so3(v) == R`` and ``|v| <= pi``.

    At exactly pi the axis sign is fixed so its first nonzero component is positive.
    """
    R = np.asarray(R, dtype=float)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    theta = _rotation_angle(R, w)
    if theta < _SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    if theta < 0.5 * np.pi:
        return w * (theta / np.sin(theta))

    # Large angles: recover the axis from the symmetric part, which stays
    # well conditioned where sin(theta) -> 0.
    c = np.cos(theta)
    outer = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / np.sqrt(max(outer[k, k], 0.0))
    axis /= np.linalg.norm(axis)
    s = float(axis @ w)
    if abs(s) > 1e-12:
        if s < 0.0:
            axis = -axis
    else:
        first = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
        if first < 0.0:
            axis = -axis
    return theta * axis


def attitude_error(R_d, R) -> np.ndarray:
    """Error rotation ``R_d^T R`` (body frame to desired body frame)."""
    return np.asarray(R_d, dtype=float).T @ np.asarray(R, dtype=float)


def config_error_from_error(R_e) -> float:
    """``0.5 * tr(I - R_e)``, evaluated as ``|I - R_e|_F^2 / 4``.

    The two agree on SO(3); the sum of squares never goes negative and keeps
    full relative precision near the identity, where the trace form cancels.
    """
    D = np.eye(3) - np.asarray(R_e, dtype=float)
    return 0.25 * float(np.sum(D * D))


def config_error(R_d, R) -> float:
    """Configuration error ``0.5 * tr(I - R_d^T R)``, in ``[0, 2]``."""
    return config_error_from_error(attitude_error(R_d, R))


def chordal_metric(R_a, R_b) -> float:
    return float(np.linalg.norm(np.eye(3) - np.asarray(R_a).T @ np.asarray(R_b), "fro") ** 2)


def attitude_error_vector(R_e) -> np.ndarray:
    """``0.5 * vee(R_e - R_e^T)``; equals ``sin(theta) * axis``."""
    R_e = np.asarray(R_e, dtype=float)
    return 0.5 * np.array(
        [R_e[2, 1] - R_e[1, 2], R_e[0, 2] - R_e[2, 0], R_e[1, 0] - R_e[0, 1]]
    )


def error_jacobian(R_e) -> np.ndarray:
    """Map from angular-velocity error to the rate of the error vector."""
    R_e = np.asarray(R_e, dtype=float)
    return 0.5 * (np.trace(R_e) * np.eye(3) - R_e.T)


def angular_velocity_error(omega, R_e, omega_d) -> np.ndarray:
    return np.asarray(omega, dtype=float) - np.asarray(R_e, dtype=float).T @ np.asarray(
        omega_d, dtype=float
    )


def project_to_so3(M) -> np.ndarray:
    """Frobenius-nearest rotation (polar factor). Rejects ``det(M) <= 0``."""
    M = np.asarray(M, dtype=float)
    if not np.linalg.det(M) > 0.0:
        raise ValueError("cannot project a matrix with non-positive determinant onto SO(3)")
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.linalg.norm(R.T @ R - np.eye(3), "fro") <= tol
        and np.linalg.det(R) > 0.0
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)
