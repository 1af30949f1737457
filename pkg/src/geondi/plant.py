"""Rigid-body rotational dynamics with linear rotational damping.

``omega' = J^{-1} (tau - omega x J omega - kappa omega)`` and ``R' = R hat(omega)``.
Rates are integrated with RK4; the attitude is advanced on the group with the
RK4-weighted average rate, so ``R`` stays orthonormal without renormalizing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import cross, dexp_inv, exp_so3, project_to_so3


@dataclass(frozen=True, eq=False)
class PlantParams:
    J: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3) or not np.allclose(J, J.T):
            raise ValueError("inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(J)[0] <= 0.0:
            raise ValueError("inertia must be positive definite")
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.ndim == 0:
            kappa = float(kappa) * np.eye(3)
        elif kappa.shape == (3,):
            kappa = np.diag(kappa)
        if kappa.shape != (3, 3):
            raise ValueError("kappa must be a scalar, a 3-vector or a 3x3 matrix")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "J_inv", np.linalg.inv(J))


@dataclass(frozen=True, eq=False)
class BodyState:
    R: np.ndarray
    omega: np.ndarray


def body_derivative(state: BodyState, tau, params: PlantParams) -> np.ndarray:
    return rate_derivative(state.omega, tau, params)


def rate_derivative(omega, tau, params: PlantParams) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    Jw = params.J @ omega
    return params.J_inv @ (np.asarray(tau, dtype=float) - cross(omega, Jw) - params.kappa @ omega)


def integrate_step(
    state: BodyState, tau, params: PlantParams, dt: float, project: bool = False
) -> BodyState:
    """Advance one step with ``tau`` held constant."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    # Runge-Kutta-Munthe-Kaas: stage rotations R0 exp(theta_i), increments through dexp_inv
    w0 = np.asarray(state.omega, dtype=float)
    k1 = rate_derivative(w0, tau, params)
    u1 = dt * w0
    w2 = w0 + 0.5 * dt * k1
    k2 = rate_derivative(w2, tau, params)
    u2 = dt * dexp_inv(0.5 * u1, w2)
    w3 = w0 + 0.5 * dt * k2
    k3 = rate_derivative(w3, tau, params)
    u3 = dt * dexp_inv(0.5 * u2, w3)
    w4 = w0 + dt * k3
    u4 = dt * dexp_inv(u3, w4)
    k4 = rate_derivative(w4, tau, params)
    omega = w0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    R = state.R @ exp_so3((u1 + 2 * u2 + 2 * u3 + u4) / 6.0)
    if project:
        R = project_to_so3(R)
    return BodyState(R, omega)


def kinetic_energy(omega, params: PlantParams) -> float:
    omega = np.asarray(omega, dtype=float)
    return 0.5 * float(omega @ params.J @ omega)
