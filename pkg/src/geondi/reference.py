"""Double-flip attitude command and a second-order geometric reference filter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .so3 import attitude_error_vector, exp_so3, hat

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


def raw_maneuver(t: float) -> np.ndarray:
    """Two roll flips on ``[0, 2]`` s, two pitch flips on ``(2.5, 4.5]`` s, identity otherwise."""
    if 0.0 <= t <= 2.0:
        return exp_so3(2.0 * math.pi * t * E1)
    if 2.5 < t <= 4.5:
        return exp_so3(2.0 * math.pi * (t - 2.5) * E2)
    return np.eye(3)


def hold(R_target: np.ndarray):
    R_target = np.asarray(R_target, dtype=float)
    return lambda t: R_target


@dataclass(frozen=True, eq=False)
class ReferenceSample:
    R_d: np.ndarray
    omega_d: np.ndarray
    omega_d_dot: np.ndarray
    t: float


@dataclass(frozen=True)
class FilterParams:
    natural_frequency: float = 15.0
    damping: float = 0.707

    @property
    def kp(self) -> float:
        return self.natural_frequency**2

    @property
    def kd(self) -> float:
        return 2.0 * self.damping * self.natural_frequency


def filter_acceleration(R_d, omega_d, target, p: FilterParams) -> np.ndarray:
    """``-kp * e_R(target^T R_d) - kd * omega_d``."""
    e = attitude_error_vector(np.asarray(target).T @ R_d)
    return -p.kp * e - p.kd * np.asarray(omega_d)


def filter_step(state: ReferenceSample, target_fn, dt: float, p: FilterParams = FilterParams()) -> ReferenceSample:
    """Advance the filter by one RK4 step; ``target_fn(t)`` gives the raw command."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    R0, w0, t0 = state.R_d, state.omega_d, state.t
    k1 = filter_acceleration(R0, w0, target_fn(t0), p)
    w2 = w0 + 0.5 * dt * k1
    k2 = filter_acceleration(R0 @ exp_so3(0.5 * dt * w0), w2, target_fn(t0 + 0.5 * dt), p)
    w3 = w0 + 0.5 * dt * k2
    k3 = filter_acceleration(R0 @ exp_so3(0.5 * dt * w2), w3, target_fn(t0 + 0.5 * dt), p)
    w4 = w0 + dt * k3
    k4 = filter_acceleration(R0 @ exp_so3(dt * w3), w4, target_fn(t0 + dt), p)
    omega = w0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    R = R0 @ exp_so3(dt * (w0 + 2 * w2 + 2 * w3 + w4) / 6.0)
    t = t0 + dt
    return ReferenceSample(R, omega, filter_acceleration(R, omega, target_fn(t), p), t)


def initial_sample(R0=None, target_fn=None, p: FilterParams = FilterParams()) -> ReferenceSample:
    R0 = np.eye(3) if R0 is None else np.asarray(R0, dtype=float)
    w0 = np.zeros(3)
    acc = np.zeros(3) if target_fn is None else filter_acceleration(R0, w0, target_fn(0.0), p)
    return ReferenceSample(R0, w0, acc, 0.0)


def kinematic_residual(R_prev, R_next, R_mid, omega_mid, dt: float) -> float:
    """Central-difference mismatch of ``R_d' = R_d hat(omega_d)``."""
    return float(np.max(np.abs((R_next - R_prev) / (2.0 * dt) - R_mid @ hat(omega_mid))))
