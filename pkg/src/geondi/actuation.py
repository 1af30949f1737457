"""Hexacopter actuation: pseudo-inverse allocation, first-order motors with saturation.

Everything runs in squared-rotor-speed coordinates ``u = w_rotor**2`` so the
map from rotor commands to thrust and body torque is linear. Body axes are
x forward, y right, z down; rotor thrust points along ``-z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RotorGeometry:
    positions: np.ndarray  # (6, 3) body-frame rotor hubs [m]
    spin: np.ndarray  # (6,) +1 / -1
    k_f: float  # thrust coefficient [N / (rad/s)^2]
    k_m: float  # drag-torque coefficient [N m / (rad/s)^2]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        spin = np.asarray(self.spin, dtype=float)
        if pos.shape[1] != 3 or spin.shape != (pos.shape[0],):
            raise ValueError("positions must be (n, 3) with one spin direction per rotor")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "spin", spin)


def hexagon(arm: float = 0.3, k_f: float = 1.0e-5, k_m: float = 1.6e-7) -> RotorGeometry:
    """Regular hexagon, rotor 0 on the +x arm, alternating spin directions."""
    angles = np.arange(6) * math.pi / 3.0
    positions = np.column_stack([arm * np.cos(angles), arm * np.sin(angles), np.zeros(6)])
    spin = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    return RotorGeometry(positions, spin, k_f, k_m)


def effectiveness_matrix(g: RotorGeometry) -> np.ndarray:
    """Rows ``(thrust, tau_x, tau_y, tau_z)`` per unit squared rotor speed."""
    x, y = g.positions[:, 0], g.positions[:, 1]
    return np.vstack(
        [
            g.k_f * np.ones(len(x)),
            -g.k_f * y,
            g.k_f * x,
            -g.spin * g.k_m,
        ]
    )


def allocation_matrix(B: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of ``B`` after a rank check; reuse it inside loops."""
    B = np.asarray(B, dtype=float)
    if np.linalg.matrix_rank(B) < B.shape[0]:
        raise ValueError("effectiveness matrix is rank deficient; check the rotor geometry")
    return np.linalg.pinv(B)


def allocate(tau_cmd, thrust_cmd: float, B: np.ndarray) -> np.ndarray:
    """Minimum-norm squared-speed command reproducing ``(thrust, tau)``."""
    c = np.concatenate([[thrust_cmd], np.asarray(tau_cmd, dtype=float)])
    return allocation_matrix(B) @ c


@dataclass(frozen=True, eq=False)
class MotorParams:
    time_constant: float = 0.02
    w_min: float = 100.0
    w_max: float = 1000.0

    @property
    def u_min(self) -> float:
        return self.w_min**2

    @property
    def u_max(self) -> float:
        return self.w_max**2


@dataclass(frozen=True, eq=False)
class ActuatorState:
    u: np.ndarray  # squared rotor speeds [rad^2/s^2]
    params: MotorParams


def saturate(cmd, params: MotorParams) -> np.ndarray:
    return np.clip(np.asarray(cmd, dtype=float), params.u_min, params.u_max)


def motor_derivative(u, cmd, params: MotorParams) -> np.ndarray:
    return (saturate(cmd, params) - u) / params.time_constant


def motor_step(a: ActuatorState, cmd, dt: float) -> ActuatorState:
    """Exact first-order response over ``dt`` toward the clamped command."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    target = saturate(cmd, a.params)
    decay = math.exp(-dt / a.params.time_constant)
    u = target + (a.u - target) * decay
    return ActuatorState(np.clip(u, a.params.u_min, a.params.u_max), a.params)


def applied_torque(a: ActuatorState, B: np.ndarray) -> tuple[float, np.ndarray]:
    out = B @ a.u
    return float(out[0]), out[1:]


def hover_command(B: np.ndarray, weight: float) -> np.ndarray:
    return allocate(np.zeros(3), weight, B)
