"""Cascaded inversion laws: rate loop, geometric attitude loop, sensor path, Euler baseline.

Each controller exposes its continuous-time pieces (output and state
derivative as functions of an explicit state) so a closed-loop integrator can
evaluate them at every Runge-Kutta stage, plus an ``update`` method that does
one zero-order-hold step on the controller's own state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lti
from .plant import PlantParams
from .so3 import (
    attitude_error,
    attitude_error_vector,
    cross,
)


def _per_axis(value) -> list[float]:
    if np.ndim(value) == 0:
        return [float(value)] * 3
    value = [float(v) for v in value]
    if len(value) != 3:
        raise ValueError("per-axis gains need exactly three entries")
    return value


def compensator(kp, ki=0.0, kd=0.0, eps=0.0, tau_f=1.0) -> lti.StateSpace:
    """Three decoupled ``kp + ki/(s+eps) + kd s/(tau_f s + 1)`` channels."""
    gains = zip(*(_per_axis(v) for v in (kp, ki, kd, eps, tau_f)))
    return lti.diagonal([lti.balance(lti.make_lead_lag(*g)) for g in gains])


def sensor_path(delay: float = 0.005, pade_order: int = 3, lag_hz: float = 100.0) -> lti.StateSpace:
    """Per-channel delay approximant followed by the first-order lag, three channels."""
    if delay > 0.0:
        axis = lti.series(lti.pade_delay(delay, pade_order), lti.lag_filter(lag_hz))
    else:
        axis = lti.lag_filter(lag_hz)
    return lti.diagonal([lti.balance(axis)] * 3)


def rate_realization(comp: lti.StateSpace, sensor: lti.StateSpace | None = None) -> lti.StateSpace:
    """Rate law block with inputs ``[omega; omega_ref]`` acting on ``omega_ref - H omega``.

    The compensator is the one fed back per axis; ``sensor`` (``H``) sits
    between the body rate and the error junction when given.
    """
    if comp.n_inputs != 3 or comp.n_outputs != 3:
        raise ValueError("rate compensator must be 3x3")
    H = sensor if sensor is not None else lti.gain(np.eye(3))
    junction = lti.sum_inputs(lti.scale(H, -1.0), lti.gain(np.eye(3)))
    return lti.series(junction, comp)


def rate_closed_loop_matrix(rate: lti.StateSpace) -> np.ndarray:
    """``[[A, B_w], [C, D_w]]``: closed loop of the exactly inverted rate dynamics."""
    n = rate.n_states
    return np.block([[rate.A, rate.B[:, :3]], [rate.C, rate.D[:, :3]]]) if n else rate.D[:, :3].copy()


@dataclass
class RateController:
    realization: lti.StateSpace
    model: PlantParams
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.realization.n_inputs != 6 or self.realization.n_outputs != 3:
            raise ValueError("rate realization needs inputs (omega, omega_ref) and 3 outputs")
        if self.x is None:
            self.x = np.zeros(self.realization.n_states)

    @property
    def n_states(self) -> int:
        return self.realization.n_states

    def desired_acceleration(self, x, omega, omega_ref) -> np.ndarray:
        return lti.output(self.realization, x, np.concatenate([omega, omega_ref]))

    def torque(self, x, omega, omega_ref, extra=None) -> np.ndarray:
        """Inversion torque; ``extra`` is added to the desired acceleration before ``J``."""
        omega = np.asarray(omega, dtype=float)
        nu = self.desired_acceleration(x, omega, omega_ref)
        if extra is not None:
            nu = nu + extra
        J = self.model.J
        return cross(omega, J @ omega) + self.model.kappa @ omega + J @ nu

    def state_derivative(self, x, omega, omega_ref) -> np.ndarray:
        return lti.derivative(self.realization, x, np.concatenate([omega, omega_ref]))

    def update(self, omega, omega_ref, dt: float, extra=None) -> np.ndarray:
        tau = self.torque(self.x, omega, omega_ref, extra)
        u = np.concatenate([np.asarray(omega, float), np.asarray(omega_ref, float)])
        self.x = lti.step(self.realization, self.x, u, dt)
        return tau

    def supports_tracking_cancellation(self, atol: float = 1e-12) -> bool:
        r = self.realization
        return np.allclose(r.B[:, 3:], -r.B[:, :3], atol=atol) and np.allclose(
            r.D[:, 3:], -r.D[:, :3], atol=atol
        )


def rate_ndi(c: RateController, omega_meas, omega_ref, dt: float, extra=None):
    """Functional form: returns ``(tau, new_state)`` and leaves ``c`` untouched."""
    tau = c.torque(c.x, omega_meas, omega_ref, extra)
    u = np.concatenate([np.asarray(omega_meas, float), np.asarray(omega_ref, float)])
    return tau, lti.step(c.realization, c.x, u, dt)


def tracking_cancellation(R_e, omega_e, omega_d, omega_d_dot) -> np.ndarray:
    """Time derivative of ``R_e^T omega_d``: ``R_e^T omega_d_dot - hat(omega_e) R_e^T omega_d``."""
    R_e = np.asarray(R_e, dtype=float)
    return R_e.T @ np.asarray(omega_d_dot, float) - cross(omega_e, R_e.T @ np.asarray(omega_d, float))


@dataclass
class AttitudeCommand:
    omega_cmd: np.ndarray
    R_e: np.ndarray
    e_R: np.ndarray
    feedforward: np.ndarray


@dataclass
class AttitudeController:
    realization: lti.StateSpace
    feedforward: bool = True
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.realization.n_inputs != 3 or self.realization.n_outputs != 3:
            raise ValueError("attitude realization must map e_R (3) to a rate command (3)")
        if self.x is None:
            self.x = np.zeros(self.realization.n_states)

    @property
    def n_states(self) -> int:
        return self.realization.n_states

    def command(self, x, R_d, R, omega_d) -> AttitudeCommand:
        R_e = attitude_error(R_d, R)
        e_R = attitude_error_vector(R_e)
        ff = R_e.T @ np.asarray(omega_d, float) if self.feedforward else np.zeros(3)
        w = ff + lti.output(self.realization, x, e_R)
        return AttitudeCommand(w, R_e, e_R, ff)

    def state_derivative(self, x, e_R) -> np.ndarray:
        return lti.derivative(self.realization, x, e_R)

    def update(self, R_d, R, omega_d, dt: float) -> np.ndarray:
        cmd = self.command(self.x, R_d, R, omega_d)
        self.x = lti.step(self.realization, self.x, cmd.e_R, dt)
        return cmd.omega_cmd


def attitude_ndi(c: AttitudeController, R_d, R, omega_d, dt: float):
    """Functional form: returns ``(omega_cmd, new_state)``."""
    cmd = c.command(c.x, R_d, R, omega_d)
    return cmd.omega_cmd, lti.step(c.realization, c.x, cmd.e_R, dt)


@dataclass
class SensorModel:
    """Delay approximant plus lag on each body-rate channel; unit DC gain."""

    realization: lti.StateSpace
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros(self.realization.n_states)

    @classmethod
    def default(cls, delay: float = 0.005, pade_order: int = 3, lag_hz: float = 100.0) -> "SensorModel":
        return cls(sensor_path(delay, pade_order, lag_hz))

    def reset(self, omega) -> None:
        """Put the filter at steady state for a constant input ``omega``."""
        r = self.realization
        if r.n_states:
            self.x = np.linalg.solve(r.A, -r.B @ np.asarray(omega, float))

    def output(self, x, omega) -> np.ndarray:
        return lti.output(self.realization, x, omega)

    def state_derivative(self, x, omega) -> np.ndarray:
        return lti.derivative(self.realization, x, omega)

    def sense(self, omega_true, dt: float) -> np.ndarray:
        y = self.output(self.x, omega_true)
        self.x = lti.step(self.realization, self.x, omega_true, dt)
        return y


def sense(m: SensorModel, omega_true, dt: float) -> np.ndarray:
    return m.sense(omega_true, dt)


# --- Euler-angle baseline ----------------------------------------------------


def euler_angles(R) -> np.ndarray:
    """Roll, pitch, yaw of ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
    R = np.asarray(R, dtype=float)
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def euler_to_rotation(phi) -> np.ndarray:
    r, p, y = phi
    cr, sr, cp, sp, cy, sy = math.cos(r), math.sin(r), math.cos(p), math.sin(p), math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def euler_rate_matrix(phi, min_cos: float = 0.0) -> tuple[np.ndarray, bool]:
    """``W`` with ``phi' = W omega``; ``cos(pitch)`` is saturated at ``min_cos``.

    Returns ``(W, saturated)``.
    """
    r, p, _ = phi
    cp = math.cos(p)
    saturated = abs(cp) < min_cos
    if saturated:
        cp = math.copysign(min_cos, cp if cp != 0.0 else 1.0)
    sr, cr, sp = math.sin(r), math.cos(r), math.sin(p)
    tp = sp / cp
    W = np.array([[1.0, sr * tp, cr * tp], [0.0, cr, -sr], [0.0, sr / cp, cr / cp]])
    return W, saturated


def euler_rate_inverse(phi) -> np.ndarray:
    """``T`` with ``omega = T phi'``; finite everywhere, singular at pitch = +-90 deg."""
    r, p, _ = phi
    sr, cr, sp, cp = math.sin(r), math.cos(r), math.sin(p), math.cos(p)
    return np.array([[1.0, 0.0, -sp], [0.0, cr, sr * cp], [0.0, -sr, cr * cp]])


def wrap_angle(a):
    return (np.asarray(a, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class EulerCommand:
    omega_cmd: np.ndarray
    error: np.ndarray
    singular: bool


@dataclass
class EulerNDI:
    """Cascade outer loop on roll/pitch/yaw with the same compensator family.

    Outer law: ``phi_dot_cmd = phi_dot_d + C x + D e`` with ``e = wrap(phi - phi_d)``;
    the body-rate command is ``T(phi) phi_dot_cmd``. The desired Euler rates
    need ``W(phi_d)``, whose ``1/cos(pitch)`` entries are saturated at
    ``min_cos`` (the event is flagged).
    """

    realization: lti.StateSpace
    feedforward: bool = True
    min_cos: float = 1e-6
    x: np.ndarray = field(default=None)
    singular: bool = False

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros(self.realization.n_states)

    @property
    def n_states(self) -> int:
        return self.realization.n_states

    def command(self, x, R_d, R, omega_d) -> EulerCommand:
        phi = euler_angles(R)
        phi_d = euler_angles(R_d)
        e = wrap_angle(phi - phi_d)
        singular = abs(math.cos(phi[1])) < self.min_cos
        nu = lti.output(self.realization, x, e)
        if self.feedforward:
            W_d, sat = euler_rate_matrix(phi_d, self.min_cos)
            singular = singular or sat
            nu = nu + W_d @ np.asarray(omega_d, float)
        return EulerCommand(euler_rate_inverse(phi) @ nu, e, singular)

    def state_derivative(self, x, error) -> np.ndarray:
        return lti.derivative(self.realization, x, error)

    def update(self, R_d, R, omega_d, dt: float) -> np.ndarray:
        cmd = self.command(self.x, R_d, R, omega_d)
        self.singular = self.singular or cmd.singular
        self.x = lti.step(self.realization, self.x, cmd.error, dt)
        return cmd.omega_cmd


def euler_ndi_baseline(c: EulerNDI, phi_d: Sequence[float], phi: Sequence[float], omega_d, dt: float):
    """Functional form on Euler angles: returns ``(omega_cmd, new_state, singular)``."""
    cmd = c.command(c.x, euler_to_rotation(phi_d), euler_to_rotation(phi), omega_d)
    return cmd.omega_cmd, lti.step(c.realization, c.x, cmd.error, dt), cmd.singular
