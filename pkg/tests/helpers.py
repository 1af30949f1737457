"""Shared simulation helpers for the test suite."""

import numpy as np
from scipy.integrate import solve_ivp

from geondi.controllers import RateController, rate_closed_loop_matrix
from geondi.plant import PlantParams, rate_derivative


def rate_loop_rk4(ctrl: RateController, plant: PlantParams, omega0, omega_ref_fn, dt, T):
    """Nonlinear plant plus rate controller, both evaluated at every RK4 stage."""
    n = ctrl.n_states

    def f(t, y):
        w, x = y[:3], y[3:]
        ref = omega_ref_fn(t)
        tau = ctrl.torque(x, w, ref)
        return np.concatenate([rate_derivative(w, tau, plant), ctrl.state_derivative(x, w, ref)])

    y = np.concatenate([np.asarray(omega0, float), np.zeros(n)])
    ts, ws = [0.0], [y[:3].copy()]
    t = 0.0
    for k in range(int(round(T / dt))):
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * dt
        ts.append(t)
        ws.append(y[:3].copy())
    return np.array(ts), np.array(ws)


def rate_loop_linear(rate, omega0, omega_ref_fn, ts):
    """Linear closed loop of the exactly inverted rate dynamics, tight adaptive integration."""
    n = rate.n_states
    Acl = rate_closed_loop_matrix(rate)
    B_ref = np.vstack([rate.B[:, 3:], rate.D[:, 3:]])
    sol = solve_ivp(
        lambda t, z: Acl @ z + B_ref @ omega_ref_fn(t),
        (ts[0], ts[-1]),
        np.concatenate([np.zeros(n), np.asarray(omega0, float)]),
        t_eval=ts,
        rtol=1e-12,
        atol=1e-13,
        method="DOP853",
    )
    return sol.y[n:].T
