"""Continuous-time state-space blocks and the few operations the controllers need.

Scalar transfer functions are realized in controllable canonical form and then
composed, so the matrices handed to the LMI assembly are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import signal
from scipy.linalg import block_diag, matrix_balance


class PoleHitError(ValueError):
    """Raised when a transfer function is evaluated at (or next to) a pole."""


def _as2d(M, rows: int, cols: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((rows, cols))
    return M.reshape(rows, cols)


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x' = A x + B u``, ``y = C x + D u``. ``n == 0`` is a pure gain."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0] if A.ndim == 2 else int(math.isqrt(A.size))
        A = _as2d(A, n, n)
        B = _as2d(self.B, n, m)
        C = _as2d(self.C, p, n)
        if A.shape != (n, n) or B.shape != (n, m) or C.shape != (p, n):
            raise ValueError("inconsistent state-space dimensions")
        for name, val in zip("ABCD", (A, B, C, D)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def __repr__(self) -> str:
        return (
            f"StateSpace(states={self.n_states}, inputs={self.n_inputs}, "
            f"outputs={self.n_outputs})"
        )


def gain(K) -> StateSpace:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    return StateSpace(np.zeros((0, 0)), np.zeros((0, K.shape[1])), np.zeros((K.shape[0], 0)), K)


def from_transfer(num: Sequence[float], den: Sequence[float]) -> StateSpace:
    """SISO proper transfer function in controllable canonical form."""
    num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
    den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=float)), "f")
    if den.size == 0:
        raise ValueError("zero denominator")
    if num.size > den.size:
        raise ValueError("transfer function is improper")
    if den.size == 1:
        return gain(num[-1] / den[0] if num.size else 0.0)
    A, B, C, D = signal.tf2ss(num if num.size else [0.0], den)
    return StateSpace(A, B, C, D)


def make_lead_lag(kp: float, ki: float, kd: float, eps: float, tau_f: float) -> StateSpace:
    """``kp + ki/(s + eps) + kd*s/(tau_f*s + 1)`` with only the states it needs."""
    if not tau_f > 0.0:
        raise ValueError("tau_f must be positive")
    if eps < 0.0:
        raise ValueError("eps must be non-negative")
    num = np.array([kp])
    den = np.array([1.0])
    if ki != 0.0:
        lag = np.array([1.0, eps])
        num = np.polyadd(np.polymul(num, lag), np.polymul([ki], den))
        den = np.polymul(den, lag)
    if kd != 0.0:
        filt = np.array([tau_f, 1.0])
        num = np.polyadd(np.polymul(num, filt), np.polymul([kd, 0.0], den))
        den = np.polymul(den, filt)
    return from_transfer(num, den)


def pade_coefficients(T: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal Pade numerator/denominator of ``exp(-s T)``, highest power first."""
    n = order
    c = [
        math.factorial(2 * n - k) * math.factorial(n)
        / (math.factorial(2 * n) * math.factorial(k) * math.factorial(n - k))
        for k in range(n + 1)
    ]
    num = np.array([c[k] * (-T) ** k for k in range(n + 1)])[::-1]
    den = np.array([c[k] * T**k for k in range(n + 1)])[::-1]
    return num, den


def pade_delay(T: float, order: int = 3) -> StateSpace:
    if not T > 0.0:
        raise ValueError("delay must be positive")
    if order < 1:
        raise ValueError("Pade order must be at least 1")
    num, den = pade_coefficients(T, order)
    return from_transfer(num, den)


def lag_filter(cutoff_hz: float) -> StateSpace:
    """First-order low-pass ``1 / (s/wc + 1)`` with ``wc = 2*pi*cutoff``."""
    if not cutoff_hz > 0.0:
        raise ValueError("cutoff must be positive")
    wc = 2.0 * math.pi * cutoff_hz
    return from_transfer([wc], [1.0, wc])


def scale(sys: StateSpace, k: float) -> StateSpace:
    """Scale the output of ``sys`` by ``k``."""
    return StateSpace(sys.A, sys.B, k * sys.C, k * sys.D)


def series(a: StateSpace, b: StateSpace) -> StateSpace:
    """Signal passes through ``a`` then ``b``; transfer ``G_b @ G_a``."""
    if a.n_outputs != b.n_inputs:
        raise ValueError(
            f"series: {a.n_outputs} outputs cannot feed {b.n_inputs} inputs"
        )
    na, nb = a.n_states, b.n_states
    A = np.block([[a.A, np.zeros((na, nb))], [b.B @ a.C, b.A]])
    B = np.vstack([a.B, b.B @ a.D])
    C = np.hstack([b.D @ a.C, b.C])
    return StateSpace(A, B, C, b.D @ a.D)


def diagonal(blocks: Sequence[StateSpace]) -> StateSpace:
    """Block-diagonal stacking: independent channels side by side."""
    if not blocks:
        raise ValueError("diagonal needs at least one block")
    A = block_diag(*[b.A for b in blocks]) if any(b.n_states for b in blocks) else None
    n = sum(b.n_states for b in blocks)
    m = sum(b.n_inputs for b in blocks)
    p = sum(b.n_outputs for b in blocks)
    B = np.zeros((n, m))
    C = np.zeros((p, n))
    D = np.zeros((p, m))
    i = j = k = 0
    for b in blocks:
        B[i : i + b.n_states, j : j + b.n_inputs] = b.B
        C[k : k + b.n_outputs, i : i + b.n_states] = b.C
        D[k : k + b.n_outputs, j : j + b.n_inputs] = b.D
        i += b.n_states
        j += b.n_inputs
        k += b.n_outputs
    return StateSpace(A if A is not None else np.zeros((0, 0)), B, C, D)


def sum_inputs(a: StateSpace, b: StateSpace) -> StateSpace:
    """``y = a(u1) + b(u2)`` with stacked input ``u = [u1; u2]``."""
    if a.n_outputs != b.n_outputs:
        raise ValueError("sum_inputs: output widths differ")
    d = diagonal([a, b])
    return StateSpace(d.A, d.B, np.hstack([a.C, b.C]), np.hstack([a.D, b.D]))


def permute_inputs(sys: StateSpace, order: Sequence[int]) -> StateSpace:
    order = list(order)
    if sorted(order) != list(range(sys.n_inputs)):
        raise ValueError("order must be a permutation of the input indices")
    return StateSpace(sys.A, sys.B[:, order], sys.C, sys.D[:, order])


def similarity(sys: StateSpace, T) -> StateSpace:
    """Realization in coordinates ``z = T x``."""
    T = np.asarray(T, dtype=float)
    Ti = np.linalg.inv(T)
    return StateSpace(T @ sys.A @ Ti, T @ sys.B, sys.C @ Ti, sys.D)


def derivative(sys: StateSpace, x, u) -> np.ndarray:
    return sys.A @ x + sys.B @ u


def step(sys: StateSpace, x, u, dt: float) -> np.ndarray:
    """One classical RK4 step of ``x' = A x + B u`` with ``u`` held over the step."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    if sys.n_states == 0:
        return x.copy()
    bu = sys.B @ np.asarray(u, dtype=float)
    A = sys.A
    k1 = A @ x + bu
    k2 = A @ (x + 0.5 * dt * k1) + bu
    k3 = A @ (x + 0.5 * dt * k2) + bu
    k4 = A @ (x + dt * k3) + bu
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def output(sys: StateSpace, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != sys.n_states or u.size != sys.n_inputs:
        raise ValueError(
            f"output: expected state {sys.n_states} and input {sys.n_inputs}, "
            f"got {x.size} and {u.size}"
        )
    return sys.C @ x + sys.D @ u


def is_hurwitz(A) -> tuple[bool, float]:
    """Return ``(stable, spectral_abscissa)``; an empty matrix is trivially stable."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return True, -math.inf
    if A.shape[0] != A.shape[1]:
        raise ValueError("is_hurwitz needs a square matrix")
    abscissa = float(np.max(np.linalg.eigvals(A).real))
    return abscissa < 0.0, abscissa


def transfer_eval(sys: StateSpace, s: complex) -> np.ndarray:
    """``C (sI - A)^{-1} B + D`` as a complex ``(p, m)`` matrix."""
    if sys.n_states == 0:
        return sys.D.astype(complex)
    poles = np.linalg.eigvals(sys.A)
    if np.min(np.abs(s - poles)) <= 1e-10 * max(1.0, abs(s)):
        raise PoleHitError(f"s = {s} is a pole of the system")
    M = s * np.eye(sys.n_states) - sys.A
    return sys.C @ np.linalg.solve(M, sys.B.astype(complex)) + sys.D


def bandwidth(
    response: Callable[[float], complex],
    w_min: float = 1e-4,
    w_max: float = 1e6,
    rtol: float = 1e-8,
) -> float:
    """Smallest frequency where ``|response(w)|`` falls through ``1/sqrt(2)``.

    ``response`` maps a frequency in rad/s to the closed-loop gain. Returns
    ``math.inf`` when no crossing exists below ``w_max``.
    """
    level = 1.0 / math.sqrt(2.0)
    grid = np.geomspace(w_min, w_max, 4000)
    mags = np.array([abs(response(w)) for w in grid])
    below = np.flatnonzero(mags < level)
    if below.size == 0:
        return math.inf
    k = below[0]
    if k == 0:
        return float(grid[0])
    lo, hi = grid[k - 1], grid[k]
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi)
        if abs(response(mid)) >= level:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def balance(sys: StateSpace) -> StateSpace:
    """Equivalent realization with a power-of-two diagonal state scaling.

    Canonical-form realizations of delay approximants carry entries spanning
    many decades; balancing keeps the LMI assembly well conditioned.
    """
    if sys.n_states == 0:
        return sys
    _, (scaling, _) = matrix_balance(sys.A, permute=False, separate=True)
    return similarity(sys, np.diag(1.0 / scaling))
