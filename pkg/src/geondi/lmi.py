"""Stability LMIs for the cascaded inversion controller and a small dense solver.

Constraints are affine symmetric-matrix functions of named unknown blocks. The
solver maximizes the smallest eigenvalue gap over all constraints with a
log-det barrier Newton method; verdicts are always re-audited by
:func:`verify_certificate`, which only evaluates the constraint builders and
never touches solver internals.

Verdict semantics:

* ``feasible``: a certificate with normalized margin ``>= tol`` was found.
* ``infeasible``: the barrier path converged and the best achievable margin
  (inside the search ball) stays below ``tol``.
* ``indeterminate``: the Newton budget ran out first. A barrier method cannot
  prove infeasibility on its own, so this is kept apart from ``infeasible``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .lti import StateSpace

DEFAULT_TOL = 1e-7


class Sense(enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"


@dataclass(frozen=True)
class Unknown:
    name: str
    rows: int
    cols: int
    symmetric: bool = False

    @property
    def size(self) -> int:
        if self.symmetric:
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols


@dataclass(frozen=True)
class Constraint:
    """``builder(values)`` must return a symmetric matrix affine in the unknowns."""

    name: str
    sense: Sense
    builder: Callable[[Mapping[str, np.ndarray]], np.ndarray]


@dataclass
class LmiProblem:
    unknowns: list[Unknown]
    constraints: list[Constraint]
    name: str = "lmi"

    @property
    def n_scalars(self) -> int:
        return sum(u.size for u in self.unknowns)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        values = {}
        i = 0
        for u in self.unknowns:
            chunk = x[i : i + u.size]
            i += u.size
            if u.symmetric:
                M = np.zeros((u.rows, u.rows))
                M[np.triu_indices(u.rows)] = chunk
                M = M + np.triu(M, 1).T
            else:
                M = chunk.reshape(u.rows, u.cols)
            values[u.name] = M
        return values

    def pack(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        parts = []
        for u in self.unknowns:
            M = np.asarray(values[u.name], dtype=float).reshape(u.rows, u.cols)
            parts.append(M[np.triu_indices(u.rows)] if u.symmetric else M.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def evaluate(self, constraint: Constraint, values: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.asarray(constraint.builder(values), dtype=float)

    def coefficients(self, constraint: Constraint) -> tuple[np.ndarray, np.ndarray]:
        """``(F0, F)`` with ``G(x) = F0 + sum_i x_i F[i]`` in the sense's native sign."""
        m = self.n_scalars
        F0 = self.evaluate(constraint, self.unpack(np.zeros(m)))
        F = np.empty((m,) + F0.shape)
        e = np.zeros(m)
        for i in range(m):
            e[i] = 1.0
            F[i] = self.evaluate(constraint, self.unpack(e)) - F0
            e[i] = 0.0
        return F0, F


@dataclass
class Certificate:
    values: dict[str, np.ndarray]
    margin: float


@dataclass
class MarginReport:
    """Per-constraint eigenvalue gaps; ``margin`` is the normalized minimum."""

    raw: dict[str, float]
    normalized: dict[str, float]

    @property
    def margin(self) -> float:
        return min(self.normalized.values()) if self.normalized else math.inf

    @property
    def raw_margin(self) -> float:
        return min(self.raw.values()) if self.raw else math.inf


@dataclass
class SolveResult:
    status: str
    certificate: Certificate | None
    best_margin: float
    iterations: int
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def verify_certificate(problem: LmiProblem, values: Mapping[str, np.ndarray]) -> MarginReport:
    """Eigenvalue audit of every constraint at the given assignment.

    The gap is ``min eig`` for ``≻ 0`` and ``-max eig`` for ``≺ 0``; the
    normalized gap divides by the Frobenius norm of the instantiated matrix.
    """
    for u in problem.unknowns:
        if u.name not in values:
            raise KeyError(f"assignment is missing unknown {u.name!r}")
    raw, normalized = {}, {}
    for c in problem.constraints:
        G = problem.evaluate(c, values)
        G = 0.5 * (G + G.T)
        eig = np.linalg.eigvalsh(G)
        gap = float(eig[0]) if c.sense is Sense.POSITIVE else float(-eig[-1])
        fro = float(np.linalg.norm(G, "fro"))
        raw[c.name] = gap
        normalized[c.name] = gap / fro if fro > 0.0 else 0.0
    return MarginReport(raw, normalized)


# --- problem assembly -------------------------------------------------------


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def build_attitude_lmi(ctrl: StateSpace) -> LmiProblem:
    """``P ≻ 0`` and ``[[D, *], [P B + C^T/2, A^T P + P A]] ≺ 0`` for the attitude loop."""
    A, B, C, D = ctrl.A, ctrl.B, ctrl.C, ctrl.D
    n = ctrl.n_states
    if n == 0:
        return LmiProblem(
            [], [Constraint("Q", Sense.NEGATIVE, lambda v: _sym(D))], name="attitude"
        )

    def q(v):
        P = v["P"]
        off = P @ B + 0.5 * C.T
        return np.block([[_sym(D), off.T], [off, A.T @ P + P @ A]])

    return LmiProblem(
        [Unknown("P", n, n, symmetric=True)],
        [Constraint("P", Sense.POSITIVE, lambda v: v["P"]), Constraint("Q", Sense.NEGATIVE, q)],
        name="attitude",
    )


@dataclass
class CascadeMatrices:
    A21: np.ndarray
    A22: np.ndarray
    A23: np.ndarray
    A31: np.ndarray
    A32: np.ndarray
    A33: np.ndarray

    @property
    def n_k(self) -> int:
        return self.A33.shape[0]

    def full(self, E: np.ndarray | None = None) -> np.ndarray:
        """Closed-loop matrix acting on ``(e_R, omega_e, x_R, x_omega)``."""
        E = np.eye(3) if E is None else E
        nk = self.n_k
        return np.block(
            [
                [np.zeros((3, 3)), E, np.zeros((3, nk))],
                [self.A21, self.A22, self.A23],
                [self.A31, self.A32, self.A33],
            ]
        )


def split_rate(rate: StateSpace):
    """``(A, B_w, B_ref, C, D_w, D_ref)`` for a block with inputs ``[omega; omega_ref]``."""
    if rate.n_inputs != 6 or rate.n_outputs != 3:
        raise ValueError("rate block must have inputs (omega, omega_ref) and 3 outputs")
    return rate.A, rate.B[:, :3], rate.B[:, 3:], rate.C, rate.D[:, :3], rate.D[:, 3:]


def build_cascade_matrices(att: StateSpace, rate: StateSpace) -> CascadeMatrices:
    if att.n_outputs != 3 or att.n_inputs != 3:
        raise ValueError("attitude block must map e_R (3) to a rate command (3)")
    A_w, B_w, B_ref, C_w, D_w, D_ref = split_rate(rate)
    if D_ref.shape[1] != att.n_outputs:
        raise ValueError("attitude output width does not match rate reference width")
    A_R, B_R, C_R, D_R = att.A, att.B, att.C, att.D
    n_r, n_w = att.n_states, rate.n_states
    return CascadeMatrices(
        A21=D_ref @ D_R,
        A22=D_w,
        A23=np.hstack([D_ref @ C_R, C_w]),
        A31=np.vstack([B_R, B_ref @ D_R]),
        A32=np.vstack([np.zeros((n_r, 3)), B_w]),
        A33=np.block([[A_R, np.zeros((n_r, n_w))], [B_ref @ C_R, A_w]]),
    )


def cascade_P(v, nk: int) -> np.ndarray:
    I = np.eye(3)
    p11, p12 = float(v["p11"][0, 0]), float(v["p12"][0, 0])
    return np.block(
        [
            [p11 * I, p12 * I, np.zeros((3, nk))],
            [p12 * I, v["P22"], v["P23"]],
            [np.zeros((nk, 3)), v["P23"].T, v["P33"]],
        ]
    )


def cascade_M(v, m: CascadeMatrices) -> np.ndarray:
    I = np.eye(3)
    p11, p12 = float(v["p11"][0, 0]), float(v["p12"][0, 0])
    P22, P23, P33 = v["P22"], v["P23"], v["P33"]
    A21, A22, A23, A31, A32, A33 = m.A21, m.A22, m.A23, m.A31, m.A32, m.A33
    M11 = p12 * (A21 + A21.T)
    M22 = 2 * p12 * I + P22 @ A22 + A22.T @ P22 + P23 @ A32 + A32.T @ P23.T
    M33 = P23.T @ A23 + A23.T @ P23 + P33 @ A33 + A33.T @ P33
    M12 = p11 * I + p12 * A22 + A21.T @ P22 + A31.T @ P23.T
    M13 = p12 * A23 + A21.T @ P23 + A31.T @ P33
    M23 = P22 @ A23 + A22.T @ P23 + A32.T @ P33 + P23 @ A33
    return np.block([[M11, M12, M13], [M12.T, M22, M23], [M13.T, M23.T, M33]])


def build_cascade_lmis(m: CascadeMatrices) -> LmiProblem:
    nk = m.n_k
    unknowns = [
        Unknown("p11", 1, 1, symmetric=True),
        Unknown("p12", 1, 1),
        Unknown("P22", 3, 3, symmetric=True),
    ]
    if nk:
        unknowns += [Unknown("P23", 3, nk), Unknown("P33", nk, nk, symmetric=True)]

    def with_empty(v):
        if nk:
            return v
        return {**v, "P23": np.zeros((3, 0)), "P33": np.zeros((0, 0))}

    return LmiProblem(
        unknowns,
        [
            Constraint("P", Sense.POSITIVE, lambda v: cascade_P(with_empty(v), nk)),
            Constraint("M", Sense.NEGATIVE, lambda v: cascade_M(with_empty(v), m)),
        ],
        name="cascade",
    )


def cascade_values(problem: LmiProblem, values: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Fill the empty ``P23``/``P33`` blocks of a proportional-only cascade."""
    out = dict(values)
    if "P33" not in out:
        out["P23"] = np.zeros((3, 0))
        out["P33"] = np.zeros((0, 0))
    return out


# --- solver -----------------------------------------------------------------


@dataclass
class _Prepared:
    """Homogenized, normalized problem in the variables ``z = (y, s, t)``.

    ``G_k = s F0_k + sum_i y_i F_ik``; the unknowns are recovered as
    ``x = var_scale * y / s``. ``s`` is dropped when every ``F0`` vanishes.
    """

    H: list[np.ndarray]  # per LMI block: (n_z, d, d) coefficients, constant part zero
    trace_rows: np.ndarray  # linear constraints  trace_rows @ z <= 1
    var_scale: np.ndarray
    m: int
    homogenizer: bool
    dims: list[int] = field(default_factory=list)


def _prepare(problem: LmiProblem) -> _Prepared:
    F0s, Fs = [], []
    for c in problem.constraints:
        F0, F = problem.coefficients(c)
        if c.sense is Sense.NEGATIVE:
            F0, F = -F0, -F
        F0s.append(_sym(F0))
        Fs.append(0.5 * (F + np.swapaxes(F, 1, 2)))
    m = problem.n_scalars
    col = np.zeros(m)
    for F in Fs:
        col += np.sum(F**2, axis=(1, 2))
    var_scale = np.where(col > 0.0, 1.0 / np.sqrt(np.where(col > 0.0, col, 1.0)), 1.0)
    homogenizer = any(np.any(F0) for F0 in F0s)
    n_z = m + int(homogenizer) + 1
    H, rows = [], []
    for F0, F in zip(F0s, Fs):
        d = F0.shape[0]
        Hk = np.zeros((n_z, d, d))
        Hk[:m] = F * var_scale[:, None, None]
        if homogenizer:
            Hk[m] = F0
        Hk[-1] = -np.eye(d)
        H.append(Hk)
        row = np.trace(Hk, axis1=1, axis2=2).copy()
        row[-1] = 0.0
        rows.append(row)
    if homogenizer:
        # s - t >= 0 as a 1x1 block, and s <= 1
        Hs = np.zeros((n_z, 1, 1))
        Hs[m, 0, 0] = 1.0
        Hs[-1, 0, 0] = -1.0
        H.append(Hs)
        row = np.zeros(n_z)
        row[m] = 1.0
        rows.append(row)
    return _Prepared(H, np.array(rows), var_scale, m, homogenizer, [h.shape[1] for h in H])


def _blocks(prep: _Prepared, z: np.ndarray) -> list[np.ndarray]:
    return [np.tensordot(z, Hk, axes=1) for Hk in prep.H]


def _barrier(prep: _Prepared, z, radius2) -> float:
    slack = 1.0 - prep.trace_rows @ z
    y = z[: prep.m]
    r = radius2 - float(y @ y)
    if r <= 0.0 or np.any(slack <= 0.0):
        return math.inf
    total = -math.log(r) - float(np.sum(np.log(slack)))
    for S in _blocks(prep, z):
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return math.inf
        total -= 2.0 * float(np.sum(np.log(np.diag(L))))
    return total


def _unknowns(problem: LmiProblem, prep: _Prepared, z) -> dict[str, np.ndarray]:
    y = z[: prep.m]
    s = z[prep.m] if prep.homogenizer else 1.0
    return problem.unpack(prep.var_scale * y / s)


def solve_feasibility(
    problem: LmiProblem,
    tol: float = DEFAULT_TOL,
    radius: float = 1e6,
    max_newton: int = 3000,
    gap_tol: float = 1e-12,
) -> SolveResult:
    """Maximize the trace-normalized eigenvalue gap shared by all constraints.

    The problem is homogenized (constant terms multiplied by a new positive
    scalar) and every constraint matrix is bounded by ``trace <= 1``, so the
    optimum is a scale-free margin. The barrier path follows
    ``min  -w t + barrier``, increasing ``w`` geometrically.
    """
    m = problem.n_scalars
    if m == 0:
        report = verify_certificate(problem, {})
        status = "feasible" if report.margin >= tol else "infeasible"
        cert = Certificate({}, report.margin) if status == "feasible" else None
        return SolveResult(status, cert, report.margin, 0)

    prep = _prepare(problem)
    n_z = prep.H[0].shape[0]
    radius2 = radius * radius
    z = np.zeros(n_z)
    if prep.homogenizer:
        z[m] = 0.5 / max(1.0, float(np.max(prep.trace_rows[:, m])))
    z[-1] = min(float(np.linalg.eigvalsh(S)[0]) for S in _blocks(prep, z)) - 1.0
    n_barrier = sum(prep.dims) + len(prep.trace_rows) + 1
    weight = 1.0
    iterations = 0
    best_margin, best_values = -math.inf, None
    converged = False

    while iterations < max_newton:
        for _ in range(100):
            iterations += 1
            grad = np.zeros(n_z)
            hess = np.zeros((n_z, n_z))
            grad[-1] = -weight
            for S, Hk in zip(_blocks(prep, z), prep.H):
                Linv = np.linalg.inv(np.linalg.cholesky(S))
                G = np.einsum("ab,ibc,dc->iad", Linv, Hk, Linv, optimize=True)
                grad -= np.trace(G, axis1=1, axis2=2)
                Gf = G.reshape(n_z, -1)
                hess += Gf @ Gf.T
            slack = 1.0 - prep.trace_rows @ z
            a = prep.trace_rows / slack[:, None]
            grad += a.sum(axis=0)
            hess += a.T @ a
            y = z[:m]
            r = radius2 - float(y @ y)
            grad[:m] += 2.0 * y / r
            hess[:m, :m] += 2.0 * np.eye(m) / r + 4.0 * np.outer(y, y) / (r * r)
            try:
                c = np.linalg.cholesky(hess)
                dz = -np.linalg.solve(c.T, np.linalg.solve(c, grad))
            except np.linalg.LinAlgError:
                dz = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = float(-grad @ dz)
            if decrement < 1e-9:
                break
            f0 = -weight * z[-1] + _barrier(prep, z, radius2)
            step = 1.0
            while step > 1e-14:
                zn = z + step * dz
                if -weight * zn[-1] + _barrier(prep, zn, radius2) <= f0 - 0.25 * step * decrement:
                    break
                step *= 0.5
            else:
                break
            z = zn
            if iterations >= max_newton:
                break
        if not prep.homogenizer or z[m] > 0.0:
            values = _unknowns(problem, prep, z)
            margin = verify_certificate(problem, values).margin
            if margin > best_margin:
                best_margin, best_values = margin, values
        gap = n_barrier / weight
        if gap < gap_tol or (best_margin >= tol and gap < 1e-3 * z[-1]):
            converged = True
            break
        weight *= 10.0

    if best_margin >= tol:
        return SolveResult(
            "feasible", Certificate(best_values, best_margin), best_margin, iterations
        )
    if converged:
        return SolveResult(
            "infeasible",
            None,
            best_margin,
            iterations,
            f"optimal normalized gap {z[-1]:.3e} is below tol {tol:.1e}",
        )
    return SolveResult(
        "indeterminate", None, best_margin, iterations, "Newton iteration budget exhausted"
    )


def export_text(problem: LmiProblem, values: Mapping[str, np.ndarray] | None = None) -> str:
    """Row-major plain-text dump of the coefficient matrices (and an assignment)."""
    out = io.StringIO()
    out.write(f"# LMI problem {problem.name}\n")
    for u in problem.unknowns:
        kind = "symmetric" if u.symmetric else "full"
        out.write(f"unknown {u.name} {u.rows} {u.cols} {kind}\n")
    for c in problem.constraints:
        F0, F = problem.coefficients(c)
        rel = ">0" if c.sense is Sense.POSITIVE else "<0"
        out.write(f"constraint {c.name} {rel} size {F0.shape[0]}\n")
        out.write("block F0\n")
        np.savetxt(out, F0, fmt="%.17g")
        for i, Fi in enumerate(F):
            if np.any(Fi):
                out.write(f"block F{i + 1}\n")
                np.savetxt(out, Fi, fmt="%.17g")
    if values is not None:
        for name, M in values.items():
            out.write(f"value {name}\n")
            np.savetxt(out, np.atleast_2d(M), fmt="%.17g")
    return out.getvalue()
