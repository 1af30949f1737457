"""Closed-loop simulation, certification and comparison of scenarios.

The whole loop (reference filter, attitude law, sensor, rate law, motors,
rigid body) is one ODE integrated with a single classical RK4 step per
``dt``. Controllers are evaluated at every stage, so with a matched model
the inverted rate loop follows its linear target dynamics to integration
accuracy. The two rotations (body and desired) are advanced on the group
with Runge-Kutta-Munthe-Kaas stages so the whole step stays fourth order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actuation as act
from . import lmi, lti
from .config import ScenarioConfig
from .controllers import (
    AttitudeController,
    EulerNDI,
    RateController,
    SensorModel,
    _per_axis,
    compensator,
    rate_closed_loop_matrix,
    rate_realization,
    sensor_path,
    tracking_cancellation,
)
from .plant import PlantParams, rate_derivative
from .reference import FilterParams, filter_acceleration, hold, raw_maneuver
from .so3 import (
    attitude_error,
    attitude_error_vector,
    config_error_from_error,
    dexp_inv,
    exp_so3,
    project_to_so3,
    random_rotation,
)

CSV_VERSION = 1
CSV_COLUMNS = (
    ["t", "psi"]
    + [f"eR_{a}" for a in "xyz"]
    + [f"omega_{a}" for a in "xyz"]
    + [f"omegad_{a}" for a in "xyz"]
    + [f"tau_dem_{a}" for a in "xyz"]
    + [f"tau_app_{a}" for a in "xyz"]
)
BANDWIDTH_RULE = 4.0


# --- assembling a loop from a config ------------------------------------------


def attitude_block(cfg: ScenarioConfig) -> lti.StateSpace:
    g = cfg.controller.attitude
    return compensator(g.kp, g.ki, g.kd, g.eps, g.tau_f)


def rate_compensator(cfg: ScenarioConfig) -> lti.StateSpace:
    g = cfg.controller.rate
    return compensator(g.kp, g.ki, g.kd, g.eps, g.tau_f)


def sensor_block(cfg: ScenarioConfig) -> lti.StateSpace | None:
    s = cfg.sensor
    return sensor_path(s.delay, s.pade_order, s.lag_hz) if s.enabled else None


def plant_params(cfg: ScenarioConfig) -> PlantParams:
    return PlantParams(cfg.plant.inertia, cfg.plant.damping)


@dataclass
class Actuation:
    B: np.ndarray
    motor: act.MotorParams
    thrust: float  # held at hover

    def __post_init__(self):
        self.B_pinv = act.allocation_matrix(self.B)

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Actuation":
        a = cfg.actuation
        B = act.effectiveness_matrix(act.hexagon(a.arm, a.k_f, a.k_m))
        return cls(B, act.MotorParams(a.time_constant, a.w_min, a.w_max), a.mass * 9.81)

    def hover(self) -> np.ndarray:
        return act.saturate(act.hover_command(self.B, self.thrust), self.motor)


@dataclass
class Reference:
    target_fn: object
    params: FilterParams
    R0: np.ndarray

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Reference":
        r = cfg.reference
        p = FilterParams(r.natural_frequency, r.damping)
        if r.maneuver == "double_flip":
            return cls(raw_maneuver, p, np.eye(3))
        R_t = exp_so3(r.target)
        return cls(hold(R_t), p, R_t)


@dataclass
class Loop:
    """Everything the integrator needs; controllers hold their own realizations."""

    plant: PlantParams
    attitude: AttitudeController | EulerNDI
    rate: RateController | None  # None: ideal inner loop, omega = omega_cmd
    sensor: SensorModel | None
    actuation: Actuation | None
    reference: Reference
    cancellation: bool = False

    def __post_init__(self):
        if self.cancellation and self.rate is not None and not self.rate.supports_tracking_cancellation():
            raise ValueError(
                "tracking cancellation needs B_ref = -B_w and D_ref = -D_w in the rate realization"
            )

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Loop":
        c = cfg.controller
        params = plant_params(cfg)
        att_block = attitude_block(cfg)
        if c.type == "euler":
            att = EulerNDI(att_block, feedforward=c.feedforward)
        else:
            att = AttitudeController(att_block, feedforward=c.feedforward)
        rate = sensor = None
        if c.inner_loop == "full":
            rate = RateController(rate_realization(rate_compensator(cfg)), params)
            sb = sensor_block(cfg)
            sensor = SensorModel(sb) if sb is not None else None
        actuation = Actuation.from_config(cfg) if (cfg.actuation.enabled and rate is not None) else None
        cancel = bool(c.cancellation and c.feedforward and rate is not None)
        return cls(params, att, rate, sensor, actuation, Reference.from_config(cfg), cancel)


# --- joint state and stage evaluation ----------------------------------------


@dataclass
class LoopState:
    t: float
    R: np.ndarray
    R_d: np.ndarray
    y: np.ndarray  # [omega, omega_d, x_R, x_w, x_s, u]


@dataclass
class Signals:
    psi: float
    e_R: np.ndarray
    omega: np.ndarray
    omega_d: np.ndarray
    tau_dem: np.ndarray
    tau_app: np.ndarray
    singular: bool


class _Layout:
    def __init__(self, loop: Loop):
        sizes = [
            ("omega", 3),
            ("omega_d", 3),
            ("x_R", loop.attitude.n_states),
            ("x_w", loop.rate.n_states if loop.rate else 0),
            ("x_s", loop.sensor.realization.n_states if loop.sensor else 0),
            ("u", loop.actuation.B.shape[1] if loop.actuation else 0),
        ]
        self.slices = {}
        i = 0
        for name, n in sizes:
            self.slices[name] = slice(i, i + n)
            i += n
        self.size = i

    def get(self, y, name):
        return y[self.slices[name]]


def _evaluate(loop: Loop, lay: _Layout, t: float, R, R_d, y):
    """Stage derivative: ``(dy, body rate, desired rate, signals)``."""
    omega = lay.get(y, "omega")
    omega_d = lay.get(y, "omega_d")
    x_R = lay.get(y, "x_R")
    dy = np.zeros_like(y)
    ref = loop.reference
    omega_d_dot = filter_acceleration(R_d, omega_d, ref.target_fn(t), ref.params)
    dy[lay.slices["omega_d"]] = omega_d_dot

    cmd = loop.attitude.command(x_R, R_d, R, omega_d)
    singular = bool(getattr(cmd, "singular", False))
    R_e = attitude_error(R_d, R)
    e_R = attitude_error_vector(R_e)
    err = cmd.error if isinstance(loop.attitude, EulerNDI) else cmd.e_R
    dy[lay.slices["x_R"]] = loop.attitude.state_derivative(x_R, err)
    omega_cmd = cmd.omega_cmd

    zero = np.zeros(3)
    if loop.rate is None:
        body_rate = omega_cmd
        tau_dem = tau_app = zero
    else:
        body_rate = omega
        if loop.sensor is not None:
            x_s = lay.get(y, "x_s")
            omega_meas = loop.sensor.output(x_s, omega)
            dy[lay.slices["x_s"]] = loop.sensor.state_derivative(x_s, omega)
        else:
            omega_meas = omega
        extra = None
        if loop.cancellation:
            omega_e = omega_meas - R_e.T @ omega_d
            extra = tracking_cancellation(R_e, omega_e, omega_d, omega_d_dot)
        x_w = lay.get(y, "x_w")
        tau_dem = loop.rate.torque(x_w, omega_meas, omega_cmd, extra)
        dy[lay.slices["x_w"]] = loop.rate.state_derivative(x_w, omega_meas, omega_cmd)
        if loop.actuation is not None:
            a = loop.actuation
            u = lay.get(y, "u")
            u_cmd = a.B_pinv @ np.array([a.thrust, *tau_dem])
            dy[lay.slices["u"]] = act.motor_derivative(u, u_cmd, a.motor)
            tau_app = a.B[1:] @ u
        else:
            tau_app = tau_dem
        dy[lay.slices["omega"]] = rate_derivative(omega, tau_app, loop.plant)
    sig = Signals(config_error_from_error(R_e), e_R, body_rate, omega_d, tau_dem, tau_app, singular)
    return dy, body_rate, omega_d, sig


def rk4_step(loop: Loop, lay: _Layout, s: LoopState, dt: float):
    """One joint step; returns the new state and the signals at the step start.

    Vector states take classical RK4 stages. The two rotations take the
    matching Runge-Kutta-Munthe-Kaas stages: stage points ``R0 exp(theta)``
    with increments mapped through ``dexp_inv``, which keeps fourth order when
    the stage rates do not commute.
    """
    t, R0, Rd0, y0 = s.t, s.R, s.R_d, s.y
    h = 0.5 * dt
    k1, v1, d1, sig = _evaluate(loop, lay, t, R0, Rd0, y0)
    a1, b1 = dt * v1, dt * d1
    k2, v2, d2, s2 = _evaluate(loop, lay, t + h, R0 @ exp_so3(0.5 * a1), Rd0 @ exp_so3(0.5 * b1), y0 + h * k1)
    a2, b2 = dt * dexp_inv(0.5 * a1, v2), dt * dexp_inv(0.5 * b1, d2)
    k3, v3, d3, s3 = _evaluate(loop, lay, t + h, R0 @ exp_so3(0.5 * a2), Rd0 @ exp_so3(0.5 * b2), y0 + h * k2)
    a3, b3 = dt * dexp_inv(0.5 * a2, v3), dt * dexp_inv(0.5 * b2, d3)
    k4, v4, d4, s4 = _evaluate(loop, lay, t + dt, R0 @ exp_so3(a3), Rd0 @ exp_so3(b3), y0 + dt * k3)
    a4, b4 = dt * dexp_inv(a3, v4), dt * dexp_inv(b3, d4)
    y = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    R = R0 @ exp_so3((a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0)
    R_d = Rd0 @ exp_so3((b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0)
    if loop.actuation is not None:
        sl = lay.slices["u"]
        y[sl] = np.clip(y[sl], loop.actuation.motor.u_min, loop.actuation.motor.u_max)
    sig.singular = sig.singular or s2.singular or s3.singular or s4.singular
    return LoopState(t + dt, R, R_d, y), sig


def initial_state(loop: Loop, lay: _Layout, R0, omega0) -> LoopState:
    y = np.zeros(lay.size)
    y[lay.slices["omega"]] = omega0
    if loop.sensor is not None and loop.sensor.realization.n_states:
        r = loop.sensor.realization
        y[lay.slices["x_s"]] = np.linalg.solve(r.A, -r.B @ np.asarray(omega0, float))
    if loop.actuation is not None:
        y[lay.slices["u"]] = loop.actuation.hover()
    return LoopState(0.0, np.asarray(R0, float), loop.reference.R0.copy(), y)


# --- running --------------------------------------------------------------------


@dataclass
class Trace:
    """Logged samples; ``x_R``, ``x_w`` and ``R_e`` support Lyapunov checks."""

    t: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    R_e: list = field(default_factory=list)
    x_R: list = field(default_factory=list)
    x_w: list = field(default_factory=list)

    def array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(CSV_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, CSV_COLUMNS.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        a = self.array()
        return a[:, [CSV_COLUMNS.index(f"{prefix}_{k}") for k in "xyz"]]


@dataclass
class RunSummary:
    name: str
    peak_psi: float
    final_psi: float
    peak_eR: float
    peak_tau: float
    effort: float  # integral of |tau_applied| dt
    unstable: bool
    reason: str
    t_end: float
    bandwidth_ratios: tuple = ()
    verdicts: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"scenario        {self.name}",
            f"peak psi        {self.peak_psi:.6e}",
            f"final psi       {self.final_psi:.6e}",
            f"peak |e_R|      {self.peak_eR:.6e}",
            f"peak |tau|      {self.peak_tau:.6e}",
            f"effort          {self.effort:.6e}",
            f"unstable        {self.unstable}" + (f" ({self.reason})" if self.reason else ""),
            f"t_end           {self.t_end:.4f}",
        ]
        if self.bandwidth_ratios:
            out.append("bw ratio        " + " ".join(f"{r:.3f}" for r in self.bandwidth_ratios))
        for k, v in self.verdicts.items():
            out.append(f"lmi {k:<11} {v}")
        return out


@dataclass
class RunResult:
    summary: RunSummary
    trace: Trace
    final: LoopState


def initial_attitude(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.sim.random_initial_attitude:
        return random_rotation(np.random.default_rng(cfg.sim.seed))
    return exp_so3(cfg.sim.initial_attitude)


def simulate(
    loop: Loop,
    R0,
    omega0=(0.0, 0.0, 0.0),
    dt: float = 5e-4,
    duration: float = 6.0,
    omega_limit: float = 1e3,
    log_every: int = 1,
    psi_limit: float | None = None,
    record_states: bool = False,
    name: str = "run",
) -> RunResult:
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    lay = _Layout(loop)
    s = initial_state(loop, lay, R0, np.asarray(omega0, float))
    n_steps = int(round(duration / dt))
    tr = Trace()
    peak_psi = peak_eR = peak_tau = effort = 0.0
    reason = ""
    sig = None
    armed = False  # psi has been below psi_limit / 2

    def log(state: LoopState, sig: Signals):
        tr.t.append(state.t)
        tr.rows.append(
            [state.t, sig.psi, *sig.e_R, *sig.omega, *sig.omega_d, *sig.tau_dem, *sig.tau_app]
        )
        if record_states:
            tr.R_e.append(attitude_error(state.R_d, state.R))
            tr.x_R.append(lay.get(state.y, "x_R").copy())
            tr.x_w.append(lay.get(state.y, "x_w").copy())

    for k in range(n_steps):
        new, sig = rk4_step(loop, lay, s, dt)
        if k % log_every == 0:
            log(s, sig)
        peak_psi = max(peak_psi, sig.psi)
        peak_eR = max(peak_eR, float(np.linalg.norm(sig.e_R)))
        peak_tau = max(peak_tau, float(np.linalg.norm(sig.tau_app)))
        effort += dt * float(np.linalg.norm(sig.tau_app))
        w = lay.get(new.y, "omega") if loop.rate is not None else sig.omega
        if not (np.all(np.isfinite(new.y)) and np.all(np.isfinite(new.R))):
            reason = "non-finite state"
        elif float(np.linalg.norm(w)) > omega_limit:
            reason = f"|omega| above {omega_limit:g} rad/s"
        elif sig.singular:
            reason = "Euler kinematic singularity"
        elif psi_limit is not None:
            armed = armed or sig.psi < 0.5 * psi_limit
            if armed and sig.psi > psi_limit:
                reason = f"attitude lost (psi above {psi_limit:g} at t = {s.t:.4f} s)"
        if reason:
            s = new
            break
        if (k + 1) % 1000 == 0:
            new.R = project_to_so3(new.R)
            new.R_d = project_to_so3(new.R_d)
        s = new

    if not reason:
        _, _, _, sig = _evaluate(loop, lay, s.t, s.R, s.R_d, s.y)
        log(s, sig)
        final_psi = sig.psi
        peak_psi = max(peak_psi, final_psi)
    else:
        final_psi = math.nan
    summary = RunSummary(
        name, peak_psi, final_psi, peak_eR, peak_tau, effort, bool(reason), reason, s.t
    )
    return RunResult(summary, tr, s)


def run(cfg: ScenarioConfig, out_dir=None, record_states: bool = False, with_bandwidth: bool = True) -> RunResult:
    """Simulate a scenario; writes ``<name>.csv`` and ``<name>.summary.txt`` when ``out_dir`` is set."""
    loop = Loop.from_config(cfg)
    s = cfg.sim
    res = simulate(
        loop,
        initial_attitude(cfg),
        s.initial_rate,
        s.dt,
        s.duration,
        s.omega_limit,
        s.log_every,
        s.psi_limit,
        record_states,
        cfg.name,
    )
    if with_bandwidth:
        res.summary.bandwidth_ratios = tuple(bandwidth_ratios(cfg)[2])
    if out_dir is not None:
        write_outputs(res, cfg, out_dir)
    return res


def csv_text(trace: Trace, name: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# geondi timeseries v{CSV_VERSION}; columns: {','.join(CSV_COLUMNS)}; scenario {name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in trace.rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_outputs(res: RunResult, cfg: ScenarioConfig, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.name}.csv"
    csv_path.write_text(csv_text(res.trace, cfg.name))
    sum_path = out / f"{cfg.name}.summary.txt"
    sum_path.write_text("\n".join(res.summary.lines()) + "\n")
    return csv_path, sum_path


# --- certification -----------------------------------------------------------------


def _per_axis_blocks(cfg: ScenarioConfig):
    def blocks(g):
        cols = zip(*(_per_axis(v) for v in (g.kp, g.ki, g.kd, g.eps, g.tau_f)))
        return [lti.balance(lti.make_lead_lag(*c)) for c in cols]

    return blocks(cfg.controller.attitude), blocks(cfg.controller.rate)


def bandwidth_ratios(cfg: ScenarioConfig):
    """Per-axis ``(attitude bandwidth, rate bandwidth, attitude / rate)`` in rad/s.

    Attitude loop with an ideal inner loop: ``-K_R / (s - K_R)``. Rate loop
    after inversion: ``K_w / (s + K_w H)`` with ``H`` the sensor path (unity
    when the sensor is disabled).
    """
    att, rate = _per_axis_blocks(cfg)
    s = cfg.sensor
    H = None
    if s.enabled:
        H = lti.lag_filter(s.lag_hz)
        if s.delay > 0:
            H = lti.balance(lti.series(lti.pade_delay(s.delay, s.pade_order), H))
    bw_att, bw_rate = [], []
    for Ka, Kw in zip(att, rate):

        def t_att(w, Ka=Ka):
            k = lti.transfer_eval(Ka, 1j * w)[0, 0]
            return -k / (1j * w - k)

        def t_rate(w, Kw=Kw):
            k = lti.transfer_eval(Kw, 1j * w)[0, 0]
            h = lti.transfer_eval(H, 1j * w)[0, 0] if H is not None else 1.0
            return k / (1j * w + k * h)

        bw_att.append(lti.bandwidth(t_att))
        bw_rate.append(lti.bandwidth(t_rate))
    ratios = [a / r for a, r in zip(bw_att, bw_rate)]
    return bw_att, bw_rate, ratios


@dataclass
class Verdict:
    status: str
    margin: float
    values: dict | None = None

    def __str__(self) -> str:
        return f"{self.status} (margin {self.margin:.3e})"


@dataclass
class CertifyReport:
    rate_hurwitz: bool
    rate_abscissa: float
    attitude: Verdict
    cascade: Verdict  # compensator-only rate realization
    cascade_with_sensor: Verdict | None
    bandwidth_attitude: list
    bandwidth_rate: list
    ratios: list
    warnings: list

    @property
    def certified(self) -> bool:
        return self.rate_hurwitz and self.attitude.status == "feasible" and self.cascade.status == "feasible"

    def verdicts(self) -> dict:
        out = {"attitude": str(self.attitude), "cascade": str(self.cascade)}
        if self.cascade_with_sensor is not None:
            out["cascade+sensor"] = str(self.cascade_with_sensor)
        return out

    def lines(self) -> list[str]:
        out = [
            f"rate loop Hurwitz  {self.rate_hurwitz} (spectral abscissa {self.rate_abscissa:.4g})",
            f"attitude LMI       {self.attitude}",
            f"cascade LMI        {self.cascade}",
        ]
        if self.cascade_with_sensor is not None:
            out.append(f"cascade+sensor     {self.cascade_with_sensor} (informational)")
        for i, ax in enumerate("xyz"):
            out.append(
                f"bandwidth {ax}        attitude {self.bandwidth_attitude[i]:.4g} rad/s, "
                f"rate {self.bandwidth_rate[i]:.4g} rad/s, ratio {self.ratios[i]:.4g}"
            )
        out += [f"warning: {w}" for w in self.warnings]
        out.append(f"certified          {self.certified}")
        return out


def _solve(problem: lmi.LmiProblem) -> Verdict:
    res = lmi.solve_feasibility(problem)
    if res.certificate is not None:
        return Verdict(res.status, res.certificate.margin, dict(res.certificate.values))
    return Verdict(res.status, res.best_margin)


def certify(cfg: ScenarioConfig, with_sensor: bool = True) -> CertifyReport:
    att = attitude_block(cfg)
    comp = rate_compensator(cfg)
    sensor = sensor_block(cfg)
    full_rate = rate_realization(comp, sensor)
    hurwitz, abscissa = lti.is_hurwitz(rate_closed_loop_matrix(full_rate))
    v_att = _solve(lmi.build_attitude_lmi(att))
    v_cas = _solve(lmi.build_cascade_lmis(lmi.build_cascade_matrices(att, rate_realization(comp))))
    v_sens = None
    if with_sensor and sensor is not None:
        v_sens = _solve(lmi.build_cascade_lmis(lmi.build_cascade_matrices(att, full_rate)))
    bw_a, bw_r, ratios = bandwidth_ratios(cfg)
    warnings = [
        f"axis {ax}: attitude/rate bandwidth ratio {r:.3g} is below {BANDWIDTH_RULE:g}"
        for ax, r in zip("xyz", ratios)
        if not r > BANDWIDTH_RULE
    ]
    return CertifyReport(hurwitz, abscissa, v_att, v_cas, v_sens, bw_a, bw_r, ratios, warnings)


# --- comparison ---------------------------------------------------------------------


def compare(summaries) -> str:
    """Side-by-side table; also reports effort with versus without feedforward."""
    summaries = list(summaries)
    if len(summaries) < 2:
        raise ValueError("compare needs at least two runs")
    fields_ = ["peak_psi", "final_psi", "peak_eR", "peak_tau", "effort", "unstable", "t_end"]
    width = max(12, *(len(s.name) for s in summaries))
    lines = ["metric".ljust(12) + "".join(s.name.rjust(width + 2) for s in summaries)]
    for f in fields_:
        cells = []
        for s in summaries:
            v = getattr(s, f)
            cells.append((str(v) if isinstance(v, bool) else f"{v:.4e}").rjust(width + 2))
        lines.append(f.ljust(12) + "".join(cells))
    return "\n".join(lines)


def feedforward_effort(with_ff: RunSummary, without_ff: RunSummary) -> str:
    d = with_ff.effort - without_ff.effort
    return (
        f"effort with feedforward {with_ff.effort:.4e}, without {without_ff.effort:.4e} "
        f"(difference {d:+.4e}); peak psi {with_ff.peak_psi:.4e} vs {without_ff.peak_psi:.4e}"
    )


__all__ = [
    "CSV_COLUMNS",
    "CertifyReport",
    "Loop",
    "RunSummary",
    "bandwidth_ratios",
    "certify",
    "compare",
    "run",
    "simulate",
]
