import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geondi import lmi, lti
from geondi.controllers import compensator, rate_realization

PAPER_ATT = dict(kp=-27.75, ki=-1.85, kd=-5.55, eps=0.001, tau_f=10.0)
PAPER_RATE = dict(kp=4.2, ki=0.0, kd=0.42, eps=0.0, tau_f=10.0)


def paper_blocks(sign=1.0):
    att = compensator(**{k: (sign * v if k in ("kp", "ki", "kd") else v) for k, v in PAPER_ATT.items()})
    rate = rate_realization(compensator(**PAPER_RATE))
    return att, rate


def sym(M):
    return 0.5 * (M + M.T)


def test_unknown_packing_roundtrip(rng):
    prob = lmi.LmiProblem(
        [lmi.Unknown("P", 3, 3, symmetric=True), lmi.Unknown("K", 2, 3)], [], name="t"
    )
    assert prob.n_scalars == 6 + 6
    x = rng.standard_normal(prob.n_scalars)
    v = prob.unpack(x)
    assert np.allclose(v["P"], v["P"].T)
    assert np.allclose(prob.pack(v), x)


def test_coefficients_reconstruct_affine_map(rng):
    att, _ = paper_blocks()
    prob = lmi.build_attitude_lmi(att)
    x = rng.standard_normal(prob.n_scalars)
    for c in prob.constraints:
        F0, F = prob.coefficients(c)
        assert np.allclose(F0 + np.tensordot(x, F, axes=1), prob.evaluate(c, prob.unpack(x)))


def test_attitude_q_matches_lyapunov_rate_oracle(rng):
    # For V = psi + x'Px the rate along the linear loop is w' Q w (quadratic-form oracle).
    att, _ = paper_blocks()
    prob = lmi.build_attitude_lmi(att)
    n = att.n_states
    M = rng.standard_normal((n, n))
    P = M @ M.T + np.eye(n)
    Q = prob.evaluate(prob.constraints[1], {"P": P})
    for _ in range(10):
        e, x = rng.standard_normal(3), rng.standard_normal(n)
        w_e = att.C @ x + att.D @ e  # omega_e with ideal inner loop
        xdot = att.A @ x + att.B @ e
        vdot = e @ w_e + 2 * x @ P @ xdot
        w = np.concatenate([e, x])
        assert np.isclose(w @ Q @ w, vdot, rtol=1e-9, atol=1e-9)


def test_cascade_m_equals_linearized_lyapunov_derivative(rng):
    att, rate = paper_blocks()
    m = lmi.build_cascade_matrices(att, rate)
    prob = lmi.build_cascade_lmis(m)
    v = prob.unpack(rng.standard_normal(prob.n_scalars))
    Pc = lmi.cascade_P(v, m.n_k)
    Acl = m.full()
    M = prob.evaluate(prob.constraints[1], v)
    assert np.allclose(M, Pc @ Acl + Acl.T @ Pc, atol=1e-9)


def test_cascade_closed_loop_matches_interconnection():
    # the assembled closed-loop matrix equals wiring the blocks by hand with E = I
    att, rate = paper_blocks()
    m = lmi.build_cascade_matrices(att, rate)
    A_w, B_w, B_r, C_w, D_w, D_r = lmi.split_rate(rate)
    nr, nw = att.n_states, rate.n_states
    rng = np.random.default_rng(1)
    e, we, xr, xw = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(nr), rng.standard_normal(nw)
    w_ref = att.C @ xr + att.D @ e
    wdot = C_w @ xw + D_w @ we + D_r @ w_ref
    xr_dot = att.A @ xr + att.B @ e
    xw_dot = A_w @ xw + B_w @ we + B_r @ w_ref
    z_dot = m.full() @ np.concatenate([e, we, xr, xw])
    assert np.allclose(z_dot, np.concatenate([we, wdot, xr_dot, xw_dot]))


def _k_matrix(rng, definite):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    lam = rng.uniform(0.05, 10.0, 3)
    if not definite:
        k = rng.integers(1, 4)
        lam[:k] *= -1
        rng.shuffle(lam)
    return Q @ np.diag(lam) @ Q.T


def test_proportional_attitude_feasible_iff_positive_definite():
    rng = np.random.default_rng(7)
    wrong = 0
    for i in range(50):
        definite = bool(i % 2)
        K = _k_matrix(rng, definite)
        res = lmi.solve_feasibility(lmi.build_attitude_lmi(lti.gain(-K)))
        wrong += res.feasible != definite
    assert wrong == 0


def test_paper_pid_attitude_certified():
    att, _ = paper_blocks()
    res = lmi.solve_feasibility(lmi.build_attitude_lmi(att))
    assert res.status == "feasible"
    report = lmi.verify_certificate(lmi.build_attitude_lmi(att), res.certificate.values)
    assert report.margin >= 1e-7
    assert np.linalg.eigvalsh(res.certificate.values["P"])[0] > 0


def test_sign_flipped_pid_attitude_infeasible():
    att, _ = paper_blocks(sign=-1.0)
    res = lmi.solve_feasibility(lmi.build_attitude_lmi(att))
    assert res.status == "infeasible"
    assert res.certificate is None


def test_cascade_paper_gains_feasible_and_flipped_infeasible():
    att, rate = paper_blocks()
    prob = lmi.build_cascade_lmis(lmi.build_cascade_matrices(att, rate))
    res = lmi.solve_feasibility(prob)
    assert res.status == "feasible"
    vals = res.certificate.values
    assert lmi.verify_certificate(prob, vals).margin >= 1e-7
    assert vals["p11"][0, 0] > 0 and vals["p12"][0, 0] > 0
    flipped, _ = paper_blocks(sign=-1.0)
    res2 = lmi.solve_feasibility(lmi.build_cascade_lmis(lmi.build_cascade_matrices(flipped, rate)))
    assert res2.status == "infeasible"


def test_empty_compensators_reduce_to_definiteness():
    KR, Kw = 4.0 * np.eye(3), 20.0 * np.eye(3)
    rate = lti.StateSpace(np.zeros((0, 0)), np.zeros((0, 6)), np.zeros((3, 0)), np.hstack([-Kw, Kw]))
    m = lmi.build_cascade_matrices(lti.gain(-KR), rate)
    assert m.n_k == 0
    prob = lmi.build_cascade_lmis(m)
    res = lmi.solve_feasibility(prob)
    assert res.status == "feasible"
    assert lmi.verify_certificate(prob, lmi.cascade_values(prob, res.certificate.values)).margin >= 1e-7


def test_verify_certificate_rejects_bad_assignments():
    att, _ = paper_blocks()
    prob = lmi.build_attitude_lmi(att)
    with pytest.raises(KeyError):
        lmi.verify_certificate(prob, {})
    rep = lmi.verify_certificate(prob, {"P": -np.eye(att.n_states)})
    assert rep.normalized["P"] < 0
    assert rep.margin < 0


@settings(max_examples=15)
@given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=3), st.floats(1.5, 6.0))
def test_certificates_always_pass_independent_audit(kr, ratio):
    # proportional cascades with positive gains: every returned certificate is audited
    KR = np.diag(kr)
    Kw = ratio * KR
    rate = lti.StateSpace(np.zeros((0, 0)), np.zeros((0, 6)), np.zeros((3, 0)), np.hstack([-Kw, Kw]))
    prob = lmi.build_cascade_lmis(lmi.build_cascade_matrices(lti.gain(-KR), rate))
    res = lmi.solve_feasibility(prob)
    if res.certificate is not None:
        vals = res.certificate.values
        P = lmi.cascade_P(lmi.cascade_values(prob, vals), 0)
        M = lmi.cascade_M(lmi.cascade_values(prob, vals), lmi.build_cascade_matrices(lti.gain(-KR), rate))
        assert np.linalg.eigvalsh(sym(P))[0] > 0
        assert np.linalg.eigvalsh(sym(M))[-1] < 0


def test_export_text_lists_blocks():
    att, _ = paper_blocks()
    txt = lmi.export_text(lmi.build_attitude_lmi(att))
    assert "unknown P" in txt and "constraint Q <0" in txt
