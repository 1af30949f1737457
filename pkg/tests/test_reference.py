import math

import numpy as np
import pytest
from scipy import signal

from geondi.reference import (
    E1,
    FilterParams,
    ReferenceSample,
    filter_step,
    hold,
    initial_sample,
    kinematic_residual,
    raw_maneuver,
)
from geondi.so3 import config_error, exp_so3, is_rotation, log_so3


def test_raw_maneuver_samples():
    assert np.allclose(raw_maneuver(1.0), np.eye(3), atol=1e-12)
    assert np.allclose(raw_maneuver(0.25), exp_so3(math.pi / 2 * E1))
    assert np.allclose(raw_maneuver(5.0), np.eye(3))
    assert np.allclose(raw_maneuver(2.2), np.eye(3))
    assert np.allclose(raw_maneuver(3.0), exp_so3([0, math.pi, 0]), atol=1e-12)


def test_filter_at_rest_on_target_stays_put():
    R = exp_so3([0.2, -0.1, 0.4])
    s = initial_sample(R, hold(R))
    for _ in range(100):
        s = filter_step(s, hold(R), 1e-3)
    assert np.allclose(s.R_d, R, atol=1e-14) and np.allclose(s.omega_d, 0.0, atol=1e-14)


def test_small_step_matches_second_order_response():
    p = FilterParams()
    target = exp_so3([math.radians(5), 0, 0])
    s = initial_sample()
    dt = 1e-3
    angles = []
    for _ in range(1000):
        s = filter_step(s, hold(target), dt, p)
        angles.append(log_so3(s.R_d)[0])
    sys = signal.lti([p.kp], [1.0, p.kd, p.kp])
    t = dt * np.arange(1, 1001)
    _, y = signal.step(sys, T=t)
    ref = math.radians(5) * y
    assert np.max(np.abs(np.array(angles) - ref)) < 0.02 * math.radians(5)


def test_kinematic_consistency_by_finite_difference():
    dt = 1e-4
    s = initial_sample(np.eye(3), raw_maneuver)
    samples = [s]
    for _ in range(3000):
        s = filter_step(s, raw_maneuver, dt)
        samples.append(s)
    for k in range(1, len(samples) - 1, 100):
        r = kinematic_residual(samples[k - 1].R_d, samples[k + 1].R_d, samples[k].R_d, samples[k].omega_d, dt)
        assert r < 1e-4


def test_reported_acceleration_matches_rate_differences():
    dt = 1e-3
    s = initial_sample(np.eye(3), raw_maneuver)
    samples = [s]
    for _ in range(600):
        s = filter_step(s, raw_maneuver, dt)
        samples.append(s)
    errs = []
    for k in range(1, len(samples) - 1):
        fd = (samples[k + 1].omega_d - samples[k - 1].omega_d) / (2 * dt)
        errs.append(np.max(np.abs(fd - samples[k].omega_d_dot)))
    # O(dt^2) agreement away from the kinks of the raw command
    assert np.median(errs) < 1e-2


def test_output_is_rotation_and_converges():
    target = exp_so3([2.5, -0.5, 1.0])
    s = initial_sample()
    for _ in range(3000):
        s = filter_step(s, hold(target), 1e-3)
        assert is_rotation(s.R_d, tol=1e-9)
    assert config_error(target, s.R_d) < 1e-10


def test_filter_step_validates_dt():
    with pytest.raises(ValueError):
        filter_step(initial_sample(), hold(np.eye(3)), 0.0)
    assert isinstance(initial_sample(), ReferenceSample)
