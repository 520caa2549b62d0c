import math

import numpy as np
import pytest
from scipy.optimize import brentq

from kerrpurity.drive import Bichromatic, Constant, GaussianTrain
from kerrpurity.errors import ConfigError, NoPeriod
from kerrpurity.fockspace import SystemParams
from kerrpurity.semiclassical import (DAMPING, LyapunovConfig, cluster_count, integrate_trajectory,
                                      lyapunov_max, mean_field_rhs, phase_points, poincare_section)

SHORT = LyapunovConfig(t_transient=20.0, t_total=120.0)


def test_free_decay_is_exact_exponential():
    p = SystemParams(-3.0, 0.8, 0.0, Constant(0))
    t, a = integrate_trajectory(p, 2.0 + 1.0j, (0.0, 5.0), 1e-3, 100)
    assert np.max(np.abs(np.abs(a) - abs(2 + 1j) * np.exp(-DAMPING * t))) < 1e-10


def test_rhs_formula():
    p = SystemParams(-2.0, 0.5, 0.0, Constant(1.5))
    a = 0.3 - 0.7j
    n = abs(a) ** 2
    want = -1j * (-2.0 + 0.5 + 2 * 0.5 * n) * a - 1j * 1.5 - DAMPING * a
    assert mean_field_rhs(p, a, 0.0) == pytest.approx(want)


def _fixed_point(delta, chi, f, kappa):
    # n [(delta + chi + 2 chi n)^2 + kappa^2] = f^2 on the lower branch
    g = lambda n: n * ((delta + chi + 2 * chi * n) ** 2 + kappa ** 2) - f ** 2
    n = brentq(g, 0.0, 1e-3 + f ** 2 / kappa ** 2)
    return -1j * f / (kappa + 1j * (delta + chi + 2 * chi * n))


def test_converges_to_fixed_point_of_constant_drive():
    delta, chi, f = 1.0, 0.2, 0.8
    p = SystemParams(delta, chi, 0.0, Constant(f))
    _, a = integrate_trajectory(p, 0j, (0.0, 60.0), 1e-3, 1000)
    assert a[-1] == pytest.approx(_fixed_point(delta, chi, f, DAMPING), abs=1e-9)


def test_lyapunov_of_fixed_point_matches_jacobian():
    delta, chi, f = 1.0, 0.2, 0.8
    p = SystemParams(delta, chi, 0.0, Constant(f))
    a = _fixed_point(delta, chi, f, DAMPING)

    def rhs(v):
        z = mean_field_rhs(p, complex(v[0], v[1]), 0.0)
        return np.array([z.real, z.imag])

    h = 1e-6
    v0 = np.array([a.real, a.imag])
    jac = np.column_stack([(rhs(v0 + h * e) - rhs(v0 - h * e)) / (2 * h) for e in np.eye(2)])
    lam = np.max(np.linalg.eigvals(jac).real)
    got = lyapunov_max(p, LyapunovConfig(t_transient=60.0, t_total=400.0))
    assert got == pytest.approx(lam, abs=0.01)


def test_undriven_lyapunov_equals_minus_damping():
    p = SystemParams(-15.0, 0.7, 0.0, Constant(0))
    assert lyapunov_max(p, SHORT) == pytest.approx(-DAMPING, abs=1e-3)
    assert lyapunov_max(p, SHORT, damping=1.0) == pytest.approx(-1.0, abs=1e-3)


def test_drive_sign_symmetry():
    p = SystemParams(-15.0, 0.7, 0.0, Bichromatic(10.2, 10.2, 5.0))
    m = SystemParams(-15.0, 0.7, 0.0, Bichromatic(-10.2, -10.2, 5.0))
    _, a = integrate_trajectory(p, 0.1j, (0.0, 5.0), 1e-3, 100)
    _, b = integrate_trajectory(m, -0.1j, (0.0, 5.0), 1e-3, 100)
    assert np.max(np.abs(a + b)) < 1e-12


def test_chaotic_exponent_insensitive_to_separation():
    p = SystemParams(-15.0, 2.0, 0.0, Bichromatic(10.2, 10.2, 5.0))
    cfg = LyapunovConfig(t_transient=50.0, t_total=600.0)
    l1 = lyapunov_max(p, cfg)
    l2 = lyapunov_max(p, LyapunovConfig(1e-7, 10, 50.0, 600.0))
    assert l1 > 0.2
    assert l1 == pytest.approx(l2, abs=0.08)


def test_regular_pulse_train_has_period_one_section():
    p = SystemParams(-15.0, 0.1, 0.0, GaussianTrain(12.0, 0.1, 2 * math.pi / 5))
    pts = poincare_section(p, n_points=200, t_transient=60.0)
    assert pts.shape == (200, 2)
    assert cluster_count(pts) == 1


def test_poincare_requires_period():
    with pytest.raises(NoPeriod):
        poincare_section(SystemParams(0, 0, 0, Constant(1.0)))


def test_cluster_count():
    pts = np.array([[0, 0], [0, 5e-4], [1, 1], [1, 1 + 2e-3]])
    assert cluster_count(pts) == 3
    assert cluster_count(np.empty((0, 2))) == 0


def test_phase_points_and_config_validation():
    pp = phase_points(np.array([0.0, 1.0]), np.array([1 + 2j, 3 - 1j]))
    assert (pp[1].x, pp[1].y, pp[1].t) == (3.0, -1.0, 1.0)
    with pytest.raises(ConfigError):
        LyapunovConfig(d0=0)
    with pytest.raises(ConfigError):
        LyapunovConfig(t_transient=10, t_total=5)
