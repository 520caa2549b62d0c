import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre, factorial

from kerrpurity.fockspace import FockBasis
from kerrpurity.observables import (entropies, excitation, purity, thermal_populations,
                                    thermal_purity_oracle, thermal_purity_series, thermal_state,
                                    trace_distance, wigner, wigner_point)


def coherent(alpha, dim):
    n = np.arange(dim)
    v = np.exp(-abs(alpha) ** 2 / 2) * alpha ** n / np.sqrt(factorial(n))
    return v


def test_purity_and_entropy_limits():
    b = FockBasis(8)
    assert purity(b.fock_dm(3)) == pytest.approx(1.0)
    mixed = np.eye(8) / 8
    assert purity(mixed) == pytest.approx(1 / 8)
    sl, s = entropies(mixed)
    assert sl == pytest.approx(1 - 1 / 8)
    assert s == pytest.approx(math.log(8))
    assert excitation(b.fock_dm(5)) == pytest.approx(5.0)


@pytest.mark.parametrize("nbar", [0.0, 0.5, 1.0, 5.0])
def test_thermal_purity_series(nbar):
    assert thermal_purity_series(nbar) == pytest.approx(thermal_purity_oracle(nbar), abs=1e-12)


def test_thermal_state_populations():
    pops = thermal_populations(1.0, 200)
    assert pops[:3] == pytest.approx([0.5, 0.25, 0.125])
    rho = thermal_state(1.0, 200)
    assert purity(rho) == pytest.approx(1 / 3, abs=1e-12)


def test_trace_distance():
    b = FockBasis(4)
    assert trace_distance(b.fock_dm(0), b.fock_dm(1)) == pytest.approx(1.0)
    assert trace_distance(b.fock_dm(2), b.fock_dm(2)) == 0.0


@pytest.mark.parametrize("method", ["parity", "laguerre"])
def test_wigner_fock_closed_forms(method):
    b = FockBasis(12)
    assert wigner_point(b.fock_dm(0), 0, method) == pytest.approx(2 / math.pi, abs=1e-12)
    assert wigner_point(b.fock_dm(1), 0, method) == pytest.approx(-2 / math.pi, abs=1e-12)
    # W_n(beta) = (2/pi) (-1)^n exp(-2|beta|^2) L_n(4|beta|^2)
    for n in (2, 5):
        for beta in (0.3 + 0.4j, -1.1j, 1.7):
            r2 = abs(beta) ** 2
            want = 2 / math.pi * (-1) ** n * math.exp(-2 * r2) * eval_genlaguerre(n, 0, 4 * r2)
            assert wigner_point(b.fock_dm(n), beta, method) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("method", ["parity", "laguerre"])
def test_wigner_coherent_state_gaussian(method):
    alpha = 1.2 - 0.7j
    v = coherent(alpha, 40)
    rho = np.outer(v, v.conj())
    for beta in (alpha, alpha + 0.3, 0.5j):
        want = 2 / math.pi * math.exp(-2 * abs(beta - alpha) ** 2)
        assert wigner_point(rho, beta, method) == pytest.approx(want, abs=1e-9)


def test_wigner_routes_agree_on_random_state():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    g1 = wigner(rho, (-3, 3), (-3, 3), 15, 13, method="parity")
    g2 = wigner(rho, (-3, 3), (-3, 3), 15, 13, method="laguerre")
    assert np.max(np.abs(g1.values - g2.values)) < 1e-10
    assert g1.values.shape == (15, 13)


def test_wigner_grid_normalization_and_orientation():
    alpha = 1.5
    v = coherent(alpha, 30)
    g = wigner(np.outer(v, v.conj()), (-2, 5), (-3, 3), 71, 61)
    assert g.normalization() == pytest.approx(1.0, abs=0.03)
    i, j = np.unravel_index(np.argmax(g.values), g.values.shape)
    assert g.xs[i] == pytest.approx(1.5, abs=0.06)
    assert g.ys[j] == pytest.approx(0.0, abs=0.06)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.floats(-2, 2), st.floats(-2, 2))
def test_wigner_bounded(n, x, y):
    # |W| <= 2/pi for any state
    w = wigner_point(FockBasis(10).fock_dm(n), complex(x, y))
    assert abs(w) <= 2 / math.pi + 1e-12
