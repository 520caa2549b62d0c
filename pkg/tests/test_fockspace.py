import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kerrpurity.drive import Constant
from kerrpurity.errors import ConfigError
from kerrpurity.fockspace import (FockBasis, SystemParams, annihilation, creation, diagonal_energies,
                                  hamiltonian, lindblad_ops, number, tail_population, truncation_adequate)


def test_ladder_operators():
    b = FockBasis(6)
    a, ad = annihilation(b), creation(b)
    assert np.allclose(ad, a.conj().T)
    assert np.allclose(ad @ a, number(b))
    # [a, a'] = 1 except in the last level
    comm = a @ ad - ad @ a
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    assert np.isclose(comm[-1, -1], -(b.dim - 1))


def test_basis_rejects_tiny_dim():
    with pytest.raises(ConfigError):
        FockBasis(1)


def test_hamiltonian_diagonal_and_drive():
    b = FockBasis(5)
    p = SystemParams(-2.0, 0.3, 0.0, Constant(0.7 - 0.2j))
    h = hamiltonian(p, 0.0, b)
    n = np.arange(5)
    assert np.allclose(np.diag(h).real, -2.0 * n + 0.3 * n ** 2)
    assert np.allclose(diagonal_energies(p, b), -2.0 * n + 0.3 * n ** 2)
    assert np.allclose(h, h.conj().T)
    # f a' + f* a: element <1|H|0> is f
    assert np.isclose(h[1, 0], 0.7 - 0.2j)


def test_lindblad_ops_rates():
    b = FockBasis(4)
    l1, l2 = lindblad_ops(SystemParams(0, 0, 0.5, Constant(0)), b)
    assert np.allclose(l1, np.sqrt(1.5) * annihilation(b))
    assert np.allclose(l2, np.sqrt(0.5) * creation(b))


def test_tail_population():
    b = FockBasis(10)
    rho = b.fock_dm(8)
    assert tail_population(rho, 5) == pytest.approx(1.0)
    assert not truncation_adequate(rho)
    assert truncation_adequate(b.fock_dm(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.floats(-20, 20), st.floats(0, 3))
def test_hamiltonian_hermitian(dim, delta, chi):
    p = SystemParams(delta, chi, 0.0, Constant(1.5 + 0.5j))
    h = hamiltonian(p, 0.3, FockBasis(dim))
    assert np.allclose(h, h.conj().T)
