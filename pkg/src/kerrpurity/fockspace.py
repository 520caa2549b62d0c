"""Truncated Fock-space operators for a single driven Kerr mode.

Rates and energies are dimensionless (divided by the damping rate gamma)
and operators are dense complex numpy arrays of shape ``(dim, dim)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .drive import Constant, DriveSpec, evaluate
from .errors import ConfigError

DEFAULT_DIM = 60
TAIL_LEVELS = 5
TAIL_TOL = 1e-6


@dataclass(frozen=True)
class FockBasis:
    """Fock levels |0> .. |dim-1>."""

    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ConfigError(f"Fock dimension must be an integer >= 2, got {self.dim}")

    @property
    def levels(self):
        return np.arange(self.dim, dtype=float)

    def vacuum(self):
        psi = np.zeros(self.dim, dtype=complex)
        psi[0] = 1.0
        return psi

    def fock_dm(self, n: int = 0):
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[n, n] = 1.0
        return rho


@dataclass(frozen=True)
class SystemParams:
    """Driven Kerr oscillator: detuning, Kerr strength, bath occupation and drive."""

    delta: float
    chi: float
    nbar: float = 0.0
    drive: DriveSpec = field(default_factory=Constant)

    def __post_init__(self):
        if not self.nbar >= 0:
            raise ConfigError(f"bath occupation must be >= 0, got {self.nbar}")

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace
        return replace(self, **changes)


def annihilation(basis: FockBasis) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, basis.dim, dtype=float)), k=1).astype(complex)


def creation(basis: FockBasis) -> np.ndarray:
    return annihilation(basis).conj().T


def number(basis: FockBasis) -> np.ndarray:
    return np.diag(basis.levels).astype(complex)


def diagonal_energies(params: SystemParams, basis: FockBasis) -> np.ndarray:
    """Undriven part of H as a vector: delta*n + chi*n^2."""
    n = basis.levels
    return params.delta * n + params.chi * n * n


def hamiltonian(params: SystemParams, t: float, basis: FockBasis) -> np.ndarray:
    """H(t)/(hbar gamma) = delta a'a + chi (a'a)^2 + f(t) a' + f(t)* a."""
    a = annihilation(basis)
    f = evaluate(params.drive, t)
    return np.diag(diagonal_energies(params, basis)).astype(complex) + f * a.conj().T + np.conj(f) * a


def lindblad_ops(params: SystemParams, basis: FockBasis):
    """Damping and thermal-excitation channels sqrt(N+1) a and sqrt(N) a'."""
    a = annihilation(basis)
    return np.sqrt(params.nbar + 1.0) * a, np.sqrt(params.nbar) * a.conj().T


def tail_population(rho: np.ndarray, tail_levels: int = TAIL_LEVELS) -> float:
    return float(np.real(np.diagonal(rho)[-tail_levels:].sum()))


def truncation_adequate(rho: np.ndarray, tail_levels: int = TAIL_LEVELS, tol: float = TAIL_TOL) -> bool:
    """True if the top ``tail_levels`` Fock states hold less than ``tol`` population."""
    if not 0 < tail_levels < rho.shape[0]:
        raise ConfigError(f"tail_levels must lie in [1, dim), got {tail_levels}")
    return tail_population(rho, tail_levels) < tol
