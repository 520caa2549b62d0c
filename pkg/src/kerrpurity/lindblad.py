"""Deterministic integration of the Lindblad master equation.

Time is in units of 1/gamma.  ``liouvillian_apply`` is the literal dense
form of the master equation; ``evolve`` uses an equivalent structured
generator (all operators are diagonal or one-step ladder shifts, so each
term is an O(dim^2) slice operation) and fixed-step fourth-order
Runge-Kutta.  By default the RK4 stages are taken in the interaction
picture of the diagonal part (free energies plus no-jump decay), which is
exact for that part and removes the chi*n^2 stiffness from the step-size
constraint; ``method="rk4"`` integrates the full generator directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import observables as obs
from .drive import drive_bound, evaluate
from .errors import ConfigError, NonFiniteState, TruncationOverflow
from .fockspace import (TAIL_LEVELS, TAIL_TOL, FockBasis, SystemParams, diagonal_energies,
                        hamiltonian, lindblad_ops, tail_population)

MAX_DEFAULT_DT = 0.01
DEFAULT_TRANSIENT = 20.0


@dataclass(frozen=True)
class EvolutionConfig:
    t_end: float
    dt: float = 1e-3
    record_every: int = 10
    t_transient: float = DEFAULT_TRANSIENT
    method: str = "rk4ip"
    allow_large_dt: bool = False
    check_truncation: bool = True
    tail_levels: int = TAIL_LEVELS
    tail_tol: float = TAIL_TOL
    enforce: bool = True    # re-symmetrize and renormalize after every step

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.dt > MAX_DEFAULT_DT and not self.allow_large_dt:
            raise ConfigError(f"dt={self.dt} exceeds {MAX_DEFAULT_DT}; set allow_large_dt to override")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError(f"record_every must be a positive integer, got {self.record_every}")
        if self.method not in ("rk4ip", "rk4"):
            raise ConfigError(f"unknown integration method {self.method!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class TimeSeries:
    """Observables sampled during an evolution, plus the final state."""

    t: np.ndarray
    columns: dict
    final: np.ndarray
    t_transient: float = DEFAULT_TRANSIENT
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name == "t":
            return self.t
        return self.columns[name]

    def post_transient(self, name):
        return np.asarray(self.columns[name])[self.t >= self.t_transient]

    def summary(self) -> dict:
        """Mean and max of every scalar column over the post-transient window."""
        out = {}
        for name, col in self.columns.items():
            col = np.asarray(col)
            if col.ndim != 1:
                continue
            tail = col[self.t >= self.t_transient]
            if tail.size:
                out[f"{name}_mean"] = float(tail.mean())
                out[f"{name}_max"] = float(tail.max())
        return out


def default_observers() -> dict:
    return {
        "excitation": lambda rho, t: obs.excitation(rho),
        "purity": lambda rho, t: obs.purity(rho),
        "von_neumann": lambda rho, t: obs.entropies(rho)[1],
    }


def liouvillian_apply(params: SystemParams, rho, t: float) -> np.ndarray:
    """d rho/dt = -i[H(t), rho] + sum_k (L rho L' - {L'L, rho}/2) with gamma = 1."""
    basis = FockBasis(rho.shape[0])
    h = hamiltonian(params, t, basis)
    out = -1j * (h @ rho - rho @ h)
    for op in lindblad_ops(params, basis):
        opd = op.conj().T
        ll = opd @ op
        out += op @ rho @ opd - 0.5 * (ll @ rho + rho @ ll)
    return out


class Generator:
    """Structured Liouvillian for one parameter set and basis size.

    ``diag`` holds the elementwise part (free evolution and no-jump decay)
    and ``remainder`` applies the drive commutator and the jump terms.
    """

    def __init__(self, params: SystemParams, dim: int):
        self.params = params
        self.dim = dim
        n = np.arange(dim, dtype=float)
        e = diagonal_energies(params, FockBasis(dim))
        nb = params.nbar
        # a a' in the truncated space is diag(1, 2, ..., dim-1, 0)
        up = n + 1.0
        up[-1] = 0.0
        decay = 0.5 * ((nb + 1.0) * (n[:, None] + n[None, :]) + nb * (up[:, None] + up[None, :]))
        self.diag = -1j * (e[:, None] - e[None, :]) - decay
        # interaction-picture part: zero on the diagonal so that every stage of
        # the exponential integrator conserves the trace exactly
        self.ip = self.diag.copy()
        np.fill_diagonal(self.ip, 0.0)
        self.pop_decay = np.diagonal(self.diag).real.copy()
        s = np.sqrt(n[1:])
        self.s = s
        self.ss = s[:, None] * s[None, :]
        self.nbar = nb

    def remainder(self, rho, f: complex):
        # (a rho)[m] = sqrt(m+1) rho[m+1];  (a' rho)[m] = sqrt(m) rho[m-1]
        x = np.empty_like(rho)
        x[0] = 0.0
        x[1:] = f * (self.s[:, None] * rho[:-1])
        x[:-1] += np.conj(f) * (self.s[:, None] * rho[1:])
        out = -1j * (x - x.conj().T)
        out[:-1, :-1] += (self.nbar + 1.0) * self.ss * rho[1:, 1:]
        if self.nbar:
            out[1:, 1:] += self.nbar * self.ss * rho[:-1, :-1]
        return out

    def remainder_ip(self, rho, f: complex):
        """Everything not in ``ip``: ``remainder`` plus the population decay."""
        out = self.remainder(rho, f)
        k = np.arange(self.dim)
        out[k, k] += self.pop_decay * rho[k, k]
        return out

    def full(self, rho, f: complex):
        return self.diag * rho + self.remainder(rho, f)


def stiffness(params: SystemParams, dim: int, include_diagonal: bool) -> float:
    """Bound on the fastest rate the explicit RK4 stages have to resolve."""
    # drive coupling f a' + f* a has norm <= 2 |f| sqrt(dim - 1) on each side of the commutator
    rate = 4.0 * drive_bound(params.drive) * math.sqrt(dim - 1)
    # population block: decay out of a level plus the jump feeding it (Gershgorin)
    rate += 2.0 * ((params.nbar + 1.0) * (dim - 1) + params.nbar * dim)
    if include_diagonal:
        e = diagonal_energies(params, FockBasis(dim))
        rate += float(np.max(e) - np.min(e))
    return rate


def check_step(params: SystemParams, dim: int, dt: float, include_diagonal: bool):
    # RK4 is stable on the imaginary axis up to |z| = 2*sqrt(2)
    rate = stiffness(params, dim, include_diagonal)
    if rate * dt > 2.8:
        raise ConfigError(
            f"dt={dt} is beyond the RK4 stability limit {2.8 / rate:.2e} for this drive and "
            f"Fock dimension {dim}; reduce dt")


def _observe(observers, rho, t):
    return {name: fn(rho, t) for name, fn in observers.items()}


def evolve(params: SystemParams, rho0=None, cfg: Optional[EvolutionConfig] = None,
           observers: Optional[Mapping[str, Callable]] = None, basis: Optional[FockBasis] = None,
           t0: float = 0.0) -> TimeSeries:
    """Integrate the master equation from ``rho0`` (vacuum by default).

    Observers are ``name -> fn(rho, t)`` callables sampled at t0 and then
    every ``cfg.record_every`` steps.  Raises TruncationOverflow when the top
    Fock levels gain population and NonFiniteState on overflow.
    """
    if cfg is None:
        raise ConfigError("an EvolutionConfig is required")
    if rho0 is None:
        rho0 = (basis or FockBasis()).fock_dm(0)
    rho = np.array(rho0, dtype=complex)
    dim = rho.shape[0]
    observers = dict(default_observers() if observers is None else observers)
    gen = Generator(params, dim)
    if not cfg.allow_large_dt:
        check_step(params, dim, cfg.dt, cfg.method == "rk4")
    dt = cfg.dt
    half = np.exp(gen.ip * (0.5 * dt))
    rem = gen.remainder_ip
    drive = params.drive

    def check(rho, t):
        if not np.all(np.isfinite(rho)):
            raise NonFiniteState(f"density matrix became non-finite at t={t:.4f}", t=t)
        if cfg.check_truncation:
            tail = tail_population(rho, cfg.tail_levels)
            if tail >= cfg.tail_tol:
                raise TruncationOverflow(
                    f"population {tail:.2e} in the top {cfg.tail_levels} of {dim} Fock levels "
                    f"at t={t:.3f} exceeds {cfg.tail_tol:g}; increase the Fock dimension", t=t, tail=tail)

    check(rho, t0)
    times = [t0]
    rows = [_observe(observers, rho, t0)]
    t = t0
    for step in range(1, cfg.n_steps + 1):
        f0 = evaluate(drive, t)
        fm = evaluate(drive, t + 0.5 * dt)
        f1 = evaluate(drive, t + dt)
        if cfg.method == "rk4ip":
            ri = half * rho
            k1 = half * rem(rho, f0)
            k2 = rem(ri + (0.5 * dt) * k1, fm)
            k3 = rem(ri + (0.5 * dt) * k2, fm)
            k4 = rem(half * (ri + dt * k3), f1)
            rho = half * (ri + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3)) + (dt / 6.0) * k4
        else:
            k1 = gen.full(rho, f0)
            k2 = gen.full(rho + (0.5 * dt) * k1, fm)
            k3 = gen.full(rho + (0.5 * dt) * k2, fm)
            k4 = gen.full(rho + dt * k3, f1)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + step * dt
        tr = np.trace(rho).real
        if cfg.enforce:
            rho = 0.5 * (rho + rho.conj().T)
            if abs(tr - 1.0) > 1e-12:
                rho /= tr
        if step % cfg.record_every == 0 or step == cfg.n_steps:
            check(rho, t)
            if step % cfg.record_every == 0:
                times.append(t)
                rows.append(_observe(observers, rho, t))
        elif step % 1000 == 0 and not np.isfinite(tr):
            raise NonFiniteState(f"density matrix became non-finite at t={t:.4f}", t=t)
    return TimeSeries(np.array(times), _columns(rows), rho, cfg.t_transient)


def _columns(rows: Sequence[dict]) -> dict:
    if not rows:
        return {}
    cols = {}
    for name in rows[0]:
        vals = [r[name] for r in rows]
        try:
            cols[name] = np.asarray(vals, dtype=float) if np.ndim(vals[0]) == 0 else np.asarray(vals)
        except TypeError:
            cols[name] = np.asarray(vals)
    return cols
