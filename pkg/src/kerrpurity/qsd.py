"""Quantum state diffusion: a pure-state stochastic unraveling of the master equation.

Each trajectory obeys the Ito equation

    d psi = [-i H + sum_k (<L_k'> L_k - L_k'L_k/2 - |<L_k>|^2/2)] psi dt
            + sum_k (L_k - <L_k>) psi dxi_k

with independent complex Wiener increments, E[dxi dxi*] = dt, E[dxi^2] = 0.
The ensemble average of |psi><psi| solves the Lindblad equation.

``qsd_step`` is the literal Ito-Euler update.  ``run_ensemble`` steps
trajectories in batches; with ``scheme="rk4ip"`` (default) the drift over a
step is integrated with interaction-picture RK4 and the noise term is added
Ito-Euler style from the pre-step state, which keeps the diagonal chi*n^2
phases exact.  ``scheme="euler"`` reproduces ``qsd_step`` on every
trajectory.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .drive import evaluate
from .errors import ConfigError, NonFiniteState, TruncationOverflow
from .fockspace import FockBasis, SystemParams, diagonal_energies, hamiltonian, lindblad_ops
from ._kernels import qsd_rk4ip_batch
from .lindblad import DEFAULT_TRANSIENT, TimeSeries, _columns, check_step, default_observers

#: trajectories per reduction chunk; partial density matrices are summed chunk by chunk
CHUNK = 128
#: noise increments pre-drawn per trajectory at a time
NOISE_BLOCK = 512
WORKERS_ENV = "KERRPURITY_WORKERS"


@dataclass(frozen=True)
class EnsembleConfig:
    t_end: float
    n_traj: int = 1000
    seed: int = 0
    dt: float = 1e-3
    record_every: int = 50
    t_transient: float = DEFAULT_TRANSIENT
    scheme: str = "rk4ip"
    tail_levels: int = 5
    tail_tol: float = 1e-6
    check_truncation: bool = True
    allow_large_dt: bool = False

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ConfigError(f"n_traj must be a positive integer, got {self.n_traj}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.dt > 0.01 and not self.allow_large_dt:
            raise ConfigError(f"dt={self.dt} exceeds 0.01; set allow_large_dt to override")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError(f"record_every must be a positive integer, got {self.record_every}")
        if self.scheme not in ("rk4ip", "euler"):
            raise ConfigError(f"unknown QSD scheme {self.scheme!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def wiener_increments(rng: np.random.Generator, shape, dt: float) -> np.ndarray:
    """Complex Wiener increments with E|dxi|^2 = dt and E[dxi^2] = 0."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return math.sqrt(0.5 * dt) * (z[..., 0] + 1j * z[..., 1])


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory, a pure function of (seed, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def qsd_step(params: SystemParams, psi, t: float, dt: float, noise) -> np.ndarray:
    """One Ito-Euler step of the QSD equation followed by renormalization.

    ``noise`` holds one complex increment per Lindblad channel (damping,
    thermal excitation).  Expectation values use the pre-step state.
    """
    psi = np.asarray(psi, dtype=complex)
    basis = FockBasis(psi.shape[0])
    h = hamiltonian(params, t, basis)
    drift = -1j * (h @ psi)
    diffusion = np.zeros_like(psi)
    for op, dxi in zip(lindblad_ops(params, basis), noise):
        lpsi = op @ psi
        ell = np.vdot(psi, lpsi)
        drift += np.conj(ell) * lpsi - 0.5 * (op.conj().T @ lpsi) - 0.5 * abs(ell) ** 2 * psi
        diffusion += (lpsi - ell * psi) * dxi
    out = psi + dt * drift + diffusion
    norm = np.linalg.norm(out)
    if not np.isfinite(norm) or norm == 0:
        raise NonFiniteState(f"QSD state became non-finite at t={t:.4f}", t=t)
    return out / norm


class BatchStepper:
    """Structured QSD update for an array of states with shape (batch, dim)."""

    def __init__(self, params: SystemParams, dim: int, dt: float, scheme: str = "rk4ip"):
        self.params = params
        self.dim = dim
        self.dt = dt
        self.scheme = scheme
        n = np.arange(dim, dtype=float)
        self.s = np.sqrt(n[1:])
        self.c1 = math.sqrt(params.nbar + 1.0)
        self.c2 = math.sqrt(params.nbar)
        up = n + 1.0
        up[-1] = 0.0  # a a' truncated
        e = diagonal_energies(params, FockBasis(dim))
        self.diag = -1j * e - 0.5 * (self.c1 ** 2 * n + self.c2 ** 2 * up)
        self.half = np.exp(0.5 * dt * self.diag)

    def lower(self, psi):
        out = np.zeros_like(psi)
        out[:, :-1] = self.s * psi[:, 1:]
        return out

    def raise_(self, psi):
        out = np.zeros_like(psi)
        out[:, 1:] = self.s * psi[:, :-1]
        return out

    def _mean_a(self, psi, apsi):
        norm2 = np.sum((psi * psi.conj()).real, axis=1)
        return np.sum(psi.conj() * apsi, axis=1) / norm2

    def nonlinear(self, psi, f):
        """Drift minus its diagonal part."""
        apsi = self.lower(psi)
        adpsi = self.raise_(psi)
        ma = self._mean_a(psi, apsi)
        l1 = self.c1 * ma
        l2 = self.c2 * np.conj(ma)
        out = -1j * (f * adpsi + np.conj(f) * apsi)
        out += (np.conj(l1) * self.c1)[:, None] * apsi
        if self.c2:
            out += (np.conj(l2) * self.c2)[:, None] * adpsi
        out -= (0.5 * (np.abs(l1) ** 2 + np.abs(l2) ** 2))[:, None] * psi
        return out

    def diffusion(self, psi, dxi):
        apsi = self.lower(psi)
        ma = self._mean_a(psi, apsi)
        out = (self.c1 * (apsi - ma[:, None] * psi)) * dxi[:, 0:1]
        if self.c2:
            adpsi = self.raise_(psi)
            out += (self.c2 * (adpsi - np.conj(ma)[:, None] * psi)) * dxi[:, 1:2]
        return out

    def step(self, psi, t, dxi):
        dt = self.dt
        drive = self.params.drive
        f0 = evaluate(drive, t)
        noise = self.diffusion(psi, dxi)
        if self.scheme == "euler":
            new = psi + dt * (self.diag * psi + self.nonlinear(psi, f0)) + noise
        else:
            fm = evaluate(drive, t + 0.5 * dt)
            f1 = evaluate(drive, t + dt)
            h = self.half
            pi_ = h * psi
            k1 = h * self.nonlinear(psi, f0)
            k2 = self.nonlinear(pi_ + (0.5 * dt) * k1, fm)
            k3 = self.nonlinear(pi_ + (0.5 * dt) * k2, fm)
            k4 = self.nonlinear(h * (pi_ + dt * k3), f1)
            new = h * (pi_ + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3)) + (dt / 6.0) * k4 + noise
        norm = np.sqrt(np.sum((new * new.conj()).real, axis=1))
        return new / norm[:, None]


@dataclass
class _ChunkGroup:
    """Trajectory states and RNG streams for a contiguous run of chunks."""

    first: int               # first trajectory index
    psi: np.ndarray          # (batch, dim)
    rngs: list
    noise: np.ndarray        # (NOISE_BLOCK, batch, 2)
    cursor: int
    step: int
    bounds: list             # chunk boundaries relative to ``first``


def _new_group(cfg: EnsembleConfig, dim: int, first: int, last: int, psi0=None) -> _ChunkGroup:
    batch = last - first
    psi = np.zeros((batch, dim), dtype=complex)
    if psi0 is None:
        psi[:, 0] = 1.0
    else:
        psi[:] = np.asarray(psi0, dtype=complex) / np.linalg.norm(psi0)
    rngs = [trajectory_rng(cfg.seed, i) for i in range(first, last)]
    bounds = []
    c = (first // CHUNK) * CHUNK
    while c < last:
        bounds.append((max(c, first) - first, min(c + CHUNK, last) - first))
        c += CHUNK
    return _ChunkGroup(first, psi, rngs, np.empty((0, batch, 2), complex), 0, 0, bounds)


def _advance(group: _ChunkGroup, params: SystemParams, cfg: EnsembleConfig, n_samples: int,
             use_kernel: bool = True, t0: float = 0.0):
    """Step ``group`` through the next ``n_samples`` sample intervals.

    Returns the group and a list (per sample) of per-chunk sums of |psi><psi|.
    """
    stepper = BatchStepper(params, group.psi.shape[1], cfg.dt, cfg.scheme)
    compiled = use_kernel and cfg.scheme == "rk4ip"
    partials = []
    psi = group.psi
    for _ in range(n_samples):
        for _ in range(cfg.record_every):
            if group.cursor >= group.noise.shape[0]:
                group.noise = np.stack([wiener_increments(r, (NOISE_BLOCK, 2), cfg.dt) for r in group.rngs],
                                       axis=1)
                group.cursor = 0
            t = t0 + group.step * cfg.dt
            dxi = group.noise[group.cursor]
            if compiled:
                drive = params.drive
                qsd_rk4ip_batch(psi, cfg.dt, evaluate(drive, t), evaluate(drive, t + 0.5 * cfg.dt),
                                evaluate(drive, t + cfg.dt), stepper.half, stepper.s,
                                stepper.c1, stepper.c2, dxi)
            else:
                psi = stepper.step(psi, t, dxi)
            group.cursor += 1
            group.step += 1
        if not np.all(np.isfinite(psi)):
            bad = int(np.nonzero(~np.all(np.isfinite(psi), axis=1))[0][0]) + group.first
            raise NonFiniteState(f"trajectory {bad} became non-finite at t={t0 + group.step * cfg.dt:.4f}",
                                 t=t0 + group.step * cfg.dt, trajectory=bad)
        partials.append([_outer_sum(np.ascontiguousarray(psi[a:b])) for a, b in group.bounds])
    group.psi = psi
    return group, partials


def _advance_task(args):
    return _advance(*args)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def _check(rho, t, cfg):
    if not np.all(np.isfinite(rho)):
        raise NonFiniteState(f"ensemble state became non-finite at t={t:.4f}", t=t)
    if cfg.check_truncation:
        tail = float(np.real(np.diagonal(rho)[-cfg.tail_levels:].sum()))
        if tail >= cfg.tail_tol:
            raise TruncationOverflow(
                f"population {tail:.2e} in the top {cfg.tail_levels} of {rho.shape[0]} Fock levels "
                f"at t={t:.3f} exceeds {cfg.tail_tol:g}; increase the Fock dimension", t=t, tail=tail)


def run_ensemble(params: SystemParams, cfg: EnsembleConfig,
                 observers: Optional[Mapping[str, Callable]] = None,
                 basis: Optional[FockBasis] = None, workers: Optional[int] = None,
                 psi0=None, samples_per_task: int = 20, use_kernel: bool = True) -> TimeSeries:
    """Evolve ``cfg.n_traj`` trajectories from vacuum and sample observables of the mean state.

    Observers receive the ensemble-averaged density matrix.  Trajectory k
    draws its noise from a stream keyed by (seed, k) and partial sums are
    reduced in chunk order, so output does not depend on ``workers``.
    """
    basis = basis or FockBasis()
    dim = basis.dim
    observers = dict(default_observers() if observers is None else observers)
    if not cfg.allow_large_dt:
        check_step(params, dim, cfg.dt, cfg.scheme == "euler")
    n_workers = worker_count(workers)
    n_chunks = -(-cfg.n_traj // CHUNK)
    per = -(-n_chunks // n_workers)
    groups = []
    for w in range(n_workers):
        a, b = w * per * CHUNK, min((w + 1) * per * CHUNK, cfg.n_traj)
        if a < b:
            groups.append(_new_group(cfg, dim, a, b, psi0))

    rho = np.zeros((dim, dim), dtype=complex)
    if psi0 is None:
        rho[0, 0] = 1.0
    else:
        v = np.asarray(psi0, dtype=complex) / np.linalg.norm(psi0)
        rho = np.outer(v, v.conj())
    times, rows = [0.0], [{k: fn(rho, 0.0) for k, fn in observers.items()}]
    n_samples_total = cfg.n_steps // cfg.record_every

    pool = None
    if len(groups) > 1:
        import multiprocessing as mp
        pool = mp.get_context("spawn").Pool(len(groups))
    try:
        done = 0
        while done < n_samples_total:
            batch = min(samples_per_task, n_samples_total - done)
            tasks = [(g, params, cfg, batch, use_kernel) for g in groups]
            results = pool.map(_advance_task, tasks) if pool else [_advance_task(t) for t in tasks]
            groups = [g for g, _ in results]
            for j in range(batch):
                acc = np.zeros((dim, dim), dtype=complex)
                for _, partials in results:
                    for part in partials[j]:
                        acc += part
                rho = acc / cfg.n_traj
                done += 1
                t = done * cfg.record_every * cfg.dt
                _check(rho, t, cfg)
                times.append(t)
                rows.append({k: fn(rho, t) for k, fn in observers.items()})
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return TimeSeries(np.array(times), _columns(rows), rho, cfg.t_transient)


def _outer_sum(block):
    """sum_k |psi_k><psi_k| for the rows of ``block``."""
    return block.T @ block.conj()
