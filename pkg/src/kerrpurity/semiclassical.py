"""Mean-field amplitude dynamics: trajectories, Lyapunov exponents, Poincare maps.

The amplitude alpha = <a> obeys

    d alpha/dt = -i (delta + chi + 2 chi |alpha|^2) alpha - i f(t) - kappa alpha

in units of gamma, with kappa = ``DAMPING`` = 1/2 by default (the decay rate
of <a> under the master equation at zero temperature).  Reversing the sign of the drive maps alpha -> -alpha,
so every diagnostic here is insensitive to the drive-sign convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .drive import drive_period, evaluate
from .errors import ConfigError, NonFiniteState, NoPeriod
from .fockspace import SystemParams

#: amplitude damping rate of <a> implied by the master equation, in units of gamma
DAMPING = 0.5


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float
    t: float


@dataclass(frozen=True)
class LyapunovConfig:
    d0: float = 1e-8
    renorm_every: int = 10
    t_transient: float = 100.0
    t_total: float = 2000.0
    dt: float = 1e-3

    def __post_init__(self):
        if not self.d0 > 0:
            raise ConfigError(f"d0 must be positive, got {self.d0}")
        if not self.t_total > self.t_transient >= 0:
            raise ConfigError("need t_total > t_transient >= 0")
        if int(self.renorm_every) != self.renorm_every or self.renorm_every < 1:
            raise ConfigError("renorm_every must be a positive integer")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")


def _packed(params: SystemParams, damping: float):
    kind, p = params.drive.packed()
    return float(params.delta), float(params.chi), float(damping), kind, p


def mean_field_rhs(params: SystemParams, alpha: complex, t: float, damping: float = DAMPING) -> complex:
    n = alpha.real ** 2 + alpha.imag ** 2
    return (-1j * (params.delta + params.chi + 2.0 * params.chi * n) * alpha
            - 1j * evaluate(params.drive, t) - damping * alpha)


def integrate_trajectory(params: SystemParams, alpha0: complex = 0j, t_span=(0.0, 100.0),
                         dt: float = 1e-3, sample_every: int = 1, damping: float = DAMPING):
    """Fixed-step RK4; returns (times, complex amplitudes) every ``sample_every`` steps."""
    t0, t1 = t_span
    n_steps = int(round((t1 - t0) / dt))
    alphas = _kernels.mf_integrate(complex(alpha0), float(t0), float(dt), n_steps, int(sample_every),
                                   *_packed(params, damping))
    times = t0 + dt * sample_every * np.arange(alphas.shape[0])
    if not np.all(np.isfinite(alphas)):
        bad = int(np.argmin(np.isfinite(alphas)))
        raise NonFiniteState(f"mean-field amplitude diverged near t={times[bad]:.3f}", t=float(times[bad]))
    return times, alphas


def phase_points(times, alphas):
    return [PhasePoint(float(a.real), float(a.imag), float(t)) for t, a in zip(times, alphas)]


def lyapunov_max(params: SystemParams, cfg: LyapunovConfig = LyapunovConfig(), alpha0: complex = 0j,
                 direction: complex = (1 + 1j) / math.sqrt(2), damping: float = DAMPING) -> float:
    """Largest Lyapunov exponent (units of gamma) by the renormalized two-trajectory method.

    The reference trajectory is run through ``cfg.t_transient``, a partner is
    placed ``cfg.d0`` away, and every ``cfg.renorm_every`` steps the log of
    the separation growth is accumulated before pulling the partner back to
    distance d0 along the current separation.  The time coordinate is the
    same on both trajectories, so it never contributes to the separation.
    """
    n_tr = int(round(cfg.t_transient / cfg.dt))
    n_av = int(round((cfg.t_total - cfg.t_transient) / cfg.dt))
    total, a = _kernels.mf_lyapunov(complex(alpha0), cfg.dt, n_tr, n_av, int(cfg.renorm_every),
                                    cfg.d0, complex(direction), *_packed(params, damping))
    if not (math.isfinite(total) and np.isfinite(a)):
        raise NonFiniteState("mean-field trajectory diverged during the Lyapunov run")
    return total / (n_av * cfg.dt)


def poincare_section(params: SystemParams, alpha0: complex = 0j, n_points: int = 1000,
                     t_transient: float = 100.0, dt: float = 1e-3, damping: float = DAMPING) -> np.ndarray:
    """Stroboscopic (Re alpha, Im alpha) at t_n = k*period, after the transient.

    The step is shrunk so that one drive period is an integer number of
    steps; the sampling phase is aligned with the drive (t0 = 0).
    """
    period = drive_period(params.drive)
    if period is None:
        raise NoPeriod("a constant drive has no stroboscopic period")
    per = max(1, int(math.ceil(period / dt)))
    step = period / per
    k0 = int(math.ceil(t_transient / period - 1e-12))
    n_steps = (k0 + n_points - 1) * per
    _, alphas = integrate_trajectory(params, alpha0, (0.0, n_steps * step), step, per, damping)
    pts = alphas[k0:k0 + n_points]
    return np.column_stack([pts.real, pts.imag])


def cluster_count(points, resolution: float = 1e-3) -> int:
    """Number of greedy clusters: a point joins the first center within ``resolution``."""
    centers = np.empty((0, 2))
    for p in np.asarray(points, dtype=float):
        if centers.shape[0] and np.min(np.hypot(*(centers - p).T)) <= resolution:
            continue
        centers = np.vstack([centers, p])
    return int(centers.shape[0])
