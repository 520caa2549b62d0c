"""Compiled inner loops for the QSD ensemble and the mean-field ODE."""
import math

import numba
import numpy as np


@numba.njit(cache=True)
def _nonlinear(psi, f, s, c1, c2, out):
    d = psi.shape[0]
    norm2 = 0.0
    ma = 0j
    for n in range(d):
        norm2 += psi[n].real * psi[n].real + psi[n].imag * psi[n].imag
    for n in range(d - 1):
        ma += psi[n].conjugate() * (s[n] * psi[n + 1])
    ma = ma / norm2
    l1 = c1 * ma
    l2 = c2 * ma.conjugate()
    g1 = l1.conjugate() * c1
    g2 = l2.conjugate() * c2
    shift = 0.5 * (abs(l1) ** 2 + abs(l2) ** 2)
    fc = f.conjugate()
    for n in range(d):
        apsi = s[n] * psi[n + 1] if n < d - 1 else 0j
        adpsi = s[n - 1] * psi[n - 1] if n > 0 else 0j
        out[n] = -1j * (f * adpsi + fc * apsi) + g1 * apsi + g2 * adpsi - shift * psi[n]


@numba.njit(cache=True)
def qsd_rk4ip_batch(psi, dt, f0, fm, f1, half, s, c1, c2, dxi):
    """Advance every row of ``psi`` in place by one step (see qsd.BatchStepper)."""
    b, d = psi.shape
    k1 = np.empty(d, np.complex128)
    k2 = np.empty(d, np.complex128)
    k3 = np.empty(d, np.complex128)
    k4 = np.empty(d, np.complex128)
    pi_ = np.empty(d, np.complex128)
    tmp = np.empty(d, np.complex128)
    noise = np.empty(d, np.complex128)
    for k in range(b):
        p = psi[k]
        # diffusion from the pre-step state
        norm2 = 0.0
        ma = 0j
        for n in range(d):
            norm2 += p[n].real * p[n].real + p[n].imag * p[n].imag
        for n in range(d - 1):
            ma += p[n].conjugate() * (s[n] * p[n + 1])
        ma = ma / norm2
        x0 = dxi[k, 0]
        x1 = dxi[k, 1]
        for n in range(d):
            apsi = s[n] * p[n + 1] if n < d - 1 else 0j
            val = (c1 * (apsi - ma * p[n])) * x0
            if c2 != 0.0:
                adpsi = s[n - 1] * p[n - 1] if n > 0 else 0j
                val += (c2 * (adpsi - ma.conjugate() * p[n])) * x1
            noise[n] = val
        _nonlinear(p, f0, s, c1, c2, k1)
        for n in range(d):
            pi_[n] = half[n] * p[n]
            k1[n] = half[n] * k1[n]
            tmp[n] = pi_[n] + (0.5 * dt) * k1[n]
        _nonlinear(tmp, fm, s, c1, c2, k2)
        for n in range(d):
            tmp[n] = pi_[n] + (0.5 * dt) * k2[n]
        _nonlinear(tmp, fm, s, c1, c2, k3)
        for n in range(d):
            tmp[n] = half[n] * (pi_[n] + dt * k3[n])
        _nonlinear(tmp, f1, s, c1, c2, k4)
        nn = 0.0
        for n in range(d):
            v = half[n] * (pi_[n] + (dt / 6.0) * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n])) \
                + (dt / 6.0) * k4[n] + noise[n]
            tmp[n] = v
            nn += v.real * v.real + v.imag * v.imag
        inv = 1.0 / math.sqrt(nn)
        for n in range(d):
            p[n] = tmp[n] * inv


# ---------------------------------------------------------------------------
# mean-field amplitude equation; drive packed as (kind, params) from drive.packed()
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def drive_value(kind, p, t):
    if kind == 0:
        return complex(p[0], p[1])
    if kind == 1:
        return p[0] + p[1] * complex(math.cos(p[2] * t), math.sin(p[2] * t))
    amp, width, period, offset = p[0], p[1], p[2], p[3]
    u0 = t - offset
    reach = 6.0 * width
    nlo = max(0, int(math.ceil((u0 - reach) / period)))
    nhi = int(math.floor((u0 + reach) / period))
    acc = 0.0
    for n in range(nlo, nhi + 1):
        x = (u0 - n * period) / width
        acc += math.exp(-x * x)
    return complex(amp * acc, 0.0)


@numba.njit(cache=True)
def mf_rhs(a, t, delta, chi, damping, kind, p):
    n = a.real * a.real + a.imag * a.imag
    return -1j * (delta + chi + 2.0 * chi * n) * a - 1j * drive_value(kind, p, t) - damping * a


@numba.njit(cache=True)
def mf_step(a, t, dt, delta, chi, damping, kind, p):
    k1 = mf_rhs(a, t, delta, chi, damping, kind, p)
    k2 = mf_rhs(a + 0.5 * dt * k1, t + 0.5 * dt, delta, chi, damping, kind, p)
    k3 = mf_rhs(a + 0.5 * dt * k2, t + 0.5 * dt, delta, chi, damping, kind, p)
    k4 = mf_rhs(a + dt * k3, t + dt, delta, chi, damping, kind, p)
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@numba.njit(cache=True)
def mf_integrate(a0, t0, dt, n_steps, every, delta, chi, damping, kind, p):
    """RK4 from t0; returns the amplitude every ``every`` steps (including t0)."""
    out = np.empty(n_steps // every + 1, np.complex128)
    a = a0
    out[0] = a
    j = 1
    for i in range(1, n_steps + 1):
        a = mf_step(a, t0 + (i - 1) * dt, dt, delta, chi, damping, kind, p)
        if i % every == 0:
            out[j] = a
            j += 1
    return out


@numba.njit(cache=True)
def mf_lyapunov(a0, dt, n_transient, n_average, renorm_every, d0, direction,
                delta, chi, damping, kind, p):
    """Two-trajectory estimate: returns (sum of log stretch factors, final amplitude)."""
    a = a0
    for i in range(n_transient):
        a = mf_step(a, i * dt, dt, delta, chi, damping, kind, p)
    b = a + d0 * direction
    total = 0.0
    for i in range(n_average):
        t = (n_transient + i) * dt
        a = mf_step(a, t, dt, delta, chi, damping, kind, p)
        b = mf_step(b, t, dt, delta, chi, damping, kind, p)
        if (i + 1) % renorm_every == 0 or i == n_average - 1:
            sep = b - a
            d = abs(sep)
            total += math.log(d / d0)
            b = a + sep * (d0 / d)
    return total, a
