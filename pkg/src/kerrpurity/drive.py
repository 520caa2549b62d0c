"""Drive amplitudes f(t) in the rotating frame.

All times are in units of 1/gamma and all amplitudes in units of gamma.
Three families are supported: a constant amplitude, a bichromatic drive
``f0 + f1 exp(i delta t)`` and a train of Gaussian pulses
``amp * sum_{n>=0} exp(-(t - t0 - n tau)^2 / T^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError

#: Gaussian pulses are truncated beyond this many widths; exp(-36) ~ 2e-16.
WINDOW_WIDTHS = 6.0

# integer codes used by the compiled semiclassical kernels
KIND_CONSTANT = 0
KIND_BICHROMATIC = 1
KIND_GAUSSIAN = 2


@dataclass(frozen=True)
class Constant:
    amp: complex = 0.0

    kind = "constant"

    def __call__(self, t):
        return evaluate(self, t)

    def packed(self):
        a = complex(self.amp)
        return KIND_CONSTANT, np.array([a.real, a.imag, 0.0, 0.0])


@dataclass(frozen=True)
class Bichromatic:
    f0: float
    f1: float
    delta_mod: float

    kind = "bichromatic"

    def __post_init__(self):
        if self.delta_mod == 0:
            raise ConfigError("bichromatic drive needs a nonzero modulation frequency")

    def __call__(self, t):
        return evaluate(self, t)

    def packed(self):
        return KIND_BICHROMATIC, np.array([self.f0, self.f1, self.delta_mod, 0.0])


@dataclass(frozen=True)
class GaussianTrain:
    amp: float
    width: float
    period: float
    offset: float = 0.0

    kind = "gaussian_train"

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"pulse width must be positive, got {self.width}")
        if not self.period > 0:
            raise ConfigError(f"pulse period must be positive, got {self.period}")

    def __call__(self, t):
        return evaluate(self, t)

    def packed(self):
        return KIND_GAUSSIAN, np.array([self.amp, self.width, self.period, self.offset])


DriveSpec = Union[Constant, Bichromatic, GaussianTrain]


def _pulse_sum(spec: GaussianTrain, t: float, window: Optional[float]) -> float:
    u0 = t - spec.offset
    if window is None:
        # full sum over every pulse that has started; used to check the cutoff
        nhi = int(math.floor(u0 / spec.period)) + int(math.ceil(40 * spec.width / spec.period)) + 1
        nlo = 0
    else:
        reach = window * spec.width
        nlo = max(0, int(math.ceil((u0 - reach) / spec.period)))
        nhi = int(math.floor((u0 + reach) / spec.period))
    s = 0.0
    for n in range(nlo, nhi + 1):
        x = (u0 - n * spec.period) / spec.width
        s += math.exp(-x * x)
    return s


def evaluate(spec: DriveSpec, t, window: Optional[float] = WINDOW_WIDTHS):
    """Complex drive amplitude at time ``t`` (scalar or array).

    ``window`` only affects the Gaussian train: pulses further than
    ``window * width`` from ``t`` are skipped. ``window=None`` sums every
    pulse n >= 0.
    """
    if np.ndim(t) > 0:
        t = np.asarray(t, dtype=float)
        return np.array([evaluate(spec, float(s), window) for s in t.ravel()]).reshape(t.shape)
    if isinstance(spec, Constant):
        return complex(spec.amp)
    if isinstance(spec, Bichromatic):
        return spec.f0 + spec.f1 * complex(math.cos(spec.delta_mod * t), math.sin(spec.delta_mod * t))
    if isinstance(spec, GaussianTrain):
        return complex(spec.amp * _pulse_sum(spec, t, window))
    raise TypeError(f"unknown drive spec {spec!r}")


def drive_period(spec: DriveSpec) -> Optional[float]:
    """Modulation period of the drive, or None for a constant drive."""
    if isinstance(spec, Bichromatic):
        return 2 * math.pi / abs(spec.delta_mod)
    if isinstance(spec, GaussianTrain):
        return spec.period
    return None


def drive_to_dict(spec: DriveSpec) -> dict:
    if isinstance(spec, Constant):
        a = complex(spec.amp)
        return {"kind": "constant", "amp": a.real if a.imag == 0 else [a.real, a.imag]}
    if isinstance(spec, Bichromatic):
        return {"kind": "bichromatic", "f0": spec.f0, "f1": spec.f1, "delta_mod": spec.delta_mod}
    return {"kind": "gaussian_train", "amp": spec.amp, "width": spec.width,
            "period": spec.period, "offset": spec.offset}


def drive_from_dict(d: dict) -> DriveSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "constant":
            amp = d.pop("amp", 0.0)
            if isinstance(amp, (list, tuple)):
                amp = complex(amp[0], amp[1])
            spec = Constant(amp)
        elif kind == "bichromatic":
            spec = Bichromatic(float(d.pop("f0")), float(d.pop("f1")), float(d.pop("delta_mod")))
        elif kind == "gaussian_train":
            spec = GaussianTrain(float(d.pop("amp")), float(d.pop("width")),
                                 float(_num(d.pop("period"))), float(d.pop("offset", 0.0)))
        else:
            raise ConfigError(f"unknown drive kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"drive {kind!r} is missing field {exc.args[0]!r}") from None
    if d:
        raise ConfigError(f"unexpected drive fields: {sorted(d)}")
    return spec


def _num(value):
    # allow "2*pi/5" style period values in config files
    if isinstance(value, str):
        expr = value.replace("pi", repr(math.pi))
        if not set(expr) <= set("0123456789.+-*/() e"):
            raise ConfigError(f"cannot parse number {value!r}")
        return eval(expr, {"__builtins__": {}}, {})
    return value


def drive_bound(spec: DriveSpec) -> float:
    """Upper bound on |f(t)| over all t."""
    if isinstance(spec, Constant):
        return abs(complex(spec.amp))
    if isinstance(spec, Bichromatic):
        return abs(spec.f0) + abs(spec.f1)
    # at most one pulse peaks at t; the others add a Gaussian-sum tail
    return abs(spec.amp) * (1.0 + math.sqrt(math.pi) * spec.width / spec.period + 2.0)
