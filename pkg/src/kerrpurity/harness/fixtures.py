"""Named parameter sets for the six figures, with expected diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..drive import Bichromatic, GaussianTrain, drive_to_dict
from ..errors import ConfigError
from ..fockspace import SystemParams

PULSE_PERIOD = 2 * math.pi / 5

# Reference values exactly as published (ratios to gamma). Fixtures are checked
# against this table so an edited fixture cannot drift silently.
REFERENCE = {
    "fig1": {"delta": -15.0, "chi": 2.0, "f0": 10.2, "f1": 10.2, "delta_mod": 5.0},
    "fig2": {"delta": -14.25, "chi": 0.175, "f0": 20.4, "f1": 20.4, "delta_mod": 5.0},
    "fig3": {"delta": -15.0, "chi": 0.7, "f0": 32.2, "f1": 10.2, "delta_mod": 5.0},
    "fig4": {"amp": 15.0, "chi": 0.7, "delta": -15.0, "width": 10.2, "period": PULSE_PERIOD},
    "fig5": {"amp": 20.4, "chi": 0.7, "delta": -15.0, "width": 0.1, "period": PULSE_PERIOD},
    "fig6": {"amp": 12.0, "chi": 0.1, "delta": -15.0, "width": 0.1, "period": PULSE_PERIOD},
}


@dataclass(frozen=True)
class Expected:
    value: float
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _pm(value, tol):
    return Expected(value, value - tol, value + tol)


@dataclass(frozen=True)
class Fixture:
    name: str
    regime: str
    params: SystemParams
    expected: dict                   # diagnostic -> Expected
    dim: int = 60
    dt: float = 1e-3
    t_end: float = 60.0
    notes: str = ""
    extra: dict = field(default_factory=dict)


def _bichromatic(name):
    c = REFERENCE[name]
    return SystemParams(c["delta"], c["chi"], 0.0, Bichromatic(c["f0"], c["f1"], c["delta_mod"]))


def _pulsed(name):
    c = REFERENCE[name]
    return SystemParams(c["delta"], c["chi"], 0.0, GaussianTrain(c["amp"], c["width"], c["period"]))


FIXTURES = {
    "fig1": Fixture("fig1", "chaotic", _bichromatic("fig1"),
                    {"purity": Expected(0.09, 0.04, 0.18)}, dim=60,
                    notes="time-modulated drive; strange attractor in the stroboscopic map"),
    "fig2": Fixture("fig2", "deep chaotic", _bichromatic("fig2"),
                    {"purity": Expected(0.03, 0.01, 0.08)}, dim=180, t_end=40.0,
                    notes="time-modulated drive; lowest purity of the modulated family"),
    "fig3": Fixture("fig3", "regular", _bichromatic("fig3"),
                    {"purity": Expected(0.7, 0.55, 0.85)}, dim=60,
                    notes="time-modulated drive, f1/f0 small; near-Gaussian Wigner function"),
    "fig4": Fixture("fig4", "chaotic", _pulsed("fig4"),
                    {"excitation": _pm(2.5, 0.5), "purity": _pm(0.305, 0.08), "lyapunov": _pm(0.187, 0.05)},
                    dim=100, dt=2e-4, t_end=40.0,
                    notes="Gaussian pulses; width 10.2 exceeds the period, so pulses overlap"),
    "fig5": Fixture("fig5", "deep chaotic", _pulsed("fig5"),
                    {"excitation": _pm(3.0, 0.6), "purity": _pm(0.22, 0.06), "lyapunov": _pm(0.4197, 0.08)},
                    dim=60, notes="Gaussian pulses"),
    "fig6": Fixture("fig6", "regular", _pulsed("fig6"),
                    {"excitation": _pm(2.0, 0.5), "purity": _pm(0.922, 0.05), "lyapunov": _pm(-0.1693, 0.05)},
                    dim=40, notes="Gaussian pulses; near-Gaussian Wigner function"),
}


def reference_values(params: SystemParams) -> dict:
    d = {"delta": params.delta, "chi": params.chi}
    drive = drive_to_dict(params.drive)
    drive.pop("kind")
    drive.pop("offset", None)
    d.update(drive)
    return d


def validate_fixture(name: str, params: SystemParams) -> None:
    """Raise ConfigError unless ``params`` match the reference table exactly."""
    if name not in REFERENCE:
        raise ConfigError(f"unknown fixture {name!r}; known: {sorted(REFERENCE)}")
    got = reference_values(params)
    want = REFERENCE[name]
    if set(got) != set(want) or any(got[k] != want[k] for k in want) or params.nbar != 0.0:
        raise ConfigError(f"fixture {name!r} parameters {got} do not match reference values {want}")


def get_fixture(name: str) -> Fixture:
    try:
        fx = FIXTURES[name]
    except KeyError:
        raise ConfigError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None
    validate_fixture(name, fx.params)
    return fx


def list_fixtures() -> list:
    """One dict per fixture: name, regime, reference parameters, expected diagnostics."""
    out = []
    for name in sorted(FIXTURES):
        fx = get_fixture(name)
        out.append({
            "name": name,
            "regime": fx.regime,
            "params": reference_values(fx.params),
            "drive": fx.params.drive.kind,
            "expected": {k: {"value": e.value, "min": e.lo, "max": e.hi} for k, e in fx.expected.items()},
            "dim": fx.dim,
            "dt": fx.dt,
        })
    return out
