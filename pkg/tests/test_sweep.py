import math

import numpy as np
import pytest

from kerrpurity.drive import Constant, GaussianTrain
from kerrpurity.errors import ConfigError, EmptySelection
from kerrpurity.fockspace import SystemParams
from kerrpurity.semiclassical import LyapunovConfig
from kerrpurity.sweep import (QuantumLeg, SweepSpec, TransitionCurve, grid, read_rows, run_sweep,
                              select_constant_excitation, sign_change_step, spec_from_dict, spec_to_dict,
                              split_factor, steepest_drop_step, transition_curve, with_param)

BASE = SystemParams(-15.0, 0.1, 0.0, GaussianTrain(12.0, 0.1, 2 * math.pi / 5))
FAST_Q = QuantumLeg(t_end=3.0, dt=1e-3, record_every=50, t_transient=1.0, dim=20, max_dim=30)
FAST_L = LyapunovConfig(t_transient=10.0, t_total=40.0)


def small_spec(**kw):
    d = dict(axis1=("amp", (4.0, 6.0)), base=BASE, axis2=("chi", (0.1, 0.2)), quantum=FAST_Q,
             lyapunov=FAST_L, seed=3)
    d.update(kw)
    return SweepSpec(**d)


def test_with_param():
    p = with_param(BASE, "amp", 3.0)
    assert p.drive.amp == 3.0 and p.chi == 0.1
    assert with_param(BASE, "chi", 0.5).chi == 0.5
    with pytest.raises(ConfigError):
        with_param(BASE, "f0", 1.0)
    with pytest.raises(ConfigError):
        with_param(BASE, "bogus", 1.0)


def test_spec_validation():
    with pytest.raises(ConfigError):
        small_spec(axis1=("amp", ()))
    with pytest.raises(ConfigError):
        small_spec(axis1=("amp", (1.0, 3.0, 2.0)))
    with pytest.raises(ConfigError):
        small_spec(per_point=("magic",))


def test_grid_is_inclusive():
    assert grid(6, 24, 1) == [float(v) for v in range(6, 25)]
    g = grid(0.05, 1.0, 0.05)
    assert len(g) == 20 and g[-1] == 1.0


def test_spec_dict_round_trip():
    spec = small_spec()
    assert spec_from_dict(spec_to_dict(spec)) == spec
    d = spec_to_dict(spec)
    d["axis1"] = {"name": "amp", "start": 6, "stop": 10, "step": 2}
    assert spec_from_dict(d).axis1 == ("amp", (6.0, 8.0, 10.0))


def test_run_sweep_resume_is_bit_identical(tmp_path):
    spec = small_spec()
    full = tmp_path / "full.csv"
    rows = run_sweep(spec, full)
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    assert all(r["seed"] == spec.point_seed(r["i"], r["j"]) for r in rows)

    # simulate an interruption after two rows, then resume
    part = tmp_path / "part.csv"
    lines = full.read_text().splitlines(keepends=True)
    part.write_text("".join(lines[:3]))
    resumed = run_sweep(spec, part)
    assert part.read_bytes() == full.read_bytes()
    assert resumed == rows


def test_undriven_point_is_pure_and_contracting(tmp_path):
    spec = SweepSpec(("amp", (0.0,)), BASE, quantum=FAST_Q, lyapunov=FAST_L)
    row = run_sweep(spec)[0]
    assert row["purity_max"] == pytest.approx(1.0, abs=1e-12)
    assert row["lyapunov"] == pytest.approx(-0.5, abs=1e-3)


def test_failed_point_recorded_and_sweep_continues():
    # the drive at amp=30 overflows a 12-level basis that is not allowed to grow
    leg = QuantumLeg(t_end=3.0, dim=12, max_dim=12, t_transient=1.0)
    spec = SweepSpec(("amp", (0.5, 30.0)), BASE, per_point=("quantum",), quantum=leg)
    rows = run_sweep(spec)
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"] == "failed" and "TruncationOverflow" in rows[1]["error"]


def test_grown_basis_subdivides_dt():
    # strong drive at a large basis is beyond the guard at dt=1e-3; the leg halves the step
    p = with_param(BASE, "amp", 24.0)
    assert split_factor(p, 40, 1e-3) == 1
    assert split_factor(p, 90, 1e-3) == 2
    leg = QuantumLeg(t_end=0.2, dt=1e-3, record_every=50, t_transient=0.0, dim=90, max_dim=90)
    rows = run_sweep(SweepSpec(("amp", (24.0,)), BASE, per_point=("quantum",), quantum=leg))
    assert rows[0]["status"] == "ok"


def _rows(table):
    return [{"value1": v1, "value2": v2, "excitation_max": e, "status": "ok", "purity_max": 0.5, "lyapunov": -0.1}
            for v1, v2, e in table]


def test_select_constant_excitation():
    rows = _rows([(6, 0.1, 2.0), (6, 0.2, 4.7), (6, 0.3, 4.5), (8, 0.1, 9.0), (8, 0.2, 4.0),
                  (10, 0.1, 20.0)])
    sel = select_constant_excitation(rows, (3.6958, 5.5217))
    assert sel.selected == [(6, 0.2), (8, 0.2)]  # centre 4.609: 4.7 beats 4.5
    lo, hi = sel.target_band
    assert all(lo <= r["excitation_max"] <= hi for r in sel.rows)

    everything = select_constant_excitation(rows, (0, math.inf))
    assert [v for v, _ in everything.selected] == [6, 8, 10]

    with pytest.raises(EmptySelection):
        select_constant_excitation(rows, (1e6, 1e7))


def test_tie_goes_to_lower_axis2():
    rows = _rows([(6, 0.3, 4.0), (6, 0.2, 5.2174)])
    center = 0.5 * (3.6958 + 5.5217)
    rows[0]["excitation_max"] = center - 0.5
    rows[1]["excitation_max"] = center + 0.5
    assert select_constant_excitation(rows).selected == [(6, 0.2)]


def test_detectors_on_synthetic_step():
    purity = [0.95, 0.94, 0.93, 0.3, 0.25, 0.2]
    lyap = [-0.4, -0.3, -0.1, 0.2, 0.3, 0.4]
    assert sign_change_step(lyap) == 2
    assert steepest_drop_step(purity) == 2
    assert sign_change_step([-1, -2]) is None
    curve = TransitionCurve(np.arange(6.0), np.zeros(6), np.array(purity), np.array(lyap), 2, 2)
    assert curve.separated()


def test_transition_curve_fills_missing_diagnostics():
    spec = small_spec(per_point=("quantum",))
    rows = run_sweep(spec)
    sel = select_constant_excitation(rows, (0, math.inf))
    curve = transition_curve(sel, spec)
    assert len(curve.lyapunov) == 2 and np.all(np.isfinite(curve.lyapunov))
    with pytest.raises(ConfigError):
        transition_curve(sel)
