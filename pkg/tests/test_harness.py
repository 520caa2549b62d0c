import json
import math

import numpy as np
import pytest
import yaml

from kerrpurity.errors import ConfigError
from kerrpurity.harness import config_from_dict, get_fixture, list_fixtures, load_config, run
from kerrpurity.harness.bundle import bundle_dir, config_of, export_bundle, load_bundle
from kerrpurity.harness.cli import main
from kerrpurity.harness.export import (fmt, read_grid, read_grid_header, read_points_csv, read_timeseries_csv,
                                       write_grid, write_timeseries_csv)
from kerrpurity.harness.fixtures import REFERENCE, validate_fixture
from kerrpurity.observables import FIELDS, WignerGrid

SMALL = {
    "fixture": "fig6",
    "solver": "lindblad",
    "evolution": {"t_end": 1.0, "dt": 1e-3, "record_every": 100, "t_transient": 0.5},
    "fock_dim": 24,
    "outputs": {"wigner": {"times": [0.5, "final"], "nx": 31, "ny": 31, "bound": 5.0},
                "poincare": {"n_points": 20, "t_transient": 10.0},
                "lyapunov": {"t_transient": 10.0, "t_total": 30.0}},
}


def test_fixture_table_matches_reference():
    names = [f["name"] for f in list_fixtures()]
    assert names == ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"]
    fx = get_fixture("fig3")
    assert (fx.params.delta, fx.params.chi) == (-15.0, 0.7)
    assert (fx.params.drive.f0, fx.params.drive.f1, fx.params.drive.delta_mod) == (32.2, 10.2, 5.0)
    assert get_fixture("fig4").expected["lyapunov"].value == 0.187
    assert get_fixture("fig2").expected["purity"].value == 0.03
    assert get_fixture("fig4").params.drive.period == 2 * math.pi / 5
    for name in REFERENCE:
        validate_fixture(name, get_fixture(name).params)


def test_fixture_drift_rejected():
    d = dict(SMALL, system={"delta": -15.0, "chi": 0.2, "drive": {"kind": "gaussian_train", "amp": 12.0,
                                                                  "width": 0.1, "period": "2*pi/5"}})
    with pytest.raises(ConfigError):
        config_from_dict(d)
    ok = dict(SMALL, system={"delta": -15.0, "chi": 0.1, "drive": {"kind": "gaussian_train", "amp": 12.0,
                                                                   "width": 0.1, "period": "2*pi/5"}})
    assert config_from_dict(ok).system == get_fixture("fig6").params


@pytest.mark.parametrize("patch", [
    {"evolution": {"t_end": 1.0, "dt": -1e-3}},
    {"solver": "euler"},
    {"unknown": 1},
    {"fixture": "fig9"},
    {"fock_dim": 1},
    {"fock_dim": "many"},
    {"seed": -3},
    {"outputs": {"wigner": {"times": ["soon"]}}},
])
def test_config_errors(patch):
    with pytest.raises(ConfigError):
        config_from_dict(dict(SMALL, **patch))


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for name in REFERENCE:
        cfg = load_config(root / f"{name}.yaml")
        assert cfg.fixture == name and cfg.system == get_fixture(name).params


def test_fmt_is_nine_significant_digits():
    assert fmt(0.1) == "1.00000000e-01"
    assert fmt(-0.0) == "0.00000000e+00"
    with pytest.raises(ValueError):
        fmt(float("nan"))


def test_grid_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = WignerGrid(-2.5, 2.5, -1.0, 3.0, 5, 4, rng.normal(size=(5, 4)))
    p = write_grid(tmp_path / "w.grid", g, t=1.5)
    h = read_grid_header(p)
    assert h == {"t": 1.5, "x_min": -2.5, "x_max": 2.5, "y_min": -1.0, "y_max": 3.0, "nx": 5, "ny": 4}
    back = read_grid(p)
    assert np.allclose(back.values, g.values, rtol=1e-8)
    write_grid(tmp_path / "w2.grid", back, t=1.5)
    assert (tmp_path / "w2.grid").read_bytes() == p.read_bytes()


def test_empty_timeseries_is_header_only(tmp_path):
    p = write_timeseries_csv(tmp_path / "ts.csv", [])
    assert p.read_text() == ",".join(FIELDS) + "\n"
    assert all(len(v) == 0 for v in read_timeseries_csv(p).values())


def test_run_bundle_reuse_and_export(tmp_path):
    cfg = config_from_dict(dict(SMALL, output_dir=str(tmp_path)))
    b = run(cfg)
    assert not b.reused and b.path == bundle_dir(cfg)
    names = sorted(p.name for p in b.path.iterdir())
    assert names == ["diagnostics.json", "manifest.json", "poincare.csv", "timeseries.csv",
                     "wigner_final.grid", "wigner_t0.5.grid"]
    man = json.loads((b.path / "manifest.json").read_text())
    assert man["seed"] == cfg.seed and man["config_hash"] == cfg.digest()
    assert config_of(load_bundle(b.path)) == cfg

    ts = read_timeseries_csv(b.timeseries_path)
    assert list(ts) == list(FIELDS)
    assert np.allclose(ts["linear_entropy"], 1 - ts["purity"], atol=1e-8)
    assert read_grid_header(b.path / "wigner_t0.5.grid")["t"] == pytest.approx(0.5)
    assert read_points_csv(b.poincare_path).shape == (20, 2)

    before = b.timeseries_path.read_bytes()
    again = run(cfg)
    assert again.reused
    forced = run(cfg, force=True)
    assert not forced.reused and forced.timeseries_path.read_bytes() == before

    files = export_bundle(load_bundle(b.path), "csv", tmp_path / "out")
    assert (tmp_path / "out" / "timeseries.csv").read_bytes() == before
    export_bundle(load_bundle(b.path), "grid", tmp_path / "out")
    assert (tmp_path / "out" / "wigner_final.grid").read_bytes() == (b.path / "wigner_final.grid").read_bytes()
    pngs = export_bundle(load_bundle(b.path), "png", tmp_path / "png")
    assert all(p.stat().st_size > 0 for p in pngs) and len(pngs) == 3


def test_qsd_bundle_identical_across_workers(tmp_path):
    d = dict(SMALL, solver={"kind": "qsd", "n_traj": 150}, outputs={"timeseries": True})
    cfg = config_from_dict(dict(d, output_dir=str(tmp_path / "a")))
    a = run(cfg, workers=1)
    b = run(config_from_dict(dict(d, output_dir=str(tmp_path / "b"))), workers=2)
    assert a.timeseries_path.read_bytes() == b.timeseries_path.read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(yaml.safe_dump(dict(SMALL, output_dir=str(tmp_path / "runs"),
                                        outputs={"timeseries": True})))
    assert main(["run", str(good)]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(dict(SMALL, evolution={"t_end": 1.0, "dt": -1e-3},
                                       output_dir=str(tmp_path / "nothing"))))
    assert main(["run", str(bad)]) == 2
    assert not (tmp_path / "nothing").exists()
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2

    # a runtime failure names the stage
    over = tmp_path / "over.yaml"
    over.write_text(yaml.safe_dump(dict(SMALL, fixture="fig5", fock_dim=8, output_dir=str(tmp_path / "o"),
                                        outputs={"timeseries": True},
                                        evolution={"t_end": 3.0, "dt": 1e-3})))
    capsys.readouterr()
    assert main(["run", str(over)]) == 1
    assert "stage 'evolve'" in capsys.readouterr().err

    assert main(["fixtures"]) == 0
    bundle = next((tmp_path / "runs").iterdir())
    assert main(["export", str(bundle), "--format", "csv"]) == 0
    assert main(["export", str(tmp_path), "--format", "csv"]) == 2


def test_cli_sweep(tmp_path):
    cfg = {
        "output": str(tmp_path / "s.csv"),
        "band": [0, 1e9],
        "axis1": {"name": "amp", "values": [2.0, 4.0]},
        "axis2": {"name": "chi", "values": [0.1, 0.2]},
        "base": {"delta": -15.0, "chi": 0.1, "drive": {"kind": "gaussian_train", "amp": 1.0, "width": 0.1,
                                                      "period": "2*pi/5"}},
        "quantum": {"t_end": 2.0, "t_transient": 1.0, "dim": 16, "record_every": 50},
        "lyapunov": {"t_transient": 5.0, "t_total": 20.0},
    }
    p = tmp_path / "sweep.yaml"
    p.write_text(yaml.safe_dump(cfg))
    assert main(["sweep", str(p)]) == 0
    assert (tmp_path / "s.csv").exists() and (tmp_path / "s_transition.csv").exists()
    first = (tmp_path / "s.csv").read_bytes()
    assert main(["sweep", str(p)]) == 0
    assert (tmp_path / "s.csv").read_bytes() == first
