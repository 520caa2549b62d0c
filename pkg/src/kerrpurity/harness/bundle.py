"""Execute a RunConfig and persist the result bundle."""
from __future__ import annotations

import json
import math
import os
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError, KerrPurityError, NoPeriod
from ..lindblad import default_observers, evolve
from ..observables import wigner
from ..qsd import run_ensemble
from ..semiclassical import cluster_count, lyapunov_max, poincare_section
from . import export
from .config import RunConfig, config_from_dict
from .fixtures import get_fixture

MANIFEST = "manifest.json"
STAGES = ("evolve", "wigner", "poincare", "lyapunov", "write")


class StageError(KerrPurityError):
    """A runtime failure, tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ResultBundle:
    path: Path
    manifest: dict
    diagnostics: dict = field(default_factory=dict)
    reused: bool = False

    @property
    def timeseries_path(self) -> Path:
        return self.path / "timeseries.csv"

    def wigner_paths(self) -> list:
        return sorted(self.path.glob("wigner_*.grid"))

    @property
    def poincare_path(self) -> Optional[Path]:
        p = self.path / "poincare.csv"
        return p if p.exists() else None


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


def bundle_dir(cfg: RunConfig, output_dir=None) -> Path:
    return Path(output_dir or cfg.output_dir) / f"{cfg.name}-{cfg.digest()}"


class _Snapshots:
    """Observer that keeps the state at the sample closest to each requested time."""

    def __init__(self, times, spacing):
        self.want = sorted(float(t) for t in times)
        self.tol = 0.5 * spacing + 1e-12
        self.states = {}

    def __call__(self, rho, t):
        for w in self.want:
            if w not in self.states and abs(t - w) <= self.tol:
                self.states[w] = (t, np.array(rho, copy=True))
        return 0.0


def _stage(name):
    def wrap(fn):
        def inner(*args, **kw):
            try:
                return fn(*args, **kw)
            except (ConfigError, StageError):
                raise
            except (KerrPurityError, FloatingPointError, ValueError, OSError, np.linalg.LinAlgError) as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


@_stage("evolve")
def _evolve(cfg: RunConfig, workers):
    observers = default_observers()
    snaps = None
    if cfg.outputs.wigner is not None:
        times = [t for t in cfg.outputs.wigner.times if t != "final"]
        for t in times:
            if not 0.0 <= t <= cfg.evolution.t_end:
                raise ConfigError(f"Wigner time {t} lies outside [0, {cfg.evolution.t_end}]")
        if times:
            snaps = _Snapshots(times, cfg.evolution.record_every * cfg.evolution.dt)
            observers["_snapshot"] = snaps
    if cfg.solver == "lindblad":
        ts = evolve(cfg.system, cfg=cfg.evolution, observers=observers, basis=cfg.basis)
    else:
        ts = run_ensemble(cfg.system, cfg.ensemble(), observers=observers, basis=cfg.basis,
                          workers=workers)
    ts.columns.pop("_snapshot", None)
    return ts, snaps


@_stage("wigner")
def _wigners(cfg: RunConfig, ts, snaps) -> list:
    wo = cfg.outputs.wigner
    out = []
    for t in wo.times:
        if t == "final":
            t_actual, rho = float(ts.t[-1]), ts.final
        else:
            t_actual, rho = snaps.states[float(t)]
        bounds = None if wo.bound is None else (-wo.bound, wo.bound)
        grid = wigner(rho, bounds, bounds, wo.nx, wo.ny, method=wo.method)
        out.append((t, t_actual, grid))
    return out


@_stage("poincare")
def _poincare(cfg: RunConfig):
    po = cfg.outputs.poincare
    try:
        return poincare_section(cfg.system, n_points=po.n_points, t_transient=po.t_transient, dt=po.dt,
                                damping=cfg.damping)
    except NoPeriod:
        # an unmodulated drive has a single fixed point; sample at unit intervals
        from ..semiclassical import integrate_trajectory
        n_steps = int(round(1.0 / po.dt))
        _, a = integrate_trajectory(cfg.system, 0j, (0.0, po.t_transient + po.n_points - 1), po.dt,
                                    n_steps, damping=cfg.damping)
        a = a[-po.n_points:]
        return np.column_stack([a.real, a.imag])


@_stage("lyapunov")
def _lyapunov(cfg: RunConfig) -> float:
    return lyapunov_max(cfg.system, cfg.outputs.lyapunov, damping=cfg.damping)


def _fixture_checks(cfg: RunConfig, diag: dict) -> dict:
    if not cfg.fixture:
        return {}
    fx = get_fixture(cfg.fixture)
    checks = {}
    for key, exp in fx.expected.items():
        got = diag.get(key)
        checks[key] = {"expected": exp.value, "min": exp.lo, "max": exp.hi, "measured": got,
                       "ok": None if got is None else exp.contains(got)}
    return checks


def run(cfg: RunConfig, output_dir=None, force: bool = False, workers: Optional[int] = None) -> ResultBundle:
    """Run the configured pipeline and write its bundle; reuse a complete bundle unless forced."""
    path = bundle_dir(cfg, output_dir)
    if (path / MANIFEST).exists() and not force:
        manifest = json.loads((path / MANIFEST).read_text())
        diag_path = path / "diagnostics.json"
        diag = json.loads(diag_path.read_text()) if diag_path.exists() else {}
        return ResultBundle(path, manifest, diag, reused=True)

    start = time.perf_counter()
    ts, snaps = _evolve(cfg, workers)
    grids = _wigners(cfg, ts, snaps) if cfg.outputs.wigner is not None else []
    points = _poincare(cfg) if cfg.outputs.poincare is not None else None
    lyap = _lyapunov(cfg) if cfg.outputs.lyapunov is not None else None

    summary = ts.summary()
    diag = {"summary": summary,
            "excitation": summary.get("excitation_mean"),
            "purity": summary.get("purity_mean")}
    if lyap is not None:
        diag["lyapunov"] = lyap
    if points is not None:
        diag["poincare_distinct"] = cluster_count(points)
        diag["poincare_extent"] = float(np.max(np.hypot(points[:, 0], points[:, 1])))
    if grids:
        diag["wigner_normalization"] = {_grid_name(t): g.normalization() for t, _, g in grids}
    diag["fixture_checks"] = _fixture_checks(cfg, diag)
    wall = time.perf_counter() - start

    manifest = {"config": cfg.to_dict(), "config_hash": cfg.digest(), "version": _version(),
                "seed": cfg.seed, "wall_time_s": wall, "files": []}
    try:
        _write(path, manifest, ts, grids, points, diag)
    except OSError as exc:
        raise StageError("write", exc) from exc
    return ResultBundle(path, manifest, diag)


def _grid_name(t) -> str:
    return "wigner_final.grid" if t == "final" else f"wigner_t{float(t):g}.grid"


def _write(path: Path, manifest, ts, grids, points, diag):
    tmp = path.with_name(path.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    files = []
    if manifest["config"]["outputs"]["timeseries"]:
        export.write_timeseries_csv(tmp / "timeseries.csv", export.timeseries_rows(ts))
        files.append("timeseries.csv")
    for t, t_actual, grid in grids:
        export.write_grid(tmp / _grid_name(t), grid, t=t_actual)
        files.append(_grid_name(t))
    if points is not None:
        export.write_points_csv(tmp / "poincare.csv", points)
        files.append("poincare.csv")
    (tmp / "diagnostics.json").write_text(json.dumps(_jsonable(diag), indent=2, sort_keys=True) + "\n")
    files.append("diagnostics.json")
    manifest["files"] = files
    # manifest last: its presence marks a complete bundle
    (tmp / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if path.exists():
        shutil.rmtree(path)
    os.replace(tmp, path)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def load_bundle(path) -> ResultBundle:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path} is not a result bundle: {exc}") from None
    diag_path = path / "diagnostics.json"
    diag = json.loads(diag_path.read_text()) if diag_path.exists() else {}
    return ResultBundle(path, manifest, diag, reused=True)


def config_of(bundle: ResultBundle) -> RunConfig:
    """Rebuild the RunConfig that produced ``bundle``."""
    return config_from_dict(bundle.manifest["config"])


def export_bundle(bundle: ResultBundle, fmt: str, out_dir=None) -> list:
    """Re-emit bundle contents as csv, grid or png files under ``out_dir``."""
    out = Path(out_dir or bundle.path / "export")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        if bundle.timeseries_path.exists():
            cols = export.read_timeseries_csv(bundle.timeseries_path)
            rows = list(zip(*[cols[k] for k in cols]))
        else:
            rows = []
        written.append(export.write_timeseries_csv(out / "timeseries.csv", rows))
        if bundle.poincare_path is not None:
            written.append(export.write_points_csv(out / "poincare.csv",
                                                   export.read_points_csv(bundle.poincare_path)))
    elif fmt == "grid":
        for p in bundle.wigner_paths():
            t = export.read_grid_header(p).get("t")
            written.append(export.write_grid(out / p.name, export.read_grid(p), t=t))
    elif fmt == "png":
        points = export.read_points_csv(bundle.poincare_path) if bundle.poincare_path else None
        for p in bundle.wigner_paths():
            written.append(export.render_contour(export.read_grid(p), out / (p.stem + ".png"), points,
                                                 title=p.stem))
        if points is not None:
            written.append(export.render_points(points, out / "poincare.png", title="Poincare section"))
    else:
        raise ConfigError(f"unknown export format {fmt!r}; choose csv, grid or png")
    return written
