"""Parameter sweeps over drive strength and Kerr nonlinearity.

A sweep evaluates, for every grid point, the post-transient maximum and
mean of the excitation number and purity (quantum leg) and/or the largest
mean-field Lyapunov exponent.  Rows are appended to a CSV file as soon as
they are computed, so an interrupted sweep resumes where it stopped; the
file is rewritten in grid order once the sweep completes.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .drive import GaussianTrain, drive_from_dict, drive_to_dict
from .errors import ConfigError, EmptySelection, KerrPurityError, TruncationOverflow
from .fockspace import FockBasis, SystemParams
from .lindblad import EvolutionConfig, evolve, stiffness
from .qsd import EnsembleConfig, run_ensemble, worker_count
from .semiclassical import DAMPING, LyapunovConfig, lyapunov_max

DRIVE_FIELDS = {"amp", "f0", "f1", "delta_mod", "width", "period", "offset"}
SYSTEM_FIELDS = {"delta", "chi", "nbar"}
DIAGNOSTICS = ("quantum", "lyapunov")

ROW_FIELDS = [
    "i", "j", "axis1", "value1", "axis2", "value2", "delta", "chi", "nbar", "drive", "seed",
    "dim", "excitation_max", "excitation_mean", "purity_max", "purity_mean", "lyapunov",
    "status", "error",
]


def with_param(base: SystemParams, name: str, value: float) -> SystemParams:
    """Copy of ``base`` with one system or drive parameter replaced."""
    if name in SYSTEM_FIELDS:
        return dataclasses.replace(base, **{name: float(value)})
    if name in DRIVE_FIELDS:
        if not any(f.name == name for f in dataclasses.fields(base.drive)):
            raise ConfigError(f"drive {base.drive.kind!r} has no parameter {name!r}")
        return dataclasses.replace(base, drive=dataclasses.replace(base.drive, **{name: float(value)}))
    raise ConfigError(f"unknown sweep parameter {name!r}")


def _monotone(values) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass(frozen=True)
class QuantumLeg:
    """How each grid point's quantum evolution is run."""

    solver: str = "lindblad"
    t_end: float = 40.0
    dt: float = 1e-3
    record_every: int = 20
    t_transient: float = 20.0
    dim: int = 40
    max_dim: int = 160
    n_traj: int = 1000

    def __post_init__(self):
        if self.solver not in ("lindblad", "qsd"):
            raise ConfigError(f"unknown quantum solver {self.solver!r}")


@dataclass(frozen=True)
class SweepSpec:
    axis1: tuple                     # (name, values)
    base: SystemParams
    axis2: Optional[tuple] = None
    per_point: tuple = DIAGNOSTICS
    quantum: QuantumLeg = QuantumLeg()
    lyapunov: LyapunovConfig = LyapunovConfig(t_transient=100.0, t_total=1000.0)
    damping: float = DAMPING
    seed: int = 0

    def __post_init__(self):
        for axis in (self.axis1, self.axis2):
            if axis is None:
                continue
            name, values = axis
            if len(values) == 0:
                raise ConfigError(f"sweep axis {name!r} has no values")
            if len(values) > 1 and not _monotone(values):
                raise ConfigError(f"sweep axis {name!r} must be strictly monotone")
            with_param(self.base, name, values[0])
        bad = set(self.per_point) - set(DIAGNOSTICS)
        if bad or not self.per_point:
            raise ConfigError(f"per_point must be a nonempty subset of {DIAGNOSTICS}")

    def points(self):
        name1, vals1 = self.axis1
        if self.axis2 is None:
            for i, v in enumerate(vals1):
                yield i, 0, float(v), None
        else:
            for i, v in enumerate(vals1):
                for j, w in enumerate(self.axis2[1]):
                    yield i, j, float(v), float(w)

    def params_at(self, v1, v2) -> SystemParams:
        p = with_param(self.base, self.axis1[0], v1)
        if self.axis2 is not None:
            p = with_param(p, self.axis2[0], v2)
        return p

    def point_seed(self, i: int, j: int) -> int:
        return int(np.random.SeedSequence(self.seed, spawn_key=(i, j)).generate_state(1, np.uint64)[0])


def split_factor(params: SystemParams, dim: int, dt: float) -> int:
    """Smallest integer k for which dt/k passes the RK4 stability guard."""
    rate = stiffness(params, dim, False)
    k = max(1, math.ceil(rate * dt / 2.8))
    return k + 1 if rate * (dt / k) > 2.8 else k


def quantum_summary(params: SystemParams, leg: QuantumLeg, seed: int = 0) -> dict:
    """Post-transient max/mean of excitation and purity, growing the basis on overflow."""
    dim = leg.dim
    while True:
        # a larger basis can push leg.dt past the stability bound; subdivide it
        # so the recorded times stay the same
        k = split_factor(params, dim, leg.dt)
        dt, every = leg.dt / k, leg.record_every * k
        try:
            if leg.solver == "lindblad":
                ts = evolve(params, basis=FockBasis(dim),
                            cfg=EvolutionConfig(leg.t_end, dt, every, leg.t_transient))
            else:
                ts = run_ensemble(params, EnsembleConfig(leg.t_end, leg.n_traj, seed, dt,
                                                         every, leg.t_transient),
                                  basis=FockBasis(dim), workers=1)
            break
        except TruncationOverflow:
            if dim >= leg.max_dim:
                raise
            dim = min(leg.max_dim, int(math.ceil(dim * 1.5)))
    s = ts.summary()
    return {"dim": dim, "excitation_max": s["excitation_max"], "excitation_mean": s["excitation_mean"],
            "purity_max": s["purity_max"], "purity_mean": s["purity_mean"]}


def evaluate_point(spec: SweepSpec, i: int, j: int, v1: float, v2: Optional[float]) -> dict:
    params = spec.params_at(v1, v2)
    seed = spec.point_seed(i, j)
    row = {"i": i, "j": j, "axis1": spec.axis1[0], "value1": v1,
           "axis2": spec.axis2[0] if spec.axis2 else "", "value2": "" if v2 is None else v2,
           "delta": params.delta, "chi": params.chi, "nbar": params.nbar,
           "drive": _drive_str(params), "seed": seed, "status": "ok", "error": ""}
    try:
        if "quantum" in spec.per_point:
            row.update(quantum_summary(params, spec.quantum, seed))
        if "lyapunov" in spec.per_point:
            row["lyapunov"] = lyapunov_max(params, spec.lyapunov, damping=spec.damping)
    except (KerrPurityError, FloatingPointError) as exc:
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _evaluate_task(args):
    return evaluate_point(*args)


def _drive_str(params: SystemParams) -> str:
    return ";".join(f"{k}={v}" for k, v in drive_to_dict(params.drive).items())


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return v


def read_rows(path) -> list:
    """Rows of a sweep table with numeric columns converted back to numbers."""
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in ("i", "j", "seed", "dim") and v != "":
                    row[k] = int(v)
                elif k in ("axis1", "axis2", "drive", "status", "error"):
                    row[k] = v
                elif v == "":
                    row[k] = None
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def write_rows(path, rows: Iterable[dict]):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in ROW_FIELDS})
    os.replace(tmp, path)


def run_sweep(spec: SweepSpec, out_path=None, workers: Optional[int] = None, resume: bool = True) -> list:
    """Evaluate every grid point; returns rows in grid order.

    With ``out_path`` each finished row is appended immediately and rows
    already present (same grid coordinates, status ok) are skipped.
    """
    done = {}
    if out_path is not None and resume and os.path.exists(out_path):
        for row in read_rows(out_path):
            if row.get("status") == "ok":
                done[(row["i"], row["j"])] = row
    todo = [(spec, i, j, v1, v2) for i, j, v1, v2 in spec.points() if (i, j) not in done]

    fh = writer = None
    if out_path is not None:
        fresh = not os.path.exists(out_path) or not resume
        if not fresh:
            # keep only completed rows so failed points are retried cleanly
            write_rows(out_path, sorted(done.values(), key=lambda r: (r["i"], r["j"])))
        fh = open(out_path, "w" if fresh else "a", newline="")
        writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS, lineterminator="\n")
        if fresh:
            writer.writeheader()
            fh.flush()

    n_workers = worker_count(workers)
    results = dict(done)
    try:
        if n_workers > 1 and len(todo) > 1:
            import multiprocessing as mp
            with mp.get_context("spawn").Pool(n_workers) as pool:
                for row in pool.imap_unordered(_evaluate_task, todo):
                    results[(row["i"], row["j"])] = row
                    if writer:
                        writer.writerow({k: _fmt(row.get(k, "")) for k in ROW_FIELDS})
                        fh.flush()
        else:
            for task in todo:
                row = _evaluate_task(task)
                results[(row["i"], row["j"])] = row
                if writer:
                    writer.writerow({k: _fmt(row.get(k, "")) for k in ROW_FIELDS})
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    rows = [results[k] for k in sorted(results)]
    if out_path is not None:
        write_rows(out_path, rows)
        # round-trip so in-memory rows match what a resumed sweep would read
        rows = read_rows(out_path)
    return rows


@dataclass
class ConstraintSelection:
    target_band: tuple
    selected: list = field(default_factory=list)   # (value1, value2) pairs
    rows: list = field(default_factory=list)       # matching sweep rows


def select_constant_excitation(rows: Sequence[dict], band=(3.6958, 5.5217)) -> ConstraintSelection:
    """For each axis-1 value keep the axis-2 point whose max excitation is inside ``band``.

    Among several qualifying points the one closest to the band centre wins
    (lower axis-2 value on exact ties).  Axis-1 values with no qualifying
    point are dropped.
    """
    lo, hi = band
    center = 0.5 * (lo + hi) if math.isfinite(hi) else None
    by_v1 = {}
    for row in rows:
        if row.get("status", "ok") != "ok" or row.get("excitation_max") is None:
            continue
        by_v1.setdefault(row["value1"], []).append(row)
    sel = ConstraintSelection(tuple(band))
    for v1 in sorted(by_v1):
        inside = [r for r in by_v1[v1] if lo <= r["excitation_max"] <= hi]
        if not inside:
            continue
        if center is None:
            best = min(inside, key=lambda r: (r["value2"] if r["value2"] is not None else 0.0))
        else:
            best = min(inside, key=lambda r: (abs(r["excitation_max"] - center),
                                              r["value2"] if r["value2"] is not None else 0.0))
        sel.selected.append((v1, best["value2"]))
        sel.rows.append(best)
    if not sel.selected:
        raise EmptySelection(f"no sweep point has max excitation inside {band}")
    return sel


@dataclass
class TransitionCurve:
    value1: np.ndarray
    value2: np.ndarray
    purity_max: np.ndarray
    lyapunov: np.ndarray
    sign_change_step: Optional[int]
    steepest_drop_step: Optional[int]

    def separated(self) -> bool:
        """Every regular point is purer than every chaotic point."""
        reg = self.purity_max[self.lyapunov < 0]
        cha = self.purity_max[self.lyapunov > 0]
        if reg.size == 0 or cha.size == 0:
            return False
        return bool(reg.min() > cha.max())


def sign_change_step(values) -> Optional[int]:
    """Index k of the first step k -> k+1 where the sign flips, or None."""
    s = np.sign(np.asarray(values, dtype=float))
    for k in range(len(s) - 1):
        if s[k] != s[k + 1] and s[k] != 0 and s[k + 1] != 0:
            return k
    return None


def steepest_drop_step(values) -> Optional[int]:
    """Index k of the most negative increment values[k+1] - values[k], or None."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return None
    return int(np.argmin(np.diff(v)))


def transition_curve(selection: ConstraintSelection, spec: Optional[SweepSpec] = None) -> TransitionCurve:
    """Aligned (axis-1 value, max purity, Lyapunov exponent) series and transition detectors.

    Rows lacking a diagnostic are completed with ``spec`` (required then).
    """
    if not selection.rows:
        raise EmptySelection("empty selection")
    pur, lyap = [], []
    for row in selection.rows:
        p, lam = row.get("purity_max"), row.get("lyapunov")
        if (p is None or lam is None) and spec is None:
            raise ConfigError("selection rows lack diagnostics and no sweep spec was given")
        if p is None:
            p = quantum_summary(spec.params_at(row["value1"], row["value2"]), spec.quantum)["purity_max"]
        if lam is None:
            lam = lyapunov_max(spec.params_at(row["value1"], row["value2"]), spec.lyapunov,
                               damping=spec.damping)
        pur.append(p)
        lyap.append(lam)
    v1 = np.array([r["value1"] for r in selection.rows], dtype=float)
    v2 = np.array([np.nan if r["value2"] is None else r["value2"] for r in selection.rows], dtype=float)
    pur, lyap = np.array(pur), np.array(lyap)
    return TransitionCurve(v1, v2, pur, lyap, sign_change_step(lyap), steepest_drop_step(pur))


def grid(start: float, stop: float, step: float) -> list:
    """Inclusive arithmetic grid rounded to 10 digits."""
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 10) for k in range(n + 1)]


def spec_to_dict(spec: SweepSpec) -> dict:
    return {
        "axis1": {"name": spec.axis1[0], "values": list(spec.axis1[1])},
        "axis2": None if spec.axis2 is None else {"name": spec.axis2[0], "values": list(spec.axis2[1])},
        "base": {"delta": spec.base.delta, "chi": spec.base.chi, "nbar": spec.base.nbar,
                 "drive": drive_to_dict(spec.base.drive)},
        "per_point": list(spec.per_point),
        "quantum": dataclasses.asdict(spec.quantum),
        "lyapunov": dataclasses.asdict(spec.lyapunov),
        "damping": spec.damping,
        "seed": spec.seed,
    }


def spec_from_dict(d: dict) -> SweepSpec:
    try:
        base = d["base"]
        params = SystemParams(float(base["delta"]), float(base["chi"]), float(base.get("nbar", 0.0)),
                              drive_from_dict(base["drive"]))

        def axis(a):
            if a is None:
                return None
            if "values" in a:
                vals = [float(v) for v in a["values"]]
            else:
                vals = grid(float(a["start"]), float(a["stop"]), float(a["step"]))
            return (a["name"], tuple(vals))

        return SweepSpec(axis(d["axis1"]), params, axis(d.get("axis2")),
                         tuple(d.get("per_point", DIAGNOSTICS)),
                         QuantumLeg(**d.get("quantum", {})),
                         LyapunovConfig(**d.get("lyapunov", {"t_transient": 100.0, "t_total": 1000.0})),
                         float(d.get("damping", DAMPING)), int(d.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed sweep config: {exc}") from None


PULSE_BASE = SystemParams(-15.0, 0.1, 0.0, GaussianTrain(12.0, 0.1, 2 * math.pi / 5))


def pulse_sweep(coarse: bool = True, seed: int = 0) -> SweepSpec:
    """Drive strength x Kerr grid for the Gaussian pulse train (width 0.1, period 2pi/5).

    The full grid is amp 6..24 step 1 by chi 0.05..1.0 step 0.05; the coarse
    grid halves the resolution on both axes (100 points).
    """
    if coarse:
        amps, chis = grid(6, 24, 2), grid(0.1, 1.0, 0.1)
    else:
        amps, chis = grid(6, 24, 1), grid(0.05, 1.0, 0.05)
    return SweepSpec(("amp", tuple(amps)), PULSE_BASE, ("chi", tuple(chis)), seed=seed)
