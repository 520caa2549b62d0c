"""Declarative run configuration (YAML/JSON key-value tree, all rates in units of gamma)."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..drive import drive_from_dict, drive_to_dict
from ..errors import ConfigError
from ..fockspace import DEFAULT_DIM, FockBasis, SystemParams
from ..lindblad import EvolutionConfig
from ..qsd import EnsembleConfig
from ..semiclassical import DAMPING, LyapunovConfig
from .fixtures import get_fixture, validate_fixture

TOP_KEYS = {"name", "fixture", "system", "solver", "evolution", "outputs", "seed", "fock_dim",
            "semiclassical", "output_dir"}


@dataclass(frozen=True)
class WignerOutput:
    times: tuple = ("final",)
    nx: int = 61
    ny: int = 61
    bound: Optional[float] = None
    method: str = "parity"


@dataclass(frozen=True)
class PoincareOutput:
    n_points: int = 1000
    t_transient: float = 100.0
    dt: float = 1e-3


@dataclass(frozen=True)
class Outputs:
    timeseries: bool = True
    wigner: Optional[WignerOutput] = None
    poincare: Optional[PoincareOutput] = None
    lyapunov: Optional[LyapunovConfig] = None


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    evolution: EvolutionConfig
    solver: str = "lindblad"
    n_traj: int = 1000
    seed: int = 0
    fock_dim: int = DEFAULT_DIM
    outputs: Outputs = field(default_factory=Outputs)
    damping: float = DAMPING
    fixture: Optional[str] = None
    name: str = "run"
    output_dir: str = "runs"

    @property
    def basis(self) -> FockBasis:
        return FockBasis(self.fock_dim)

    def ensemble(self) -> EnsembleConfig:
        e = self.evolution
        return EnsembleConfig(e.t_end, self.n_traj, self.seed, e.dt, e.record_every, e.t_transient,
                              tail_levels=e.tail_levels, tail_tol=e.tail_tol,
                              allow_large_dt=e.allow_large_dt)

    def to_dict(self) -> dict:
        """Canonical form: complete, JSON-serializable, used for the manifest and the hash."""
        out = self.outputs
        return {
            "name": self.name,
            "fixture": self.fixture,
            "system": {"delta": self.system.delta, "chi": self.system.chi, "nbar": self.system.nbar,
                       "drive": drive_to_dict(self.system.drive)},
            "solver": {"kind": self.solver, "n_traj": self.n_traj},
            "evolution": dataclasses.asdict(self.evolution),
            "outputs": {
                "timeseries": out.timeseries,
                "wigner": None if out.wigner is None else
                dict(dataclasses.asdict(out.wigner), times=list(out.wigner.times)),
                "poincare": None if out.poincare is None else dataclasses.asdict(out.poincare),
                "lyapunov": None if out.lyapunov is None else dataclasses.asdict(out.lyapunov),
            },
            "seed": self.seed,
            "fock_dim": self.fock_dim,
            "semiclassical": {"damping": self.damping},
            "output_dir": self.output_dir,
        }

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _section(d, key, allowed):
    sec = d.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key!r} must be a mapping")
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")
    return sec


def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, sec, what):
    try:
        return cls(**sec)
    except TypeError as exc:
        raise ConfigError(f"bad {what} settings: {exc}") from None


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    extra = set(d) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    fixture = d.get("fixture")
    fx = get_fixture(fixture) if fixture else None

    if "system" in d:
        sec = _section(d, "system", {"delta", "chi", "nbar", "drive"})
        try:
            system = SystemParams(float(sec["delta"]), float(sec["chi"]), float(sec.get("nbar", 0.0)),
                                  drive_from_dict(sec["drive"]))
        except KeyError as exc:
            raise ConfigError(f"system is missing {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad system settings: {exc}") from None
        if fx is not None:
            validate_fixture(fixture, system)
    elif fx is not None:
        system = fx.params
    else:
        raise ConfigError("config needs either 'system' or 'fixture'")

    ev = dict(_section(d, "evolution", _fields(EvolutionConfig)))
    if fx is not None:
        ev.setdefault("t_end", fx.t_end)
        ev.setdefault("dt", fx.dt)
    if "t_end" not in ev:
        raise ConfigError("evolution.t_end is required")
    evolution = _build(EvolutionConfig, ev, "evolution")

    solver = d.get("solver", "lindblad")
    n_traj = 1000
    if isinstance(solver, dict):
        sec = _section(d, "solver", {"kind", "n_traj"})
        try:
            n_traj = int(sec.get("n_traj", n_traj))
        except (TypeError, ValueError):
            raise ConfigError(f"n_traj must be an integer, got {sec.get('n_traj')!r}") from None
        solver = sec.get("kind", "lindblad")
    if solver not in ("lindblad", "qsd"):
        raise ConfigError(f"solver must be 'lindblad' or 'qsd', got {solver!r}")
    if n_traj < 1:
        raise ConfigError("n_traj must be >= 1")

    osec = _section(d, "outputs", {"timeseries", "wigner", "poincare", "lyapunov"})

    def sub(key, cls):
        val = osec.get(key)
        if val in (None, False):
            return None
        if val is True:
            return cls()
        if not isinstance(val, dict):
            raise ConfigError(f"outputs.{key} must be a mapping or boolean")
        if key == "wigner" and "times" in val:
            val = dict(val, times=tuple(val["times"]))
        return _build(cls, val, f"outputs.{key}")

    outputs = Outputs(bool(osec.get("timeseries", True)), sub("wigner", WignerOutput),
                      sub("poincare", PoincareOutput), sub("lyapunov", LyapunovConfig))
    if outputs.wigner is not None:
        for t in outputs.wigner.times:
            if t != "final" and not isinstance(t, (int, float)):
                raise ConfigError(f"Wigner time {t!r} must be a number or 'final'")
        if outputs.wigner.method not in ("parity", "laguerre"):
            raise ConfigError(f"unknown Wigner method {outputs.wigner.method!r}")

    sc = _section(d, "semiclassical", {"damping"})
    try:
        fock_dim = int(d.get("fock_dim", fx.dim if fx else DEFAULT_DIM))
        seed = int(d.get("seed", 0))
        damping = float(sc.get("damping", DAMPING))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric setting: {exc}") from None
    FockBasis(fock_dim)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    return RunConfig(system, evolution, solver, n_traj, seed, fock_dim, outputs, damping, fixture,
                     str(d.get("name", fixture or "run")), str(d.get("output_dir", "runs")))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data)


def fixture_config(name: str, solver: str = "qsd", **overrides) -> RunConfig:
    """Default full-pipeline config for a figure fixture."""
    fx = get_fixture(name)
    d = {
        "fixture": name,
        "solver": {"kind": solver, "n_traj": 1000},
        "evolution": {"t_end": fx.t_end, "dt": fx.dt, "record_every": 50},
        "outputs": {"timeseries": True, "wigner": {"times": ["final"]},
                    "poincare": {"n_points": 1000},
                    "lyapunov": {}},
        "seed": 20151,
    }
    d.update(overrides)
    return config_from_dict(d)
