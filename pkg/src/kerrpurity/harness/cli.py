"""Command-line entry point: run, fixtures, sweep, export."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from ..errors import ConfigError, EmptySelection, KerrPurityError
from ..qsd import WORKERS_ENV
from ..sweep import run_sweep, select_constant_excitation, spec_from_dict, transition_curve
from .bundle import StageError, export_bundle, load_bundle, run
from .config import load_config
from .export import fmt
from .fixtures import list_fixtures

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    bundle = run(cfg, output_dir=args.output_dir, force=args.force, workers=args.workers)
    state = "reused" if bundle.reused else "wrote"
    print(f"{state} {bundle.path}")
    diag = bundle.diagnostics
    for key in ("excitation", "purity", "lyapunov", "poincare_distinct"):
        if diag.get(key) is not None:
            print(f"  {key}: {diag[key]:.6g}")
    for key, chk in diag.get("fixture_checks", {}).items():
        verdict = {True: "within", False: "OUTSIDE", None: "not measured"}[chk["ok"]]
        print(f"  fixture {key}: expected {chk['expected']} [{chk['min']:.4g}, {chk['max']:.4g}], {verdict}")
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    table = list_fixtures()
    if args.json:
        print(json.dumps(table, indent=2))
        return EXIT_OK
    for fx in table:
        params = ", ".join(f"{k}={v:g}" for k, v in fx["params"].items())
        exp = ", ".join(f"{k}={e['value']:g} [{e['min']:.4g}, {e['max']:.4g}]" for k, e in fx["expected"].items())
        print(f"{fx['name']}  {fx['regime']:<13} {fx['drive']:<15} {params}")
        print(f"      expected: {exp}; dim={fx['dim']} dt={fx['dt']:g}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        data = yaml.safe_load(Path(args.config).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read sweep config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("sweep config must be a mapping")
    data = dict(data)
    out = Path(args.output or data.pop("output", "sweep.csv"))
    band = data.pop("band", [3.6958, 5.5217])
    data.pop("output", None)
    spec = spec_from_dict(data)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        rows = run_sweep(spec, out, workers=args.workers, resume=not args.restart)
    except (KerrPurityError, OSError) as exc:
        raise StageError("sweep", exc) from exc
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"wrote {len(rows)} rows to {out} ({len(failed)} failed)")
    if spec.axis2 is None or not {"quantum", "lyapunov"} <= set(spec.per_point):
        return EXIT_OK
    try:
        sel = select_constant_excitation(rows, tuple(float(b) for b in band))
    except EmptySelection as exc:
        print(f"no constant-excitation selection: {exc}")
        return EXIT_OK
    curve = transition_curve(sel, spec)
    tpath = out.with_name(out.stem + "_transition.csv")
    with open(tpath, "w") as fh:
        fh.write(f"{spec.axis1[0]},{spec.axis2[0]},purity_max,lyapunov\n")
        for row in zip(curve.value1, curve.value2, curve.purity_max, curve.lyapunov):
            fh.write(",".join(fmt(v) for v in row) + "\n")
    print(f"wrote transition curve ({len(curve.value1)} points) to {tpath}")
    print(f"  lyapunov sign change at step {curve.sign_change_step}, "
          f"steepest purity drop at step {curve.steepest_drop_step}, separated={curve.separated()}")
    return EXIT_OK


def _cmd_export(args) -> int:
    bundle = load_bundle(args.bundle)
    try:
        files = export_bundle(bundle, args.format, args.out)
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise StageError("export", exc) from exc
    for f in files:
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kerrpurity",
                                description="Driven Kerr oscillator: purity, Wigner functions and chaos.")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None, help="override output_dir from the config")
    r.add_argument("--force", action="store_true", help="recompute even if the bundle exists")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fixtures", help="list the figure parameter sets")
    f.add_argument("--json", action="store_true")
    f.set_defaults(func=_cmd_fixtures)

    s = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    s.add_argument("config")
    s.add_argument("--output", default=None, help="sweep table path (overrides the config)")
    s.add_argument("--restart", action="store_true", help="ignore existing rows instead of resuming")
    s.set_defaults(func=_cmd_sweep)

    e = sub.add_parser("export", help="export a result bundle")
    e.add_argument("bundle")
    e.add_argument("--format", required=True, choices=("csv", "grid", "png"))
    e.add_argument("--out", default=None, help="output directory (default: <bundle>/export)")
    e.set_defaults(func=_cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"runtime error in stage {exc.stage!r}: {type(exc.cause).__name__}: {exc.cause}",
              file=sys.stderr)
        return EXIT_RUNTIME
    except KerrPurityError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
