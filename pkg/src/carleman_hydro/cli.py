"""Command-line driver: ``carleman-hydro <kind> [flags]`` or ``carleman-hydro run --config cfg.json``.

Each run writes one CSV (single header line) and a ``.meta.json`` sidecar with
the full config, package version and a config hash.  Exit codes: 0 ok,
2 usage, 3 numerical instability, 4 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import BigCountError
from .carleman_grad import ResourceGuardError
from .experiments import ConfigError, ExperimentConfig, Table, run_experiment
from .grad_dns import InstabilityError

OUTPUT_ENV = "CARLEMAN_HYDRO_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_GUARD = 0, 2, 3, 4

# flag name -> (config key, type, help); each subcommand picks a subset
FLAGS = {
    "--L": ("L", int, "lattice side"),
    "--A1": ("A1", float, "amplitude of J1"),
    "--A2": ("A2", float, "amplitude of J2"),
    "--omega": ("omega", float, "relaxation rate"),
    "--cs": ("cs", float, "speed of sound"),
    "--dt": ("dt", float, "time step"),
    "--steps": ("steps", int, "number of steps (telescopic: power T)"),
    "--every": ("snapshot_every", int, "snapshot interval in steps"),
    "--K": ("K", str, "truncation orders, e.g. 3, 1,2,4 or 1..5"),
    "--closure": ("closure", str, "same-order closure: diagonal or leibniz"),
    "--sites": ("sites", str, "probe sites, e.g. '0,0;8,0;8,16'"),
    "--a": ("a", float, "linear rate"),
    "--b": ("b", float, "quadratic rate"),
    "--x0": ("x0", float, "initial value"),
    "--t-max": ("t_max", float, "last output time"),
    "--n-t": ("n_t", int, "number of output times"),
    "--kmax": ("kmax", int, "highest level"),
    "--sweep": ("sweep", str, "sweep variable: N or T"),
    "--sizes": ("sizes", str, "site counts for the N sweep"),
    "--T-values": ("t_values", str, "step counts for the T sweep"),
    "--N": ("N", int, "lattice sites"),
    "--kappa": ("kappa", float, "condition number"),
    "--eps": ("eps", float, "target accuracy"),
    "--s": ("s", float, "sparsity"),
}
FLOW = ["--L", "--A1", "--A2", "--omega", "--cs", "--dt", "--steps", "--every"]
SUBCOMMANDS = {
    "logistic": ["--a", "--b", "--x0", "--K", "--t-max", "--n-t"],
    "lbm": FLOW,
    "grad-dns": FLOW,
    "carleman": FLOW + ["--K", "--closure"],
    "error-compare": FLOW + ["--K", "--closure"],
    "probe": FLOW + ["--K", "--closure", "--sites"],
    "kappa-sweep": ["--omega", "--cs", "--dt", "--K", "--closure", "--sweep", "--sizes",
                    "--T-values", "--L"],
    "counts": ["--kmax"],
    "telescopic": FLOW + ["--K", "--closure"],
    "cost": ["--N", "--K", "--kappa", "--eps", "--s"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carleman-hydro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind, flags in SUBCOMMANDS.items():
        p = sub.add_parser(kind)
        for flag in flags:
            key, typ, help_ = FLAGS[flag]
            p.add_argument(flag, dest=key, type=typ, default=None, help=help_)
        if kind == "counts":
            # velocity counts share the --b spelling with the logistic rate
            p.add_argument("--b", dest="velocities", type=str, default=None,
                           help="discrete velocities per site, e.g. 9 or 9,19")
        if kind in ("grad-dns", "carleman", "error-compare", "probe", "telescopic"):
            p.add_argument("--exact-inverse", dest="exact_inverse", action="store_true", default=None,
                           help="use 1/rho instead of 2 - rho")
        _add_output_flags(p)
    p = sub.add_parser("run", help="run a JSON config")
    p.add_argument("--config", required=True, help="path to a JSON config document")
    _add_output_flags(p)
    return parser


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", dest="output", default=None, help="CSV file name")
    p.add_argument("--output-dir", dest="output_dir", default=None, help="artifact directory")


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def output_path(cfg: ExperimentConfig, output_dir: str | None = None) -> Path:
    base = os.environ.get(OUTPUT_ENV) or output_dir or "."
    name = cfg.output or f"{cfg.kind}.csv"
    path = Path(name)
    return path if path.is_absolute() else Path(base) / path


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def write_table(table: Table, cfg: ExperimentConfig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(x) for x in row])
    meta = {"config": cfg.to_dict(), "config_hash": config_hash(cfg), "version": __version__,
            "columns": table.header, "notes": table.notes}
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return meta_path


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "run":
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        if args.output is not None:
            data["output"] = args.output
        return ExperimentConfig.from_dict(data)
    data = {k: v for k, v in vars(args).items() if k not in ("command", "output_dir") and v is not None}
    data["kind"] = args.command
    return ExperimentConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"carleman-hydro: configuration error in {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        table = run_experiment(cfg)
    except InstabilityError as exc:
        print(f"carleman-hydro: numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ResourceGuardError, BigCountError) as exc:
        print(f"carleman-hydro: resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    path = output_path(cfg, args.output_dir)
    write_table(table, cfg, path)
    print(f"wrote {path} ({len(table.rows)} rows)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
