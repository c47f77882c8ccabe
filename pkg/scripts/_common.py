"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import argparse
from pathlib import Path

from carleman_hydro.cli import write_table
from carleman_hydro.experiments import ExperimentConfig, Table, run_experiment


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="results", help="output directory")
    return p


def run_and_save(out: str, name: str, **overrides) -> tuple[ExperimentConfig, Table]:
    cfg = ExperimentConfig.from_dict(overrides)
    table = run_experiment(cfg)
    path = Path(out) / name
    write_table(table, cfg, path)
    print(f"wrote {path}")
    return cfg, table
