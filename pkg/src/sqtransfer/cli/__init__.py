"""Command-line experiment runner.

Usage::

    sqtransfer <subcommand> [--config FILE] [--out FILE.csv] [--threads N] [--seed S]

Subcommands map onto the runners in :mod:`sqtransfer.cli.experiments`. The
config file format is described in :mod:`sqtransfer.cli.config`.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, Experiment, ExperimentConfig, config_from_dict, load_config, parse_config
from .experiments import (
    CutoffConvergence,
    Table,
    UnconvergedCutoffError,
    converge_cutoff,
    run_experiment,
    run_fidelity_maps,
    run_stability,
    run_sweep_q,
    run_sweep_r,
    run_time_evolution,
    run_wigner,
)
from .output import SCHEMA_VERSION, write_table

__all__ = [
    "ConfigError",
    "CutoffConvergence",
    "Experiment",
    "ExperimentConfig",
    "Table",
    "UnconvergedCutoffError",
    "config_from_dict",
    "converge_cutoff",
    "load_config",
    "main",
    "parse_config",
    "run_experiment",
    "run_fidelity_maps",
    "run_stability",
    "run_sweep_q",
    "run_sweep_r",
    "run_time_evolution",
    "run_wigner",
]

SUBCOMMANDS = {
    "sweep-q": Experiment.SWEEP_Q,
    "sweep-r": Experiment.SWEEP_R,
    "fidelity-map": None,  # q-gcm or gac-gcm, decided by the config
    "timeevo": Experiment.TIME_EVOLUTION,
    "stability": Experiment.STABILITY,
    "wigner": Experiment.WIGNER,
    "converge": Experiment.CONVERGE,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqtransfer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value experiment file")
        p.add_argument("--out", type=Path, help="CSV output path (sidecar JSON goes next to it)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweep points")
        p.add_argument("--seed", type=int, default=None, help="accepted for interface compatibility; unused")
    return parser


def _resolve(command: str, cfg: ExperimentConfig) -> ExperimentConfig:
    wanted = SUBCOMMANDS[command]
    if wanted is None:
        if cfg.experiment not in (None, Experiment.FIDELITY_MAP_Q_GCM, Experiment.FIDELITY_MAP_GAC_GCM):
            raise ConfigError(f"config selects {cfg.experiment.value}, not a fidelity map")
        if cfg.experiment is None:
            by_gac = "g_ac" in cfg.sweeps or cfg.bath is not None
            cfg.experiment = Experiment.FIDELITY_MAP_GAC_GCM if by_gac else Experiment.FIDELITY_MAP_Q_GCM
        return cfg
    if cfg.experiment not in (None, wanted):
        raise ConfigError(f"config selects {cfg.experiment.value} but subcommand is {command}")
    cfg.experiment = wanted
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = _resolve(args.command, cfg)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.output or Path(f"{args.command}.csv")

    start = time.perf_counter()
    try:
        table = run_experiment(cfg, threads=args.threads)
    except Exception as exc:  # surface solver diagnostics, not a traceback
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - start

    side = write_table(table, out, cfg.echo(), wall, args.command)
    flagged = sum(1 for r in table.records() if r.get("flag", "ok") != "ok")
    print(f"wrote {len(table.rows)} rows to {out} ({side.name}); {flagged} flagged; {wall:.1f}s")
    return 0
