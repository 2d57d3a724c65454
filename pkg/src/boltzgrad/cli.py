"""Command line entry point: ``boltzgrad <experiment> [--config PATH] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, emit_results, run_experiment

log = logging.getLogger("boltzgrad")


def _parser():
    p = argparse.ArgumentParser(prog="boltzgrad", description="Boltzmann-Grad limit experiments.")
    p.add_argument("experiment", help="experiment name, or 'list'")
    p.add_argument("--config", help="INI file; defaults to the bundled configuration")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--threads", type=int, help="worker processes (overrides [output] threads)")
    p.add_argument("--seed", type=int, help="seed for random alpha (overrides [alpha] seed)")
    p.add_argument("--format", choices=["csv", "json-lines"], help="row format")
    p.add_argument("--timing", action="store_true", help="record wall times (breaks byte determinism)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.experiment == "list":
        width = max(map(len, EXPERIMENTS))
        for name, what in EXPERIMENTS.items():
            print(f"{name:<{width}}  {what}")
        return 0
    try:
        cfg = (ExperimentConfig.from_file(args.config) if args.config
               else ExperimentConfig.bundled(args.experiment))
        if cfg.name != args.experiment:
            raise ConfigError(f"config is for {cfg.name!r}, not {args.experiment!r}")
        over = {}
        if args.out:
            over["out_dir"] = args.out
        if args.threads:
            over["threads"] = args.threads
        if args.seed is not None:
            over["seed"] = args.seed
        if args.format:
            over["out_format"] = args.format
        if args.timing:
            over["timing"] = True
        cfg = replace(cfg, **over).validate()
    except (ConfigError, OSError) as exc:
        print(f"boltzgrad: {exc}", file=sys.stderr)
        return 2
    log.info("running %s", cfg.name)
    rec = run_experiment(cfg)
    paths = emit_results(rec, cfg.out_format, cfg.out_dir, cfg.timing)
    for name, v in rec.verdicts.items():
        status = "n/a" if v.passed is None else ("PASS" if v.passed else "FAIL")
        print(f"{status:4}  {cfg.name}/{name}: {v.measured:.6g} ({v.threshold}) {v.note}".rstrip())
    for p in paths:
        print(f"wrote {p}")
    return 0 if rec.passed or not rec.verdicts or all(
        v.passed is None for v in rec.verdicts.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
