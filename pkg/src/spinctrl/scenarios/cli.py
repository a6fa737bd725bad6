"""Command line: ``spinctrl {run,list,validate,export-defaults}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _resolve(config: str):
    """A config path, or the name of a built-in scenario."""
    from .catalog import get_scenario
    from .config import load_config

    path = Path(config)
    if path.exists():
        return load_config(path)
    return get_scenario(config)


def cmd_run(args) -> int:
    from .runner import run

    cfg = _resolve(args.config)
    manifest = run(cfg, args.out, threads=args.threads, deterministic=args.deterministic)
    print(f"{manifest.scenario}: {manifest.status} in {manifest.wall_time:.1f} s -> {Path(args.out) / manifest.scenario}")
    for o in manifest.outputs:
        print(f"  {o['path']}")
    return 0 if manifest.status == "complete" else 2


def cmd_list(args) -> int:
    from .catalog import built_in_scenarios

    for cfg in built_in_scenarios():
        print(f"{cfg.name:34s} {cfg.anchor:14s} {cfg.kind:12s} {cfg.description}")
    return 0


def cmd_validate(args) -> int:
    from .config import ConfigError, validate

    try:
        cfg = _resolve(args.config)
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"error: {exc}")
        return 1
    diags = validate(cfg)
    for d in diags:
        print(d)
    if not diags:
        print(f"{cfg.name}: ok")
    return 1 if any(d.level == "error" for d in diags) else 0


def cmd_export(args) -> int:
    from .catalog import get_scenario
    from .config import dump_config

    text = dump_config(get_scenario(args.name))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinctrl", description="Optimal control scenarios for coupled spin qubits")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario (YAML path or built-in name)")
    r.add_argument("config")
    r.add_argument("--out", default="results", help="output root directory")
    r.add_argument("--threads", type=int, default=None, help="sweep workers (default: $SPINCTRL_THREADS or 1)")
    r.add_argument(
        "--deterministic",
        action="store_true",
        help="pin BLAS to one thread so repeated runs give byte-identical CSVs",
    )
    r.set_defaults(func=cmd_run)

    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)

    v = sub.add_parser("validate", help="check a config and print diagnostics")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("export-defaults", help="print a built-in scenario with every field filled in")
    e.add_argument("name")
    e.add_argument("--out", default=None, help="write to this file instead of stdout")
    e.set_defaults(func=cmd_export)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "deterministic", False):
        # only effective when BLAS has not started its pool yet (fresh process)
        for var in _BLAS_VARS:
            os.environ[var] = "1"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
