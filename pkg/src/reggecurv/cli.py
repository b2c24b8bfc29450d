"""Command line driver: ``reggecurv <study> --config <file> --out <dir>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .checks import run_all
from .export import write_vtk
from .expr import ExprDomainError
from .geom import MetricError
from .lift import BoundaryDataError, NotSPDAlongPathError
from .linalg import SolverError
from .norms import write_csv
from .spaces import UnsupportedSpaceError
from .studies import (STUDIES, ConfigError, bundled_config, bundled_config_names, load_config,
                      meshes_from_config, metric_from_config, sigma_from_config)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PROPERTY = 4

NUMERICAL_ERRORS = (MetricError, SolverError, ExprDomainError, NotSPDAlongPathError, BoundaryDataError)

log = logging.getLogger("reggecurv")


def resolve_config(ref: str) -> dict:
    """Load a configuration file, or a bundled one when ``ref`` names it."""
    if Path(ref).exists():
        return load_config(ref)
    name = Path(ref).stem if ref.endswith(".json") else ref
    if name in bundled_config_names():
        return bundled_config(name)
    raise ConfigError(f"{ref}: no such file or bundled configuration "
                      f"(bundled: {', '.join(bundled_config_names())})")


def _prefix(cfg: dict, command: str) -> str:
    return cfg.get("output", {}).get("prefix") or command.replace("-", "_")


def run_study(command: str, cfg: dict, out: Path, seed: Optional[int], quad_degree: Optional[int]) -> int:
    result = STUDIES[command](cfg, seed=seed, quad_degree=quad_degree)
    prefix = _prefix(cfg, command)
    out.mkdir(parents=True, exist_ok=True)
    for label, name in result.csv_names(prefix).items():
        write_csv(out / name, result.tables[label])
        print(out / name)
    if cfg.get("output", {}).get("vtk"):
        for label, fields in result.fields.items():
            mesh = next(iter(fields.values())).space.mesh
            path = out / f"{prefix}_{label}.vtk"
            write_vtk(path, mesh, fields)
            print(path)
    return EXIT_OK


def run_ops_check(cfg: dict, out: Path, seed: Optional[int]) -> int:
    metric = metric_from_config(cfg)
    sigma = sigma_from_config(cfg)
    s = cfg["mesh"]["seed"] if seed is None else seed
    lines = []
    failed = 0
    for level, mesh in enumerate(meshes_from_config(cfg, seed)):
        for r in run_all(metric, sigma, mesh, tuple(cfg["degrees"]), s + level):
            line = f"level {level}: {r.line()}"
            lines.append(line)
            print(line)
            failed += not r.passed
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{_prefix(cfg, 'ops-check')}.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{len(lines) - failed} passed, {failed} failed")
    return EXIT_PROPERTY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reggecurv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STUDIES) + ["ops-check"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON file or bundled configuration name")
        p.add_argument("--out", default=".", type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the mesh seed")
        p.add_argument("--quad-degree", type=int, default=None, help="override the quadrature degree")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.quad_degree is not None and args.quad_degree < 0:
        print("error: --quad-degree must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = resolve_config(args.config)
        if args.command == "ops-check":
            return run_ops_check(cfg, args.out, args.seed)
        return run_study(args.command, cfg, args.out, args.seed, args.quad_degree)
    except (ConfigError, UnsupportedSpaceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
