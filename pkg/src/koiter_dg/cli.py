"""Command-line entry point ``koiter-dg``.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from . import experiments as ex
from .errors import CoercivityWarning, ConfigError, KoiterDGError, MeshError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("koiter_dg")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koiter-dg", description="Mixed DG studies for Koiter shell bending.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve on the finest mesh for every epsilon",
        "converge": "error and rate table under uniform refinement",
        "locking": "error inflation across epsilon on a fixed mesh",
        "stability": "Korn, coercivity, continuity and compliance constants",
        "indicator": "geometry indicator per level and epsilon",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, type=Path, help="JSON study configuration")
        s.add_argument("--out", type=Path, help="output directory (overrides the config)")
        s.add_argument("--no-plot", action="store_true", help="skip SVG plots")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(rows, out: Path, name: str) -> Path:
    path = ex.write_csv(rows, out / f"{name}.csv")
    log.info("wrote %s", path)
    return path


def _run(cmd: str, cfg: ex.StudyConfig, out: Path, plot: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if cmd == "solve":
        _emit(ex.run_solve(cfg), out, "solve")
    elif cmd == "converge":
        rows = ex.run_convergence(cfg)
        _emit(rows, out, "convergence")
        if plot:
            (out / "convergence.svg").write_text(ex.convergence_plot(rows), encoding="utf-8")
    elif cmd == "locking":
        rows = ex.run_locking(cfg)
        _emit(rows, out, "locking")
        if plot:
            (out / "locking.svg").write_text(ex.locking_plot(rows), encoding="utf-8")
        for r in rows:
            if r["flagged"]:
                log.warning("eps=%g outside the h^3 <~ eps regime (indicator %.3g)", r["eps"], r["indicator"])
    elif cmd == "stability":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CoercivityWarning)
            rows, sweep = ex.run_stability(cfg)
        for w in caught:
            log.warning("%s", w.message)
        _emit(rows, out, "stability")
        _emit(sweep, out, "penalty_sweep")
    elif cmd == "indicator":
        _emit(ex.run_indicator(cfg), out, "indicator")


def main(argv: list[str] | None = None) -> int:
    """Run a subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = ex.load_config(args.config)
        out = args.out if args.out is not None else cfg.out
        if args.command in ("converge", "locking") and cfg.case is None:
            raise ConfigError(f"'{args.command}' needs a manufactured 'case' in the config")
        _run(args.command, cfg, Path(out), not args.no_plot)
    except (ConfigError, MeshError) as exc:
        print(f"koiter-dg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KoiterDGError, ArithmeticError, MemoryError) as exc:
        print(f"koiter-dg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cli_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
