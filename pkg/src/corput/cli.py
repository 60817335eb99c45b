"""Command-line driver.

    corput run <config> [--out-dir DIR] [--threads N] [--seed S]
    corput validate <config>
    corput list-catalog [--kind KIND]

Exit codes: 0 success, 1 bound violations or a fit outside its band,
2 config error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .campaigns import (
    EXIT_CONFIG,
    EXIT_OK,
    KINDS,
    ConfigError,
    default_out_dir,
    load_config,
    prepare,
    run_campaign,
)
from .catalog import KINDS as CATALOG_KINDS
from .catalog import list_catalog


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="corput",
        description="Verify explicit decay bounds for oscillatory integrals and dispersive evolutions.",
        epilog="Exit codes: 0 ok, 1 violations or fit out of band, 2 config error, 3 non-convergence.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign config", description=f"Campaign kinds: {', '.join(KINDS)}.")
    run.add_argument("config", type=Path)
    run.add_argument("--out-dir", type=Path, default=None, help="output directory (default: $CORPUT_OUT_DIR or ./corput_out)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for sample evaluation")
    run.add_argument("--seed", type=int, default=None, help="recorded in the verdict; campaigns are deterministic")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config", type=Path)

    lst = sub.add_parser("list-catalog", help="list catalog entries and their parameters")
    lst.add_argument("--kind", choices=CATALOG_KINDS, default=None)
    return ap


def _list(kind: Optional[str]) -> int:
    for e in list_catalog(kind):
        params = ", ".join(f"{k}={v:g}" for k, v in e.parameters.items()) or "-"
        print(f"{e.name:26s} {e.kind:10s} {params}")
        print(f"{'':26s} {'':10s} {e.description}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-catalog":
        return _list(args.kind)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            prepare(cfg)
            print(f"{args.config}: ok ({cfg.kind})")
            return EXIT_OK
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        out_dir = args.out_dir if args.out_dir is not None else default_out_dir()
        report = run_campaign(cfg, out_dir, args.threads, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fits = "; ".join(f"{f['name']} slope {f['slope']:.4f} +- {f['stderr']:.2g}" for f in report.fits)
    print(
        f"{cfg.name}: {len(report.rows)} samples, {report.violations} violations, "
        f"{report.flagged} flagged{', ' + fits if fits else ''} -> exit {report.exit_code}"
    )
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
