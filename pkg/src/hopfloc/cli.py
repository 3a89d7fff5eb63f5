"""Command-line runner: ``hopfloc list | run | verify-all``.

Exit codes: 0 when every non-diagnostic check passes, 1 when one fails,
2 for configuration errors (reported before any computation).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigurationError
from .report import FORMATS, emit_report, run_scenario
from .scenarios import builtin_configs, list_scenarios, load_config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _trunc(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopfloc", description="Localization checks for graded Chern characters.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list the built-in scenarios")

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--resolution", type=int)
    run.add_argument("--tube-radius", type=float)
    run.add_argument("--trunc", type=_trunc, help="truncation radii a,b")
    run.add_argument("--tolerance", type=float, help="replace every check tolerance")
    run.add_argument("--format", choices=FORMATS, default="text")
    run.add_argument("--out", type=Path)
    run.add_argument("--config", type=Path, help="json file overriding scenario fields")

    va = sub.add_parser("verify-all", help="run every built-in scenario")
    va.add_argument("--resolution", type=int)
    va.add_argument("--format", choices=FORMATS, default="text")
    return parser


def _write(data: bytes, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(data.decode())
        sys.stdout.flush()
    else:
        out.write_bytes(data)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        if args.command == "list":
            for name, summary in list_scenarios():
                print(f"{name:24s} {summary}")
            return EXIT_OK

        if args.command == "run":
            changes = dict(resolution=args.resolution, tube_radius=args.tube_radius, trunc=args.trunc)
            if args.tolerance is not None:
                changes["tolerances"] = {"all": args.tolerance}
            configs = [load_config(args.scenario, args.config, **changes)]
        else:
            configs = [load_config(name, resolution=args.resolution) for name in sorted(builtin_configs())]
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code = EXIT_OK
    for cfg in configs:
        doc = run_scenario(cfg)
        _write(emit_report(doc, args.format), getattr(args, "out", None))
        code = max(code, doc.exit_code)
    if args.command == "verify-all":
        print(f"overall: {'PASS' if code == EXIT_OK else 'FAIL'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
