"""Command line entry point: ``khmlab <subcommand> [--config PATH] [--set key=value ...]``.

Exit status: 0 when every tolerance gate passes, 2 for invalid configuration
or input, 3 when a gate fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ENV_VAR, load_config
from .grid import ConfigurationError, PreconditionError, set_fft_workers

EXIT_OK, EXIT_CONFIG, EXIT_GATE = 0, 2, 3
COMMANDS = ("simulate", "estimate", "verify-identities", "audit-khm", "scan-laws", "verify-constants", "report")

log = logging.getLogger("khmlab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="khmlab", description="EMHD / Hall-MHD exact-law laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None, help=f"config file, or 'default' (falls back to ${ENV_VAR})")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--output", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--input", default=None, help="directory holding snapshots/ and ledger.csv (defaults to the output directory)")
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p.add_argument("--deterministic", action="store_true", help="single-threaded transforms, fixed reduction order")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _execute(args, cfg, out: Path) -> tuple[dict, list[Path]]:
    src = Path(args.input) if args.input else out
    cmd = args.command
    if cmd == "simulate":
        return pipeline.simulate(cfg, out)
    if cmd == "verify-constants":
        return pipeline.verify_constants(cfg), []
    if cmd == "verify-identities":
        return pipeline.verify_identities(cfg), []
    if cmd == "audit-khm":
        states = pipeline.load_states(src) if args.input else None
        return pipeline.audit(cfg, states), []
    if cmd == "estimate":
        return pipeline.estimate(cfg, pipeline.load_states(src), out)
    if cmd == "scan-laws":
        return pipeline.scan(cfg, pipeline.load_states(src), pipeline.load_ledger(src), out)
    return pipeline.summarize(src), []


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
        if args.output:
            cfg = cfg.updated({"output.dir": args.output})
    except ConfigurationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("invalid configuration: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    set_fft_workers(1 if args.deterministic else (args.threads or 1))

    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = pipeline.RunManifest(args.command, cfg.digest())
    resolved = out / "config.resolved"
    resolved.write_text(cfg.dumps())
    try:
        report, files = _execute(args, cfg, out)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report["pass"] = pipeline.all_pass(report)
    name = "summary.json" if args.command == "report" else args.command.replace("-", "_") + "_report.json"
    report_path = pipeline.write_json(out / name, report)
    for p in [resolved, *files, report_path]:
        manifest.add(p, out)
    manifest.write(out)
    print(json.dumps({"command": args.command, "pass": report["pass"], "report": str(report_path)}))
    for g in report.get("gates", []):
        if not g["pass"]:
            print(f"FAIL {g['name']}: {g['value']:.3e} vs {g['tolerance']:.3e}", file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
