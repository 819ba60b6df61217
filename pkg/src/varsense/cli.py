"""Command-line front end: ``varsense run | report | landscape``.

Exit codes: 0 success, 1 the campaign failed (partial outputs are flushed),
2 bad input (config, trace or arguments).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import BenchConfig
from .campaign import (
    CampaignError,
    ConfigError,
    load_raw,
    parse_config,
    probe_photon_number,
    run_campaign,
    run_many,
)
from .traceio import TraceFormatError, format_summary, read_trace, summarize

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varsense", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a campaign described by a YAML config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, action="append",
                     help="campaign seed (repeat for several independent runs)")
    run.add_argument("--out-dir", help="output directory (overrides output.dir)")
    run.add_argument("--parallel", type=int, default=1, metavar="N",
                     help="run up to N seeds concurrently")

    land = sub.add_parser("landscape", help="write the true-cost landscape and a GD overlay")
    land.add_argument("config")
    land.add_argument("--seed", type=int)
    land.add_argument("--out-dir")

    rep = sub.add_parser("report", help="summarise a trace file")
    rep.add_argument("trace")
    rep.add_argument("--manifest", help="manifest with the bench config (default: next to the trace)")
    rep.add_argument("--json", action="store_true", help="print the summary as JSON")
    return p


def _run(raw: dict, seeds, out_dir, parallel: int) -> int:
    if seeds and len(seeds) > 1:
        base = out_dir or parse_config(raw, seeds[0]).output.dir
        for s in seeds:  # validate every seed up front
            parse_config(raw, s)
        run_many(raw, seeds, base, parallel)
        print(f"wrote {len(seeds)} campaigns under {base}")
        return EXIT_OK
    cfg = parse_config(raw, seeds[0] if seeds else None)
    out = out_dir or cfg.output.dir
    manifest = run_campaign(cfg, out)
    print(f"wrote {', '.join(manifest['files'].values())} and {cfg.output.manifest} to {out}")
    if "summary" in manifest:
        print(format_summary(manifest["summary"]))
    return EXIT_OK


def _report(trace_path: str, manifest_path: str | None, as_json: bool) -> int:
    trace = read_trace(trace_path)
    manifest_path = Path(manifest_path) if manifest_path else Path(trace_path).with_name("manifest.json")
    bench = BenchConfig()
    if manifest_path.exists():
        try:
            cfg = json.loads(manifest_path.read_text(encoding="utf-8"))["config"]["bench"]
            bench = BenchConfig(**cfg)
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceFormatError(f"unreadable manifest {manifest_path}: {exc}") from None
    summary = summarize(trace, probe_photon_number(bench))
    print(json.dumps(summary, indent=2) if as_json else format_summary(summary))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return _report(args.trace, args.manifest, args.json)
        raw = load_raw(args.config)
        if args.command == "landscape":
            if not isinstance(raw, dict):
                raise ConfigError("config must be a mapping")
            raw = dict(raw, mode="landscape")
            return _run(raw, [args.seed] if args.seed is not None else None, args.out_dir, 1)
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
        return _run(raw, args.seed, args.out_dir, args.parallel)
    except (ConfigError, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CampaignError as exc:
        print(f"error: campaign failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
