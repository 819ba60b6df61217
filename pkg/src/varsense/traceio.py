"""Reading and writing optimisation traces as newline-delimited JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .fisher import shot_noise_limit_cost
from .optimize import TRACE_SCHEMA_VERSION, EpochRecord, OptimizationTrace, reconvergence_epochs

RECORD_FIELDS = tuple(EpochRecord.__dataclass_fields__)


class TraceFormatError(ValueError):
    """A trace file is empty, malformed or written by an incompatible schema."""


def dumps_record(rec: EpochRecord) -> str:
    return json.dumps(rec.to_dict(), allow_nan=True)


def write_trace(path, trace: OptimizationTrace) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in trace.records:
            fh.write(dumps_record(rec) + "\n")
    return path


def _major(version: str) -> str:
    return str(version).split(".", 1)[0]


def parse_record(line: str, lineno: int = 0) -> EpochRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line {lineno}: not valid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise TraceFormatError(f"line {lineno}: expected an object")
    version = raw.pop("schema_version", None)
    if version is None:
        raise TraceFormatError(f"line {lineno}: missing schema_version")
    if _major(version) != _major(TRACE_SCHEMA_VERSION):
        raise TraceFormatError(
            f"line {lineno}: schema_version {version} is not supported (expected {TRACE_SCHEMA_VERSION})")
    missing = [k for k in ("epoch", "optimizer", "phi_hd", "phi_alpha", "cost") if k not in raw]
    if missing:
        raise TraceFormatError(f"line {lineno}: missing fields {missing}")
    # Minor versions may add fields; ignore the ones this reader does not know.
    known = {k: v for k, v in raw.items() if k in RECORD_FIELDS}
    known.setdefault("mu", None)
    known.setdefault("var", None)
    known.setdefault("measurements", 0)
    known.setdefault("total_measurements", 0)
    known.setdefault("true_cost", math.nan)
    try:
        return EpochRecord(**known)
    except TypeError as exc:
        raise TraceFormatError(f"line {lineno}: {exc}") from None


def read_trace(path) -> OptimizationTrace:
    path = Path(path)
    trace = OptimizationTrace()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trace.append(parse_record(line, lineno))
            except ValueError as exc:
                if isinstance(exc, TraceFormatError):
                    raise
                raise TraceFormatError(f"line {lineno}: {exc}") from None
    if not trace.records:
        raise TraceFormatError(f"{path} contains no epoch records")
    return trace


def summarize(trace: OptimizationTrace, n_photons: float) -> dict:
    """Best cost, where it occurred, final settings, resources and the SNL comparison."""
    if not trace.records:
        raise TraceFormatError("empty trace")
    try:
        best = trace.best("cost")
        best_cost, best_epoch = best.cost, best.epoch
    except ValueError:
        best_cost, best_epoch = math.inf, None
    last = trace.records[-1]
    snl = shot_noise_limit_cost(n_photons)
    kicks = reconvergence_epochs(trace)
    return {
        "best_cost": best_cost,
        "best_epoch": best_epoch,
        "final_settings": [last.phi_hd, last.phi_alpha],
        "total_measurements": last.total_measurements,
        "snl_cost": snl,
        "below_snl": bool(best_cost < snl),
        "reconvergence": {str(k): v for k, v in kicks.items()},
    }


def format_summary(summary: dict) -> str:
    lines = [
        f"best cost: {summary['best_cost']:.6g}",
        f"epoch of best: {summary['best_epoch']}",
        "final settings: phi_hd={:.6f} phi_alpha={:.6f}".format(*summary["final_settings"]),
        f"total measurements: {summary['total_measurements']}",
        f"shot-noise limit cost: {summary['snl_cost']:.6g}",
        f"below SNL: {'yes' if summary['below_snl'] else 'no'}",
    ]
    for epoch, n in summary["reconvergence"].items():
        status = f"{n} epochs" if n is not None else "not re-converged"
        lines.append(f"kick at epoch {epoch}: re-converged after {status}" if n is not None
                     else f"kick at epoch {epoch}: {status}")
    return "\n".join(lines)
