"""Report documents: running a scenario and rendering the results as text or json."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .localization import CheckResult, run_checks
from .scenarios import ScenarioConfig, build_scenario

FORMATS = ("text", "json")


@dataclass
class ReportDocument:
    config: ScenarioConfig
    checks: list[CheckResult] = field(default_factory=list)
    runtime_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        """Diagnostics never affect the verdict."""
        return all(c.passed for c in self.checks if not c.diagnostic)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def run_scenario(config: ScenarioConfig) -> ReportDocument:
    config.validate()
    start = time.perf_counter()
    checks = run_checks(build_scenario(config))
    return ReportDocument(config, checks, time.perf_counter() - start)


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def _check_record(c: CheckResult) -> dict:
    lhs, rhs = complex(c.lhs), complex(c.rhs)
    return {
        "name": c.name,
        "lhs_re": _num(lhs.real),
        "lhs_im": _num(lhs.imag),
        "rhs_re": _num(rhs.real),
        "rhs_im": _num(rhs.imag),
        "abs_error": _num(c.abs_error),
        "tolerance": _num(c.tolerance),
        "pass": c.passed,
        "diagnostic": c.diagnostic,
    }


def report_dict(doc: ReportDocument) -> dict:
    cfg = doc.config
    return {
        "scenario": cfg.name,
        "n": cfg.n,
        "resolution": cfg.resolution,
        "stencil_order": cfg.stencil_order,
        "checks": [_check_record(c) for c in doc.checks],
        "runtime_seconds": doc.runtime_seconds,
        "verdict": doc.verdict,
    }


def _fmt(z: complex) -> str:
    z = complex(z) + 0.0  # drop negative zeros
    if not math.isfinite(z.real) or not math.isfinite(z.imag):
        return "nan"
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z.real)):
        return f"{z.real:.10g}"
    return f"{z.real:.10g}{z.imag:+.3g}i"


def render_text(doc: ReportDocument) -> str:
    cfg = doc.config
    lines = [
        f"scenario   {cfg.name}",
        f"manifold   {cfg.manifold} (n = {cfg.n}), resolution {cfg.resolution} per axis, stencil order {cfg.stencil_order}",
        f"tubes      radius {cfg.tube_radius:g}, truncation a = {cfg.trunc[0]:g}, b = {cfg.trunc[1]:g}",
        "",
        f"{'check':32s} {'left':>22s} {'right':>22s} {'|error|':>10s} {'tol':>8s}  result",
    ]
    for c in doc.checks:
        status = "PASS" if c.passed else "FAIL"
        if c.diagnostic:
            status += " (diagnostic)"
        lines.append(f"{c.name:32s} {_fmt(c.lhs):>22s} {_fmt(c.rhs):>22s} {c.abs_error:10.3e} {c.tolerance:8.2g}  {status}")
        if c.note:
            lines.append(f"    {c.note}")
    lines += ["", f"runtime    {doc.runtime_seconds:.2f} s", f"verdict    {doc.verdict.upper()}"]
    return "\n".join(lines) + "\n"


def emit_report(doc: ReportDocument, fmt: str = "text") -> bytes:
    if fmt == "json":
        return (json.dumps(report_dict(doc), indent=2, allow_nan=False) + "\n").encode()
    if fmt == "text":
        return render_text(doc).encode()
    raise ConfigurationError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
