"""Aggregate campaign reports: JSON, aligned text table and CSV."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass

from scipy.stats import binomtest

from .campaign import Cell, TrialRecord

CONFIDENCE = 0.95


@dataclass(frozen=True)
class CellSummary:
    strategy: str
    tool: str
    obj: str
    sigma_scale: float
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float
    outcomes: dict
    mean_sim_time: float
    paired_rate: float | None = None  # strategy cell a baseline is paired with
    margin: float | None = None  # paired strategy rate minus this baseline's rate

    @property
    def cell(self) -> Cell:
        return Cell(self.strategy, self.obj, self.tool)


def wilson_interval(successes: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    ci = binomtest(successes, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def summarize(records: list[TrialRecord]) -> list[CellSummary]:
    """One summary per (cell, sigma multiplier), in first-seen order."""
    groups: dict[tuple, list[TrialRecord]] = defaultdict(list)
    for r in records:
        groups[(r.strategy, r.tool, r.obj, r.sigma_scale)].append(r)
    rates = {k: sum(r.succeeded for r in v) / len(v) for k, v in groups.items()}
    out = []
    for (strategy, tool, obj, sigma), rs in groups.items():
        k = sum(r.succeeded for r in rs)
        lo, hi = wilson_interval(k, len(rs))
        paired = margin = None
        if strategy == "baseline":
            paired = rates.get((tool, tool, obj, sigma))
            if paired is not None:
                margin = paired - k / len(rs)
        out.append(CellSummary(
            strategy, tool, obj, sigma, len(rs), k, k / len(rs), lo, hi,
            dict(sorted(Counter(r.outcome for r in rs).items())),
            round(sum(r.sim_time for r in rs) / len(rs), 6), paired, margin,
        ))
    return out


def report_json(records: list[TrialRecord], campaign: dict | None = None) -> str:
    """Deterministic JSON report; wall-clock times are left out."""
    body = {"cells": [asdict(s) for s in summarize(records)], "trials": len(records)}
    if campaign is not None:
        body["campaign"] = campaign
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def _label(s: CellSummary) -> str:
    return f"baseline[{s.tool}]" if s.strategy == "baseline" else s.strategy


def report_table(records: list[TrialRecord]) -> str:
    head = ("strategy", "object", "sigma", "n", "success", "rate", "95% CI", "margin", "failures")
    rows = []
    for s in summarize(records):
        fails = ", ".join(f"{k}:{v}" for k, v in s.outcomes.items() if k != "Succeeded")
        rows.append((
            _label(s), s.obj, f"{s.sigma_scale:g}", str(s.trials), str(s.successes), f"{s.rate:.3f}",
            f"[{s.ci_low:.3f}, {s.ci_high:.3f}]",
            "" if s.margin is None else f"{100 * s.margin:+.1f} pp", fails,
        ))
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


CSV_FIELDS = ("trial_id", "seed", "strategy", "tool", "obj", "sigma_scale", "trial", "outcome",
              "phases", "cycles", "sim_time", "wall_time", "reason", "detail")


def report_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(asdict(r))
    return buf.getvalue()


def threshold_failures(records: list[TrialRecord], min_success: float | None,
                       min_margin: float | None) -> list[str]:
    """Human-readable list of cells missing the acceptance thresholds."""
    bad = []
    for s in summarize(records):
        if s.strategy != "baseline" and min_success is not None and s.rate < min_success:
            bad.append(f"{_label(s)}/{s.obj}@x{s.sigma_scale:g}: rate {s.rate:.3f} < {min_success}")
        if s.strategy == "baseline" and min_margin is not None and s.margin is not None \
                and s.margin < min_margin - 1e-12:
            bad.append(f"{_label(s)}/{s.obj}@x{s.sigma_scale:g}: margin {s.margin:.3f} < {min_margin}")
    return bad


__all__ = [
    "CSV_FIELDS", "CellSummary", "report_csv", "report_json", "report_table", "summarize",
    "threshold_failures", "wilson_interval",
]
