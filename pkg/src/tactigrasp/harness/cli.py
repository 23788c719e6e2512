"""Command line: ``tactigrasp run | validate | report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..config import ConfigError
from ..world import load_scene
from .campaign import CAMPAIGN_FILE, STRATEGY_NAMES, Campaign, load_records, resolve_scene, run_campaign
from .report import report_csv, report_json, report_table, threshold_failures

EXIT_OK, EXIT_CONFIG, EXIT_THRESHOLD = 0, 2, 3


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _strategies(text: str) -> tuple[str, ...]:
    if text == "all":
        return STRATEGY_NAMES
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [n for n in names if n not in STRATEGY_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown strategy {bad[0]!r}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tactigrasp", description="Seeded grasp-robustness campaigns.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run or resume a campaign")
    r.add_argument("--scene", required=True, help="scene file or shipped scene name (EL, MW, PCT, FPD)")
    r.add_argument("--strategy", type=_strategies, default=STRATEGY_NAMES,
                   help="A, B, C, baseline, a comma list, or all")
    r.add_argument("--trials", type=int, default=500)
    r.add_argument("--sigma-scale", type=_floats, default=(1.0,), help="comma list of noise multipliers")
    r.add_argument("--seed", type=int, default=0, help="master seed")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--target", action="append", default=[], help="object id (repeatable)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--assert", dest="check", action="store_true",
                   help="exit 3 when a threshold below is missed")
    r.add_argument("--min-success", type=float, default=0.9)
    r.add_argument("--min-margin", type=float, default=0.2)
    r.add_argument("--quiet", action="store_true")

    v = sub.add_parser("validate", help="check a scene file")
    v.add_argument("--scene", required=True)

    rep = sub.add_parser("report", help="print the report of a campaign directory")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--format", choices=("json", "table", "csv"), default="table")
    return p


def _write_reports(out: Path, records, campaign: dict | None) -> None:
    (out / "report.json").write_text(report_json(records, campaign))
    (out / "report.txt").write_text(report_table(records))
    (out / "trials.csv").write_text(report_csv(records))


def _run(args) -> int:
    c = Campaign(scene=args.scene, trials=args.trials, sigma_scales=args.sigma_scale,
                 strategies=args.strategy, master_seed=args.seed, out=args.out,
                 targets=tuple(args.target), workers=args.workers)

    def progress(rec):
        print(f"{rec.trial_id} {rec.outcome}", file=sys.stderr)

    records = run_campaign(c, None if args.quiet else progress)
    out = Path(args.out)
    _write_reports(out, records, c.to_dict())
    print(report_table(records), end="")
    if args.check:
        bad = threshold_failures(records, args.min_success, args.min_margin)
        for line in bad:
            print(f"THRESHOLD {line}", file=sys.stderr)
        if bad:
            return EXIT_THRESHOLD
    return EXIT_OK


def _validate(args) -> int:
    scene = load_scene(resolve_scene(args.scene))
    print(f"{scene.name}: {len(scene.objects)} objects, {len(scene.obstacles)} obstacles: ok")
    return EXIT_OK


def _report(args) -> int:
    src = Path(args.input)
    records = load_records(src)
    if not records:
        raise ConfigError("no trial records found", str(src))
    meta = src / CAMPAIGN_FILE
    campaign = json.loads(meta.read_text()) if meta.exists() else None
    text = {"json": lambda: report_json(records, campaign), "table": lambda: report_table(records),
            "csv": lambda: report_csv(records)}[args.format]()
    print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return {"run": _run, "validate": _validate, "report": _report}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
