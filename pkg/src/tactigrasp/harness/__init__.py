"""Seeded Monte Carlo campaigns, baseline pairing, reports and the CLI."""

from ..strategies import baseline_skill
from .campaign import (
    Campaign, Cell, TrialRecord, campaign_cells, derive_seed, load_records, run_campaign, run_trial,
)
from .report import CellSummary, report_csv, report_json, report_table, summarize, threshold_failures

__all__ = [
    "Campaign", "Cell", "CellSummary", "TrialRecord", "baseline_skill", "campaign_cells", "derive_seed",
    "load_records", "report_csv", "report_json", "report_table", "run_campaign", "run_trial",
    "summarize", "threshold_failures",
]
