"""Grasp skills: the common wrapper, the three tool strategies and the baseline."""

from .baseline import baseline_skill
from .selection import (
    DEVICE_PROPOSALS, APPLICABILITY, NoApplicableStrategy, ObjectProps, applicable_cells, cell_applies,
    select_strategy,
)
from .skill import (
    GraspHints, GraspRequest, GraspResult, Outcome, SkillPhase, Telemetry, phases_follow_grammar,
    run_skill,
)
from .slim import strategy_b
from .suction import cup_plan, cups_fit, strategy_c
from .tactile import strategy_a

__all__ = [
    "GraspHints", "GraspRequest", "GraspResult", "NoApplicableStrategy", "ObjectProps", "Outcome",
    "SkillPhase", "DEVICE_PROPOSALS", "APPLICABILITY", "Telemetry", "applicable_cells", "baseline_skill",
    "cell_applies", "cup_plan", "cups_fit", "phases_follow_grammar", "run_skill", "select_strategy",
    "strategy_a", "strategy_b", "strategy_c",
]
