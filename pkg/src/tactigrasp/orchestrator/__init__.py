"""Task planner state machine and the shared-workspace safety gate."""

from ..safety import (
    SafetyEvent, SafetyMonitor, SafetyStatus, apply_safety, dump_safety_trace, load_safety_trace,
)
from .planner import (
    Action, Event, IllegalTransition, Phase, PlannerState, Step, TaskReport, planner_step, run_task,
)

__all__ = [
    "Action", "Event", "IllegalTransition", "Phase", "PlannerState", "SafetyEvent", "SafetyMonitor",
    "SafetyStatus", "Step", "TaskReport", "apply_safety", "dump_safety_trace", "load_safety_trace",
    "planner_step", "run_task",
]
