"""Task planner: vision request, strategy choice, skill dispatch, confirmation.

``planner_step`` is a pure transition function over :class:`PlannerState`.
:func:`run_task` drives it against a simulated cell: vision is a noisy
``observe`` draw, a confirmation is a second look at whether the object is
still in the cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..strategies import GraspHints, GraspRequest, NoApplicableStrategy, run_skill, select_strategy
from ..strategies.selection import props_of
from ..world import World, observe


class Phase(str, Enum):
    IDLE = "Idle"
    AWAIT_VISION = "AwaitVision"
    SELECT_STRATEGY = "SelectStrategy"
    DISPATCH_SKILL = "DispatchSkill"
    AWAIT_RESULT = "AwaitResult"
    CONFIRM_VISION = "ConfirmVision"
    CALL_HUMAN = "CallHuman"
    DONE = "Done"


class Event(str, Enum):
    START = "start"  # a disassembly step asks for an object
    VISION = "vision"  # estimate received
    SELECTED = "selected"  # strategy chosen
    NO_STRATEGY = "no_strategy"
    DISPATCHED = "dispatched"  # skill running
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CONFIRMED = "confirmed"  # vision agrees the object is gone
    CONFLICT = "conflict"  # vision disagrees with the skill result
    RESOLVED = "resolved"  # operator finished
    RESET = "reset"


class Action(str, Enum):
    REQUEST_VISION = "request_vision"
    SELECT = "select_strategy"
    DISPATCH = "dispatch_skill"
    WAIT = "wait"
    REQUEST_CONFIRMATION = "request_confirmation"
    CALL_HUMAN = "call_human"
    REPORT_DONE = "report_done"
    NONE = "none"


CONFLICT_POLICIES = ("prefer-vision", "prefer-skill", "always-human")


class IllegalTransition(RuntimeError):
    def __init__(self, phase: Phase, event: Event):
        self.phase, self.event = phase, event
        super().__init__(f"event {event.value!r} is not legal in state {phase.value}")


@dataclass(frozen=True)
class PlannerState:
    phase: Phase = Phase.IDLE
    retry_count: int = 0
    max_retries: int = 2
    conflict_policy: str = "always-human"
    succeeded: bool = False

    def __post_init__(self):
        if self.conflict_policy not in CONFLICT_POLICIES:
            raise ValueError(f"unknown conflict policy {self.conflict_policy!r}")
        if not 0 <= self.retry_count <= self.max_retries:
            raise ValueError("retry_count outside [0, max_retries]")

    @property
    def in_flight(self) -> bool:
        return self.phase == Phase.AWAIT_RESULT


@dataclass(frozen=True)
class Step:
    action: Action
    fresh_observation: bool = False


def _retry(s: PlannerState) -> tuple[PlannerState, Step]:
    if s.retry_count < s.max_retries:
        return (replace(s, phase=Phase.DISPATCH_SKILL, retry_count=s.retry_count + 1),
                Step(Action.DISPATCH, fresh_observation=True))
    return replace(s, phase=Phase.CALL_HUMAN), Step(Action.CALL_HUMAN)


def planner_step(state: PlannerState, event: Event | str) -> tuple[PlannerState, Step]:
    """Next planner state and the action to take for ``event``."""
    event = Event(event)
    s, p = state, state.phase
    if event == Event.RESET and p in (Phase.DONE, Phase.CALL_HUMAN, Phase.IDLE):
        return PlannerState(max_retries=s.max_retries, conflict_policy=s.conflict_policy), Step(Action.NONE)
    if p == Phase.IDLE and event == Event.START:
        return replace(s, phase=Phase.AWAIT_VISION, retry_count=0, succeeded=False), Step(Action.REQUEST_VISION)
    if p == Phase.AWAIT_VISION and event == Event.VISION:
        return replace(s, phase=Phase.SELECT_STRATEGY), Step(Action.SELECT)
    if p == Phase.SELECT_STRATEGY:
        if event == Event.SELECTED:
            return replace(s, phase=Phase.DISPATCH_SKILL), Step(Action.DISPATCH)
        if event == Event.NO_STRATEGY:
            return replace(s, phase=Phase.CALL_HUMAN), Step(Action.CALL_HUMAN)
    if p == Phase.DISPATCH_SKILL and event == Event.DISPATCHED:
        return replace(s, phase=Phase.AWAIT_RESULT), Step(Action.WAIT)
    if p == Phase.AWAIT_RESULT:
        if event == Event.SUCCEEDED:
            return replace(s, phase=Phase.CONFIRM_VISION), Step(Action.REQUEST_CONFIRMATION)
        if event == Event.FAILED:
            return _retry(s)
    if p == Phase.CONFIRM_VISION:
        if event == Event.CONFIRMED:
            return replace(s, phase=Phase.DONE, succeeded=True), Step(Action.REPORT_DONE)
        if event == Event.CONFLICT:
            if s.conflict_policy == "prefer-skill":
                return replace(s, phase=Phase.DONE, succeeded=True), Step(Action.REPORT_DONE)
            if s.conflict_policy == "prefer-vision":
                return _retry(s)
            return replace(s, phase=Phase.CALL_HUMAN), Step(Action.CALL_HUMAN)
    if p == Phase.CALL_HUMAN and event == Event.RESOLVED:
        return replace(s, phase=Phase.DONE), Step(Action.REPORT_DONE)
    raise IllegalTransition(p, event)


@dataclass
class TaskReport:
    target: str
    state: PlannerState
    trace: list = field(default_factory=list)  # (phase, event, action) triples
    results: list = field(default_factory=list)  # GraspResult per dispatch
    strategies: list = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.state.succeeded


def run_task(scene, target: str, seed: int = 0, *, max_retries: int = 2,
             conflict_policy: str = "always-human", strategy: str | None = None,
             safety=None, world: World | None = None) -> TaskReport:
    """Grasp ``target`` under planner control, retrying with fresh estimates."""
    obj = scene.object(target)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 63 - 1), 7]))
    world = world or World(scene, target=target, gripper=(strategy or obj.strategies[0] or "A"), seed=seed)
    state = PlannerState(max_retries=max_retries, conflict_policy=conflict_policy)
    report = TaskReport(target, state)
    est = None
    chosen = None

    def fire(ev: Event) -> Step:
        nonlocal state
        before = state.phase
        state, step = planner_step(state, ev)
        report.trace.append((before.value, ev.value, step.action.value))
        return step

    step = fire(Event.START)
    while state.phase not in (Phase.DONE, Phase.CALL_HUMAN):
        if step.action == Action.REQUEST_VISION:
            est = observe(obj, scene.noise, rng)
            step = fire(Event.VISION)
        elif step.action == Action.SELECT:
            try:
                options = (strategy,) if strategy else select_strategy(props_of(obj))
            except NoApplicableStrategy:
                step = fire(Event.NO_STRATEGY)
                continue
            chosen = options[0]
            report.strategies.append(chosen)
            step = fire(Event.SELECTED)
        elif step.action == Action.DISPATCH:
            if step.fresh_observation:
                est = observe(obj, scene.noise, rng)
            req = GraspRequest(chosen, est, obj.min_mass,
                               GraspHints(expect_rotary=obj.fixture.kind == "rotary"))
            fire(Event.DISPATCHED)
            result = run_skill(req, world, safety=safety)
            report.results.append(result)
            step = fire(Event.SUCCEEDED if result.succeeded else Event.FAILED)
        elif step.action == Action.REQUEST_CONFIRMATION:
            gone = target in world.delivered
            step = fire(Event.CONFIRMED if gone else Event.CONFLICT)
        else:  # pragma: no cover - every reachable action is handled above
            raise IllegalTransition(state.phase, Event.RESET)
    report.state = state
    return report


__all__ = [
    "Action", "CONFLICT_POLICIES", "Event", "IllegalTransition", "Phase", "PlannerState", "Step",
    "TaskReport", "planner_step", "run_task",
]
