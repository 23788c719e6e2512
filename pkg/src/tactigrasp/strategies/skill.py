"""Common grasp-skill structure shared by every tool strategy.

A skill runs the phases

    ToolChange? MoveSafe MovePrePose ToolStrategy (Deliver ReturnSafe | ReportFail ReturnSafe)

and reports a :class:`GraspResult` carrying the outcome and a telemetry log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..config import StrategyConfig
from ..control import ControlLoop, ControlTimeout, SafetyHalt, SelectionMatrices
from ..geometry import ObjectEstimate, Pose, desired_tcp_pose, pre_pose, so3_log
from ..safety import SafetyMonitor


class Outcome(str, Enum):
    SUCCEEDED = "Succeeded"
    NO_CONTACT = "NoContact"
    NOTHING_GRASPED = "NothingGrasped"
    WEIGHT_CHECK_FAILED = "WeightCheckFailed"
    FIXTURE_UNRELEASABLE = "FixtureUnreleasable"
    TIMEOUT = "Timeout"
    SAFETY_ABORT = "SafetyAbort"


class SkillPhase(str, Enum):
    TOOL_CHANGE = "ToolChange"
    MOVE_SAFE = "MoveSafe"
    MOVE_PRE_POSE = "MovePrePose"
    TOOL_STRATEGY = "ToolStrategy"
    DELIVER = "Deliver"
    RETURN_SAFE = "ReturnSafe"
    REPORT_FAIL = "ReportFail"


# legal successors of each phase; None marks the start of a skill
PHASE_GRAMMAR = {
    None: {SkillPhase.TOOL_CHANGE, SkillPhase.MOVE_SAFE},
    SkillPhase.TOOL_CHANGE: {SkillPhase.MOVE_SAFE},
    SkillPhase.MOVE_SAFE: {SkillPhase.MOVE_PRE_POSE, SkillPhase.REPORT_FAIL},
    SkillPhase.MOVE_PRE_POSE: {SkillPhase.TOOL_STRATEGY, SkillPhase.REPORT_FAIL},
    SkillPhase.TOOL_STRATEGY: {SkillPhase.DELIVER, SkillPhase.REPORT_FAIL},
    SkillPhase.DELIVER: {SkillPhase.RETURN_SAFE, SkillPhase.REPORT_FAIL},
    SkillPhase.REPORT_FAIL: {SkillPhase.RETURN_SAFE},
    SkillPhase.RETURN_SAFE: set(),
}


def phases_follow_grammar(phases) -> bool:
    """True when ``phases`` is a complete, legal phase sequence."""
    prev = None
    for p in phases:
        p = SkillPhase(p)
        if p not in PHASE_GRAMMAR[prev]:
            return False
        prev = p
    return prev == SkillPhase.RETURN_SAFE


class StrategyFailure(Exception):
    def __init__(self, outcome: Outcome, detail: str = ""):
        self.outcome = outcome
        self.detail = detail
        super().__init__(f"{outcome.value}: {detail}" if detail else outcome.value)


@dataclass(frozen=True)
class GraspHints:
    initial_opening: float | None = None
    expect_rotary: bool = False


@dataclass(frozen=True)
class GraspRequest:
    strategy: str  # "A" | "B" | "C" | "baseline"
    estimate: ObjectEstimate
    expected_min_mass: float
    hints: GraspHints = field(default_factory=GraspHints)
    gripper: str | None = None  # tool for the baseline; defaults to the strategy letter

    def __post_init__(self):
        if self.strategy not in ("A", "B", "C", "baseline"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.expected_min_mass < 0:
            raise ValueError("expected_min_mass must be non-negative")
        if not isinstance(self.estimate, ObjectEstimate):
            raise TypeError("estimate must be an ObjectEstimate")

    @property
    def tool(self) -> str:
        if self.strategy == "baseline":
            return self.gripper or "A"
        return self.strategy


def _pose_fields(pose: Pose) -> list[float]:
    return [float(x) for x in pose.translation] + [float(x) for x in so3_log(pose.rotation)]


@dataclass(frozen=True)
class TelemetryRecord:
    t: float
    phase: str
    pose: list
    wrench: list
    event: str
    data: dict | None = None

    def to_dict(self) -> dict:
        d = {"t": self.t, "phase": self.phase, "pose": self.pose, "wrench": self.wrench, "event": self.event}
        if self.data:
            d["data"] = self.data
        return d


class Telemetry:
    """Append-only phase/event log, one JSON object per line when written."""

    def __init__(self):
        self.records: list[TelemetryRecord] = []
        self.phases: list[SkillPhase] = []
        self.phase: SkillPhase | None = None

    def enter(self, loop: ControlLoop, phase: SkillPhase) -> None:
        self.phases.append(phase)
        self.phase = phase
        self.log(loop, "enter")

    def log(self, loop: ControlLoop, event: str, **data) -> None:
        self.records.append(TelemetryRecord(
            t=round(loop.t, 9),
            phase=self.phase.value if self.phase else "",
            pose=_pose_fields(loop.pose),
            wrench=[float(x) for x in loop.wrench],
            event=event,
            data={k: _plain(v) for k, v in data.items()} or None,
        ))

    def events(self, name: str) -> list[TelemetryRecord]:
        return [r for r in self.records if r.event == name]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        with open(path, "a") as fh:
            fh.write(self.to_jsonl())


def _plain(v):
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, Enum):
        return v.value
    return v


@dataclass(frozen=True, eq=False)
class GraspResult:
    outcome: Outcome
    telemetry: Telemetry
    detail: str = ""
    sim_time: float = 0.0
    cycles: int = 0

    @property
    def succeeded(self) -> bool:
        return self.outcome == Outcome.SUCCEEDED

    @property
    def reason(self) -> str | None:
        return None if self.succeeded else self.outcome.value

    @property
    def phases(self) -> list[SkillPhase]:
        return list(self.telemetry.phases)


class SkillContext:
    """Everything a tool strategy needs while it runs."""

    def __init__(self, req: GraspRequest, world, loop: ControlLoop, cfg: StrategyConfig, telemetry: Telemetry):
        self.req = req
        self.world = world
        self.loop = loop
        self.cfg = cfg
        self.tel = telemetry
        self.gripper = world.gripper
        self.est = req.estimate
        self.normal = np.array(req.estimate.normal)
        self.approach = -self.normal
        self.goal = desired_tcp_pose(req.estimate)
        self.weight_passed = False

    def log(self, event: str, **data) -> None:
        self.tel.log(self.loop, event, **data)

    def pre(self, goal: Pose | None = None) -> Pose:
        return pre_pose(goal or self.goal, self.normal, self.gripper.d_safety)

    def ee(self, tcp_pose: Pose) -> Pose:
        return self.loop.tcp_target(tcp_pose)

    def tcp(self) -> Pose:
        """Current TCP pose in the base frame."""
        return (self.loop.pose @ self.world.tcp_offset).relabel("B", "TCP")

    def move_tcp(self, tcp_pose: Pose, speed: float | None = None, force_limit: float | None = None) -> bool:
        return self.loop.move_to(self.ee(tcp_pose), speed or self.cfg.free_speed,
                                 self.cfg.free_angular_speed, force_limit=force_limit)

    def move_by(self, offset, speed: float, force_limit: float | None = None) -> bool:
        pose = self.loop.pose
        target = pose.with_translation(pose.translation + np.asarray(offset, dtype=float))
        return self.loop.move_to(target, speed, self.cfg.free_angular_speed, force_limit=force_limit)

    def wait_actuator(self, max_time: float = 5.0) -> None:
        world = self.world
        self.loop.servo(_NO_FORCE, until=lambda _l: world.actuator is None, max_time=max_time)

    def weight_check(self) -> bool:
        wc = self.world.lift_weight_check(self.req.expected_min_mass, self.cfg.weight_samples,
                                          self.cfg.weight_tolerance)
        self.log("weight_check", passed=wc.passed, force_up=wc.force_up, pulled=wc.pulled)
        if wc.pulled:
            self.log("PULL")
        self.weight_passed = self.weight_passed or wc.passed
        return wc.passed


_NO_FORCE = SelectionMatrices.force_on()
RETRACT = 0.1  # m backed out along the tool axis before returning home


def _strategy_table():
    from .baseline import baseline_strategy
    from .slim import slim_strategy
    from .suction import suction_strategy
    from .tactile import tactile_strategy

    return {"A": tactile_strategy, "B": slim_strategy, "C": suction_strategy, "baseline": baseline_strategy}


def _notify(callbacks, name: str, *args) -> None:
    if callbacks is None:
        return
    fn = callbacks.get(name) if isinstance(callbacks, dict) else getattr(callbacks, name, None)
    if fn is not None:
        fn(*args)


def run_skill(req: GraspRequest, world, planner_callbacks=None, *, loop: ControlLoop | None = None,
              safety: SafetyMonitor | None = None, config: StrategyConfig | None = None,
              observer=None) -> GraspResult:
    """Run one complete grasp skill on ``world``."""
    cfg = config or world.scene.strategy
    loop = loop or ControlLoop(world, world.scene.controller, safety=safety, observer=observer)
    tel = Telemetry()
    strategy = _strategy_table()[req.strategy]
    halted = False
    outcome, detail = Outcome.SUCCEEDED, ""

    def phase(p: SkillPhase):
        tel.enter(loop, p)
        _notify(planner_callbacks, "on_phase", p)

    try:
        if world.gripper.kind != req.tool:
            phase(SkillPhase.TOOL_CHANGE)
            world.mount(req.tool)
            tel.log(loop, "mounted", gripper=req.tool)
        ctx = SkillContext(req, world, loop, cfg, tel)
        phase(SkillPhase.MOVE_SAFE)
        loop.move_to(world.scene.safe_pose, cfg.free_speed, cfg.free_angular_speed)
        phase(SkillPhase.MOVE_PRE_POSE)
        ctx.move_tcp(ctx.pre(strategy_goal(ctx)))
        phase(SkillPhase.TOOL_STRATEGY)
        loop.deadline = loop.t + cfg.timeout
        try:
            strategy(ctx)
        finally:
            loop.deadline = math.inf
        if not ctx.weight_passed:
            raise StrategyFailure(Outcome.WEIGHT_CHECK_FAILED, "no passing weight check")
        phase(SkillPhase.DELIVER)
        loop.move_to(world.scene.release_pose, cfg.free_speed, cfg.free_angular_speed)
        delivered = world.deliver()
        if world.gripper.has_fingers:
            world.open_fingers()
        tel.log(loop, "delivered", object=delivered)
        if delivered is None:
            raise StrategyFailure(Outcome.WEIGHT_CHECK_FAILED, "object lost before delivery")
    except StrategyFailure as exc:
        outcome, detail = exc.outcome, exc.detail
    except ControlTimeout as exc:
        outcome, detail = Outcome.TIMEOUT, str(exc)
    except SafetyHalt as exc:
        outcome, detail = Outcome.SAFETY_ABORT, str(exc)
        halted = True

    if outcome != Outcome.SUCCEEDED:
        phase(SkillPhase.REPORT_FAIL)
        tel.log(loop, "failed", reason=outcome.value, detail=detail)
        result_so_far = GraspResult(outcome, tel, detail, loop.t, loop.cycles)
        _notify(planner_callbacks, "report_fail", result_so_far)
    phase(SkillPhase.RETURN_SAFE)
    if halted:
        # motion stays halted until the cell is cleared
        tel.log(loop, "halted")
    else:
        try:
            _return_safe(world, loop, cfg)
        except SafetyHalt as exc:
            tel.log(loop, "halted", detail=str(exc))
            # a stop anywhere in the skill aborts it; an earlier failure stays in the detail
            earlier = "" if outcome == Outcome.SUCCEEDED else f" after {outcome.value}"
            outcome, detail = Outcome.SAFETY_ABORT, f"{exc}{earlier}"
    tel.log(loop, "done", outcome=outcome.value)
    result = GraspResult(outcome, tel, detail, loop.t, loop.cycles)
    if outcome == Outcome.SUCCEEDED:
        _notify(planner_callbacks, "report_success", result)
    return result


def _return_safe(world, loop: ControlLoop, cfg: StrategyConfig) -> None:
    if world.held is not None:
        if world.attachment == "vacuum":
            world.vacuum(False)
        else:
            world.release()
    if world.gripper.kind == "C" and world.vacuum_on:
        world.vacuum(False)
    # back out along the tool axis before the straight move home
    lift = min(RETRACT, world.scene.safe_position[2] - loop.pose.translation[2])
    if lift > 0:
        pose = loop.pose
        up = -pose.rotation[:, 2]
        loop.move_to(pose.with_translation(pose.translation + up * lift), cfg.free_speed,
                     cfg.free_angular_speed)
    loop.move_to(world.scene.safe_pose, cfg.free_speed, cfg.free_angular_speed)


def strategy_goal(ctx: SkillContext) -> Pose:
    """TCP goal used to place the pre-pose (strategy C may shift it onto one cup)."""
    if ctx.req.tool == "C":
        from .suction import cup_plan

        return cup_plan(ctx).goal
    return ctx.goal
