"""Motion and gripper building blocks shared by the tool strategies."""

from __future__ import annotations

import numpy as np

from ..control import ContactEvent, SelectionMatrices
from ..geometry import RZ, X, Y
from ..sensing import finger_force_difference
from .skill import Outcome, SkillContext, StrategyFailure

# compliant in x, y and about z of the tool while the fingers close
COMPLIANT_CLOSE = SelectionMatrices.force_on(X, Y, RZ)
RIGID = SelectionMatrices.force_on()
ZERO6 = np.zeros(6)
CLOSE_TIME = 5.0  # s, upper bound on one finger closing


def open_gripper(ctx: SkillContext, width: float | None = None) -> None:
    ctx.world.open_fingers(width)
    ctx.wait_actuator()


def approach(ctx: SkillContext, distance: float, threshold: float | None = None,
             speed: float | None = None) -> ContactEvent:
    """Guarded move along the approach vector for at most ``distance``."""
    ev = ctx.loop.guarded_move(ctx.approach, speed or ctx.cfg.approach_speed,
                               threshold or ctx.cfg.contact_threshold, distance)
    ctx.log("approach", contact=ev.contact, distance=ev.distance)
    return ev


def close_fingers(ctx: SkillContext, compliant: bool = True) -> bool:
    """Close until both fingers press the same object; True when attached."""
    world = ctx.world
    sel = COMPLIANT_CLOSE if compliant else RIGID
    world.close_fingers()
    ctx.loop.servo(sel, ZERO6, ZERO6, until=lambda _l: world.actuator is None, max_time=CLOSE_TIME)
    if world.actuator == "close":
        # stalled against something: stop pushing
        world.actuator = None
    attached = world.held is not None
    ctx.log("close", attached=attached, width=world.width, pad_forces=list(world.pad_forces))
    return attached


def settle(ctx: SkillContext) -> bool:
    """Hold the compliant grasp until finger forces balance and the wrist is unloaded."""
    world, cfg = ctx.world, ctx.cfg

    def settled(loop) -> bool:
        fp = world.pressure_images()
        diff = finger_force_difference(fp) if fp is not None else 0.0
        lateral = float(np.hypot(loop.wrench[3], loop.wrench[4]))
        return diff < cfg.settle_force_diff and lateral < cfg.settle_ft_force

    ok = ctx.loop.servo(COMPLIANT_CLOSE, ZERO6, ZERO6, until=settled, max_time=cfg.settle_time)
    ctx.log("settle", settled=ok)
    return ok


def lift_to(ctx: SkillContext, tcp_pose, speed: float | None = None) -> None:
    ctx.move_tcp(tcp_pose, speed or ctx.cfg.approach_speed)


def require(cond: bool, outcome: Outcome, detail: str = "") -> None:
    if not cond:
        raise StrategyFailure(outcome, detail)


def grasp_span_axis(ctx: SkillContext, goal=None) -> tuple[np.ndarray, float]:
    """Closing direction of the fingers at the goal and the estimated width across it."""
    goal = goal or ctx.goal
    c = goal.rotation[:, 0]
    dims = ctx.est.dims
    span = float(dims[1] if dims[0] >= dims[1] else dims[0])
    return c, span


__all__ = [
    "COMPLIANT_CLOSE", "RIGID", "approach", "close_fingers", "grasp_span_axis",
    "lift_to", "open_gripper", "require", "settle",
]
