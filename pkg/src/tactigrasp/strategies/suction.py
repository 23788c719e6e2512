"""Strategy C: suction grasp with a fixed 45 degree reorientation schedule.

Both cups are used when the estimated surface holds them, otherwise one cup
is centred on the estimate.  Each failed seal is followed by a 45 degree turn
about the tool axis through the grasp centre (both cups, at most three turns)
or through the selected cup (one cup, at most seven turns).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, Twist6, transform_twist
from .common import approach
from .skill import GraspRequest, GraspResult, Outcome, SkillContext, StrategyFailure, run_skill

SINGLE_CUP = 1  # the cup on the +y side of the tool


@dataclass(frozen=True)
class CupPlan:
    cups: tuple[int, ...]
    goal: Pose  # TCP goal
    pivot_y: float  # tool-frame y of the rotation axis
    max_rotations: int

    @property
    def both(self) -> bool:
        return len(self.cups) > 1


def cups_fit(dims, spacing: float, diameter: float) -> bool:
    """Whether a surface of estimated ``dims`` accommodates both cups side by side."""
    long_side, short_side = max(dims), min(dims)
    return long_side >= spacing + diameter and short_side >= diameter


def cup_plan(ctx: SkillContext) -> CupPlan:
    g, cfg = ctx.gripper, ctx.cfg
    goal = ctx.goal
    if g.cup_count > 1 and cups_fit(ctx.est.dims, g.cup_spacing, g.cup_diameter):
        return CupPlan(tuple(range(g.cup_count)), goal, 0.0, cfg.rotations_both)
    if g.cup_count == 1:
        return CupPlan((0,), goal, 0.0, cfg.rotations_single)
    y = 0.5 * g.cup_spacing
    # shift the tool so the selected cup sits on the estimated centre
    shifted = goal.with_translation(goal.translation - y * goal.rotation[:, 1])
    return CupPlan((SINGLE_CUP,), shifted, y, cfg.rotations_single)


def _rise_to_pre_height(ctx: SkillContext, plan: CupPlan) -> None:
    tcp = ctx.tcp()
    top = plan.goal.translation + ctx.gripper.d_safety * ctx.normal
    rise = float(np.dot(top - tcp.translation, ctx.normal))
    if rise > 0:
        ctx.move_by(ctx.normal * rise, ctx.cfg.approach_speed)


def _reorient(ctx: SkillContext, plan: CupPlan, index: int) -> float:
    cfg = ctx.cfg
    pivot = Pose.from_translation([0.0, plan.pivot_y, ctx.gripper.tcp_length], "EE", "P")
    unit = transform_twist(pivot, Twist6([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], "P")).vector
    done = ctx.loop.twist_move(unit, cfg.cup_rotation, cfg.free_angular_speed)
    ctx.log("reorient", angle=done, commanded=cfg.cup_rotation, index=index,
            about="centre" if plan.both else "cup", cups=list(plan.cups))
    return done


def suction_strategy(ctx: SkillContext) -> None:
    cfg, world = ctx.cfg, ctx.world
    plan = cup_plan(ctx)
    ctx.log("cup_plan", cups=list(plan.cups), pivot_y=plan.pivot_y, max_rotations=plan.max_rotations)
    for k in range(plan.max_rotations + 1):
        if k > 0:
            _reorient(ctx, plan, k)
        ev = approach(ctx, ctx.gripper.d_safety + cfg.approach_margin, threshold=cfg.cup_press_force)
        world.vacuum(True, plan.cups)
        ctx.log("vacuum", contact=ev.contact, attached=world.held is not None, attempt=k)
        if world.held is not None:
            _rise_to_pre_height(ctx, plan)
            if ctx.weight_check():
                return
        world.vacuum(False)
        _rise_to_pre_height(ctx, plan)
    raise StrategyFailure(Outcome.WEIGHT_CHECK_FAILED,
                          f"no seal after {plan.max_rotations} reorientations")


def strategy_c(req: GraspRequest, world, **kwargs) -> GraspResult:
    if req.strategy != "C":
        raise ValueError("strategy_c needs a request for strategy C")
    return run_skill(req, world, **kwargs)


__all__ = ["CupPlan", "cup_plan", "cups_fit", "strategy_c", "suction_strategy"]
