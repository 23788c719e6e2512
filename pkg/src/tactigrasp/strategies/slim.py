"""Strategy B: slim two-finger grasp with a lateral edge search.

When the first grasp comes up empty, the closed fingers probe the object
from each side in turn: step out by a fixed multiple of the finger opening,
descend, and slide back toward the estimate until the side of the object
stops them.  That edge plus the estimated width gives a new grasp centre.
"""

from __future__ import annotations

import numpy as np

from .common import approach, close_fingers, grasp_span_axis, open_gripper
from .skill import GraspRequest, GraspResult, Outcome, SkillContext, StrategyFailure, run_skill

BACK_OFF = 0.002  # m lifted after touching down during a search leg


def _attempt(ctx: SkillContext, goal) -> Outcome:
    """One grasp from the pre-pose above ``goal``; returns the failure kind or SUCCEEDED."""
    cfg = ctx.cfg
    ctx.move_tcp(ctx.pre(goal))
    open_gripper(ctx)
    approach(ctx, ctx.gripper.d_safety + cfg.approach_margin)
    attached = close_fingers(ctx, compliant=True)
    if ctx.world.grasp_failed or not attached:
        ctx.log("grasp_empty")
        open_gripper(ctx)
        ctx.move_tcp(ctx.pre(goal), cfg.approach_speed)
        return Outcome.NOTHING_GRASPED
    ctx.move_tcp(ctx.pre(goal), cfg.approach_speed)
    if ctx.weight_check():
        return Outcome.SUCCEEDED
    open_gripper(ctx)
    return Outcome.WEIGHT_CHECK_FAILED


def _search_leg(ctx: SkillContext, side: float) -> np.ndarray | None:
    """Probe from one side; returns the refined grasp centre or None on NoContact."""
    cfg, g, loop = ctx.cfg, ctx.gripper, ctx.loop
    c, span = grasp_span_axis(ctx)
    l_width = g.max_opening
    offset = cfg.search_factor * l_width
    est_pre = ctx.pre()
    ctx.move_tcp(est_pre, cfg.approach_speed)
    open_gripper(ctx, 0.0)
    start = ctx.pre().with_translation(est_pre.translation + side * offset * c)
    ctx.move_tcp(start, cfg.approach_speed)
    executed = float(np.dot(ctx.tcp().translation - est_pre.translation, c))
    ctx.log("search_offset", side=side, commanded=offset, executed=abs(executed), l_width=l_width)
    down = approach(ctx, g.d_safety + cfg.search_depth)
    if down.contact:
        ctx.move_by(ctx.normal * BACK_OFF, cfg.approach_speed)
    sweep = loop.guarded_move(-side * c, cfg.search_speed, cfg.contact_threshold,
                              offset + 0.5 * l_width)
    ctx.log("search_sweep", side=side, contact=sweep.contact, distance=sweep.distance)
    if not sweep.contact:
        return None
    tcp = ctx.tcp().translation
    edge = float(tcp @ c) - side * g.finger_thickness
    centre = ctx.est.center + (edge - side * 0.5 * span - float(ctx.est.center @ c)) * c
    ctx.log("edge_found", side=side, edge=edge, centre=centre)
    ctx.move_by(side * c * 0.5 * g.finger_thickness, cfg.search_speed)
    return centre


def slim_strategy(ctx: SkillContext) -> None:
    first = _attempt(ctx, ctx.goal)
    if first == Outcome.SUCCEEDED:
        return
    found_any = False
    last = first
    for side in (1.0, -1.0):
        centre = _search_leg(ctx, side)
        if centre is None:
            continue
        found_any = True
        goal = ctx.goal.with_translation(centre)
        last = _attempt(ctx, goal)
        if last == Outcome.SUCCEEDED:
            return
    if not found_any:
        raise StrategyFailure(Outcome.NO_CONTACT, "no edge found on either side")
    raise StrategyFailure(last, "side search exhausted")


def strategy_b(req: GraspRequest, world, **kwargs) -> GraspResult:
    if req.strategy != "B":
        raise ValueError("strategy_b needs a request for strategy B")
    return run_skill(req, world, **kwargs)


__all__ = ["slim_strategy", "strategy_b"]
