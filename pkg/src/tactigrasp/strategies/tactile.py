"""Strategy A: tactile two-finger grasp with CoP-centred rotation.

The fingers close compliantly around the estimate, the pressure images tell
whether the grasp sits on the fingertips (advance and regrasp) and, when the
lift meets a pulling force, the gripper turns about the current centre of
pressure to work the object free of its fixture.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Twist6, transform_twist
from ..sensing import NoContact, compute_cop, cop_at_tip, cop_frame
from .common import approach, close_fingers, open_gripper, require, settle
from .skill import GraspRequest, GraspResult, Outcome, SkillContext, StrategyFailure, run_skill

RELEASED, BLOCKED, EXHAUSTED, LOST = "released", "blocked", "exhausted", "lost"


def _dominant_cop(ctx: SkillContext):
    fp = ctx.world.pressure_images()
    if fp is None:
        return None
    img = fp.left if fp.left.total >= fp.right.total else fp.right
    try:
        return compute_cop(img)
    except NoContact:
        return None


def _grasp(ctx: SkillContext, readvances: list[int]) -> None:
    """Close compliantly, advancing by the fixed step while the contact sits at the tips."""
    cfg = ctx.cfg
    while True:
        attached = close_fingers(ctx, compliant=True)
        require(not ctx.world.grasp_failed, Outcome.NOTHING_GRASPED, "fingers closed on nothing")
        if attached:
            settle(ctx)
        cop = _dominant_cop(ctx)
        at_tip = cop is not None and cop_at_tip(cop, ctx.gripper.cell_pitch)
        if attached and not at_tip:
            return
        if readvances[0] >= cfg.max_readvances:
            require(attached, Outcome.NOTHING_GRASPED, "no stable grasp after re-advancing")
            return
        # reopen slightly and push the fingers one step deeper
        open_gripper(ctx, ctx.world.width + cfg.reopen)
        start = ctx.loop.pose.translation.copy()
        ctx.move_by(ctx.approach * cfg.readvance, cfg.approach_speed,
                    force_limit=cfg.protective_force)
        executed = float(np.dot(ctx.loop.pose.translation - start, ctx.approach))
        readvances[0] += 1
        ctx.log("readvance", commanded=cfg.readvance, executed=executed, index=readvances[0])


def _pull(ctx: SkillContext) -> float:
    """Force the tool exerts away from the object, along the estimated normal."""
    return float(ctx.loop.force_base() @ ctx.normal)


def _rotate_free(ctx: SkillContext, f_pull: float) -> str:
    """Turn about the CoP axis in fixed steps until the fixture lets go."""
    cfg, loop = ctx.cfg, ctx.loop
    cop = _dominant_cop(ctx)
    if cop is None:
        return LOST
    frame = cop_frame(ctx.gripper.tcp_length, cop)
    unit = transform_twist(frame, Twist6([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], "CoP")).vector
    ctx.log("rotation_axis", cop_offset=frame.translation)
    state = {"why": None}

    def check(_loop) -> bool:
        if ctx.world.held is None:
            state["why"] = LOST
        elif _pull(ctx) < 0.5 * f_pull:
            state["why"] = RELEASED
        elif abs(float(loop.wrench[2])) > cfg.torque_block:
            state["why"] = BLOCKED
        return state["why"] is not None

    for sign in (1.0, -1.0):
        turned = 0.0
        while turned < cfg.rotation_max - 1e-12:
            step = min(cfg.rotation_step, cfg.rotation_max - turned)
            done = loop.twist_move(sign * unit, step, cfg.rotation_speed, check=check)
            turned += done
            ctx.log("rotation", direction=sign, step=done, total=turned)
            if state["why"] in (RELEASED, LOST):
                return state["why"]
            if state["why"] == BLOCKED:
                break
        if state["why"] != BLOCKED:
            return EXHAUSTED
        # turn back before trying the other way
        state["why"] = None
        loop.twist_move(-sign * unit, turned, cfg.rotation_speed)
        if ctx.world.held is None:
            return LOST
    return BLOCKED


def tactile_strategy(ctx: SkillContext) -> None:
    cfg, world, loop = ctx.cfg, ctx.world, ctx.loop
    open_gripper(ctx, ctx.req.hints.initial_opening)
    approach(ctx, ctx.gripper.d_safety + cfg.overshoot)
    f_pull = cfg.pull_force + 2.0 * ctx.req.expected_min_mass * world.cfg.gravity
    readvances = [0]
    attempt = 0
    while True:
        attempt += 1
        _grasp(ctx, readvances)
        upright = loop.pose
        pre = ctx.ee(ctx.pre())
        lift = float(np.dot(pre.translation - loop.pose.translation, ctx.normal))
        ev = loop.guarded_move(ctx.normal, cfg.approach_speed, f_pull, max(lift, 1e-6))
        ctx.log("lift", pulled=ev.contact, distance=ev.distance)
        if ev.contact:
            ctx.log("pull", force=_pull(ctx), threshold=f_pull)
            why = _rotate_free(ctx, f_pull)
            ctx.log("rotation_result", result=why, attempt=attempt)
            if why == BLOCKED:
                raise StrategyFailure(Outcome.FIXTURE_UNRELEASABLE, "rotation blocked both ways")
            if why != RELEASED:
                # let go, stand the gripper upright again and take a fresh grasp
                open_gripper(ctx, world.width + cfg.reopen)
                loop.move_to(upright, cfg.approach_speed, cfg.free_angular_speed)
                continue
        loop.move_to(pre, cfg.approach_speed, cfg.free_angular_speed)
        if ctx.weight_check():
            return
        raise StrategyFailure(Outcome.WEIGHT_CHECK_FAILED, "object not carried after lifting")


def strategy_a(req: GraspRequest, world, **kwargs) -> GraspResult:
    if req.strategy != "A":
        raise ValueError("strategy_a needs a request for strategy A")
    return run_skill(req, world, **kwargs)


__all__ = ["strategy_a", "tactile_strategy"]
