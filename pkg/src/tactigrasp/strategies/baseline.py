"""Open-loop control condition: position-only grasp at the estimate.

No guarded moves, no search and no reorientation.  The arm drives straight
to the estimated goal (a protective stop ends the move if it collides),
actuates the gripper once, lifts and checks the weight.
"""

from __future__ import annotations

from .skill import GraspRequest, GraspResult, Outcome, SkillContext, StrategyFailure, run_skill
from .suction import cup_plan


def baseline_strategy(ctx: SkillContext) -> None:
    cfg, world = ctx.cfg, ctx.world
    if ctx.gripper.has_fingers:
        world.open_fingers()
        ctx.wait_actuator()
        goal = ctx.goal
    else:
        plan = cup_plan(ctx)
        goal = plan.goal
    stopped = not ctx.move_tcp(goal, cfg.approach_speed, force_limit=cfg.protective_force)
    ctx.log("reach_goal", protective_stop=stopped)
    if ctx.gripper.has_fingers:
        world.close_fingers()
        ctx.wait_actuator()
        if world.actuator == "close":
            world.actuator = None
        if world.grasp_failed or world.held is None:
            raise StrategyFailure(Outcome.NOTHING_GRASPED, "fingers closed without a grasp")
    else:
        world.vacuum(True, plan.cups)
    ctx.log("actuated", attached=world.held is not None)
    ctx.move_tcp(ctx.pre(goal), cfg.approach_speed)
    if not ctx.weight_check():
        raise StrategyFailure(Outcome.WEIGHT_CHECK_FAILED, "object not carried after lifting")


def baseline_skill(req: GraspRequest, world, **kwargs) -> GraspResult:
    """Run the open-loop skill; the tool is ``req.gripper`` (defaults to A)."""
    if req.strategy != "baseline":
        raise ValueError("baseline_skill needs a request for the baseline")
    return run_skill(req, world, **kwargs)


__all__ = ["baseline_skill", "baseline_strategy"]
