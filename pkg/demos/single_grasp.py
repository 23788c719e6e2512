"""Grasp one object with its proposed strategy and print the telemetry events.

    python demos/single_grasp.py EL light_bulb --noise 1.0 --seed 1
"""

from __future__ import annotations

import argparse

import numpy as np

from tactigrasp.strategies import GraspHints, GraspRequest, run_skill
from tactigrasp.world import World, load_scene, observe, shipped_scene_path


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("scene")
    ap.add_argument("object")
    ap.add_argument("--strategy", help="A, B, C or baseline (default: first proposed)")
    ap.add_argument("--noise", type=float, default=1.0, help="multiplier on the scene noise")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    scene = load_scene(shipped_scene_path(args.scene))
    scene = scene.with_noise(scene.noise.scaled(args.noise))
    obj = scene.object(args.object)
    strategy = args.strategy or obj.strategies[0]
    tool = obj.strategies[0] if strategy == "baseline" else strategy
    est = observe(obj, scene.noise, np.random.default_rng(args.seed))
    print(f"true centre {np.round(obj.true_center, 4)}, estimate {np.round(est.center, 4)}")

    world = World(scene, target=obj.id, gripper=tool, seed=args.seed)
    req = GraspRequest(strategy, est, obj.min_mass, GraspHints(expect_rotary=obj.fixture.kind == "rotary"),
                       gripper=tool)
    result = run_skill(req, world)
    for rec in result.telemetry.records:
        if rec.event != "enter":
            print(f"{rec.t:8.3f}s  {rec.phase:<13} {rec.event:<16} {rec.data or ''}")
    print(f"{result.outcome.value} after {result.sim_time:.2f}s simulated, {result.cycles} cycles")


if __name__ == "__main__":
    main()
