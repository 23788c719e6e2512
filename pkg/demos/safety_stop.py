"""Inject an Alert window and a Stop into a grasp and show the gated commands.

    python demos/safety_stop.py --stop 2.5
"""

from __future__ import annotations

import argparse

import numpy as np

from tactigrasp.safety import SafetyEvent, SafetyMonitor, SafetyStatus
from tactigrasp.strategies import GraspRequest, run_skill
from tactigrasp.world import World, load_scene, observe, shipped_scene_path


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--alert", type=float, default=0.5, help="start of a 1 s Alert window")
    ap.add_argument("--stop", type=float, default=2.5)
    args = ap.parse_args()

    scene = load_scene(shipped_scene_path("PCT"))
    obj = scene.object("cover")
    est = observe(obj, scene.noise, np.random.default_rng(0))
    world = World(scene, target="cover", gripper="C", seed=0)
    monitor = SafetyMonitor([
        SafetyEvent(args.alert, SafetyStatus.ALERT, "lidar"),
        SafetyEvent(args.alert + 1.0, SafetyStatus.CLEAR, "lidar"),
        SafetyEvent(args.stop, SafetyStatus.STOP, "door"),
    ])
    peak = {s: 0.0 for s in SafetyStatus}
    last = []

    def observer(t, status, u):
        peak[status] = max(peak[status], float(np.max(np.abs(u[3:]))))
        last[:] = [(t, status.name, np.round(u, 4))]

    result = run_skill(GraspRequest("C", est, obj.min_mass), world, safety=monitor, observer=observer)
    cap = scene.controller.alert_fraction * scene.controller.max_linear
    print(f"peak linear speed: clear {peak[SafetyStatus.CLEAR]:.3f} m/s, "
          f"alert {peak[SafetyStatus.ALERT]:.3f} m/s (cap {cap:.3f})")
    print(f"last command {last[0]}")
    print(f"{result.outcome.value}: {result.detail}")


if __name__ == "__main__":
    main()
