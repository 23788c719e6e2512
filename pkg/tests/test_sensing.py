from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tactigrasp.geometry import Pose, Twist6, transform_twist
from tactigrasp.sensing import (
    CoP, FingerPair, NoContact, PressureImage, compute_cop, cop_at_tip, cop_frame,
    finger_force_difference, ft_read,
)
from tactigrasp.world import World, load_scene, scene_from_dict, shipped_scene_path
from tactigrasp.world.scene import down_rotation


def brute_force_cop(p: np.ndarray, pitch: float) -> tuple[float, float, float]:
    """Weighted centroid by explicit loops over every cell."""
    total = sx = sy = 0.0
    for r in range(p.shape[0]):
        for c in range(p.shape[1]):
            total += p[r, c]
            sx += p[r, c] * r * pitch
            sy += p[r, c] * c * pitch
    return sx / total, sy / total, total


def test_uniform_pressure_gives_array_center():
    cop = compute_cop(PressureImage(np.ones((8, 4)), 0.004))
    assert cop.position_in_finger == pytest.approx((3.5 * 0.004, 1.5 * 0.004), abs=1e-15)
    assert cop.lateral_offset == pytest.approx(0.0, abs=1e-15)


def test_single_cell_gives_its_center():
    p = np.zeros((8, 4))
    p[5, 2] = 3.0
    cop = compute_cop(PressureImage(p, 0.004))
    assert cop.position_in_finger == pytest.approx((5 * 0.004, 2 * 0.004), abs=1e-15)
    assert cop.total_force == 3.0


def test_two_cell_weighted_mean():
    p = np.array([[1.0], [3.0]])
    cop = compute_cop(PressureImage(p, 0.004))
    assert cop.position_in_finger[0] == pytest.approx(0.75 * 0.004, abs=1e-15)


def test_empty_image_has_no_contact():
    with pytest.raises(NoContact):
        compute_cop(PressureImage.empty())


@pytest.mark.parametrize("p", [np.array([[-1.0]]), np.zeros((0, 3)), np.array([[np.nan]])])
def test_pressure_image_validation(p):
    with pytest.raises(ValueError):
        PressureImage(p)


def test_cop_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        rows, cols = rng.integers(1, 12, 2)
        p = rng.random((rows, cols)) * (rng.random((rows, cols)) < 0.5)
        if p.sum() == 0:
            p[0, 0] = 1.0
        cop = compute_cop(PressureImage(p, 0.004))
        x, y, total = brute_force_cop(p, 0.004)
        assert abs(cop.position_in_finger[0] - x) <= 1e-12
        assert abs(cop.position_in_finger[1] - y) <= 1e-12
        assert abs(cop.total_force - total) <= 1e-12 * total


images = arrays(float, st.tuples(st.integers(1, 10), st.integers(1, 6)), elements=st.floats(0.0, 100.0))


@settings(max_examples=200, deadline=None)
@given(images, st.floats(0.01, 1e3))
def test_cop_scale_invariance(p, scale):
    if p.sum() <= 1e-9:
        return
    a = compute_cop(PressureImage(p))
    b = compute_cop(PressureImage(p * scale))
    np.testing.assert_allclose(b.position_in_finger, a.position_in_finger, atol=1e-12)
    assert b.total_force == pytest.approx(a.total_force * scale, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(images)
def test_cop_inside_active_cells_hull(p):
    if p.sum() <= 1e-9:
        return
    cop = compute_cop(PressureImage(p, 1.0))
    r, c = np.nonzero(p)
    assert r.min() - 1e-9 <= cop.position_in_finger[0] <= r.max() + 1e-9
    assert c.min() - 1e-9 <= cop.position_in_finger[1] <= c.max() + 1e-9


def test_cop_frame_examples():
    at_tcp = CoP((0.0, 0.0), 1.0, 0.0)
    assert cop_frame(0.20, at_tcp).translation[2] == pytest.approx(0.20)
    f = cop_frame(0.20, CoP((0.0, 0.0), 1.0, 0.03))
    assert f.translation[2] == pytest.approx(0.17, abs=1e-15)
    np.testing.assert_array_equal(f.rotation, np.eye(3))
    assert (f.from_frame, f.to_frame) == ("EE", "CoP")
    with pytest.raises(NoContact):
        cop_frame(0.2, CoP((0.0, 0.0), 0.0, 0.0))


def test_twist_about_cop_matches_point_velocity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        cop = CoP((0.0, 0.0), 1.0, rng.uniform(0, 0.06), rng.uniform(-0.01, 0.01))
        T = cop_frame(0.18, cop)
        w = rng.normal(size=3)
        ee = transform_twist(T, Twist6(w, np.zeros(3), "CoP"))
        # the CoP point, fixed on the tool, must not move under a pure rotation about it
        v_cop = ee.linear + np.cross(ee.angular, T.translation)
        np.testing.assert_allclose(v_cop, 0.0, atol=1e-15)


def test_cop_frame_reproduces_world_cop_position():
    scene = load_scene(shipped_scene_path("EL"))
    world = World(scene, target="light_bulb", gripper="A")
    obj = scene.object("light_bulb")
    R = down_rotation()
    tcp = obj.true_center + np.array([0.0, 0.0, 0.5 * obj.height - 0.02])
    world.ee_pose = Pose(R, tcp - R[:, 2] * world.tcp_length, "B", "EE")
    world._refresh()
    world.grip()
    left = world.pressure_images().left
    cop = compute_cop(left)
    ee_T_cop = cop_frame(world.tcp_length, cop)
    p_world = (world.ee_pose @ ee_T_cop).translation
    # independent route: force-weighted pad points in base coordinates
    P = world.tool_points()[world.tool.slices["pad_left"]]
    w = left.pressures.ravel()
    expected_along_axis = (P * w[:, None]).sum(axis=0) / w.sum()
    # both agree on the position along the tool axis and across the finger
    axis, across = R[:, 2], R[:, 1]
    assert p_world @ axis == pytest.approx(expected_along_axis @ axis, abs=1e-9)
    assert p_world @ across == pytest.approx(expected_along_axis @ across, abs=1e-9)


def test_finger_force_difference_examples():
    img = PressureImage(np.ones((2, 2)))
    assert finger_force_difference(FingerPair(img, img, 0.04)) == 0.0
    left = PressureImage(np.full((2, 2), 1.0))
    right = PressureImage(np.full((2, 2), 0.25))
    assert finger_force_difference(FingerPair(left, right, 0.04)) == pytest.approx(3.0)
    empty = PressureImage.empty()
    assert finger_force_difference(FingerPair(empty, empty, 0.0)) == 0.0


def test_cop_at_tip_examples():
    rows, pitch = 8, 0.004
    tip = np.zeros((rows, 4))
    tip[-1] = 1.0
    assert cop_at_tip(compute_cop(PressureImage(tip, pitch)), pitch)
    assert not cop_at_tip(compute_cop(PressureImage(np.ones((rows, 4)), pitch)), pitch)
    length = rows * pitch
    cop = CoP((0.9 * length, 0.0), 1.0, length - 0.9 * length)
    assert cop_at_tip(cop, 0.15 * length)


def test_ft_read_free_space_is_zero():
    scene = load_scene(shipped_scene_path("PCT"))
    world = World(scene, gripper="C")
    w = ft_read(world, noise=False)
    np.testing.assert_array_equal(w.vector, np.zeros(6))
    assert w.frame == "EE"


def test_ft_read_spring_law_on_fingertip():
    # a narrow block under the left fingertip only, pressed 1 mm deep
    scene = scene_from_dict({"schema_version": 1, "name": "tip", "objects": [
        {"id": "block", "shape": "box", "center": [0.5, 0.0, 0.02], "dims": [0.008, 0.2], "height": 0.04,
         "mass": 1.0}]})
    world = World(scene, gripper="A")
    g = world.gripper
    R = down_rotation()
    x_left = -0.5 * g.max_opening - 0.5 * g.finger_thickness  # middle of the left fingertip
    tcp = np.array([0.5, 0.0, 0.04 - 0.001]) - R[:, 0] * x_left
    world.ee_pose = Pose(R, tcp - R[:, 2] * world.tcp_length, "B", "EE")
    world._refresh()
    w = ft_read(world, noise=False)
    up = world.ee_pose.rotation.T @ np.array([0.0, 0.0, 1.0])
    # the tool pushes down on the block with k * depth
    assert -w.force @ up == pytest.approx(scene.contact.stiffness * 0.001, rel=1e-9)


def test_ft_read_noise_statistics():
    scene = load_scene(shipped_scene_path("PCT"))
    world = World(scene, gripper="C", seed=7)
    reads = np.array([ft_read(world).vector for _ in range(10_000)])
    std = reads.std(axis=0)
    np.testing.assert_allclose(std[3:], scene.sensor.sigma_force, rtol=0.1)
    np.testing.assert_allclose(std[:3], scene.sensor.sigma_torque, rtol=0.1)
