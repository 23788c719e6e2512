from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactigrasp.config import ConfigError
from tactigrasp.geometry import Twist6
from tactigrasp.orchestrator import (
    Action, Event, IllegalTransition, Phase, PlannerState, SafetyEvent, SafetyMonitor, SafetyStatus,
    apply_safety, dump_safety_trace, load_safety_trace, planner_step, run_task,
)
from tactigrasp.safety import combine
from tactigrasp.world import load_scene, shipped_scene_path

MAX = Twist6([1.0, 1.0, 1.0], [0.25, 0.25, 0.25])


def drive(state: PlannerState, *events):
    actions = []
    for ev in events:
        state, step = planner_step(state, ev)
        actions.append(step.action)
    return state, actions


# -- planner -------------------------------------------------------------------

def test_happy_path():
    state, actions = drive(PlannerState(), "start", "vision", "selected", "dispatched", "succeeded", "confirmed")
    assert state.phase == Phase.DONE and state.succeeded
    assert actions == [Action.REQUEST_VISION, Action.SELECT, Action.DISPATCH, Action.WAIT,
                       Action.REQUEST_CONFIRMATION, Action.REPORT_DONE]


def test_failure_retries_with_fresh_observation():
    state, _ = drive(PlannerState(max_retries=2), "start", "vision", "selected", "dispatched")
    state, step = planner_step(state, "failed")
    assert state.phase == Phase.DISPATCH_SKILL and state.retry_count == 1
    assert step.action == Action.DISPATCH and step.fresh_observation


def test_retry_bound_then_human():
    state, _ = drive(PlannerState(max_retries=1), "start", "vision", "selected", "dispatched", "failed",
                     "dispatched")
    state, step = planner_step(state, "failed")
    assert state.phase == Phase.CALL_HUMAN and step.action == Action.CALL_HUMAN
    assert state.retry_count == 1
    state, step = planner_step(state, "resolved")
    assert state.phase == Phase.DONE and not state.succeeded


def test_no_strategy_calls_human():
    state, actions = drive(PlannerState(), "start", "vision", "no_strategy")
    assert state.phase == Phase.CALL_HUMAN and actions[-1] == Action.CALL_HUMAN


@pytest.mark.parametrize("policy, phase, succeeded", [
    ("prefer-skill", Phase.DONE, True),
    ("prefer-vision", Phase.DISPATCH_SKILL, False),
    ("always-human", Phase.CALL_HUMAN, False),
])
def test_conflict_policies(policy, phase, succeeded):
    state, _ = drive(PlannerState(conflict_policy=policy), "start", "vision", "selected", "dispatched",
                     "succeeded", "conflict")
    assert state.phase == phase and state.succeeded is succeeded


@pytest.mark.parametrize("phase, event", [
    (Phase.IDLE, Event.SUCCEEDED),
    (Phase.AWAIT_RESULT, Event.START),
    (Phase.DONE, Event.VISION),
    (Phase.CONFIRM_VISION, Event.FAILED),
])
def test_illegal_transitions(phase, event):
    with pytest.raises(IllegalTransition) as exc:
        planner_step(PlannerState(phase=phase), event)
    assert exc.value.phase == phase and exc.value.event == event


def test_state_validation():
    with pytest.raises(ValueError):
        PlannerState(conflict_policy="coin-flip")
    with pytest.raises(ValueError):
        PlannerState(retry_count=3, max_retries=2)
    with pytest.raises(ValueError):
        planner_step(PlannerState(), "explode")


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list(Event)), max_size=30), st.integers(0, 3))
def test_retry_count_stays_bounded(events, max_retries):
    state = PlannerState(max_retries=max_retries)
    for ev in events:
        try:
            state, _ = planner_step(state, ev)
        except IllegalTransition:
            continue
        assert 0 <= state.retry_count <= max_retries
        assert state.in_flight == (state.phase == Phase.AWAIT_RESULT)


def test_run_task_succeeds_on_cover():
    scene = load_scene(shipped_scene_path("PCT"))
    report = run_task(scene, "cover", seed=2)
    assert report.succeeded
    assert report.strategies == ["C"]
    assert report.trace[0] == ("Idle", "start", "request_vision")
    assert report.trace[-1][2] == "report_done"


def test_run_task_calls_human_after_retries():
    data = load_scene(shipped_scene_path("EL"))
    # strategy B cannot unscrew the bulb: every dispatch fails
    report = run_task(data, "light_bulb", seed=0, max_retries=1, strategy="B")
    assert not report.succeeded
    assert report.state.phase == Phase.CALL_HUMAN
    assert len(report.results) == 2


# -- safety gate -----------------------------------------------------------------

def test_apply_safety_examples():
    u = Twist6([0.0, 0.0, 0.0], [0.1, 0.0, 0.0])
    assert apply_safety(SafetyStatus.CLEAR, u, 0.25, MAX) is u
    np.testing.assert_array_equal(apply_safety(SafetyStatus.STOP, u, 0.25, MAX).vector, np.zeros(6))
    capped = apply_safety(SafetyStatus.ALERT, u, 0.25, MAX)
    assert capped.linear[0] == pytest.approx(0.0625)
    slow = Twist6([0.0, 0.0, 0.0], [0.01, 0.0, 0.0])
    np.testing.assert_array_equal(apply_safety(SafetyStatus.ALERT, slow, 0.25, MAX).vector, slow.vector)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.05, 1.0))
def test_alert_caps_every_axis_and_keeps_direction(vec, frac):
    u = Twist6.from_vector(np.array(vec))
    out = apply_safety(SafetyStatus.ALERT, u, frac, MAX).vector
    assert np.all(np.abs(out) <= frac * MAX.vector * (1 + 1e-12))
    vec = np.array(vec)
    big = int(np.argmax(np.abs(vec)))
    if vec[big] != 0:
        ratio = out[big] / vec[big]
        assert 0 < ratio <= 1
        np.testing.assert_allclose(out, ratio * vec, rtol=1e-12, atol=1e-300)


def test_stop_dominates():
    assert combine(["clear", "alert", "stop"]) == SafetyStatus.STOP
    assert combine(["clear", "alert"]) == SafetyStatus.ALERT
    assert combine([]) == SafetyStatus.CLEAR
    m = SafetyMonitor([SafetyEvent(0.0, SafetyStatus.ALERT, "lidar"), SafetyEvent(1.0, SafetyStatus.STOP, "door"),
                       SafetyEvent(2.0, SafetyStatus.CLEAR, "door")])
    assert m.status_at(0.5) == SafetyStatus.ALERT
    assert m.status_at(1.5) == SafetyStatus.STOP
    assert m.status_at(2.5) == SafetyStatus.ALERT
    assert m.next_event_after(1.0) == 2.0


def test_safety_trace_round_trip(tmp_path):
    events = [SafetyEvent(0.5, SafetyStatus.ALERT), SafetyEvent(1.25, SafetyStatus.STOP, "door")]
    path = tmp_path / "trace.jsonl"
    dump_safety_trace(events, path)
    assert load_safety_trace(path) == events


def test_safety_trace_errors(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"t": 0.0, "status": "clear"}\n{"t": 1.0, "status": "panic"}\n')
    with pytest.raises(ConfigError) as exc:
        load_safety_trace(path)
    assert exc.value.where == "line 2"
