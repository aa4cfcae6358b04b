from dataclasses import replace
import io

import numpy as np
import pytest

from pointloc.board import BoardModel, build_grid
from pointloc.engine import (EngineConfig, NonMonotoneTime, Phase, PointingEngine, StabilityState,
                             select_arm, update_stability, write_trace)
from pointloc.geometry import RigidTransform, compose
from pointloc.simulator import NoiseModel, Participant, Scene, SessionScript, simulate_session
from pointloc.stream import Joint, JointFrame

from test_geometry import random_transform

CFG = EngineConfig()


def frame(t=0.0, c=0.9, **pts):
    return JointFrame(t, "world", {k: Joint(np.asarray(v, dtype=float), c) for k, v in pts.items()})


def body(t=0.0, left_hand_x=-400.0, right_hand_x=100.0, **extra):
    pts = dict(shoulder_left=(-220, -1500, 1435), shoulder_right=(220, -1500, 1435),
               elbow_left=(left_hand_x, -1300, 1300), hand_left=(left_hand_x, -1000, 1400),
               elbow_right=(right_hand_x, -1300, 1100), hand_right=(right_hand_x, -1000, 1150))
    pts.update(extra)
    return frame(t, **pts)


# -- arm selection -----------------------------------------------------------

def test_select_configured_arm():
    f = frame(elbow_left=(0, -1300, 1300), hand_left=(0, -1000, 1400))
    arm, ray = select_arm(f, replace(CFG, arm="left"))
    assert arm == "left" and np.array_equal(ray.hand, [0, -1000, 1400])


def test_select_missing_hand():
    f = frame(elbow_left=(0, -1300, 1300))
    assert select_arm(f, replace(CFG, arm="left")) is None


def test_select_low_confidence():
    f = frame(c=0.2, elbow_left=(0, -1300, 1300), hand_left=(0, -1000, 1400))
    assert select_arm(f, replace(CFG, arm="left")) is None


def test_select_short_forearm():
    f = frame(elbow_left=(0, -1300, 1300), hand_left=(0, -1250, 1300))
    assert select_arm(f, replace(CFG, arm="left")) is None


def test_auto_picks_farther_hand():
    # left hand 400 mm from the midline, right hand 100 mm
    assert select_arm(body(), CFG)[0] == "left"
    assert select_arm(body(left_hand_x=-50, right_hand_x=300), CFG)[0] == "right"


def test_auto_tie_goes_right():
    assert select_arm(body(left_hand_x=-200, right_hand_x=200), CFG)[0] == "right"


def test_auto_single_arm():
    f = frame(elbow_left=(0, -1300, 1300), hand_left=(0, -1000, 1400))
    assert select_arm(f, CFG)[0] == "left"
    assert select_arm(frame(), CFG) is None


# -- stability ---------------------------------------------------------------

def feed(points, cfg=CFG, rate=30.0):
    st = StabilityState()
    phases = []
    for i, (u, v) in enumerate(points):
        update_stability(st, i / rate, u, v, cfg)
        phases.append((i / rate, st.phase, st.entered_stable))
    return st, phases


def test_still_point_stabilises_after_dwell():
    _, phases = feed([(500.0, 500.0)] * 30)
    entered = [t for t, _, e in phases if e]
    # first 30 Hz sample at or past 0.75 s
    assert entered == [pytest.approx(23 / 30)]
    assert abs(entered[0] - 0.75) <= 1 / 30
    assert phases[-1][1] is Phase.STABLE


def test_alternating_points_never_stable_with_diameter_ceiling():
    pts = [(500.0 + (100 if i % 2 else -100), 500.0) for i in range(300)]
    cfg = replace(CFG, stable_diameter_max_mm=150.0)
    _, phases = feed(pts, cfg)
    assert not any(e for _, _, e in phases)
    assert all(p is Phase.TRACKING for _, p, _ in phases)


def test_growing_alternation_never_stable():
    pts = [(500.0 + (-1) ** i * 100 * (1 + i), 500.0) for i in range(60)]
    _, phases = feed(pts)
    assert not any(e for _, _, e in phases)


def test_hold_timeout_destabilises():
    _, phases = feed([(500.0, 500.0)] * 30 * 8)
    seq = [p for _, p, _ in phases]
    i = seq.index(Phase.DESTABILIZED)
    since = next(t for t, _, e in phases if e)
    assert since + 5.0 < phases[i][0] <= since + 5.0 + 1 / 30 + 1e-9
    assert seq[i + 1] is Phase.TRACKING
    assert sum(e for _, _, e in phases) == 2  # stabilises again after another dwell


def test_first_sample_rate_zero_and_window_trim():
    st = StabilityState()
    update_stability(st, 0.0, 0.0, 0.0, CFG)
    assert st.drdt == 0.0 and st.r == 0.0 and st.phase is Phase.TRACKING
    for i in range(1, 40):
        update_stability(st, i / 30, float(i), 0.0, CFG)
    assert all(39 / 30 - t <= 0.5 + 1e-9 for t, _, _ in st.window)
    assert len(st.window) == 16


def test_rate_is_smoothed():
    st = StabilityState()
    update_stability(st, 0.0, 0.0, 0.0, CFG)
    update_stability(st, 0.1, 10.0, 0.0, CFG)  # diameter 0 -> 10 in 0.1 s
    assert st.drdt == pytest.approx(0.3 * 100.0)
    update_stability(st, 0.2, 20.0, 0.0, CFG)  # 10 -> 20
    assert st.drdt == pytest.approx(0.3 * 100.0 + 0.7 * 30.0)


def test_time_going_backwards():
    st = StabilityState()
    update_stability(st, 1.0, 0, 0, CFG)
    with pytest.raises(NonMonotoneTime):
        update_stability(st, 0.5, 0, 0, CFG)


def test_config_validation():
    for bad in (dict(arm="both"), dict(window_s=0), dict(smoothing_alpha=0), dict(confidence_min=2),
                dict(stable_diameter_max_mm=-1)):
        with pytest.raises(ValueError):
            EngineConfig(**bad)
    with pytest.raises(ValueError):
        EngineConfig.from_dict({"nope": 1})


# -- engine ------------------------------------------------------------------

@pytest.fixture(scope="module")
def scene():
    return Scene()


def session(scene, cells, sigma=0.0, seed=0, frame="world", arm="right", rows=2, cols=3, hold_s=3.0):
    grid = build_grid(scene.board, rows, cols)
    script = SessionScript(grid, cells, hold_s, arm)
    frames, truth = simulate_session(Participant(), script, NoiseModel(jitter_sigma_mm=sigma, seed=seed),
                                     scene, frame=frame)
    return grid, frames, truth


def stable(events):
    return [e for e in events if e.stable]


def test_zero_noise_single_target(scene):
    grid, frames, _ = session(scene, [4])
    events = PointingEngine(scene.board, grid).run(frames)
    assert [e.cell for e in stable(events)] == [4]


def test_two_targets_in_order(scene):
    grid, frames, truth = session(scene, [1, 6], frame="sensor")
    events = PointingEngine(scene.board, grid, sensor_to_world=scene.sensor_to_world).run(frames)
    s = stable(events)
    assert [e.cell for e in s] == [iv.cell for iv in truth] == [1, 6]
    assert all(iv.t_start <= e.t < iv.t_end for e, iv in zip(s, truth))


def test_sensor_frame_needs_transform(scene):
    grid, frames, _ = session(scene, [1], frame="sensor")
    with pytest.raises(ValueError):
        PointingEngine(scene.board, grid).step(frames[0])


def test_parallel_ray_yields_nothing(board, grid23):
    eng = PointingEngine(board, grid23, replace(CFG, arm="right"), trace=True)
    frames = [frame(i / 30, elbow_right=(0, -1000, 1500), hand_right=(300, -1000, 1500)) for i in range(60)]
    assert eng.run(frames) == []
    assert eng.rejected == 60
    assert {r.phase for r in eng.trace} == {"Idle"}


def test_pointing_away_resets_to_idle(board, grid23):
    eng = PointingEngine(board, grid23, replace(CFG, arm="right"))
    toward = dict(elbow_right=(0, -1300, 1500), hand_right=(0, -1000, 1500))
    away = dict(elbow_right=(0, -1000, 1500), hand_right=(0, -1300, 1500))
    for i in range(10):
        eng.step(frame(i / 30, **toward))
    assert eng.state.phase is Phase.TRACKING
    assert eng.step(frame(10 / 30, **away)) == []
    assert eng.state.phase is Phase.IDLE and eng.rejected == 1


def test_missing_joints_gap_resets(board, grid23):
    eng = PointingEngine(board, grid23, replace(CFG, arm="right"))
    pose = dict(elbow_right=(0, -1300, 1500), hand_right=(0, -1000, 1500))
    for i in range(10):
        eng.step(frame(i / 30, **pose))
    eng.step(frame(0.4))  # 0.1 s after the last valid sample: kept
    assert len(eng.state.window) == 10
    eng.step(frame(0.6))  # beyond missing_gap_s
    assert eng.state.phase is Phase.IDLE and len(eng.state.window) == 0


def test_engine_rejects_backwards_time(board, grid23):
    eng = PointingEngine(board, grid23)
    eng.step(frame(1.0))
    with pytest.raises(NonMonotoneTime):
        eng.step(frame(0.5))


def test_monitoring_event_every_valid_sample(scene):
    grid, frames, _ = session(scene, [2])
    events = PointingEngine(scene.board, grid).run(frames)
    assert len([e for e in events if not e.stable]) == len(frames)


def test_determinism(scene):
    grid, frames, _ = session(scene, [3, 5, 1], sigma=15, seed=3, frame="sensor")
    run = lambda: PointingEngine(scene.board, grid, sensor_to_world=scene.sensor_to_world).run(frames)
    assert run() == run()


def test_stable_event_is_window_centroid(scene):
    grid, frames, _ = session(scene, [3, 5, 1, 2], sigma=15, seed=4)
    events = PointingEngine(scene.board, grid).run(frames)
    monitor = [e for e in events if not e.stable]
    s = stable(events)
    assert s
    for ev in s:
        win = [m for m in monitor if ev.t - 0.5 - 1e-9 <= m.t <= ev.t]
        assert ev.u == pytest.approx(np.mean([m.u for m in win]), abs=1e-9)
        assert ev.v == pytest.approx(np.mean([m.v for m in win]), abs=1e-9)


def test_no_stable_event_without_dwell(scene):
    grid, frames, _ = session(scene, [3, 5, 1, 2, 6, 4], sigma=15, seed=5)
    eng = PointingEngine(scene.board, grid, trace=True)
    events = eng.run(frames)
    buf = io.StringIO()
    write_trace(eng.trace, buf)
    rows = [line.split(",") for line in buf.getvalue().splitlines()[1:]]
    t = np.array([float(r[0]) for r in rows])
    drdt = np.array([float(r[2]) for r in rows])
    s = stable(events)
    assert s
    for ev in s:
        sel = (t >= ev.t - CFG.stable_dwell_s - 1e-9) & (t <= ev.t)
        assert np.all(np.abs(drdt[sel]) <= CFG.stable_drdt_max)


def test_one_stable_event_per_transition(scene):
    grid, frames, _ = session(scene, [3, 5, 1, 2, 6, 4], sigma=15, seed=6)
    eng = PointingEngine(scene.board, grid, trace=True)
    events = eng.run(frames)
    entries = sum(1 for a, b in zip(eng.trace, eng.trace[1:]) if a.phase != "Stable" and b.phase == "Stable")
    entries += eng.trace[0].phase == "Stable"
    assert len(stable(events)) == entries


def test_rigid_motion_invariance(scene):
    grid, frames, _ = session(scene, [3, 5, 1, 2, 6, 4], sigma=15, seed=8)
    cfg = replace(CFG, arm="right")
    base = PointingEngine(scene.board, grid, cfg).run(frames)
    T = random_transform(np.random.default_rng(9), a="world", b="world")
    board2 = BoardModel(compose(T, scene.board.pose), 1910, 1290)
    moved = [JointFrame(f.t, "world", {k: Joint(T(j.p), j.c) for k, j in f.joints.items()}) for f in frames]
    other = PointingEngine(board2, grid, cfg).run(moved)
    assert [e.cell for e in base] == [e.cell for e in other]
    assert [e.stable for e in base] == [e.stable for e in other]
    assert np.allclose([e.u for e in base], [e.u for e in other], atol=1e-6)


def test_sensor_transform_chain_matches_world_input(scene):
    grid, world_frames, _ = session(scene, [2, 4], sigma=5, seed=1, frame="world")
    _, sensor_frames, _ = session(scene, [2, 4], sigma=5, seed=1, frame="sensor")
    a = PointingEngine(scene.board, grid).run(world_frames)
    b = PointingEngine(scene.board, grid, sensor_to_world=scene.sensor_to_world).run(sensor_frames)
    assert [e.cell for e in a] == [e.cell for e in b]
    assert np.allclose([e.u for e in a], [e.u for e in b], atol=1e-6)


def test_identity_sensor_transform_is_noop(board, grid23):
    f = body()
    sensor = JointFrame(0.0, "sensor", f.joints)
    ident = RigidTransform(from_frame="sensor", to_frame="world")
    assert PointingEngine(board, grid23, sensor_to_world=ident).step(sensor) == PointingEngine(board, grid23).step(f)
