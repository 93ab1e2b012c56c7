import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from telesim.locomotion import (
    LEGS,
    CartesianTarget,
    FootholdError,
    IkWeights,
    JointTarget,
    Keyframe,
    OutOfWorkspaceError,
    RobotModel,
    StepRefusedError,
    SupportState,
    VelocityCommand,
    WheelState,
    arm_fk,
    arm_jacobian,
    detect_step_obstacles,
    interpolate_keyframe,
    keep_ankle_vertical,
    leg_fk,
    leg_ik,
    load_keyframes,
    load_model,
    nullspace_step,
    save_keyframes,
    save_model,
    sdls_ik,
    select_stepping_wheel,
    self_collision_gate,
    shift_weight,
    signed_polygon_distance,
    step_primitive,
    wheel_velocities,
    wheel_yaw_and_speed,
)
from telesim.mapping import HeightMap


@pytest.fixture(scope="module")
def model():
    return RobotModel()


def wheels(model):
    return [WheelState(pos.copy()) for pos in model.hip_offsets.values()]


# ------------------------------------------------------------------ driving


def test_pure_translation_reaches_every_wheel(model):
    vs = wheel_velocities(VelocityCommand(1.0, 0.0, 0.0), wheels(model))
    for v in vs:
        np.testing.assert_array_equal(v, [1.0, 0.0, 0.0])


def test_rotation_cross_product_term():
    ws = WheelState(np.array([0.4, 0.35, 0.0]))
    (v,) = wheel_velocities(VelocityCommand(0.0, 0.0, 1.0), [ws])
    np.testing.assert_allclose(v, [-0.35, 0.40, 0.0], atol=1e-15)


def test_position_rate_is_additive(model):
    ws = WheelState(np.array([0.4, 0.35, 0.0]),
                    position_rate=np.array([0.1, 0.0, 0.0]))
    (v,) = wheel_velocities(VelocityCommand(), [ws])
    np.testing.assert_array_equal(v, [0.1, 0.0, 0.0])


def test_rigid_body_pairwise_property(model):
    rng = np.random.default_rng(0)
    for _ in range(200):
        cmd = VelocityCommand(*rng.uniform(-1, 1, 3))
        ws = wheels(model)
        vs = wheel_velocities(cmd, ws)
        for i in range(4):
            for j in range(4):
                lhs = vs[i] - vs[j]
                rhs = np.cross([0, 0, cmd.omega],
                               ws[i].position - ws[j].position)
                np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_omega_only_speed_and_perpendicularity(model):
    cmd = VelocityCommand(0.0, 0.0, 0.7)
    ws = wheels(model)
    for w, v in zip(ws, wheel_velocities(cmd, ws)):
        r = w.position[:2]
        assert np.hypot(v[0], v[1]) == pytest.approx(0.7 * np.linalg.norm(r))
        assert abs(v[:2] @ r) < 1e-12


def test_yaw_and_speed():
    yaw, s = wheel_yaw_and_speed([0.0, 1.0])
    assert yaw == pytest.approx(np.pi / 2) and s == pytest.approx(1.0)
    yaw, s = wheel_yaw_and_speed([-0.35, 0.40])
    assert yaw == pytest.approx(np.arctan2(0.40, -0.35), abs=1e-12)
    assert yaw == pytest.approx(2.2896, abs=5e-4)
    assert s == pytest.approx(0.5315, abs=5e-4)
    yaw, s = wheel_yaw_and_speed([0.0, 0.0], prev_yaw=0.33)
    assert yaw == 0.33 and s == 0.0


def test_keep_ankle_vertical():
    assert keep_ankle_vertical(0.0, 0.0).pitch == 0.0
    corr = keep_ankle_vertical(0.0, np.deg2rad(10.0))
    assert corr.pitch == pytest.approx(-np.deg2rad(10.0))
    assert not corr.clamped
    corr = keep_ankle_vertical(0.0, 2.0)
    assert corr.clamped and corr.pitch == -1.6


# ------------------------------------------------------------------- leg IK


def test_leg_straight_target_zero_knee(model):
    q = leg_ik(model, [0.0, 0.0, -model.leg_reach])
    assert q[1] == pytest.approx(0.0, abs=1e-9)
    pos, _ = leg_fk(model, q)
    np.testing.assert_allclose(pos, [0.0, 0.0, -0.6], atol=1e-12)


def test_leg_fk_ik_roundtrip(model):
    rng = np.random.default_rng(1)
    n = 0
    while n < 1000:
        q1 = rng.uniform(-1.2, 1.2)
        q2 = rng.uniform(0.05, 2.7)
        if not -1.6 <= -(q1 + q2) <= 1.6:
            continue
        target, _ = leg_fk(model, [q1, q2, -(q1 + q2), 0.0])
        q = leg_ik(model, target, foot_yaw=0.3)
        pos, yaw = leg_fk(model, q)
        assert np.linalg.norm(pos - target) < 1e-9
        assert yaw == 0.3
        n += 1


def test_leg_ik_deterministic(model):
    target = [0.1, 0.0, -0.45]
    sols = {tuple(np.round(leg_ik(model, target), 15)) for _ in range(100)}
    assert len(sols) == 1


def test_leg_unreachable(model):
    with pytest.raises(OutOfWorkspaceError) as e:
        leg_ik(model, [0.0, 0.0, -0.7])
    assert e.value.nearest_distance == pytest.approx(0.1)
    with pytest.raises(OutOfWorkspaceError):
        leg_ik(model, [0.1, 0.2, -0.4])  # off-plane


# ------------------------------------------------------------------- arm IK


def random_reachable(model, rng):
    lo, hi = model.arm_limits_array()
    q = rng.uniform(lo + 0.1, hi - 0.1)
    p, r = arm_fk(model, q)
    return q, p, r


def test_sdls_fixed_point(model):
    q0 = model.q_convenient.copy()
    p, r = arm_fk(model, q0)
    res = sdls_ik(model, p, r, q0)
    assert res.converged and res.iterations == 1
    np.testing.assert_array_equal(res.q, q0)


def test_sdls_random_reachable_targets(model):
    rng = np.random.default_rng(2)
    start = model.q_convenient.copy()
    failures = 0
    for _ in range(100):
        _, p, r = random_reachable(model, rng)
        res = sdls_ik(model, p, r, start)
        if not (res.position_error < 1e-3 and res.orientation_error < 1e-2):
            failures += 1
    assert failures == 0


def test_sdls_monotone_error(model):
    # per-iteration error is non-increasing: re-run the solver manually by
    # bisecting on iteration caps
    rng = np.random.default_rng(3)
    for _ in range(10):
        _, p, r = random_reachable(model, rng)
        res = sdls_ik(model, p, r, model.q_convenient)
        assert np.all(np.diff(res.trace) <= 1e-9)


def test_sdls_far_target_walks_to_boundary(model):
    target = np.array([10.0, 0.0, 0.25])
    res = sdls_ik(model, target, np.eye(3), model.q_convenient, max_iter=400)
    p, _ = arm_fk(model, res.q)
    reach = np.linalg.norm(p - model.arm_base["left"])
    assert reach > 0.5  # stretched out toward the target
    # EE error approximately equals distance from the boundary to the target
    assert res.position_error == pytest.approx(
        np.linalg.norm(target - p), abs=1e-9)


def test_nullspace_step_properties(model):
    rng = np.random.default_rng(4)
    q, _, _ = random_reachable(model, rng)
    jac = arm_jacobian(model, q)
    assert np.linalg.norm(nullspace_step(jac, np.zeros(7))) == 0.0
    for _ in range(20):
        grad = rng.normal(size=7)
        dq = nullspace_step(jac, grad)
        if np.linalg.norm(dq) > 0:
            assert np.linalg.norm(jac @ dq) <= 1e-6 * np.linalg.norm(dq) + 1e-12
    # full-rank square subchain has an empty nullspace
    dq = nullspace_step(jac[:, :6], rng.normal(size=6))
    assert np.linalg.norm(dq) < 1e-9


def test_nullspace_does_not_move_hand(model):
    rng = np.random.default_rng(5)
    q, p0, _ = random_reachable(model, rng)
    jac = arm_jacobian(model, q)
    dq = nullspace_step(jac, rng.normal(size=7))
    p1, _ = arm_fk(model, q + dq)
    assert np.linalg.norm(p1 - p0) < 1e-6


# ---------------------------------------------------------------- keyframes


def test_keyframe_single_group_duration(model):
    q0 = np.zeros(3)
    kf = Keyframe("t", {"g": JointTarget(np.array([2.0, 0.0, 0.0]),
                                         max_velocity=1.0)})
    traj = interpolate_keyframe(model, {"g": q0}, kf, dt=0.02)
    assert traj.duration >= 2.0
    np.testing.assert_allclose(traj.states[-1]["g"], [2.0, 0.0, 0.0],
                               atol=1e-9)
    # velocity bound holds throughout
    qs = np.array([s["g"][0] for s in traj.states])
    vel = np.diff(np.concatenate([[0.0], qs])) / np.diff(
        np.concatenate([[0.0], traj.times]))
    assert np.max(np.abs(vel)) <= 1.0 + 1e-6


def test_keyframe_synchronized_arrival(model):
    kf = Keyframe("t", {
        "a": JointTarget(np.array([1.0]), max_velocity=1.0),   # 1 s alone
        "b": JointTarget(np.array([3.0]), max_velocity=1.0),   # 3 s alone
    })
    traj = interpolate_keyframe(model, {"a": np.zeros(1), "b": np.zeros(1)},
                                kf, dt=0.02)
    assert traj.duration >= 3.0
    np.testing.assert_allclose(traj.states[-1]["a"], [1.0], atol=1e-9)
    np.testing.assert_allclose(traj.states[-1]["b"], [3.0], atol=1e-9)


def test_keyframe_no_motion_is_empty(model):
    q0 = np.array([0.5])
    kf = Keyframe("t", {"g": JointTarget(q0.copy())})
    traj = interpolate_keyframe(model, {"g": q0}, kf)
    assert len(traj) == 0 and traj.completed


def test_keyframe_cartesian_group(model):
    q0 = model.q_convenient.copy()
    p0, r0 = arm_fk(model, q0)
    target = p0 + np.array([0.05, 0.0, -0.05])
    quat = Rotation.from_matrix(r0).as_quat()[[3, 0, 1, 2]]
    kf = Keyframe("t", {"left_arm": CartesianTarget(target, quat)})
    traj = interpolate_keyframe(
        model, {"left_arm": q0}, kf, dt=0.05,
        cartesian_poses={"left_arm": (p0, Rotation.from_matrix(r0))})
    assert traj.completed and len(traj) > 0
    p_end, _ = arm_fk(model, traj.states[-1]["left_arm"])
    assert np.linalg.norm(p_end - target) < 2e-3


def test_keyframe_file_roundtrip(tmp_path, model):
    kfs = [Keyframe("wave", {
        "left_arm": JointTarget(np.arange(7.0), 0.8),
        "right_arm": CartesianTarget(np.array([0.3, -0.2, 0.4]),
                                     np.array([1.0, 0, 0, 0]), arm="right"),
    }, torque_fraction=0.5, tags=("demo",))]
    path = tmp_path / "motion.json"
    save_keyframes(kfs, path)
    back = load_keyframes(path)
    assert back[0].name == "wave" and back[0].tags == ("demo",)
    np.testing.assert_array_equal(
        back[0].groups["left_arm"].positions, np.arange(7.0))
    assert back[0].groups["right_arm"].arm == "right"


def test_model_file_roundtrip(tmp_path, model):
    path = tmp_path / "robot.json"
    save_model(model, path)
    back = load_model(path)
    assert back.footprint == model.footprint
    assert back.mass_total == model.mass_total
    q = np.full(7, 0.3)
    np.testing.assert_allclose(arm_fk(back, q)[0], arm_fk(model, q)[0])


# ---------------------------------------------------------------- collision


def test_collision_home_pose_ok(model):
    rep = self_collision_gate(model, {"left": np.zeros(7),
                                      "right": np.zeros(7)})
    assert rep.ok and not rep.colliding and not rep.near


def test_collision_hands_to_same_point(model):
    # aim both hands at a common point ahead of the trunk
    target = np.array([0.45, 0.0, 0.25])
    qs = {}
    for arm in ("left", "right"):
        res = sdls_ik(model, target, np.eye(3), np.zeros(7), arm=arm,
                      max_iter=400)
        assert res.position_error < 0.02
        qs[arm] = res.q
    rep = self_collision_gate(model, qs)
    assert not rep.ok
    assert any("hand" in a and "hand" in b for a, b in rep.colliding)


def test_collision_near_threshold_semantics(model):
    # clearance just inside the margin: reported near, not blocked
    base = RobotModel()
    q = {"left": np.zeros(7), "right": np.zeros(7)}
    rep = self_collision_gate(base, q, margin=base.spheres and 10.0)
    assert rep.ok and rep.near  # huge margin flags everything as near


# ----------------------------------------------------------------- stepping


def flat_hm(height=0.0, extent=4.0, res=0.05):
    n = int(round(extent / res))
    return HeightMap(np.full((n, n), float(height)), np.ones((n, n), bool),
                     np.array([-(n - 1) / 2 * res, -(n - 1) / 2 * res]), res)


def bar_hm(bar_x=0.7, height=0.155, width=0.20, res=0.05, extent=4.0):
    hm = flat_hm(0.0, extent, res)
    x = hm.origin[0] + np.arange(hm.shape[1]) * res
    cols = (x >= bar_x) & (x <= bar_x + width)
    hm.heights[:, cols] = height
    return hm


def corner_xy(model):
    return {leg: pos[:2] for leg, pos in model.hip_offsets.items()}


def test_detect_flat_no_obstacles(model):
    det = detect_step_obstacles(flat_hm(), corner_xy(model), [1.0, 0.0])
    assert all(v is None for v in det.values())


def test_detect_small_bump_ignored(model):
    hm = bar_hm(bar_x=0.7, height=0.04)
    det = detect_step_obstacles(hm, corner_xy(model), [1.0, 0.0])
    assert all(v is None for v in det.values())


def test_detect_bar_ahead_of_front_wheels(model):
    hm = bar_hm(bar_x=0.7, height=0.155)
    det = detect_step_obstacles(hm, corner_xy(model), [1.0, 0.0])
    for wheel in ("fl", "fr"):
        obs = det[wheel]
        assert obs is not None
        assert obs.distance == pytest.approx(0.3, abs=hm.resolution + 1e-9)
        assert obs.height == pytest.approx(0.155, abs=1e-9)
    assert det["hl"] is None and det["hr"] is None


def test_detect_unknown_cells_conservative(model):
    hm = flat_hm()
    i, j = hm.cell_index([0.6, 0.35])
    hm.valid[i, j] = False
    det = detect_step_obstacles(hm, corner_xy(model), [1.0, 0.0])
    assert det["fl"] is not None and det["fl"].unknown


def test_select_stepping_wheel(model):
    det = detect_step_obstacles(flat_hm(), corner_xy(model), [1.0, 0.0])
    assert select_stepping_wheel(det) is None
    from telesim.locomotion import StepObstacle
    det = {"fl": None, "fr": StepObstacle("fr", 0.5, 0.1),
           "hl": StepObstacle("hl", 0.3, 0.1), "hr": None}
    assert select_stepping_wheel(det) == "hl"
    det = {"fl": StepObstacle("fl", 0.3, 0.1),
           "fr": StepObstacle("fr", 0.3, 0.1), "hl": None, "hr": None}
    assert select_stepping_wheel(det) == "fl"  # fixed tie order


def test_support_margin_sign():
    tri = np.array([[0.4, -0.35], [-0.4, 0.35], [-0.4, -0.35]])
    inside = SupportState(tri, tri.mean(axis=0))
    assert inside.margin > 0
    outside = SupportState(tri, np.array([0.4, 0.35]))
    assert outside.margin < 0
    # boundary: margin approximately zero
    edge_mid = (tri[0] + tri[1]) / 2
    assert abs(signed_polygon_distance(tri, edge_mid)) < 1e-12


def test_shift_weight_symmetric_stance(model):
    plan = shift_weight(model, corner_xy(model), "fl")
    assert not plan.empty and not plan.needs_operator
    assert plan.base_shift[0] < 0 and plan.base_shift[1] < 0  # rear-right
    assert plan.predicted_margin > 0


def test_shift_weight_already_centered(model):
    wheel_xy = corner_xy(model)
    others = np.array([wheel_xy[w] for w in LEGS if w != "fl"])
    target = others.mean(axis=0)
    # place the base so the COM sits exactly on the centroid
    base = (target * model.mass_total
            - model.mass_leg * sum(wheel_xy[w] for w in LEGS)) / model.mass_base
    plan = shift_weight(model, wheel_xy, "fl", base_xy=base)
    assert plan.empty and plan.predicted_margin > 0


def test_shift_weight_exhaustion_needs_operator(model):
    wheel_xy = corner_xy(model)
    plan = shift_weight(model, wheel_xy, "fl", base_xy=[2.0, 2.0],
                        max_shift=0.05)
    assert plan.needs_operator


def test_step_primitive_bar(model):
    hm = bar_hm(bar_x=0.7, height=0.155, width=0.20)
    plan = step_primitive(model, "fl", hm, corner_xy(model), [1.0, 0.0],
                          support_margin=0.06)
    assert plan.foothold_height == pytest.approx(0.155, abs=1e-9)
    # foothold on top of the bar at its near edge + margin
    assert 0.7 <= plan.foothold_xy[0] <= 0.9
    assert plan.lift_height == pytest.approx(
        0.155 + 0.05 + model.wheel_radius, abs=1e-9)
    assert plan.waypoints.shape == (4, 3)
    assert plan.waypoints[-1, 2] == pytest.approx(0.155 + model.wheel_radius)


def test_step_primitive_stairs(model):
    hm = flat_hm(0.0, extent=4.0)
    x = hm.origin[0] + np.arange(hm.shape[1]) * hm.resolution
    tread = np.clip(np.floor((x - 0.6) / 0.28) + 1, 0, None)
    hm.heights[:] = tread[None, :] * 0.18
    plan = step_primitive(model, "fl", hm, corner_xy(model), [1.0, 0.0],
                          support_margin=0.06)
    assert plan.foothold_height == pytest.approx(0.18, abs=1e-9)
    assert 0.6 <= plan.foothold_xy[0] <= 0.88


def test_step_primitive_guard(model):
    hm = bar_hm()
    with pytest.raises(StepRefusedError):
        step_primitive(model, "fl", hm, corner_xy(model), [1.0, 0.0],
                       support_margin=0.01)


def test_step_primitive_no_foothold(model):
    # wall occupying the entire reach: never flattens out
    hm = flat_hm()
    x = hm.origin[0] + np.arange(hm.shape[1]) * hm.resolution
    hm.heights[:, x >= 0.6] = (x[x >= 0.6] - 0.6) * 2.0 + 0.2
    with pytest.raises(FootholdError):
        step_primitive(model, "fl", hm, corner_xy(model), [1.0, 0.0],
                       support_margin=0.06)
