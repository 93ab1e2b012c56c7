"""Keyframe motions: mixed joint/Cartesian group targets, synchronized.

A keyframe holds one target per joint group (a joint-space vector or a
Cartesian end-effector pose) plus velocity constraints.  Interpolation
gives every group a trapezoidal profile stretched to the slowest group's
duration, so all limbs arrive at the same time.  Cartesian groups are
interpolated in pose space and converted by IK each tick.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .armik import sdls_ik
from .model import RobotModel

ACCEL_FRACTION = 0.25   # of the duration, spent accelerating (and braking)
PEAK_FACTOR = 1.0 / (1.0 - ACCEL_FRACTION)   # peak/average velocity ratio


@dataclass(frozen=True)
class JointTarget:
    positions: np.ndarray
    max_velocity: float = 1.0        # rad/s, per joint


@dataclass(frozen=True)
class CartesianTarget:
    position: np.ndarray
    quat_wxyz: np.ndarray
    max_linear_velocity: float = 0.25    # m/s
    max_angular_velocity: float = 1.0    # rad/s
    arm: str = "left"


@dataclass(frozen=True)
class Keyframe:
    name: str
    groups: dict                      # group name -> Joint/CartesianTarget
    torque_fraction: float = 1.0
    tags: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.torque_fraction <= 1.0:
            raise ValueError("torque fraction must be in (0, 1]")


@dataclass
class Trajectory:
    times: np.ndarray                 # (T,)
    states: list                      # per tick: dict group -> joint vector
    completed: bool = True
    fault: str = None

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0


def trapezoid_progress(t, duration):
    """Normalized trapezoidal position profile s(t) in [0, 1]."""
    if duration <= 0:
        return 1.0
    x = np.clip(t / duration, 0.0, 1.0)
    f = ACCEL_FRACTION
    peak = PEAK_FACTOR
    if x < f:
        return peak * x * x / (2 * f)
    if x < 1 - f:
        return peak * (x - f / 2)
    y = 1 - x
    return 1 - peak * y * y / (2 * f)


def _group_duration(current, target) -> float:
    if isinstance(target, JointTarget):
        dq = np.max(np.abs(np.asarray(target.positions) - np.asarray(current)))
        return PEAK_FACTOR * dq / target.max_velocity
    p0, r0 = current
    dist = np.linalg.norm(np.asarray(target.position) - np.asarray(p0))
    r1 = Rotation.from_quat(np.asarray(target.quat_wxyz)[[1, 2, 3, 0]])
    ang = (r1 * r0.inv()).magnitude()
    return PEAK_FACTOR * max(dist / target.max_linear_velocity,
                             ang / target.max_angular_velocity)


def interpolate_keyframe(model: RobotModel, current: dict, kf: Keyframe,
                         dt: float = 0.02,
                         cartesian_poses: dict = None) -> Trajectory:
    """Expand a keyframe into a tick-by-tick joint trajectory.

    ``current`` maps each group to its joint vector; for Cartesian groups,
    ``cartesian_poses`` maps the group to its current (position, Rotation).
    An IK failure mid-trajectory halts the motion with a fault.
    """
    cartesian_poses = cartesian_poses or {}
    durations = {}
    for grp, target in kf.groups.items():
        cur = (cartesian_poses[grp] if isinstance(target, CartesianTarget)
               else current[grp])
        durations[grp] = _group_duration(cur, target)
    duration = max(durations.values(), default=0.0)
    if duration <= 1e-9:
        return Trajectory(np.empty(0), [])

    nticks = int(np.ceil(duration / dt))
    times = np.arange(1, nticks + 1) * dt
    times[-1] = duration
    states = []
    q_arm = {g: np.asarray(current[g], dtype=float)
             for g, t in kf.groups.items() if isinstance(t, CartesianTarget)}
    for t in times:
        s = trapezoid_progress(t, duration)
        state = {}
        for grp, target in kf.groups.items():
            if isinstance(target, JointTarget):
                q0 = np.asarray(current[grp], dtype=float)
                state[grp] = q0 + s * (np.asarray(target.positions) - q0)
            else:
                p0, r0 = cartesian_poses[grp]
                p = np.asarray(p0) + s * (np.asarray(target.position) - p0)
                r1 = Rotation.from_quat(
                    np.asarray(target.quat_wxyz)[[1, 2, 3, 0]])
                rot = Slerp([0.0, 1.0], Rotation.concatenate([r0, r1]))(s)
                res = sdls_ik(model, p, rot.as_matrix(), q_arm[grp],
                              arm=target.arm)
                if not res.converged or res.position_error > 5e-3:
                    return Trajectory(times[: len(states)], states,
                                      completed=False,
                                      fault=f"IK failed for group {grp!r}")
                q_arm[grp] = res.q
                state[grp] = res.q
        states.append(state)
    return Trajectory(times, states)


# ------------------------------------------------------------- file format


def _target_to_json(t):
    if isinstance(t, JointTarget):
        return {"type": "joint", "positions": np.asarray(t.positions).tolist(),
                "max_velocity": t.max_velocity}
    return {"type": "cartesian", "position": np.asarray(t.position).tolist(),
            "quat_wxyz": np.asarray(t.quat_wxyz).tolist(),
            "max_linear_velocity": t.max_linear_velocity,
            "max_angular_velocity": t.max_angular_velocity, "arm": t.arm}


def _target_from_json(d):
    if d["type"] == "joint":
        return JointTarget(np.asarray(d["positions"], dtype=float),
                           float(d["max_velocity"]))
    if d["type"] == "cartesian":
        return CartesianTarget(np.asarray(d["position"], dtype=float),
                               np.asarray(d["quat_wxyz"], dtype=float),
                               float(d["max_linear_velocity"]),
                               float(d["max_angular_velocity"]), d["arm"])
    raise ValueError(f"unknown target type {d['type']!r}")


def save_keyframes(keyframes, path):
    """Write a named keyframe sequence as human-readable JSON."""
    doc = [
        {
            "name": kf.name,
            "torque_fraction": kf.torque_fraction,
            "tags": list(kf.tags),
            "groups": {g: _target_to_json(t) for g, t in kf.groups.items()},
        }
        for kf in keyframes
    ]
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def load_keyframes(path):
    with open(path) as f:
        doc = json.load(f)
    return [
        Keyframe(d["name"],
                 {g: _target_from_json(t) for g, t in d["groups"].items()},
                 d.get("torque_fraction", 1.0), tuple(d.get("tags", ())))
        for d in doc
    ]
