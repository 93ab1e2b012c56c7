"""Kinematic robot model: geometry, limits, masses, collision spheres.

The robot is a trunk with four corner-mounted legs ending in wheel pairs,
plus two 7-DOF arms on a yaw torso.  Legs are planar two-link chains in the
sagittal plane (hip pitch, knee pitch) followed by an ankle pitch and the
ankle yaw that steers the wheel pair.  All kinematics here are pure
functions of joint vectors; nothing is stateful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

LEGS = ("fl", "fr", "hl", "hr")
ARMS = ("left", "right")


@dataclass(frozen=True)
class JointLimit:
    lo: float
    hi: float

    def clamp(self, q: float) -> float:
        return min(max(q, self.lo), self.hi)

    def contains(self, q: float, tol: float = 1e-9) -> bool:
        return self.lo - tol <= q <= self.hi + tol


@dataclass(frozen=True)
class ArmJoint:
    """One revolute joint: rotation axis, then a fixed translation."""

    axis: np.ndarray
    offset: np.ndarray
    limit: JointLimit


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray    # in the owning link frame
    radius: float


@dataclass
class RobotModel:
    footprint: tuple = (0.80, 0.70)       # x (forward) by y, m
    wheel_radius: float = 0.08
    leg_l1: float = 0.30                  # hip-knee, m
    leg_l2: float = 0.30                  # knee-ankle, m
    mass_total: float = 58.0
    mass_base: float = 31.0               # trunk + torso + arms at rest
    mass_leg: float = 6.75                # per leg incl. wheel pair
    leg_limits: dict = field(default_factory=lambda: {
        "hip_pitch": JointLimit(-1.6, 1.6),
        "knee_pitch": JointLimit(0.0, 2.8),
        "ankle_pitch": JointLimit(-1.6, 1.6),
        "ankle_yaw": JointLimit(-np.pi, np.pi),
    })
    arm_joints: tuple = None
    arm_base: dict = field(default_factory=lambda: {
        "left": np.array([0.10, 0.20, 0.25]),
        "right": np.array([0.10, -0.20, 0.25]),
    })
    q_convenient: np.ndarray = field(default_factory=lambda: np.array(
        [0.0, 0.4, 0.0, 1.2, 0.0, 0.3, 0.0]))
    spheres: dict = None

    def __post_init__(self):
        if self.arm_joints is None:
            self.arm_joints = default_arm_joints()
        if self.spheres is None:
            self.spheres = default_spheres(self)

    @property
    def hip_offsets(self) -> dict:
        """Hip (= wheel steering column) positions in the trunk frame."""
        hx, hy = self.footprint[0] / 2, self.footprint[1] / 2
        return {
            "fl": np.array([hx, hy, 0.0]),
            "fr": np.array([hx, -hy, 0.0]),
            "hl": np.array([-hx, hy, 0.0]),
            "hr": np.array([-hx, -hy, 0.0]),
        }

    @property
    def leg_reach(self) -> float:
        return self.leg_l1 + self.leg_l2

    def arm_limits_array(self):
        lo = np.array([j.limit.lo for j in self.arm_joints])
        hi = np.array([j.limit.hi for j in self.arm_joints])
        return lo, hi

    def com_projection(self, base_xy, wheel_xy: dict) -> np.ndarray:
        """Ground-plane COM from the base position and the wheel positions."""
        base_xy = np.asarray(base_xy, dtype=float)
        acc = self.mass_base * base_xy
        for leg in LEGS:
            acc = acc + self.mass_leg * np.asarray(wheel_xy[leg], dtype=float)
        return acc / self.mass_total


def default_arm_joints():
    """7-DOF arm: shoulder yaw/pitch/roll, elbow, wrist roll/pitch/yaw.

    At the zero pose the arm points along +x; total reach 0.75 m.
    """
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    x = np.array([1.0, 0.0, 0.0])
    o = np.zeros(3)
    up = np.array([0.35, 0.0, 0.0])   # upper arm
    fo = np.array([0.30, 0.0, 0.0])   # forearm
    ha = np.array([0.10, 0.0, 0.0])   # hand
    return (
        ArmJoint(z, o, JointLimit(-2.9, 2.9)),
        ArmJoint(y, o, JointLimit(-2.0, 2.0)),
        ArmJoint(x, up, JointLimit(-2.9, 2.9)),
        ArmJoint(y, fo, JointLimit(-0.05, 2.6)),
        ArmJoint(x, o, JointLimit(-2.9, 2.9)),
        ArmJoint(y, o, JointLimit(-1.5, 1.5)),
        ArmJoint(z, ha, JointLimit(-2.9, 2.9)),
    )


def _rot(axis, angle):
    axis = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + s * k + (1 - c) * (k @ k)


@njit(cache=True)
def _chain_fk(base, axes, offsets, q):
    """Sequential chain FK; returns EE pose plus per-joint origin/axis."""
    n = len(q)
    p = base.copy()
    r = np.eye(3)
    origins = np.empty((n, 3))
    axes_w = np.empty((n, 3))
    for i in range(n):
        a = axes[i]
        axes_w[i] = r @ a
        origins[i] = p
        c, s = np.cos(q[i]), np.sin(q[i])
        k = np.array([
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ])
        r = r @ (np.eye(3) + s * k + (1 - c) * (k @ k))
        p = p + r @ offsets[i]
    return p, r, origins, axes_w


def _arm_arrays(model, arm):
    key = (id(model.arm_joints), arm)
    cached = _ARM_ARRAY_CACHE.get(key)
    if cached is None:
        axes = np.array([j.axis for j in model.arm_joints], dtype=float)
        offs = np.array([j.offset for j in model.arm_joints], dtype=float)
        base = np.asarray(model.arm_base[arm], dtype=float)
        cached = (base, axes, offs)
        _ARM_ARRAY_CACHE[key] = cached
    return cached


_ARM_ARRAY_CACHE: dict = {}


def arm_fk(model: RobotModel, q, arm: str = "left", frames: bool = False):
    """End-effector pose of one arm in the trunk frame.

    Returns (position, rotation matrix); with ``frames=True`` also the list
    of (joint origin, world joint axis) pairs used for the Jacobian.
    """
    q = np.ascontiguousarray(q, dtype=float)
    base, axes, offs = _arm_arrays(model, arm)
    p, r, origins, axes_w = _chain_fk(base, axes, offs, q)
    if frames:
        return p, r, list(zip(origins, axes_w))
    return p, r


def arm_link_frames(model: RobotModel, q, arm: str = "left") -> dict:
    """(origin, rotation) of the sphere-carrying arm links in the trunk frame.

    The upper arm frame sits at the shoulder after the third joint, the
    forearm at the elbow, and the hand at the wrist; each link's spheres
    extend along the local +x axis.
    """
    q = np.asarray(q, dtype=float)
    p = model.arm_base[arm].copy()
    r = np.eye(3)
    frames = {}
    tags = {2: "upper_arm", 3: "forearm", 6: "hand"}
    for i, (joint, qi) in enumerate(zip(model.arm_joints, q)):
        r = r @ _rot(joint.axis, qi)
        if i in tags:
            frames[tags[i]] = (p.copy(), r.copy())
        p = p + r @ joint.offset
    return frames


def arm_jacobian(model: RobotModel, q, arm: str = "left") -> np.ndarray:
    """6x7 geometric Jacobian (linear on top, angular below)."""
    q = np.ascontiguousarray(q, dtype=float)
    base, axes, offs = _arm_arrays(model, arm)
    p_ee, _, origins, axes_w = _chain_fk(base, axes, offs, q)
    jac = np.zeros((6, len(q)))
    jac[:3] = np.cross(axes_w, p_ee - origins).T
    jac[3:] = axes_w.T
    return jac


def save_model(model: RobotModel, path):
    """Write the model as human-readable JSON (geometry, limits, spheres)."""
    import json

    doc = {
        "footprint": list(model.footprint),
        "wheel_radius": model.wheel_radius,
        "leg_segments": [model.leg_l1, model.leg_l2],
        "mass_total": model.mass_total,
        "mass_base": model.mass_base,
        "mass_leg": model.mass_leg,
        "leg_limits": {k: [v.lo, v.hi] for k, v in model.leg_limits.items()},
        "arm_joints": [
            {"axis": j.axis.tolist(), "offset": j.offset.tolist(),
             "limit": [j.limit.lo, j.limit.hi]}
            for j in model.arm_joints
        ],
        "arm_base": {k: v.tolist() for k, v in model.arm_base.items()},
        "q_convenient": model.q_convenient.tolist(),
        "spheres": {
            link: [{"center": s.center.tolist(), "radius": s.radius}
                   for s in spheres]
            for link, spheres in model.spheres.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def load_model(path) -> RobotModel:
    import json

    with open(path) as f:
        doc = json.load(f)
    l1, l2 = doc["leg_segments"]
    return RobotModel(
        footprint=tuple(doc["footprint"]),
        wheel_radius=doc["wheel_radius"],
        leg_l1=l1, leg_l2=l2,
        mass_total=doc["mass_total"],
        mass_base=doc["mass_base"],
        mass_leg=doc["mass_leg"],
        leg_limits={k: JointLimit(*v) for k, v in doc["leg_limits"].items()},
        arm_joints=tuple(
            ArmJoint(np.asarray(j["axis"], dtype=float),
                     np.asarray(j["offset"], dtype=float),
                     JointLimit(*j["limit"]))
            for j in doc["arm_joints"]
        ),
        arm_base={k: np.asarray(v, dtype=float)
                  for k, v in doc["arm_base"].items()},
        q_convenient=np.asarray(doc["q_convenient"], dtype=float),
        spheres={
            link: [Sphere(np.asarray(s["center"], dtype=float), s["radius"])
                   for s in spheres]
            for link, spheres in doc["spheres"].items()
        },
    )


def default_spheres(model: RobotModel) -> dict:
    """Coarse sphere sets per link for the self-collision gate."""
    hx, hy = model.footprint[0] / 2, model.footprint[1] / 2
    trunk = [
        Sphere(np.array([x, y, 0.05]), 0.16)
        for x in np.linspace(-hx + 0.15, hx - 0.15, 3)
        for y in (-hy + 0.18, hy - 0.18)
    ]
    # arm links get spheres along the segment, expressed in segment frame
    def along(length, radius, n):
        return [Sphere(np.array([t, 0.0, 0.0]), radius)
                for t in np.linspace(0.0, length, n)]
    return {
        "trunk": trunk,
        "upper_arm": along(0.35, 0.06, 3),
        "forearm": along(0.30, 0.05, 3),
        "hand": along(0.10, 0.05, 2),
    }
