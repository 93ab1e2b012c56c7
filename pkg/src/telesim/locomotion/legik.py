"""Analytic leg kinematics: planar two-link chain plus ankle pitch/yaw.

The hip pitch and knee pitch place the ankle in the leg's sagittal (x-z)
plane; the ankle pitch is slaved so the ankle yaw axis stays parallel to
the hip z axis, and the ankle yaw steers the wheel pair.  The knee bend
sign is fixed by construction, which makes the solution unique whenever it
exists.
"""

from __future__ import annotations

import numpy as np

from .model import RobotModel


class OutOfWorkspaceError(ValueError):
    """Foot target outside the reachable annulus (or off-plane)."""

    def __init__(self, msg: str, nearest_distance: float):
        super().__init__(f"{msg} (nearest reachable point {nearest_distance:.4f} m away)")
        self.nearest_distance = nearest_distance


def leg_fk(model: RobotModel, q):
    """Foot (wheel axle) position in the hip frame and the foot yaw.

    ``q`` is (hip_pitch, knee_pitch, ankle_pitch, ankle_yaw); x points
    forward, z up, and the leg hangs toward -z at q = 0.
    """
    q1, q2, q3, q4 = (float(v) for v in q)
    l1, l2 = model.leg_l1, model.leg_l2
    x = l1 * np.sin(q1) + l2 * np.sin(q1 + q2)
    z = -(l1 * np.cos(q1) + l2 * np.cos(q1 + q2))
    return np.array([x, 0.0, z]), q4


def leg_ik(model: RobotModel, target, foot_yaw: float = 0.0,
           plane_tol: float = 1e-9) -> np.ndarray:
    """Joint angles (hip, knee, ankle pitch, ankle yaw) reaching ``target``.

    The ankle pitch is set to -(hip + knee) so the ankle yaw axis stays
    vertical relative to the hip.  Raises OutOfWorkspaceError for targets
    off the sagittal plane or outside the annulus, reporting the distance
    to the nearest reachable point.
    """
    target = np.asarray(target, dtype=float)
    x, y, z = target
    l1, l2 = model.leg_l1, model.leg_l2
    r = float(np.hypot(x, z))
    if abs(y) > plane_tol:
        raise OutOfWorkspaceError("target off the leg's sagittal plane", abs(y))
    r_max = l1 + l2
    r_min = abs(l1 - l2)
    if r > r_max or r < r_min:
        nearest = r - r_max if r > r_max else r_min - r
        raise OutOfWorkspaceError("target outside reachable annulus", nearest)
    cos_knee = (r * r - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    q2 = float(np.arccos(np.clip(cos_knee, -1.0, 1.0)))  # knee bends one way
    q1 = float(np.arctan2(x, -z) - np.arctan2(l2 * np.sin(q2),
                                              l1 + l2 * np.cos(q2)))
    q3 = -(q1 + q2)
    q = np.array([q1, q2, q3, float(foot_yaw)])
    names = ("hip_pitch", "knee_pitch", "ankle_pitch", "ankle_yaw")
    for qi, name in zip(q, names):
        if not model.leg_limits[name].contains(qi):
            raise OutOfWorkspaceError(f"{name} limit violated", 0.0)
    return q
