"""Omnidirectional driving: base twist to per-wheel velocity, yaw and speed.

The base velocity command w = (v_x, v_y, omega) is transformed into the
local velocity at each wheel pair,

    v_i = (v_x, v_y, 0) + (0, 0, omega) x r_i + rdot_i,

where r_i is the wheel position relative to the trunk and rdot_i the
commanded wheel-position rate of an active footprint-reshaping plan.  Each
wheel pair then rotates to yaw alpha_i = atan2(v_y_i, v_x_i) and drives with
linear speed ||(v_x_i, v_y_i)||; driving is gated until all yaws are close
to their targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def normalize_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = -((-a + np.pi) % (2 * np.pi) - np.pi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VelocityCommand:
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def clamped(self, v_max: float = 1.0, omega_max: float = 1.0):
        v = np.hypot(self.vx, self.vy)
        s = 1.0 if v <= v_max else v_max / v
        w = np.clip(self.omega, -omega_max, omega_max)
        return VelocityCommand(self.vx * s, self.vy * s, float(w))


@dataclass
class WheelState:
    position: np.ndarray                      # r_i, trunk frame, m
    position_rate: np.ndarray = field(
        default_factory=lambda: np.zeros(3))  # rdot_i
    yaw: float = 0.0                          # alpha_i, rad
    speed: float = 0.0                        # m/s


def wheel_velocities(cmd: VelocityCommand, wheels) -> list:
    """Local kinematic velocity v_i for each wheel, as exact arithmetic."""
    w = np.array([0.0, 0.0, cmd.omega])
    v0 = np.array([cmd.vx, cmd.vy, 0.0])
    return [v0 + np.cross(w, ws.position) + ws.position_rate for ws in wheels]


def wheel_yaw_and_speed(v, prev_yaw: float = 0.0, eps: float = 1e-12):
    """Steering yaw and drive speed for one wheel velocity.

    A zero velocity keeps the previous yaw (there is nothing to align to).
    """
    vx, vy = float(v[0]), float(v[1])
    s = float(np.hypot(vx, vy))
    if s < eps:
        return prev_yaw, 0.0
    return float(np.arctan2(vy, vx)), s


def yaws_aligned(current, target, tol: float = np.deg2rad(3.0)) -> bool:
    """Drive gate: wheels may move only once every yaw is near its target.

    Yaw is defined modulo pi for a wheel pair (it can roll either way), so
    the error is folded accordingly.
    """
    current = np.asarray(current, dtype=float)
    target = np.asarray(target, dtype=float)
    err = np.abs(normalize_angle(current - target))
    err = np.minimum(err, np.pi - err)
    return bool(np.all(err <= tol))


@dataclass(frozen=True)
class AnkleCorrection:
    pitch: float
    clamped: bool


def keep_ankle_vertical(roll: float, pitch: float, leg_pose_pitch: float = 0.0,
                        limit=(-1.6, 1.6)) -> AnkleCorrection:
    """Ankle pitch that keeps the ankle yaw axis world-vertical.

    The yaw axis tilts with the base pitch plus the leg's own sagittal
    angle; the ankle pitch cancels both.  Corrections beyond the joint
    limit are clamped and flagged.
    """
    want = -(pitch + leg_pose_pitch)
    lo, hi = limit
    clamped = want < lo or want > hi
    return AnkleCorrection(float(np.clip(want, lo, hi)), clamped)
