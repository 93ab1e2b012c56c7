"""Quasi-static kinematic robot simulation on heightfield terrain.

The robot is statically stable at all times, so dynamics reduce to
kinematics: wheels follow the terrain surface, the base pose is solved
from the wheel contact points, and commanded velocities integrate exactly.
Advancing time is a pure function of (state, commands, config), which makes
every run bit-reproducible for a given seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from telesim.locomotion import LEGS, RobotModel, VelocityCommand
from .terrain import Terrain


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    dt: float = 0.02
    leg_height: float = 0.40       # nominal vertical hip-to-axle distance, m
    sensor_mast: float = 0.60      # sensor above the base origin, m
    v_max: float = 1.0
    omega_max: float = 1.0
    spring_bound: float = 0.01     # max vertical contact deflection, m
    ext_min: float = 0.15          # reachable leg extension range, m
    ext_max: float = 0.62
    rollover_max: float = 0.05     # tallest rise a wheel rolls over, m


@dataclass(frozen=True)
class Commands:
    velocity: VelocityCommand = VelocityCommand()
    base_shift_rate: tuple = (0.0, 0.0)     # base frame, m/s
    wheel_lift: dict = field(default_factory=dict)  # leg -> world (x, y, z)
    wheel_trim: dict = field(default_factory=dict)  # leg -> base-frame m/s
    estop: bool = False

    @property
    def is_zero(self) -> bool:
        v = self.velocity
        return (v.vx == 0 and v.vy == 0 and v.omega == 0
                and self.base_shift_rate == (0.0, 0.0)
                and not self.wheel_lift and not self.wheel_trim)


@dataclass
class SimState:
    time: float
    base_xy: np.ndarray            # trunk origin, world
    base_yaw: float
    base_z: float
    roll: float
    pitch: float
    wheel_xy: dict                 # leg -> world (2,) axle ground projection
    wheel_z: dict                  # leg -> world axle height
    wheel_yaw: dict                # steering angle, world
    airborne: dict                 # leg -> bool
    arm_q: dict = field(default_factory=lambda: {
        "left": np.zeros(7), "right": np.zeros(7)})
    torso_yaw: float = 0.0
    estop: bool = False

    @property
    def sensor_origin(self):
        return np.array([self.base_xy[0], self.base_xy[1], self.base_z])

    def grounded(self):
        return [leg for leg in LEGS if not self.airborne[leg]]


def _rot2(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s], [s, c]])


def initial_state(model: RobotModel, terrain: Terrain,
                  config: SimConfig = SimConfig(),
                  base_xy=(0.0, 0.0), base_yaw: float = 0.0) -> SimState:
    base_xy = np.asarray(base_xy, dtype=float)
    r = _rot2(base_yaw)
    wheel_xy = {leg: base_xy + r @ off[:2]
                for leg, off in model.hip_offsets.items()}
    state = SimState(0.0, base_xy, base_yaw, 0.0, 0.0, 0.0, wheel_xy,
                     {leg: 0.0 for leg in LEGS},
                     {leg: 0.0 for leg in LEGS},
                     {leg: False for leg in LEGS})
    return settle(state, model, terrain, config)


def settle(state: SimState, model: RobotModel, terrain: Terrain,
           config: SimConfig, lifted: dict = None) -> SimState:
    """Recompute contacts and the base pose from the wheel positions."""
    lifted = lifted or {}
    wheel_z = {}
    for leg in LEGS:
        if leg in lifted:
            wheel_z[leg] = float(lifted[leg])
        else:
            x, y = state.wheel_xy[leg]
            wheel_z[leg] = float(terrain.height(x, y)) + model.wheel_radius
    grounded = [leg for leg in LEGS if leg not in lifted]
    zs = np.array([wheel_z[leg] for leg in grounded])
    base_z = float(zs.mean()) + config.leg_height
    # base attitude from a least-squares plane over the grounded axles
    roll = pitch = gx = gy = 0.0
    if len(grounded) >= 3:
        pts = np.array([[*state.wheel_xy[leg], wheel_z[leg]]
                        for leg in grounded])
        a = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
        (gx, gy, _), *_ = np.linalg.lstsq(a, pts[:, 2], rcond=None)
        pitch = float(-np.arctan(gx))
        roll = float(np.arctan(gy))
    centroid = np.mean([state.wheel_xy[leg] for leg in grounded], axis=0)
    airborne = {}
    for leg in LEGS:
        # extension against the tilted base plane, not the horizontal
        dx, dy = state.wheel_xy[leg] - centroid
        hip_z = base_z + gx * dx + gy * dy
        ext = hip_z - wheel_z[leg]
        airborne[leg] = not (config.ext_min <= ext <= config.ext_max)
    return dataclasses.replace(state, base_z=base_z, roll=roll, pitch=pitch,
                               wheel_z=wheel_z, airborne=airborne)


def tick(state: SimState, commands: Commands, model: RobotModel,
         terrain: Terrain, config: SimConfig = SimConfig(),
         dt: float = None) -> SimState:
    """Advance the simulation by one step (pure function).

    Wheel lifts override contact following for the named legs; the base
    shift moves the trunk relative to the (stationary) wheels.
    """
    dt = config.dt if dt is None else dt
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must be in (0, 0.1] s")
    t = state.time + dt
    if commands.estop or commands.is_zero:
        return dataclasses.replace(
            settle(state, model, terrain, config,
                   {leg: p[2] for leg, p in commands.wheel_lift.items()}),
            time=t, estop=commands.estop or state.estop)

    cmd = commands.velocity.clamped(config.v_max, config.omega_max)
    yaw = state.base_yaw + cmd.omega * dt
    r = _rot2(state.base_yaw)
    step = r @ np.array([cmd.vx, cmd.vy]) * dt
    base_xy = state.base_xy + step + r @ np.asarray(
        commands.base_shift_rate, dtype=float) * dt

    wheel_xy = {}
    wheel_yaw = dict(state.wheel_yaw)
    center = state.base_xy
    rot_d = _rot2(cmd.omega * dt)
    blocked = False
    for leg in LEGS:
        if leg in commands.wheel_lift:
            p = np.asarray(commands.wheel_lift[leg], dtype=float)
            wheel_xy[leg] = p[:2].copy()
            continue
        # wheels translate with the commanded twist (not the base shift)
        rel = state.wheel_xy[leg] - center
        base = center + rot_d @ rel + step
        trim = r @ np.asarray(commands.wheel_trim.get(leg, (0.0, 0.0)),
                              dtype=float) * dt
        ground_old = state.wheel_z[leg] - model.wheel_radius
        wheel_xy[leg] = base + trim
        rise = float(terrain.height(*wheel_xy[leg])) - ground_old
        if rise > config.rollover_max and np.any(trim):
            # the leg trim alone hit a rise: cancel it, keep the twist
            wheel_xy[leg] = base
            rise = float(terrain.height(*wheel_xy[leg])) - ground_old
        if rise > config.rollover_max:
            blocked = True
        v = np.array([cmd.vx, cmd.vy]) + cmd.omega * np.array(
            [-rel[1], rel[0]])
        if np.hypot(*v) > 1e-9:
            wheel_yaw[leg] = float(np.arctan2(v[1], v[0]) + state.base_yaw)
    if blocked:
        # a grounded wheel pushed into a rise too tall to roll over: the
        # whole commanded translation stalls against it, but leg trims
        # still act (they move wheels relative to the stalled trunk)
        wheel_xy = {}
        for leg in LEGS:
            if leg in commands.wheel_lift:
                p = np.asarray(commands.wheel_lift[leg], dtype=float)
                wheel_xy[leg] = p[:2].copy()
                continue
            trim = r @ np.asarray(commands.wheel_trim.get(leg, (0.0, 0.0)),
                                  dtype=float) * dt
            ground_old = state.wheel_z[leg] - model.wheel_radius
            moved = state.wheel_xy[leg] + trim
            if float(terrain.height(*moved)) - ground_old > config.rollover_max:
                moved = state.wheel_xy[leg].copy()
            wheel_xy[leg] = moved
        lifted = {leg: p[2] for leg, p in commands.wheel_lift.items()}
        stalled = dataclasses.replace(state, time=t, wheel_xy=wheel_xy)
        return settle(stalled, model, terrain, config, lifted)
    out = dataclasses.replace(state, time=t, base_xy=base_xy, base_yaw=yaw,
                              wheel_xy=wheel_xy, wheel_yaw=wheel_yaw)
    lifted = {leg: p[2] for leg, p in commands.wheel_lift.items()}
    return settle(out, model, terrain, config, lifted)
