"""Closed-loop scenario runner: sim + mapping + autostep + link emulation.

Each run wires the kinematic simulation to the full onboard pipeline: the
spinning laser feeds the egocentric grid and heightmap every sensor
rotation, the stepping controller consumes the *mapped* heightmap (never
ground-truth terrain), telemetry frames go to the operator station through
the emulated constrained link, and bulk heightmaps ride the burst channel.
Runs are deterministic for a given config and emit one JSON metrics record
per simulated second.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from telesim import lowband
from telesim.locomotion import (
    LEGS,
    FootholdError,
    OutOfWorkspaceError,
    RobotModel,
    StepRefusedError,
    VelocityCommand,
    detect_step_obstacles,
    leg_ik,
    select_stepping_wheel,
    shift_weight,
    signed_polygon_distance,
    step_primitive,
)
from telesim.mapping import (
    GridConfig,
    MultiResGrid,
    PoseTimeline,
    assemble_scan,
    dump_heightmap,
    fill_gaps,
    median_filter_hist,
    merge_heightmaps,
    project_heightmap,
)
from telesim.netshape import DceLink, LinkPolicy, RelayStore
from telesim.station import Station

from .sensor import NOISE_SIGMA, ROT_RATE, raycast_scanline
from .sim import Commands, SimConfig, SimState, initial_state, tick
from .terrain import SCENARIOS, ScenarioError, make_terrain

# support polygon vertex order that keeps the wheel rectangle convex
_HULL_ORDER = ("fl", "fr", "hr", "hl")


@dataclass
class ScenarioConfig:
    terrain: str = "flat"
    seed: int = 0
    duration: float = 60.0
    dt: float = 0.02
    drive_speed: float = 0.4       # m/s scripted forward speed
    goal_x: float = 1e9            # stop driving past this base x
    n_beams: int = 180
    sensor_sigma: float = NOISE_SIGMA
    rot_rate: float = ROT_RATE     # sensor rotations per second
    map_extent: float = 8.0        # m
    map_resolution: float = 0.05   # m
    frame_rate: float = 1.0        # telemetry frames per second
    shift_speed: float = 0.2       # m/s weight-shift base speed
    step_speed: float = 0.3        # m/s wheel speed along the step path
    stop_distance: float = 0.30    # m, stop this far before an obstacle
    downlink_mode: str = "indoor"
    loss_prob: float = 0.0


_SCENARIO_DEFAULTS = {
    "flat": {"drive_speed": 0.3},
    "bar": {"drive_speed": 0.4, "goal_x": 3.0, "duration": 45.0},
    "stairs": {"drive_speed": 0.4, "goal_x": 3.6, "duration": 150.0},
    "debris": {"drive_speed": 0.3, "goal_x": 6.0, "duration": 60.0},
    "rough": {"drive_speed": 0.3, "goal_x": 6.0, "duration": 60.0},
}


def default_config(name: str, seed: int = 0,
                   duration: float = None) -> ScenarioConfig:
    """Built-in per-scenario tuning; duration override optional."""
    if name not in SCENARIOS:
        raise ScenarioError(
            f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    cfg = ScenarioConfig(terrain=name, seed=seed, **_SCENARIO_DEFAULTS[name])
    if duration is not None:
        cfg.duration = float(duration)
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Parse a scenario config file (lines of `key = value`, # comments)."""
    cfg = ScenarioConfig()
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    casts = {"str": str, "int": int, "float": float}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ScenarioError(f"{path}:{lineno}: expected `key = value`")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ScenarioError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                setattr(cfg, key, casts[types[key]](value))
            except ValueError:
                raise ScenarioError(
                    f"{path}:{lineno}: bad value {value!r} for {key}") from None
    if cfg.terrain not in SCENARIOS:
        raise ScenarioError(
            f"{path}: unknown terrain {cfg.terrain!r}; "
            f"expected one of {SCENARIOS}")
    return cfg


# ------------------------------------------------------------- controller


class AutoStepController:
    """Drive/stop/shift/step/shift-back state machine over the mapped world.

    Obstacle decisions use only the fused heightmap built from sensor data;
    unknown map cells count as obstacles, so the controller waits for
    mapping to catch up instead of stepping blind.
    """

    WAIT_MAP, DRIVE, SHIFT, STEP, SHIFT_BACK = range(5)
    _NAMES = ("wait_map", "drive", "shift", "step", "shift_back")

    def __init__(self, model: RobotModel, config: ScenarioConfig):
        self.model = model
        self.config = config
        self.mode = self.WAIT_MAP
        self.hm = None                 # latest fused heightmap
        self.step_count = 0
        self.refusals = []             # (t, reason)
        self.step_requested = False
        self._wheel = None
        self._cooldown = {}            # wheel -> retry-after time
        self._shift_remaining = np.zeros(2)
        self._shift_applied = np.zeros(2)
        self._path = None              # (waypoints, cumulative lengths)
        self._path_s = 0.0
        self._last_xy = None
        self._stall_ticks = 0
        self._min_margin_active = 0.03

    @property
    def mode_name(self) -> str:
        return self._NAMES[self.mode]

    def set_heightmap(self, hm):
        self.hm = hm

    def request_step(self):
        self.step_requested = True

    # -- per-tick policy -----------------------------------------------------

    def update(self, state: SimState, operator_v: VelocityCommand = None
               ) -> Commands:
        if state.estop:
            return Commands(estop=True)
        if self.mode == self.WAIT_MAP:
            if self.hm is None:
                return Commands()
            self.mode = self.DRIVE
        if self.mode == self.DRIVE:
            return self._drive(state, operator_v)
        if self.mode == self.SHIFT:
            return self._shift(state, forward=True)
        if self.mode == self.STEP:
            return self._step(state)
        return self._shift(state, forward=False)

    def _travel_dir(self, state: SimState) -> np.ndarray:
        return np.array([np.cos(state.base_yaw), np.sin(state.base_yaw)])

    def _ground_h(self, state: SimState) -> dict:
        """Per-wheel contact height from the robot's own kinematics."""
        return {leg: state.wheel_z[leg] - self.model.wheel_radius
                for leg in LEGS}

    def _drive(self, state: SimState, operator_v) -> Commands:
        d = self._travel_dir(state)
        det = detect_step_obstacles(self.hm, state.wheel_xy, d,
                                    ground_h=self._ground_h(state))
        for w, due in self._cooldown.items():
            if state.time < due:
                det[w] = None   # recently refused: let another wheel go first
        wheel = select_stepping_wheel(det)
        if operator_v is not None:
            v = operator_v
        else:
            vx = self.config.drive_speed \
                if state.base_xy[0] < self.config.goal_x else 0.0
            v = VelocityCommand(vx=vx)
        # a wheel pushed against a rise stalls the whole body; notice that
        # and consider obstacles beyond the normal stopping distance
        moving = abs(v.vx) + abs(v.vy) + abs(v.omega) > 1e-9
        if moving and self._last_xy is not None and \
                np.linalg.norm(state.base_xy - self._last_xy) < 1e-9:
            self._stall_ticks += 1
        else:
            self._stall_ticks = 0
        self._last_xy = state.base_xy.copy()
        trigger = self.config.stop_distance
        if self.step_requested or self._stall_ticks > 25:
            trigger = np.inf    # act on any mapped obstacle in the corridor
        # a long stall means no wheel can step at the normal margin; accept
        # a smaller (still positive) margin and a deeper weight shift rather
        # than stay wedged forever
        stalled = self._stall_ticks > 250
        self._min_margin_active = 0.005 if stalled else 0.03
        max_shift = 0.35 if stalled else 0.25
        if wheel is not None and det[wheel].distance <= trigger:
            if det[wheel].unknown:
                return Commands()   # hold until the map covers the corridor
            plan = shift_weight(self.model, state.wheel_xy, wheel,
                                state.base_xy, max_shift=max_shift)
            # commit to the shift only if the step itself is plannable now
            if self._plan_step(state, wheel, plan.predicted_margin,
                               state.base_xy) is not None:
                self.step_requested = False
                self._wheel = wheel
                self._shift_remaining = plan.base_shift.copy()
                self._shift_applied = np.zeros(2)
                self.mode = self.SHIFT
                return Commands()
        return Commands(velocity=v, wheel_trim=self._recenter_trim(state))

    def _recenter_trim(self, state: SimState, rate: float = 0.15) -> dict:
        """Leg trim rates pulling each wheel back under its hip while rolling."""
        c, s = np.cos(state.base_yaw), np.sin(state.base_yaw)
        to_base = np.array([[c, s], [-s, c]])
        trim = {}
        for leg in LEGS:
            rel = to_base @ (state.wheel_xy[leg] - state.base_xy)
            err = self.model.hip_offsets[leg][:2] - rel
            d = float(np.linalg.norm(err))
            if d > 0.01:
                trim[leg] = tuple(err * min(1.0, rate / d))
        return trim

    def _shift(self, state: SimState, forward: bool) -> Commands:
        rem = self._shift_remaining
        dist = float(np.linalg.norm(rem))
        if dist < 1e-9:
            if forward:
                if not self._begin_step(state):
                    self.mode = self.DRIVE
            else:
                self.mode = self.DRIVE
            return Commands()
        step = rem * min(1.0, self.config.shift_speed * self.config.dt / dist)
        self._shift_remaining = rem - step
        if forward:
            self._shift_applied += step
        c, s = np.cos(state.base_yaw), np.sin(state.base_yaw)
        local = np.array([[c, s], [-s, c]]) @ (step / self.config.dt)
        return Commands(base_shift_rate=(float(local[0]), float(local[1])))

    def _plan_step(self, state: SimState, wheel: str, margin: float,
                   hip_base_xy):
        """Full step plan for ``wheel`` or None (with a refusal recorded)."""
        try:
            plan = step_primitive(self.model, wheel, self.hm,
                                  state.wheel_xy, self._travel_dir(state),
                                  margin, min_margin=self._min_margin_active,
                                  ground_h=self._ground_h(state))
        except (StepRefusedError, FootholdError) as e:
            self.refusals.append((state.time, str(e)))
            self._cooldown[wheel] = state.time + 4.0
            return None
        # foothold must stay within leg reach from the unshifted hip; the
        # hip height follows the tilted base plane, not the horizontal
        axle_z = plan.foothold_height + self.model.wheel_radius
        c, s = np.cos(state.base_yaw), np.sin(state.base_yaw)
        rot = np.array([[c, -s], [s, c]])
        hip = np.asarray(hip_base_xy) + rot @ self.model.hip_offsets[wheel][:2]
        grounded = [w for w in LEGS if not state.airborne[w]] or list(LEGS)
        centroid = np.mean([state.wheel_xy[w] for w in grounded], axis=0)
        gx, gy = -np.tan(state.pitch), np.tan(state.roll)
        hip_z = state.base_z + gx * (hip[0] - centroid[0]) \
            + gy * (hip[1] - centroid[1])
        horiz = float(np.linalg.norm(plan.foothold_xy - hip))
        ext = hip_z - axle_z
        if ext < 0.10 or np.hypot(horiz, ext) > self.model.leg_reach:
            self.refusals.append(
                (state.time, f"foothold out of reach for {wheel}"))
            self._cooldown[wheel] = state.time + 4.0
            return None
        return plan

    def _begin_step(self, state: SimState) -> bool:
        others = np.array([state.wheel_xy[w] for w in _HULL_ORDER
                           if w != self._wheel])
        com = self.model.com_projection(state.base_xy, state.wheel_xy)
        margin = signed_polygon_distance(others, com)
        plan = self._plan_step(state, self._wheel, margin,
                               state.base_xy - self._shift_applied)
        if plan is None:
            self._shift_remaining = -self._shift_applied
            self.mode = self.SHIFT_BACK
            return True
        wp = plan.waypoints
        seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        self._path = (wp, np.concatenate([[0.0], np.cumsum(seg)]))
        self._path_s = 0.0
        self.mode = self.STEP
        return True

    def _step(self, state: SimState) -> Commands:
        wp, cum = self._path
        self._path_s += self.config.step_speed * self.config.dt
        if self._path_s >= cum[-1]:
            # wheel released; the sim grounds it on the real terrain
            self.step_count += 1
            self._path = None
            self._shift_remaining = -self._shift_applied
            self.mode = self.SHIFT_BACK
            return Commands()
        pos = np.array([np.interp(self._path_s, cum, wp[:, k])
                        for k in range(3)])
        return Commands(wheel_lift={self._wheel: pos})


# ----------------------------------------------------------------- runner


def support_margin(model: RobotModel, state: SimState,
                   lifted: str = None) -> float:
    """Signed COM distance to the hull of the grounded wheel contacts."""
    contacts = np.array([state.wheel_xy[w] for w in _HULL_ORDER
                         if w != lifted and not state.airborne[w]])
    com = model.com_projection(state.base_xy, state.wheel_xy)
    return signed_polygon_distance(contacts, com)


class ScenarioRunner:
    """Owns one deterministic closed-loop run; advance with tick_once()."""

    def __init__(self, config: ScenarioConfig, model: RobotModel = None,
                 metrics_sink=None):
        self.config = config
        self.model = model or RobotModel()
        self.terrain = make_terrain(config.terrain, config.seed)
        self.sim_config = SimConfig(seed=config.seed, dt=config.dt)
        self.state = initial_state(self.model, self.terrain, self.sim_config)
        self.controller = AutoStepController(self.model, config)
        self.metrics_sink = metrics_sink or (lambda rec: None)
        self.metrics = []

        policy = LinkPolicy(downlink_mode=config.downlink_mode,
                            loss_prob=config.loss_prob, seed=config.seed)
        self.downlink = DceLink(policy, "down")
        self.uplink = DceLink(policy, "up")
        self.relay = RelayStore()
        self.station = Station(self.model, uplink=None)

        self.grid = MultiResGrid(GridConfig())
        self.grid.shift(self._sensor_origin() - self.grid.center)
        self._measured = None      # rolling measured-only heightmap
        self._lines = []
        self._poses = []           # (t, position, quat wxyz)
        self._record_pose()
        self._rotation_due = 1.0 / config.rot_rate
        self._frame_due = 0.0
        self._in_burst = False
        self._map_seq = 0
        self._frame_seq = 0
        self.frames_sent = 0
        self.frames_delivered = 0
        self.heightmaps_delivered = 0
        self.min_margin = np.inf
        self._operator_v = None    # (VelocityCommand, expires_at)
        self._last_metric_sec = -1

    # -- external command surface (station / console) -------------------------

    def apply_console(self, cmd, t: float):
        """Dispatch a decoded uplink command into the control loop."""
        if isinstance(cmd, lowband.Joystick):
            v = VelocityCommand(cmd.vx * self.sim_config.v_max * cmd.throttle,
                                cmd.vy * self.sim_config.v_max * cmd.throttle,
                                cmd.omega * self.sim_config.omega_max)
            self._operator_v = (v, t + 0.5)
        elif isinstance(cmd, lowband.MotionPlayRequest):
            if cmd.motion_id == 0:
                self.state = dataclasses.replace(self.state, estop=True)
            elif cmd.motion_id == 1:
                self.controller.request_step()

    # -- pipeline pieces -------------------------------------------------------

    def _sensor_origin(self) -> np.ndarray:
        s = self.state
        return np.array([s.base_xy[0], s.base_xy[1],
                         s.base_z + self.sim_config.sensor_mast])

    def _record_pose(self):
        s = self.state
        half = 0.5 * s.base_yaw
        quat = np.array([np.cos(half), 0.0, 0.0, np.sin(half)])
        self._poses.append((s.time, self._sensor_origin(), quat))

    def _scan_line(self):
        t = self.state.time
        line = raycast_scanline(
            self.terrain, self._sensor_origin(), self.state.base_yaw, t,
            n_beams=self.config.n_beams, rot_rate=self.config.rot_rate,
            line_rate=1.0 / self.config.dt, sigma=self.config.sensor_sigma,
            seed=self.config.seed)
        self._lines.append(line)

    def _finish_rotation(self):
        times = np.array([p[0] for p in self._poses])
        timeline = PoseTimeline(times,
                                np.array([p[1] for p in self._poses]),
                                np.array([p[2] for p in self._poses]))
        points, stamp = assemble_scan(self._lines, timeline)
        self._lines = []
        self._poses = self._poses[-1:]
        self.grid.shift(self._sensor_origin() - self.grid.center)
        if len(points):
            self.grid.insert(points)
        # rolling measured map: fresh columns override, the rest carries
        # over; the window recenters on the robot, snapped to the lattice
        res = self.config.map_resolution
        center = np.round(self.state.base_xy / res) * res
        fresh = project_heightmap(points, center_xy=center,
                                  extent=self.config.map_extent,
                                  resolution=res)
        self._measured = merge_heightmaps(self._measured, fresh)
        hm = median_filter_hist(fill_gaps(self._measured))
        self.controller.set_heightmap(hm)
        self._map_seq += 1
        self.relay.ingest("heightmap", dump_heightmap(hm),
                          timestamp=stamp if stamp is not None else 0.0,
                          sequence=self._map_seq)
        if self.config.downlink_mode == "outdoor":
            # unconstrained link: bulk data flows immediately
            self._deliver_heightmap(self.state.time)

    def _deliver_heightmap(self, t: float):
        blob = self.relay.latest("heightmap")
        if blob is not None:
            self.station.ingest_burst("heightmap", blob, t)
            self.heightmaps_delivered += 1

    def _leg_joints(self, leg: str) -> dict:
        s = self.state
        c, y = np.cos(s.base_yaw), np.sin(s.base_yaw)
        rel = np.array([[c, y], [-y, c]]) @ (s.wheel_xy[leg] - s.base_xy)
        dx = rel[0] - self.model.hip_offsets[leg][0]
        ext = s.base_z - s.wheel_z[leg]
        r = np.hypot(dx, ext)
        r_max = self.model.leg_reach - 1e-3
        if r > r_max:
            dx, ext = dx * r_max / r, ext * r_max / r
        q = leg_ik(self.model, np.array([dx, 0.0, -ext]),
                   foot_yaw=s.wheel_yaw[leg] - s.base_yaw)
        return {
            f"{leg}_hip_pitch": q[0], f"{leg}_knee_pitch": q[1],
            f"{leg}_ankle_pitch": q[2], f"{leg}_ankle_yaw": q[3],
        }

    def telemetry(self) -> lowband.RobotTelemetry:
        """Snapshot of the current sim state as an onboard telemetry record."""
        s = self.state
        joints = {}
        for leg in LEGS:
            try:
                joints.update(self._leg_joints(leg))
            except OutOfWorkspaceError:
                # degenerate transient (e.g. mid-step): report the nominal pose
                joints.update({
                    f"{leg}_hip_pitch": 0.0, f"{leg}_knee_pitch": 0.0,
                    f"{leg}_ankle_pitch": 0.0, f"{leg}_ankle_yaw": 0.0,
                })
        for leg in LEGS:
            steer = float(np.arctan2(np.sin(s.wheel_yaw[leg] - s.base_yaw),
                                     np.cos(s.wheel_yaw[leg] - s.base_yaw)))
            spin = float(np.arctan2(
                np.sin(s.wheel_xy[leg][0] / self.model.wheel_radius),
                np.cos(s.wheel_xy[leg][0] / self.model.wheel_radius)))
            for side in ("l", "r"):
                joints[f"{leg}_wheel_{side}_steer"] = steer
                joints[f"{leg}_wheel_{side}_spin"] = spin
        for arm in ("left", "right"):
            for i, q in enumerate(s.arm_q[arm], 1):
                joints[f"{arm}_arm_j{i}"] = float(q)
        joints["torso_yaw"] = float(s.torso_yaw)

        c, y = np.cos(s.base_yaw), np.sin(s.base_yaw)
        to_base = np.array([[c, y], [-y, c]])
        contacts = []
        for leg in _HULL_ORDER:
            if s.airborne[leg]:
                continue
            rel = to_base @ (s.wheel_xy[leg] - s.base_xy)
            contacts.append(np.array([rel[0], rel[1], s.wheel_z[leg] - s.base_z]))
        com_world = self.model.com_projection(s.base_xy, s.wheel_xy)
        base = lowband.BaseStatus(
            contacts=contacts[:4],
            com=to_base @ (com_world - s.base_xy),
            estop=s.estop, hand_ir_mm=0, max_servo_temp=45)

        rot = Rotation.from_euler("ZYX", [s.base_yaw, s.pitch, s.roll])
        qx, qy, qz, qw = rot.as_quat()
        transforms = lowband.TransformSet(
            localization=lowband.CompressedPose(
                position=np.array([s.base_xy[0], s.base_xy[1], s.base_z]),
                quat=np.array([qw, qx, qy, qz])),
            imu_gravity=rot.inv().apply([0.0, 0.0, -1.0]))

        self._frame_seq += 1
        return lowband.RobotTelemetry(
            sequence=self._frame_seq, timestamp_ms=int(round(s.time * 1000)),
            base=base, joints=joints, transforms=transforms,
            audio_amplitude=0)

    def _send_frame(self):
        t = self.state.time
        frame = lowband.encode_frame(self.telemetry())
        self.frames_sent += 1
        status, delay = self.downlink.admit(len(frame), t)
        if status == "delivered":
            self.frames_delivered += 1
            self.station.ingest_lowband(frame, t + delay)

    def _emit_metrics(self):
        s = self.state
        rec = {
            "t": round(s.time, 3),
            "x": round(float(s.base_xy[0]), 4),
            "y": round(float(s.base_xy[1]), 4),
            "z": round(float(s.base_z), 4),
            "yaw": round(float(s.base_yaw), 4),
            "mode": self.controller.mode_name,
            "margin": round(support_margin(self.model, s), 4),
            "min_margin": round(float(self.min_margin), 4),
            "steps": self.controller.step_count,
            "frames_sent": self.frames_sent,
            "frames_delivered": self.frames_delivered,
            "heightmaps_delivered": self.heightmaps_delivered,
            "map_age": round(
                s.time - self.station.view.timestamp("heightmap"), 3)
            if np.isfinite(self.station.view.timestamp("heightmap")) else None,
        }
        self.metrics.append(rec)
        self.metrics_sink(rec)

    # -- main loop --------------------------------------------------------------

    def tick_once(self):
        t = self.state.time
        operator_v = None
        if self._operator_v is not None and t < self._operator_v[1]:
            operator_v = self._operator_v[0]
        commands = self.controller.update(self.state, operator_v)
        self.state = tick(self.state, commands, self.model, self.terrain,
                          self.sim_config)
        t = self.state.time
        self._record_pose()
        self._scan_line()
        if t >= self._rotation_due - 1e-9:
            self._finish_rotation()
            self._rotation_due += 1.0 / self.config.rot_rate
        if t >= self._frame_due - 1e-9:
            self._send_frame()
            self._frame_due += 1.0 / self.config.frame_rate
        if self.config.downlink_mode == "indoor":
            in_burst, _ = self.downlink.schedule.query(t)
            if in_burst and not self._in_burst:
                self._deliver_heightmap(t)
            self._in_burst = in_burst
        self.min_margin = min(self.min_margin,
                              support_margin(self.model, self.state))
        if int(t) > self._last_metric_sec:
            self._last_metric_sec = int(t)
            self._emit_metrics()

    def run(self):
        n = int(round(self.config.duration / self.config.dt))
        for _ in range(n):
            self.tick_once()
        return self


def run_scenario(name_or_config, seed: int = 0, duration: float = None,
                 metrics_sink=None) -> ScenarioRunner:
    """Run a scenario to completion; accepts a name or a ScenarioConfig."""
    if isinstance(name_or_config, ScenarioConfig):
        cfg = name_or_config
    else:
        cfg = default_config(name_or_config, seed, duration)
    return ScenarioRunner(cfg, metrics_sink=metrics_sink).run()
