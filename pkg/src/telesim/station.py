"""Operator-station service: telemetry fusion, pose reconstruction, commands.

The station merges the low-bandwidth telemetry frames with bulk data from
the burst channel under a latest-wins rule, reconstructs the robot pose
from quantized joints by forward kinematics, and exposes the result to the
browser console over a WebSocket (JSON messages) plus an HTTP status
endpoint.  Operator commands are validated, coalesced to the 5 Hz uplink
budget (the emergency stop bypasses coalescing), and bit-packed onto the
uplink.
"""

from __future__ import annotations

import base64
import struct
import time as _time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from scipy.spatial.transform import Rotation

from . import lowband
from .locomotion import ARMS, LEGS, RobotModel, arm_fk, leg_fk
from .mapping import load_heightmap

COMMAND_INTERVAL = 0.2      # s, 5 Hz uplink rate limit per command kind
CONSOLE_PUSH_HZ = 10.0


# --------------------------------------------------------------------- view


class FusedView:
    """Latest-wins store of telemetry fields with per-field timestamps."""

    def __init__(self):
        self._fields = {}   # name -> (timestamp, value)

    def update(self, name: str, value, timestamp: float) -> bool:
        """Apply if not older than the stored entry; returns acceptance."""
        cur = self._fields.get(name)
        if cur is not None and timestamp < cur[0]:
            return False
        self._fields[name] = (timestamp, value)
        return True

    def get(self, name: str):
        cur = self._fields.get(name)
        return None if cur is None else cur[1]

    def timestamp(self, name: str) -> float:
        cur = self._fields.get(name)
        return -np.inf if cur is None else cur[0]

    def age(self, name: str, now: float) -> float:
        cur = self._fields.get(name)
        return np.inf if cur is None else max(0.0, now - cur[0])

    def names(self):
        return sorted(self._fields)


def reanchor_cloud(points: np.ndarray, capture_pose, latest_pose) -> np.ndarray:
    """Re-anchor burst points using the newest low-band localization.

    Poses are (position, quat wxyz) pairs; the cloud was captured in the
    frame of ``capture_pose`` and is moved rigidly so that frame coincides
    with ``latest_pose``.
    """
    p0, q0 = capture_pose
    p1, q1 = latest_pose
    r0 = Rotation.from_quat(np.asarray(q0, float)[[1, 2, 3, 0]])
    r1 = Rotation.from_quat(np.asarray(q1, float)[[1, 2, 3, 0]])
    delta = r1 * r0.inv()
    return delta.apply(np.asarray(points, float) - p0) + p1


# ----------------------------------------------------- pose reconstruction


@dataclass
class ReconstructedState:
    base_position: np.ndarray = None
    base_quat: np.ndarray = None                   # wxyz
    foot_positions: dict = field(default_factory=dict)   # leg -> base frame
    wheel_yaw: dict = field(default_factory=dict)
    arm_ee: dict = field(default_factory=dict)     # arm -> (pos, rotmat)
    torso_yaw: float = None
    missing: tuple = ()


def reconstruct_pose(joints: dict, transforms, model: RobotModel) -> ReconstructedState:
    """Forward kinematics over dequantized joints.

    Groups whose joints are absent are reported in ``missing`` and left
    unset (partial state).
    """
    out = ReconstructedState()
    missing = []
    joints = joints or {}
    if transforms is not None and transforms.localization is not None:
        out.base_position = np.asarray(transforms.localization.position)
        out.base_quat = np.asarray(transforms.localization.quat)
    else:
        missing.append("localization")
    hips = model.hip_offsets
    for leg in LEGS:
        names = [f"{leg}_hip_pitch", f"{leg}_knee_pitch",
                 f"{leg}_ankle_pitch", f"{leg}_ankle_yaw"]
        if not all(n in joints for n in names):
            missing.append(f"leg:{leg}")
            continue
        q = [joints[n] for n in names]
        pos, yaw = leg_fk(model, q)
        out.foot_positions[leg] = hips[leg] + pos
        out.wheel_yaw[leg] = yaw
    for arm in ARMS:
        names = [f"{arm}_arm_j{i}" for i in range(1, 8)]
        if not all(n in joints for n in names):
            missing.append(f"arm:{arm}")
            continue
        q = np.array([joints[n] for n in names])
        out.arm_ee[arm] = arm_fk(model, q, arm)
    if "torso_yaw" in joints:
        out.torso_yaw = float(joints["torso_yaw"])
    else:
        missing.append("torso")
    out.missing = tuple(missing)
    return out


# ------------------------------------------------------------------ station


class CommandError(ValueError):
    pass


@dataclass
class _Pending:
    command: object
    accepted_at: float
    sequence: int


class Station:
    """Fusion core plus the command pipeline; transport-agnostic.

    ``uplink`` is an object with ``admit(size_bytes, t)`` (a DceLink); a
    ``send`` callable receives (sequence, command, encoded bytes, t) for
    every packet that makes it onto the wire.
    """

    def __init__(self, model: RobotModel = None, uplink=None, send=None):
        self.model = model or RobotModel()
        self.uplink = uplink
        self.send = send or (lambda *a: None)
        self.view = FusedView()
        self.frames_received = 0
        self.frames_bad = 0
        self.bursts_received = 0
        self.commands_sent = []        # (sequence, kind, t) audit trail
        self._pending = {}             # kind -> _Pending
        self._last_sent = {}           # kind -> t
        self._seq = 0
        self.started = _time.time()

    # -- telemetry ingest --------------------------------------------------

    def ingest_lowband(self, frame: bytes, t: float):
        try:
            tele = lowband.decode_frame(frame)
        except lowband.FrameError:
            self.frames_bad += 1
            return None
        self.frames_received += 1
        for name, value in (
            ("base", tele.base),
            ("joints", tele.joints),
            ("transforms", tele.transforms),
            ("contour", tele.contour_points),
            ("audio", tele.audio_amplitude),
            ("thumbnail", tele.thumbnail),
        ):
            if value is not None:
                self.view.update(name, value, t)
        if tele.joints is not None or tele.transforms is not None:
            pose = reconstruct_pose(self.view.get("joints"),
                                    self.view.get("transforms"), self.model)
            self.view.update("pose", pose, t)
        return tele

    def ingest_burst(self, topic: str, payload: bytes, t: float):
        self.bursts_received += 1
        if topic == "heightmap":
            self.view.update("heightmap", load_heightmap(payload), t)
            self.view.update("heightmap_raw", payload, t)
        elif topic == "cloud":
            pts = np.frombuffer(payload, dtype="<f4").reshape(-1, 3)
            self.view.update("cloud", pts.astype(float), t)
        elif topic == "metrics":
            self.view.update("metrics", payload.decode(), t)
        elif topic != "__keepalive__":
            self.view.update(f"burst:{topic}", payload, t)

    # -- commands ------------------------------------------------------------

    @staticmethod
    def _kind(cmd) -> str:
        return type(cmd).__name__

    def submit(self, cmd, t: float):
        """Queue an operator command; returns ('sent'|'queued', sequence).

        Commands are rate-limited per kind to 5 Hz: a newer command replaces
        a pending unsent one (coalescing).  EStop (a MotionPlayRequest with
        motion_id 0) bypasses the limiter.
        """
        self._validate(cmd)
        self._seq += 1
        kind = self._kind(cmd)
        pend = _Pending(cmd, t, self._seq)
        is_estop = (isinstance(cmd, lowband.MotionPlayRequest)
                    and cmd.motion_id == 0)
        if is_estop or t - self._last_sent.get(kind, -np.inf) >= COMMAND_INTERVAL:
            self._transmit(pend, t)
            return ("sent", self._seq)
        self._pending[kind] = pend   # newest wins; older coalesced
        return ("queued", self._seq)

    def _validate(self, cmd):
        if isinstance(cmd, lowband.Joystick):
            if not all(np.isfinite([cmd.vx, cmd.vy, cmd.omega])):
                raise CommandError("joystick axes must be finite")
            if max(abs(cmd.vx), abs(cmd.vy), abs(cmd.omega)) > 1.0:
                raise CommandError("joystick axes must be within [-1, 1]")
        elif isinstance(cmd, lowband.ArmControl):
            if cmd.arm not in (0, 1):
                raise CommandError("arm must be 0 or 1")
        elif isinstance(cmd, (lowband.GenericMotion,
                              lowband.MotionPlayRequest)):
            pass
        else:
            raise CommandError(f"unknown command type {type(cmd).__name__}")

    def _transmit(self, pend: _Pending, t: float):
        data = lowband.encode_command(pend.command)
        if self.uplink is not None:
            status, _ = self.uplink.admit(len(data), t)
            if status != "delivered":
                return
        self._last_sent[self._kind(pend.command)] = t
        self.commands_sent.append((pend.sequence, self._kind(pend.command), t))
        self.send(pend.sequence, pend.command, data, t)

    def pump(self, t: float):
        """Flush pending coalesced commands whose rate window has opened."""
        for kind in list(self._pending):
            if t - self._last_sent.get(kind, -np.inf) >= COMMAND_INTERVAL:
                self._transmit(self._pending.pop(kind), t)

    # -- console payloads -----------------------------------------------------

    def status(self, now: float = None) -> dict:
        now = _time.time() if now is None else now
        return {
            "ok": True,
            "uptime_s": max(0.0, _time.time() - self.started),
            "frames_received": self.frames_received,
            "frames_bad": self.frames_bad,
            "bursts_received": self.bursts_received,
            "commands_sent": len(self.commands_sent),
            "fields": {n: self.view.timestamp(n) for n in self.view.names()},
        }

    def console_snapshot(self, now: float) -> dict:
        """Self-describing JSON message mirroring the fused view."""
        msg = {"type": "telemetry", "now": now, "ages": {}}
        for name in self.view.names():
            msg["ages"][name] = self.view.age(name, now)
        base = self.view.get("base")
        if base is not None:
            msg["base"] = {
                "com": np.asarray(base.com).tolist(),
                "contacts": [np.asarray(c).tolist() for c in base.contacts],
                "estop": bool(base.estop),
            }
        tr = self.view.get("transforms")
        if tr is not None and tr.localization is not None:
            msg["pose"] = {
                "position": np.asarray(tr.localization.position).tolist(),
                "quat_wxyz": np.asarray(tr.localization.quat).tolist(),
            }
        contour = self.view.get("contour")
        if contour is not None:
            msg["contour"] = np.asarray(contour).tolist()
        raw = self.view.get("heightmap_raw")
        if raw is not None:
            msg["heightmap_b64"] = base64.b64encode(raw).decode()
        metrics = self.view.get("metrics")
        if metrics is not None:
            msg["metrics"] = metrics
        return msg


# -------------------------------------------------------------- web service


def parse_console_command(doc: dict):
    """JSON console message -> uplink command object."""
    kind = doc.get("cmd")
    if kind == "joystick":
        return lowband.Joystick(float(doc["vx"]), float(doc["vy"]),
                                float(doc["omega"]),
                                float(doc.get("throttle", 1.0)))
    if kind == "estop":
        return lowband.MotionPlayRequest(motion_id=0, parameter=0.0)
    if kind == "step":
        # auto step rides the motion-play channel
        wheel = {"auto": 0, "fl": 1, "fr": 2, "hl": 3, "hr": 4}[
            doc.get("wheel", "auto")]
        return lowband.MotionPlayRequest(motion_id=1, parameter=float(wheel))
    if kind == "footprint":
        delta = doc["delta"]
        return lowband.GenericMotion(
            group=int(doc.get("wheel_index", 0)),
            position=np.array([delta[0], delta[1], delta[2] if len(delta) > 2
                               else 0.0]),
            quat=np.array([1.0, 0.0, 0.0, 0.0]),
            velocity_limit=float(doc.get("velocity", 0.1)),
            torque_fraction=1.0, flags=0)
    if kind == "motion":
        return lowband.MotionPlayRequest(motion_id=int(doc["motion_id"]),
                                         parameter=float(doc.get("parameter", 0.0)))
    raise CommandError(f"unknown console command {kind!r}")


def create_app(station: Station, clock=None):
    """FastAPI app exposing GET /status and the /ws telemetry+command socket."""
    clock = clock or _time.time
    app = FastAPI(title="teleop station")
    app.state.station = station

    @app.get("/status")
    def status():
        return station.status(clock())

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        import asyncio

        await socket.accept()
        stop = False

        async def push():
            while not stop:
                await socket.send_json(station.console_snapshot(clock()))
                await asyncio.sleep(1.0 / CONSOLE_PUSH_HZ)

        pusher = asyncio.create_task(push())
        try:
            while True:
                doc = await socket.receive_json()
                t = clock()
                try:
                    cmd = parse_console_command(doc)
                    state, seq = station.submit(cmd, t)
                    station.pump(t)
                    await socket.send_json(
                        {"type": "ack", "seq": seq, "state": state})
                except (CommandError, KeyError, TypeError, ValueError) as e:
                    await socket.send_json(
                        {"type": "reject", "reason": str(e)})
        except WebSocketDisconnect:
            pass
        finally:
            stop = True
            pusher.cancel()

    return app
