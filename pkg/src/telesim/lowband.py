"""Always-available low-bandwidth protocol: 1 Hz downlink frames under a hard
9600-bit budget and 5 Hz uplink operator commands.

Frame layout (see PROTOCOL.md for the bit-exact reference):

  header: magic (8) | sequence (16) | timestamp_ms (32)
  blocks: id (8) | payload length in bytes (16) | payload ...

Blocks are independent; a decoder skips unknown ids via the length prefix.
When the budget is tight, blocks are added in fixed priority order
(BaseStatus > Joints > Transforms > Contour > Audio > Thumbnail) and encoding
stops at the first block that no longer fits; the contour block shrinks its
point count to the remaining budget instead of being dropped outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geomcodec as gc
from .bitstream import BitReader, BitWriter
from .joints import JOINT_BY_ID, JOINT_ORDER
from .mapping.scan import filter_jump_edges, undistort_line

FRAME_MAGIC = 0xA7
FRAME_BUDGET_BITS = 9600
HEADER_BITS = 56
BLOCK_HEADER_BITS = 24

BLOCK_BASE_STATUS = 1
BLOCK_JOINTS = 2
BLOCK_TRANSFORMS = 3
BLOCK_CONTOUR = 4
BLOCK_AUDIO = 5
BLOCK_THUMBNAIL = 6

# priority, highest first, used when the budget forces truncation
BLOCK_PRIORITY = (
    BLOCK_BASE_STATUS,
    BLOCK_JOINTS,
    BLOCK_TRANSFORMS,
    BLOCK_CONTOUR,
    BLOCK_AUDIO,
    BLOCK_THUMBNAIL,
)

# local 3D offsets (support polygon, contour points) use a small FCC box
LOCAL_FCC = gc.FccSpec(spacing=0.004, bound=2.0)
LOCAL_FCC_FIELD_BITS = 11  # index range 1000 -> 2001 values
LOCAL_FCC_BITS = 3 * LOCAL_FCC_FIELD_BITS

THUMB_W, THUMB_H = 40, 30
THUMB_PAYLOAD_BITS = 6000  # fixed-size block, stands in for a CBR video frame

CONTOUR_MAX_POINTS = 125

MAX_SEQ = 1 << 16


class FrameError(ValueError):
    """Unrecoverable frame corruption (bad magic or truncated header)."""


def _encode_local_vec(w: BitWriter, v):
    code = gc.encode_vec3_array(np.asarray(v, dtype=float), LOCAL_FCC)
    m = LOCAL_FCC.index_range
    f = [int((code >> 32) & 0xFFFF), int((code >> 16) & 0xFFFF), int(code & 0xFFFF)]
    for x in f:
        if x > 2 * m:
            raise gc.CodecError("local vector outside box")
        w.write(x, LOCAL_FCC_FIELD_BITS)


def _decode_local_vec(r: BitReader):
    m = LOCAL_FCC.index_range
    idx = np.array([r.read(LOCAL_FCC_FIELD_BITS) - m for _ in range(3)])
    return idx * LOCAL_FCC.half_spacing


# ---------------------------------------------------------------------------
# Telemetry data model
# ---------------------------------------------------------------------------


@dataclass
class Thumbnail:
    camera_id: int                  # 3 bits
    pixels: np.ndarray              # (30, 40) uint8, 4-bit gray


@dataclass
class BaseStatus:
    contacts: list                  # up to 4 local 3D points (base frame)
    com: np.ndarray                 # (2,) ground projection, base frame
    estop: bool
    hand_ir_mm: int                 # 12 bits
    max_servo_temp: int             # deg C, 8 bits


@dataclass
class CompressedPose:
    position: np.ndarray            # (3,)
    quat: np.ndarray                # (4,) wxyz


@dataclass
class TransformSet:
    localization: CompressedPose | None = None
    imu_gravity: np.ndarray | None = None  # unit vector, body frame


@dataclass
class RobotTelemetry:
    """One decoded (or to-be-encoded) telemetry snapshot."""

    sequence: int = 0
    timestamp_ms: int = 0
    base: BaseStatus | None = None
    joints: dict | None = None              # name -> radians
    transforms: TransformSet | None = None
    contour_points: np.ndarray | None = None  # (n, 3) offsets from EEF
    audio_amplitude: int | None = None        # 8 bits
    thumbnail: Thumbnail | None = None


def quantize_telemetry(t: RobotTelemetry) -> RobotTelemetry:
    """Project a snapshot onto the wire grid (what decode(encode(t)) returns)."""
    return decode_frame(encode_frame(t))


# ---------------------------------------------------------------------------
# Block payload encoders/decoders
# ---------------------------------------------------------------------------


def _encode_base(b: BaseStatus) -> bytes:
    w = BitWriter()
    contacts = list(b.contacts)[:4]
    w.write(len(contacts), 3)
    for c in contacts:
        _encode_local_vec(w, c)
    com = np.clip(np.asarray(b.com, dtype=float), -2.0, 2.0)
    for x in com[:2]:
        w.write(int(round((x + 2.0) / 4.0 * 4095)), 12)
    w.write(1 if b.estop else 0, 1)
    w.write(int(min(max(b.hand_ir_mm, 0), 4095)), 12)
    w.write(int(min(max(b.max_servo_temp, 0), 255)), 8)
    return w.to_bytes()


def _decode_base(data: bytes) -> BaseStatus:
    r = BitReader(data)
    n = r.read(3)
    contacts = [_decode_local_vec(r) for _ in range(n)]
    com = np.array([r.read(12) / 4095 * 4.0 - 2.0 for _ in range(2)])
    estop = bool(r.read(1))
    ir = r.read(12)
    temp = r.read(8)
    return BaseStatus(contacts, com, estop, ir, temp)


def _encode_joints(joints: dict) -> bytes:
    w = BitWriter()
    for name in JOINT_ORDER:
        spec = JOINT_BY_ID[name]
        w.write(gc.quantize_joint(float(joints[name]), spec), spec.bits)
    return w.to_bytes()


def _decode_joints(data: bytes) -> dict:
    r = BitReader(data)
    return {
        name: gc.dequantize_joint(r.read(JOINT_BY_ID[name].bits), JOINT_BY_ID[name])
        for name in JOINT_ORDER
    }


def _encode_transforms(t: TransformSet) -> bytes:
    w = BitWriter()
    flags = (1 if t.localization is not None else 0) | (
        2 if t.imu_gravity is not None else 0
    )
    w.write(flags, 8)
    if t.localization is not None:
        w.write(gc.encode_vec3(t.localization.position), gc.VEC_CODE_BITS)
        w.write(gc.encode_quat(t.localization.quat), gc.QUAT_CODE_BITS)
    if t.imu_gravity is not None:
        g = np.asarray(t.imu_gravity, dtype=float)
        g = g / np.linalg.norm(g)
        px, py = gc._oct_encode(g)
        w.write(int(gc._quant_unit(px, 16)), 16)
        w.write(int(gc._quant_unit(py, 16)), 16)
    return w.to_bytes()


def _decode_transforms(data: bytes) -> TransformSet:
    r = BitReader(data)
    flags = r.read(8)
    out = TransformSet()
    if flags & 1:
        pos = gc.decode_vec3(r.read(gc.VEC_CODE_BITS))
        quat = gc.decode_quat(r.read(gc.QUAT_CODE_BITS))
        out.localization = CompressedPose(pos, quat)
    if flags & 2:
        px = gc._dequant_unit(r.read(16), 16)
        py = gc._dequant_unit(r.read(16), 16)
        out.imu_gravity = gc._oct_decode(np.float64(px), np.float64(py))
    return out


def _encode_contour(points: np.ndarray, max_points: int) -> bytes:
    w = BitWriter()
    pts = np.asarray(points, dtype=float)[:max_points]
    pts = np.clip(pts, -LOCAL_FCC.bound, LOCAL_FCC.bound)
    w.write(len(pts), 7)
    for p in pts:
        _encode_local_vec(w, p)
    return w.to_bytes()


def _decode_contour(data: bytes) -> np.ndarray:
    r = BitReader(data)
    n = r.read(7)
    return np.array([_decode_local_vec(r) for _ in range(n)]).reshape(n, 3)


def _encode_thumbnail(t: Thumbnail) -> bytes:
    w = BitWriter()
    w.write(int(t.camera_id) & 7, 3)
    px = np.asarray(t.pixels, dtype=np.uint8)
    if px.shape != (THUMB_H, THUMB_W):
        raise ValueError(f"thumbnail must be {THUMB_H}x{THUMB_W}")
    for v in px.reshape(-1):
        w.write(int(v) & 0xF, 4)
    # pad to the fixed CBR-style payload size
    while w.bit_length < THUMB_PAYLOAD_BITS:
        w.write(0, min(32, THUMB_PAYLOAD_BITS - w.bit_length))
    return w.to_bytes()


def _decode_thumbnail(data: bytes) -> Thumbnail:
    r = BitReader(data)
    cam = r.read(3)
    px = np.array(
        [r.read(4) for _ in range(THUMB_W * THUMB_H)], dtype=np.uint8
    ).reshape(THUMB_H, THUMB_W)
    return Thumbnail(cam, px)


# ---------------------------------------------------------------------------
# Frame encode / decode
# ---------------------------------------------------------------------------


def encode_frame(t: RobotTelemetry, budget_bits: int = FRAME_BUDGET_BITS) -> bytes:
    """Serialize a telemetry snapshot into at most ``budget_bits`` bits.

    Blocks are appended in priority order; the first block that does not fit
    ends the frame (the contour block is truncated to fit first).
    """
    if budget_bits < 512:
        raise ValueError("budget below protocol minimum of 512 bits")
    header = BitWriter()
    header.write(FRAME_MAGIC, 8)
    header.write(t.sequence % MAX_SEQ, 16)
    header.write(int(t.timestamp_ms) & 0xFFFFFFFF, 32)
    out = bytearray(header.to_bytes())

    remaining = budget_bits - HEADER_BITS

    def fits(payload: bytes) -> bool:
        return BLOCK_HEADER_BITS + len(payload) * 8 <= remaining

    def emit(block_id: int, payload: bytes):
        nonlocal remaining
        out.append(block_id)
        out.extend(len(payload).to_bytes(2, "big"))
        out.extend(payload)
        remaining -= BLOCK_HEADER_BITS + len(payload) * 8

    for block_id in BLOCK_PRIORITY:
        payload = None
        if block_id == BLOCK_BASE_STATUS and t.base is not None:
            payload = _encode_base(t.base)
        elif block_id == BLOCK_JOINTS and t.joints is not None:
            payload = _encode_joints(t.joints)
        elif block_id == BLOCK_TRANSFORMS and t.transforms is not None:
            payload = _encode_transforms(t.transforms)
        elif block_id == BLOCK_CONTOUR and t.contour_points is not None:
            avail = remaining - BLOCK_HEADER_BITS
            max_pts = min(CONTOUR_MAX_POINTS, (avail - 7) // LOCAL_FCC_BITS)
            # payloads are byte padded; shrink until the padded size fits too
            while max_pts >= 0 and -(-(7 + LOCAL_FCC_BITS * max_pts) // 8) * 8 > avail:
                max_pts -= 1
            if max_pts < 0:
                break
            payload = _encode_contour(t.contour_points, max_pts)
        elif block_id == BLOCK_AUDIO and t.audio_amplitude is not None:
            payload = bytes([int(t.audio_amplitude) & 0xFF])
        elif block_id == BLOCK_THUMBNAIL and t.thumbnail is not None:
            payload = _encode_thumbnail(t.thumbnail)
        if payload is None:
            continue
        if not fits(payload):
            break
        emit(block_id, payload)

    assert len(out) * 8 <= budget_bits
    return bytes(out)


_BLOCK_DECODERS = {
    BLOCK_BASE_STATUS: ("base", _decode_base),
    BLOCK_JOINTS: ("joints", _decode_joints),
    BLOCK_TRANSFORMS: ("transforms", _decode_transforms),
    BLOCK_CONTOUR: ("contour_points", _decode_contour),
    BLOCK_AUDIO: ("audio_amplitude", lambda d: d[0]),
    BLOCK_THUMBNAIL: ("thumbnail", _decode_thumbnail),
}


def decode_frame(data: bytes) -> RobotTelemetry:
    """Decode every block that parses; corrupted trailing data is dropped."""
    if len(data) < HEADER_BITS // 8:
        raise FrameError("truncated frame header")
    r = BitReader(data)
    if r.read(8) != FRAME_MAGIC:
        raise FrameError("bad frame magic")
    t = RobotTelemetry(sequence=r.read(16), timestamp_ms=r.read(32))
    pos = HEADER_BITS // 8
    while pos + 3 <= len(data):
        block_id = data[pos]
        length = int.from_bytes(data[pos + 1 : pos + 3], "big")
        payload = data[pos + 3 : pos + 3 + length]
        if len(payload) < length:
            break  # truncated trailing block
        entry = _BLOCK_DECODERS.get(block_id)
        if entry is not None:
            name, decoder = entry
            try:
                setattr(t, name, decoder(payload))
            except Exception:
                break  # corrupted payload ends the usable frame
        pos += 3 + length
    return t


# ---------------------------------------------------------------------------
# Uplink commands
# ---------------------------------------------------------------------------

CMD_ARM = 1
CMD_JOYSTICK = 2
CMD_GENERIC_MOTION = 3
CMD_MOTION_PLAY = 4


@dataclass
class ArmControl:
    """6D end-effector goal delta; 96-bit payload."""

    arm: int                        # 0 left, 1 right
    dpos: np.ndarray                # (3,) m, +-0.5
    drot: np.ndarray                # (3,) rotation-vector delta, +-0.3 rad


@dataclass
class Joystick:
    vx: float                       # normalized [-1, 1]
    vy: float
    omega: float
    throttle: float                 # [0, 1]


@dataclass
class GenericMotion:
    """One Cartesian keyframe for a joint group; 144-bit payload."""

    group: int
    position: np.ndarray            # (3,) m, +-2 in the group frame
    quat: np.ndarray                # (4,) wxyz
    velocity_limit: float           # [0, 3]
    torque_fraction: float          # [0, 1]
    flags: int = 0


@dataclass
class MotionPlayRequest:
    motion_id: int
    parameter: float                # [-100, 100]


def _q16(x, lo, hi):
    x = min(max(float(x), lo), hi)
    return int(round((x - lo) / (hi - lo) * 65535))


def _d16(c, lo, hi):
    return lo + c / 65535 * (hi - lo)


def encode_command(cmd) -> bytes:
    w = BitWriter()
    if isinstance(cmd, ArmControl):
        w.write(CMD_ARM, 8)
        w.write(cmd.arm & 1, 1)
        for x in cmd.dpos:
            w.write(_q16(x, -0.5, 0.5), 16)
        for x in cmd.drot:
            v = min(max(float(x), -0.3), 0.3)
            w.write(int(round((v + 0.3) / 0.6 * 32767)), 15)
        w.write(0, 2)  # pad to 96-bit payload
    elif isinstance(cmd, Joystick):
        w.write(CMD_JOYSTICK, 8)
        for x in (cmd.vx, cmd.vy, cmd.omega):
            w.write(_q16(x, -1.0, 1.0), 16)
        w.write(int(round(min(max(cmd.throttle, 0.0), 1.0) * 255)), 8)
    elif isinstance(cmd, GenericMotion):
        w.write(CMD_GENERIC_MOTION, 8)
        w.write(cmd.group & 0xFF, 8)
        for x in cmd.position:
            w.write(_q16(x, -2.0, 2.0), 16)
        w.write(gc.encode_quat(cmd.quat), gc.QUAT_CODE_BITS)
        w.write(_q16(cmd.velocity_limit, 0.0, 3.0), 16)
        w.write(int(round(min(max(cmd.torque_fraction, 0.0), 1.0) * 255)), 8)
        w.write(cmd.flags & 0xFF, 8)
        w.write(0, 8)  # pad to 144-bit payload
    elif isinstance(cmd, MotionPlayRequest):
        w.write(CMD_MOTION_PLAY, 8)
        w.write(cmd.motion_id & 0xFFFFFFFF, 32)
        w.write(_q16(cmd.parameter, -100.0, 100.0) << 16 | 0, 32)
        w.write(0, 16)  # pad to 80-bit payload
    else:
        raise ValueError(f"unknown command type: {type(cmd).__name__}")
    return w.to_bytes()


def decode_command(data: bytes):
    r = BitReader(data)
    kind = r.read(8)
    if kind == CMD_ARM:
        arm = r.read(1)
        dpos = np.array([_d16(r.read(16), -0.5, 0.5) for _ in range(3)])
        drot = np.array([r.read(15) / 32767 * 0.6 - 0.3 for _ in range(3)])
        r.read(2)
        return ArmControl(arm, dpos, drot)
    if kind == CMD_JOYSTICK:
        vx, vy, om = (_d16(r.read(16), -1.0, 1.0) for _ in range(3))
        throttle = r.read(8) / 255
        return Joystick(vx, vy, om, throttle)
    if kind == CMD_GENERIC_MOTION:
        group = r.read(8)
        pos = np.array([_d16(r.read(16), -2.0, 2.0) for _ in range(3)])
        quat = gc.decode_quat(r.read(gc.QUAT_CODE_BITS))
        vel = _d16(r.read(16), 0.0, 3.0)
        torque = r.read(8) / 255
        flags = r.read(8)
        r.read(8)
        return GenericMotion(group, pos, quat, vel, torque, flags)
    if kind == CMD_MOTION_PLAY:
        motion_id = r.read(32)
        word = r.read(32)
        param = _d16(word >> 16, -100.0, 100.0)
        r.read(16)
        return MotionPlayRequest(motion_id, param)
    raise ValueError(f"unknown command id: {kind}")


# ---------------------------------------------------------------------------
# Contour point extraction
# ---------------------------------------------------------------------------

SOBEL_THRESHOLD = 0.05   # m, on the normalized gradient magnitude
MEDIAN_WINDOW = 5        # beams


def _median_smooth(row: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    padded = np.pad(row, half, mode="edge")
    stacked = np.stack([padded[i : i + len(row)] for i in range(window)])
    return np.median(stacked, axis=0)


def extract_contour_points(scans, window, eef_position, max_points: int = CONTOUR_MAX_POINTS):
    """Sparse 3D edge points around the end effector from the last 3 scans.

    Pipeline: jump-edge removal, per-scan median smoothing of ranges, Sobel
    over the 3 x W range image, thresholding, and reduction of each connected
    edge run to its two end points.  Returns (n, 3) offsets from
    ``eef_position``, n <= max_points.
    """
    lo, hi = window
    if hi <= lo:
        return np.empty((0, 3))
    scans = list(scans)[-3:]
    filtered = [filter_jump_edges(s) for s in scans]
    width = hi - lo
    ranges = np.zeros((len(filtered), width))
    valid = np.zeros((len(filtered), width), dtype=bool)
    for i, s in enumerate(filtered):
        ranges[i] = s.ranges[lo:hi]
        valid[i] = s.valid[lo:hi]
        ranges[i] = _median_smooth(ranges[i], MEDIAN_WINDOW)
    if ranges.shape[0] < 3 or width < 3:
        return np.empty((0, 3))

    # 3x3 Sobel over (scan index, beam index), normalized so that an isolated
    # range step of d meters produces a response of about d
    gx = np.zeros_like(ranges)
    gy = np.zeros_like(ranges)
    r = ranges
    gx[1:-1, 1:-1] = (
        (r[:-2, 2:] + 2 * r[1:-1, 2:] + r[2:, 2:])
        - (r[:-2, :-2] + 2 * r[1:-1, :-2] + r[2:, :-2])
    ) / 8.0
    gy[1:-1, 1:-1] = (
        (r[2:, :-2] + 2 * r[2:, 1:-1] + r[2:, 2:])
        - (r[:-2, :-2] + 2 * r[:-2, 1:-1] + r[:-2, 2:])
    ) / 8.0
    mag = np.hypot(gx, gy)
    edges = (mag > SOBEL_THRESHOLD) & valid

    points = []
    for i, s in enumerate(filtered):
        row = edges[i]
        if not row.any():
            continue
        pts3d = undistort_line(s)
        idx = np.flatnonzero(row)
        # split into connected runs, keep each run's end points
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks, [len(idx) - 1]])
        for a, b in zip(starts, ends):
            for j in {idx[a], idx[b]}:
                points.append(pts3d[lo + j])
            if len(points) >= max_points:
                break
        if len(points) >= max_points:
            break
    if not points:
        return np.empty((0, 3))
    pts = np.asarray(points[:max_points]) - np.asarray(eef_position, dtype=float)
    return pts
