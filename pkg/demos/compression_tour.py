#!/usr/bin/env python3
"""Tour of the telemetry compression stack.

Walks one pose and one full telemetry snapshot through the wire codecs and
prints what each stage costs: quaternion hemi-oct coding, FCC lattice
vector quantization, per-joint integer quantization, and finally a whole
1 Hz frame against its 9600-bit budget.
"""

import numpy as np

from telesim import geomcodec as gc
from telesim import lowband as lb
from telesim.joints import JOINT_BY_ID, JOINT_ORDER

rng = np.random.default_rng(42)

# --- 1. a unit quaternion through the 48-bit codec -------------------------

q = rng.normal(size=4)
q /= np.linalg.norm(q)
code = gc.encode_quat(q)
back = gc.decode_quat(code)
angle = gc.quat_angle_between(q[None], np.asarray(back)[None])[0]

print("quaternion codec")
print(f"  input    {np.round(q, 6)}")
print(f"  code     0x{code:012x}  ({gc.QUAT_CODE_BITS} bits)")
print(f"  decoded  {np.round(back, 6)}")
print(f"  angular error {np.degrees(angle) * 3600:.1f} arcsec "
      f"(bound {np.degrees(gc.QUAT_ANGLE_ERROR_BOUND) * 3600:.0f} arcsec)")

# --- 2. a position through the FCC lattice quantizer ------------------------

v = rng.uniform(-5, 5, size=3)
vcode = gc.encode_vec3(v)
vback = gc.decode_vec3(vcode)
print("\nvector codec (FCC lattice, 4 mm spacing)")
print(f"  input    {np.round(v, 6)}")
print(f"  decoded  {np.round(np.asarray(vback), 6)}")
print(f"  error    {np.linalg.norm(np.asarray(vback) - v) * 1000:.2f} mm")

# Monte-Carlo comparison against a per-axis grid of equal point density
a = gc.DEFAULT_FCC.spacing
pts = rng.uniform(-10 * a, 10 * a, size=(200_000, 3))
mse_fcc = np.mean(np.sum((gc.nearest_fcc_array(pts, a) - pts) ** 2, axis=1))
s = a / 4.0 ** (1.0 / 3.0)
mse_axis = np.mean(np.sum((np.round(pts / s) * s - pts) ** 2, axis=1))
print(f"  MSE vs equal-density per-axis grid: "
      f"{mse_fcc:.3e} vs {mse_axis:.3e}  "
      f"({(1 - mse_fcc / mse_axis) * 100:.0f}% lower)")

# --- 3. joints: 16-bit proximal, 8-bit distal -------------------------------

wide = [n for n in JOINT_ORDER if JOINT_BY_ID[n].bits == 16]
narrow = [n for n in JOINT_ORDER if JOINT_BY_ID[n].bits == 8]
print(f"\njoint block: {len(wide)} joints at 16 bit, "
      f"{len(narrow)} distal joints at 8 bit")

# --- 4. one full frame against the 9600-bit budget ---------------------------

joints = {name: rng.uniform(-0.5, 0.5) for name in JOINT_ORDER}
base = lb.BaseStatus(
    contacts=[rng.uniform(-0.6, 0.6, size=3) for _ in range(4)],
    com=rng.uniform(-0.2, 0.2, size=2), estop=False,
    hand_ir_mm=150, max_servo_temp=48)
quat = rng.normal(size=4)
quat /= np.linalg.norm(quat)
transforms = lb.TransformSet(
    localization=lb.CompressedPose(rng.uniform(-3, 3, size=3), quat),
    imu_gravity=np.array([0.0, 0.0, -1.0]))
snapshot = lb.RobotTelemetry(
    sequence=7, timestamp_ms=120_000, base=base, joints=joints,
    transforms=transforms,
    contour_points=rng.uniform(-1, 1, size=(25, 3)),
    audio_amplitude=12,
    thumbnail=lb.Thumbnail(camera_id=2,
                           pixels=rng.integers(0, 16, size=(30, 40),
                                               dtype=np.uint8).astype(np.uint8)))

frame = lb.encode_frame(snapshot)
print(f"\nframe: {len(frame)} bytes = {len(frame) * 8} bits "
      f"(budget {lb.FRAME_BUDGET_BITS})")
print(f"  first 32 bytes: {frame[:32].hex()}")

decoded = lb.decode_frame(frame)
worst = max(abs(decoded.joints[n] - joints[n]) for n in JOINT_ORDER)
print(f"  worst joint error after decode: {np.degrees(worst):.3f} deg")
print(f"  contour points kept: {len(decoded.contour_points)} of 25")
