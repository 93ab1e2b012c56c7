"""Canonical joint inventory shared by the protocol, control and simulator.

47 joints total: 4 legs x 4 DOF, 8 wheels x 2 DOF, 2 arms x 7 DOF and the
torso yaw.  The wheel joints are the most distal ones in the kinematic tree
and are quantized with 8 bits; everything else uses 16 bits.
"""

from __future__ import annotations

import math

from .geomcodec import JointQuantSpec

LEGS = ("fl", "fr", "hl", "hr")
ARMS = ("left", "right")

PI = math.pi


def _build_specs():
    specs = []
    for leg in LEGS:
        specs.append(JointQuantSpec(f"{leg}_hip_pitch", -1.6, 1.6, 16))
        specs.append(JointQuantSpec(f"{leg}_knee_pitch", -2.8, 2.8, 16))
        specs.append(JointQuantSpec(f"{leg}_ankle_pitch", -1.6, 1.6, 16))
        specs.append(JointQuantSpec(f"{leg}_ankle_yaw", -PI, PI, 16))
    for leg in LEGS:
        for side in ("l", "r"):
            specs.append(JointQuantSpec(f"{leg}_wheel_{side}_steer", -PI, PI, 8))
            specs.append(JointQuantSpec(f"{leg}_wheel_{side}_spin", -PI, PI, 8))
    for arm in ARMS:
        for j in range(1, 8):
            specs.append(JointQuantSpec(f"{arm}_arm_j{j}", -PI, PI, 16))
    specs.append(JointQuantSpec("torso_yaw", -PI, PI, 16))
    return specs


JOINT_SPECS = _build_specs()
JOINT_ORDER = [s.joint_id for s in JOINT_SPECS]
JOINT_BY_ID = {s.joint_id: s for s in JOINT_SPECS}

JOINT_BLOCK_BITS = sum(s.bits for s in JOINT_SPECS)

assert len(JOINT_SPECS) == 47
assert JOINT_BLOCK_BITS <= 736
