"""Self-collision gate over per-link sphere sets.

Every whitelisted link pair is tested by pairwise sphere distance; touching
spheres block execution, while clearances below a small margin are only
reported (for operator display) but not blocked.  Adjacent pairs that touch
by construction (upper arm against the trunk) are not checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ARMS, RobotModel, arm_link_frames

NEAR_MARGIN = 0.02   # m

ARM_LINKS = ("upper_arm", "forearm", "hand")


@dataclass
class CollisionReport:
    ok: bool
    colliding: list = field(default_factory=list)   # [(link_a, link_b), ...]
    near: list = field(default_factory=list)
    min_clearance: float = np.inf


def _world_spheres(model: RobotModel, arm_q: dict) -> dict:
    out = {"trunk": [(s.center, s.radius) for s in model.spheres["trunk"]]}
    for arm in ARMS:
        frames = arm_link_frames(model, arm_q[arm], arm)
        for link in ARM_LINKS:
            origin, rot = frames[link]
            out[f"{arm}:{link}"] = [
                (origin + rot @ s.center, s.radius)
                for s in model.spheres[link]
            ]
    return out


def _check_pairs(model: RobotModel):
    # every left link against every right link; fore/hand against the trunk
    pairs = [(f"left:{a}", f"right:{b}") for a in ARM_LINKS for b in ARM_LINKS]
    for arm in ARMS:
        pairs += [(f"{arm}:forearm", "trunk"), (f"{arm}:hand", "trunk")]
    return pairs


def self_collision_gate(model: RobotModel, arm_q: dict,
                        margin: float = NEAR_MARGIN) -> CollisionReport:
    """Check the commanded arm configurations for self-collision.

    ``arm_q`` maps 'left'/'right' to 7-vectors.  ``ok`` is False only for
    actual sphere overlap; clearance within ``margin`` is reported as near.
    """
    spheres = _world_spheres(model, arm_q)
    report = CollisionReport(ok=True)
    for link_a, link_b in _check_pairs(model):
        clearance = np.inf
        for ca, ra in spheres[link_a]:
            for cb, rb in spheres[link_b]:
                clearance = min(
                    clearance, np.linalg.norm(ca - cb) - (ra + rb))
        report.min_clearance = min(report.min_clearance, clearance)
        if clearance < 0.0:
            report.colliding.append((link_a, link_b))
            report.ok = False
        elif clearance < margin:
            report.near.append((link_a, link_b))
    return report
