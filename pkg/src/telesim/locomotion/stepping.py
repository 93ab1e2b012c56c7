"""Semi-autonomous stepping: obstacle detection, weight shift, step motion.

Driving is interrupted when a wheel's travel corridor contains a height
rise too big to roll over.  The wheel with the nearest obstacle steps
first: the weight is shifted so the COM projection reaches the centroid of
the triangle formed by the three other wheels, the wheel is lifted over
the rise along a parametrized Cartesian primitive, and set down on the
first flat-enough foothold past it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .model import LEGS, RobotModel

H_DETECT = 0.05          # m, rise that counts as an obstacle
LOOKAHEAD = 0.5          # m
CLEARANCE = 0.05         # m above the obstacle top
MAX_REACH = 0.6          # m, foothold search horizon
SLOPE_MAX = np.deg2rad(10.0)
MIN_MARGIN = 0.03        # m, stability margin required to lift a wheel


@dataclass(frozen=True)
class StepObstacle:
    wheel: str
    distance: float          # m along travel direction
    height: float            # m rise above the wheel's current ground
    unknown: bool = False    # True when caused by unmapped cells


class StepRefusedError(RuntimeError):
    """Stepping precondition violated (insufficient stability margin)."""


class FootholdError(RuntimeError):
    """No acceptable foothold within reach past the obstacle."""


def detect_step_obstacles(hm, wheel_xy: dict, travel_dir,
                          h_d: float = H_DETECT, lookahead: float = LOOKAHEAD,
                          corridor: float = 0.08,
                          ground_h: dict = None) -> dict:
    """Nearest too-high rise in each wheel's travel corridor.

    Scans a corridor one wheel wide along the normalized travel direction;
    rises above ``h_d`` relative to the wheel's current ground height are
    obstacles, and unmapped cells are treated as obstacles (conservative).
    The reference ground height per wheel comes from ``ground_h`` (the
    robot's own contact estimate) when given, else from the map cell under
    the wheel — which is biased when that cell straddles a height edge.
    Returns {wheel: StepObstacle | None}.
    """
    d = np.asarray(travel_dir, dtype=float)[:2]
    n = np.linalg.norm(d)
    if n == 0:
        return {w: None for w in wheel_xy}
    d = d / n
    lat = np.array([-d[1], d[0]])
    res = hm.resolution
    out = {}
    for wheel, xy in wheel_xy.items():
        xy = np.asarray(xy, dtype=float)[:2]
        if ground_h is not None and wheel in ground_h:
            h0 = float(ground_h[wheel])
        else:
            h0 = hm.height_at(xy)
        if np.isnan(h0):
            h0 = 0.0
        found = None
        for dist in np.arange(res, lookahead + res / 2, res):
            heights = [
                hm.height_at(xy + dist * d + off * lat)
                for off in (-corridor / 2, 0.0, corridor / 2)
            ]
            if np.any(np.isnan(heights)):
                found = StepObstacle(wheel, float(dist), np.nan, unknown=True)
                break
            rise = max(heights) - h0
            if rise > h_d:
                found = StepObstacle(wheel, float(dist), float(rise))
                break
        out[wheel] = found
    return out


def select_stepping_wheel(detections: dict):
    """Wheel whose obstacle is nearest; ties resolved in fixed leg order."""
    best = None
    for wheel in LEGS:
        obs = detections.get(wheel)
        if obs is None:
            continue
        if best is None or obs.distance < best.distance - 1e-12:
            best = obs
    return None if best is None else best.wheel


@dataclass
class SupportState:
    """Ground contacts, their convex hull, and the COM stability margin."""

    contacts: np.ndarray      # (k, 2) ground-plane positions
    com: np.ndarray           # (2,) COM projection

    @property
    def polygon(self) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(self.contacts, dtype=float))
        if len(pts) < 3:
            return pts
        hull = ConvexHull(pts)
        return pts[hull.vertices]

    @property
    def margin(self) -> float:
        """Signed distance of the COM to the polygon boundary (+ inside)."""
        return signed_polygon_distance(self.polygon, self.com)


def signed_polygon_distance(polygon: np.ndarray, point) -> float:
    """Positive inside a (counter-clockwise) convex polygon, negative out."""
    poly = np.atleast_2d(np.asarray(polygon, dtype=float))
    p = np.asarray(point, dtype=float)
    if poly.size == 0:
        return -np.inf
    if len(poly) < 3:
        # degenerate support: never stable
        return -float(np.linalg.norm(poly - p, axis=1).min())
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    # signed area orientation; flip to counter-clockwise if needed
    if np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]) < 0:
        return signed_polygon_distance(poly[::-1], p)
    ap = p - a
    cross = e[:, 0] * ap[:, 1] - e[:, 1] * ap[:, 0]
    t = np.clip(np.sum(ap * e, axis=1) / np.sum(e * e, axis=1), 0.0, 1.0)
    closest = a + t[:, None] * e
    dist = np.linalg.norm(p - closest, axis=1).min()
    return float(dist) if np.all(cross >= 0) else -float(dist)


@dataclass
class WeightShiftPlan:
    base_shift: np.ndarray = field(default_factory=lambda: np.zeros(2))
    predicted_com: np.ndarray = field(default_factory=lambda: np.zeros(2))
    predicted_margin: float = 0.0
    needs_operator: bool = False

    @property
    def empty(self) -> bool:
        return bool(np.linalg.norm(self.base_shift) < 1e-9)


def shift_weight(model: RobotModel, wheel_xy: dict, lifting: str,
                 base_xy=(0.0, 0.0), max_shift: float = 0.25,
                 min_margin: float = MIN_MARGIN) -> WeightShiftPlan:
    """Plan the base shift that moves the COM into the support triangle.

    The target is the centroid of the three remaining wheel contacts; the
    trunk carries ``mass_base`` of the total, so a COM change of delta
    requires a base shift of delta * M / m_base, capped per axis.  If the
    capped shift cannot reach the required margin the plan is flagged for
    the operator.
    """
    base_xy = np.asarray(base_xy, dtype=float)
    others = np.array([np.asarray(wheel_xy[w], dtype=float)[:2]
                       for w in LEGS if w != lifting])
    target = others.mean(axis=0)
    com = model.com_projection(base_xy, {w: np.asarray(wheel_xy[w])[:2]
                                         for w in LEGS})
    needed = target - com
    if np.linalg.norm(needed) < 1e-9:
        return WeightShiftPlan(predicted_com=com,
                               predicted_margin=signed_polygon_distance(
                                   others, com))
    shift = np.clip(needed * model.mass_total / model.mass_base,
                    -max_shift, max_shift)
    predicted = com + shift * model.mass_base / model.mass_total
    margin = signed_polygon_distance(others, predicted)
    return WeightShiftPlan(shift, predicted, margin,
                           needs_operator=margin < min_margin)


@dataclass
class StepPlan:
    wheel: str
    waypoints: np.ndarray     # (4, 3) axle positions: start, up, over, down
    foothold_xy: np.ndarray
    foothold_height: float
    lift_height: float        # absolute z of the translate phase (axle)


def step_primitive(model: RobotModel, wheel: str, hm, wheel_xy: dict,
                   travel_dir, support_margin: float,
                   clearance: float = CLEARANCE, max_reach: float = MAX_REACH,
                   slope_max: float = SLOPE_MAX,
                   min_margin: float = MIN_MARGIN,
                   ground_h: dict = None) -> StepPlan:
    """Cartesian lift-over trajectory for one wheel.

    Requires the weight already shifted (margin above ``min_margin``).
    The wheel lifts to the obstacle top plus clearance, translates forward,
    and lowers onto the first cell past the rise whose local slope is
    acceptable.
    """
    if support_margin < min_margin:
        raise StepRefusedError(
            f"stability margin {support_margin:.3f} m below required "
            f"{min_margin:.3f} m")
    d = np.asarray(travel_dir, dtype=float)[:2]
    d = d / np.linalg.norm(d)
    xy = np.asarray(wheel_xy[wheel], dtype=float)[:2]
    obs = detect_step_obstacles(hm, {wheel: xy}, d, lookahead=max_reach,
                                ground_h=ground_h)[wheel]
    if obs is None:
        raise FootholdError("no obstacle in the travel corridor")
    if ground_h is not None and wheel in ground_h:
        h0 = float(ground_h[wheel])
    else:
        h0 = hm.height_at(xy)
    if np.isnan(h0):
        h0 = 0.0
    res = hm.resolution
    # the obstacle top: highest cell between the rise and the reach limit
    top = h0 + (obs.height if not obs.unknown else 0.0)
    foothold = None
    for dist in np.arange(obs.distance, max_reach + res / 2, res):
        h = hm.height_at(xy + dist * d)
        if np.isnan(h):
            continue
        top = max(top, h)
        # slope against the next *distinct* cell along the direction, so
        # samples landing in the same cell cannot fake a flat spot
        cell = hm.cell_index(xy + dist * d)
        h_next, run = np.nan, res
        for extra in (res, 2 * res, 3 * res):
            p = xy + (dist + extra) * d
            if hm.cell_index(p) != cell:
                h_next, run = hm.height_at(p), extra
                break
        if np.isnan(h_next):
            continue
        if h - h0 > H_DETECT and abs(h_next - h) / run < np.tan(slope_max):
            foothold = (xy + dist * d, float(h))
            break
    if foothold is None:
        raise FootholdError(f"no foothold within {max_reach} m past the rise")
    f_xy, f_h = foothold
    lift_z = top + clearance + model.wheel_radius
    waypoints = np.array([
        [xy[0], xy[1], h0 + model.wheel_radius],
        [xy[0], xy[1], lift_z],
        [f_xy[0], f_xy[1], lift_z],
        [f_xy[0], f_xy[1], f_h + model.wheel_radius],
    ])
    return StepPlan(wheel, waypoints, f_xy, f_h, lift_z)
