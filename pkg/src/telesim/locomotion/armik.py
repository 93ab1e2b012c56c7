"""Arm inverse kinematics: selectively damped least squares with nullspace.

The primary task follows a 6D pose error through SVD-based updates with
per-singular-value damping and a clamped step size; distant targets are
first pulled toward the current end effector so the solver walks to the
workspace boundary instead of oscillating.  A secondary step descends a
convenience cost inside the Jacobian nullspace, so it never moves the hand:

    C(q) = w1 * sum(limit penalty) + w2 * ||q - q_prev||^2
         + w3 * ||q - q_convenient||^2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .model import RobotModel, arm_fk, arm_jacobian


@dataclass(frozen=True)
class IkWeights:
    w1: float = 1.0     # joint-limit penalty
    w2: float = 0.05    # closeness to the previous solution
    w3: float = 0.05    # closeness to the convenient configuration


@dataclass
class IkResult:
    q: np.ndarray
    converged: bool
    iterations: int
    position_error: float
    orientation_error: float
    trace: list = None   # per-iteration error norm of the returned run


def pose_error(p, r, p_t, r_t, rot_weight: float = 0.5) -> np.ndarray:
    """6-vector task error: translation plus weighted rotation vector."""
    w_err = Rotation.from_matrix(r_t @ r.T).as_rotvec()
    return np.concatenate([p_t - p, rot_weight * w_err])


def limit_penalty_grad(q, lo, hi, margin: float = 0.15):
    """Quadratic penalty ramping up inside ``margin`` of each joint limit."""
    pen = np.zeros_like(q)
    grad = np.zeros_like(q)
    over_hi = q > hi - margin
    over_lo = q < lo + margin
    d_hi = (q - (hi - margin)) / margin
    d_lo = ((lo + margin) - q) / margin
    pen[over_hi] = d_hi[over_hi] ** 2
    grad[over_hi] = 2 * d_hi[over_hi] / margin
    pen[over_lo] = d_lo[over_lo] ** 2
    grad[over_lo] -= 2 * d_lo[over_lo] / margin
    return float(pen.sum()), grad


def cost_and_grad(q, q_prev, q_conv, lo, hi, w: IkWeights):
    pen, pen_grad = limit_penalty_grad(q, lo, hi)
    c = (w.w1 * pen + w.w2 * np.sum((q - q_prev) ** 2)
         + w.w3 * np.sum((q - q_conv) ** 2))
    g = (w.w1 * pen_grad + 2 * w.w2 * (q - q_prev)
         + 2 * w.w3 * (q - q_conv))
    return float(c), g


def nullspace_step(jac: np.ndarray, grad_c: np.ndarray, eta: float = 0.1,
                   max_norm: float = 1e-3) -> np.ndarray:
    """Cost-descent step projected into the task nullspace.

    dq = -eta * (I - pinv(J) J) grad, capped in norm so the (second-order)
    end-effector motion it causes stays below 1e-6 m.
    """
    n = jac.shape[1]
    proj = np.eye(n) - np.linalg.pinv(jac) @ jac
    dq = -eta * proj @ grad_c
    norm = np.linalg.norm(dq)
    if norm > max_norm:
        dq *= max_norm / norm
    return dq


def _damped_step(jac, err, sigma_floor: float = 1e-3):
    """SVD least-squares step with per-singular-value damping."""
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    # damping lambda_i grows as sigma_i approaches the singular regime
    lam2 = np.where(s < sigma_floor * 10, (sigma_floor * 10 - s) ** 2, 0.0)
    inv = s / (s * s + lam2 + 1e-12)
    return vt.T @ (inv * (u.T @ err))


def clamp_target(p_now, p_t, max_dist: float = 0.10):
    """Pull a distant target to within ``max_dist`` of the current EE."""
    d = p_t - p_now
    n = np.linalg.norm(d)
    if n <= max_dist:
        return p_t
    return p_now + d * (max_dist / n)


def sdls_ik(model: RobotModel, target_pos, target_rot, q_prev,
            arm: str = "left", q_convenient=None,
            weights: IkWeights = IkWeights(), max_iter: int = 200,
            tol_dq: float = 1e-6, step_cap: float = 0.5) -> IkResult:
    """Solve one arm for a 6D pose target.

    Per iteration: clamp the position target toward the current end
    effector, take the damped SVD step (halved until the error to the true
    target does not increase), then descend the convenience cost in the
    nullspace.  Convergence is declared when the primary step falls below
    ``tol_dq``; hitting the iteration cap returns the best effort with
    ``converged=False``.
    """
    target_pos = np.asarray(target_pos, dtype=float)
    target_rot = np.asarray(target_rot, dtype=float)
    q_prev = np.asarray(q_prev, dtype=float).copy()
    if q_convenient is None:
        q_convenient = model.q_convenient
    lo, hi = model.arm_limits_array()

    def true_err_norm(qv):
        p, r = arm_fk(model, qv, arm)
        return np.linalg.norm(pose_error(p, r, target_pos, target_rot))

    def result_of(q, converged, it, trace):
        p, r = arm_fk(model, q, arm)
        e = pose_error(p, r, target_pos, target_rot, rot_weight=1.0)
        return IkResult(q, converged, it, float(np.linalg.norm(e[:3])),
                        float(np.linalg.norm(e[3:])), trace)

    def solve_from(q0):
        q = np.clip(np.asarray(q0, dtype=float), lo, hi)
        err_prev = true_err_norm(q)
        trace = [err_prev]
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            p, r = arm_fk(model, q, arm)
            p_t = clamp_target(p, target_pos)
            err = pose_error(p, r, p_t, target_rot)
            jac = arm_jacobian(model, q, arm)
            dq = _damped_step(jac, err)
            norm = np.linalg.norm(dq)
            if norm > step_cap:
                dq *= step_cap / norm
            # backtrack so the error to the true target never increases
            scale = 1.0
            for _ in range(20):
                q_try = np.clip(q + scale * dq, lo, hi)
                if true_err_norm(q_try) <= err_prev + 1e-12:
                    break
                scale *= 0.5
            else:
                q_try = q
            q = q_try
            err_prev = true_err_norm(q)
            if np.linalg.norm(scale * dq) < tol_dq or err_prev < 5e-4:
                trace.append(err_prev)
                converged = True
                break
            # secondary task in the nullspace; skipped if (second-order)
            # hand motion would break error monotonicity
            _, grad = cost_and_grad(q, q_prev, q_convenient, lo, hi, weights)
            dn = nullspace_step(jac, grad)
            for _ in range(8):
                q_null = np.clip(q + dn, lo, hi)
                if true_err_norm(q_null) <= err_prev + 1e-12:
                    q = q_null
                    err_prev = true_err_norm(q)
                    break
                dn *= 0.5
            trace.append(err_prev)
        return result_of(q, converged, it, trace)

    # restarts rescue runs stuck in a local minimum: error descent is
    # monotone within a run, so escaping a basin needs a fresh start.
    # The restart sequence is seeded deterministically.
    rng = np.random.default_rng(0)
    def start_candidates():
        yield q_prev
        yield q_convenient
        for _ in range(16):
            yield rng.uniform(lo, hi)

    best = None
    for q0 in start_candidates():
        res = solve_from(q0)
        if best is None or (res.position_error + res.orientation_error
                            < best.position_error + best.orientation_error):
            best = res
        if best.position_error < 1e-3 and best.orientation_error < 1e-2:
            break
    return best
