"""Kinematic control: driving, leg/arm IK, keyframes, collision, stepping."""

from .armik import (
    IkResult,
    IkWeights,
    cost_and_grad,
    nullspace_step,
    pose_error,
    sdls_ik,
)
from .collision import NEAR_MARGIN, CollisionReport, self_collision_gate
from .drive import (
    AnkleCorrection,
    VelocityCommand,
    WheelState,
    keep_ankle_vertical,
    normalize_angle,
    wheel_velocities,
    wheel_yaw_and_speed,
    yaws_aligned,
)
from .keyframes import (
    CartesianTarget,
    JointTarget,
    Keyframe,
    Trajectory,
    interpolate_keyframe,
    load_keyframes,
    save_keyframes,
    trapezoid_progress,
)
from .legik import OutOfWorkspaceError, leg_fk, leg_ik
from .model import (
    ARMS,
    LEGS,
    JointLimit,
    RobotModel,
    arm_fk,
    arm_jacobian,
    arm_link_frames,
    load_model,
    save_model,
)
from .stepping import (
    FootholdError,
    StepObstacle,
    StepPlan,
    StepRefusedError,
    SupportState,
    WeightShiftPlan,
    detect_step_obstacles,
    select_stepping_wheel,
    shift_weight,
    signed_polygon_distance,
    step_primitive,
)

__all__ = [
    "IkResult", "IkWeights", "cost_and_grad", "nullspace_step", "pose_error",
    "sdls_ik", "CollisionReport", "NEAR_MARGIN", "self_collision_gate",
    "AnkleCorrection", "VelocityCommand", "WheelState", "keep_ankle_vertical",
    "normalize_angle", "wheel_velocities", "wheel_yaw_and_speed",
    "yaws_aligned", "CartesianTarget", "JointTarget", "Keyframe",
    "Trajectory", "interpolate_keyframe", "load_keyframes", "save_keyframes",
    "trapezoid_progress", "OutOfWorkspaceError", "leg_fk", "leg_ik",
    "ARMS", "LEGS", "JointLimit", "RobotModel", "arm_fk", "arm_jacobian",
    "arm_link_frames", "load_model", "save_model", "FootholdError",
    "StepObstacle", "StepPlan", "StepRefusedError", "SupportState",
    "WeightShiftPlan", "detect_step_obstacles", "select_stepping_wheel",
    "shift_weight", "signed_polygon_distance", "step_primitive",
]
