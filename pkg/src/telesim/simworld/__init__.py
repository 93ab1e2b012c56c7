"""Simulated world: terrain, spinning laser, kinematic robot, scenarios."""

from .scenario import (
    AutoStepController,
    ScenarioConfig,
    ScenarioRunner,
    default_config,
    load_scenario,
    run_scenario,
    support_margin,
)
from .sensor import LINE_RATE, NOISE_SIGMA, ROT_RATE, raycast_scanline
from .sim import Commands, SimConfig, SimState, initial_state, settle, tick
from .terrain import (
    BAR_SIZE,
    BAR_X,
    SCENARIOS,
    STAIR_COUNT,
    STAIR_RISE,
    STAIR_RUN,
    STAIR_X,
    ScenarioError,
    Terrain,
    make_terrain,
)

__all__ = [
    "AutoStepController",
    "ScenarioConfig",
    "ScenarioRunner",
    "default_config",
    "load_scenario",
    "run_scenario",
    "support_margin",
    "LINE_RATE",
    "NOISE_SIGMA",
    "ROT_RATE",
    "raycast_scanline",
    "Commands",
    "SimConfig",
    "SimState",
    "initial_state",
    "settle",
    "tick",
    "BAR_SIZE",
    "BAR_X",
    "SCENARIOS",
    "STAIR_COUNT",
    "STAIR_RISE",
    "STAIR_RUN",
    "STAIR_X",
    "ScenarioError",
    "Terrain",
    "make_terrain",
]
