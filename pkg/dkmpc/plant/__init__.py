"""
dkmpc Plants

Simulated plants: the three-segment soft arm surrogate and a linear system.
"""

from .base import Plant
from .kinematics import segment_curvature, arm_curvatures, pcc_forward_kinematics
from .soft_arm import (
    PlantConfig, PlantState, SoftArmPlant, reset, plant_step, static_tip, solve_static_pressures
)
from .linear import LinearPlant, random_stable_system

__all__ = [
    "Plant",
    "segment_curvature",
    "arm_curvatures",
    "pcc_forward_kinematics",
    "PlantConfig",
    "PlantState",
    "SoftArmPlant",
    "reset",
    "plant_step",
    "static_tip",
    "solve_static_pressures",
    "LinearPlant",
    "random_stable_system",
]
