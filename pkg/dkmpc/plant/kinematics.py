"""
dkmpc Arm Kinematics

Pressure-to-curvature map for three-bellows segments and piecewise constant
curvature (PCC) forward kinematics. Base frame: z up along the straight arm,
origin at the base mount.
"""

from typing import Sequence

import numpy as np

# chamber angles psi_j = 2*pi*(j-1)/3
CHAMBER_ANGLES = 2.0 * np.pi * np.arange(3) / 3.0
_CHAMBER_DIRECTIONS = np.stack([np.cos(CHAMBER_ANGLES), np.sin(CHAMBER_ANGLES)])  # (2, 3)

SMALL_ANGLE = 1e-6


def segment_curvature(pressures: np.ndarray, gain: float, length: float, softening: float) -> np.ndarray:
    """
    Curvature vector (1/mm) of one segment from its three chamber pressures.

    kappa_raw = gain * sum_j q_j (cos psi_j, sin psi_j), softened as
    kappa_raw / (1 + softening * (|kappa_raw| * length)^2).
    """
    kappa_raw = gain * (_CHAMBER_DIRECTIONS @ np.asarray(pressures, dtype=np.float64))
    bend = np.linalg.norm(kappa_raw) * length
    return kappa_raw / (1.0 + softening * bend * bend)


def arm_curvatures(pressures: np.ndarray, gains: Sequence[float], lengths: Sequence[float], softening: float) -> np.ndarray:
    """(n_segments, 2) curvatures from a flat pressure vector of 3 chambers per segment."""
    q = np.asarray(pressures, dtype=np.float64).reshape(len(lengths), 3)
    return np.stack([segment_curvature(q[i], gains[i], lengths[i], softening) for i in range(len(lengths))])


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def segment_transform(kappa: np.ndarray, length: float):
    """
    Local (rotation, displacement) of one constant-curvature arc.

    Bending plane angle phi = atan2(k_y, k_x), bend angle theta = |k| L.
    """
    k = float(np.hypot(kappa[0], kappa[1]))
    theta = k * length
    phi = float(np.arctan2(kappa[1], kappa[0]))
    if theta < SMALL_ANGLE:
        # series: (L/t)(1-cos t) = L t/2 (1 - t^2/12), (L/t) sin t = L (1 - t^2/6)
        radial = length * theta / 2.0 * (1.0 - theta * theta / 12.0)
        axial = length * (1.0 - theta * theta / 6.0)
    else:
        radius = length / theta
        radial = radius * (1.0 - np.cos(theta))
        axial = radius * np.sin(theta)
    displacement = np.array([radial * np.cos(phi), radial * np.sin(phi), axial])
    rotation = _rot_z(phi) @ _rot_y(theta) @ _rot_z(-phi)
    return rotation, displacement


def pcc_forward_kinematics(curvatures: np.ndarray, lengths: Sequence[float]) -> np.ndarray:
    """Tip position (mm) of a chain of constant-curvature segments."""
    curvatures = np.asarray(curvatures, dtype=np.float64).reshape(len(lengths), 2)
    orientation = np.eye(3)
    position = np.zeros(3)
    for kappa, length in zip(curvatures, lengths):
        rotation, displacement = segment_transform(kappa, float(length))
        position = position + orientation @ displacement
        orientation = orientation @ rotation
    return position
