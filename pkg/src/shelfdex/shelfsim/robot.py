"""7-DoF arm + 15-DoF hand kinematics.

The arm is a roll-pitch alternating serial chain (axes z,x,z,x,z,x,z in the
moving frame) whose links extend along the local +z axis. The base mount is
tilted so the all-zero pose points the folded chain horizontally away from
the shelf, low and clear of every camera sightline.

Each finger is a 3-link planar chain in the palm frame: finger f is rooted on
a palm circle at a fixed azimuth, points along the palm approach axis when
straight, and curls toward the palm center axis as its joints flex. This is a
stated stand-in; no hand-vendor kinematics are modeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shelfdex.errors import DimensionError, StateError
from shelfdex.shelfsim.geometry import AXIS_ROT, rot_x

ARM_LINK_LENGTHS = np.array([0.10, 0.25, 0.05, 0.25, 0.05, 0.10, 0.08])
ARM_AXES = "zxzxzxz"
ARM_LINK_RADII = np.array([0.045, 0.045, 0.040, 0.040, 0.035, 0.030, 0.025])
FINGER_LINK_LENGTHS = np.array([0.04, 0.03, 0.02])
FINGER_LINK_RADIUS = 0.010
FINGERTIP_RADIUS = 0.008

BASE_POS = np.array([0.0, -0.22, 0.55])
BASE_ROT = rot_x(np.pi / 2.0)  # local +z -> world -y at the zero pose

PALM_RADIUS = 0.035
# thumb opposed across the palm from four curl fingers; azimuths in the palm
# x-y plane, order (thumb, index, middle, ring, little)
FINGER_BASE_ANGLES = np.deg2rad([180.0, -54.0, -18.0, 18.0, 54.0])
FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")

ARM_LIMITS = np.array([[-2.97, 2.97]] * 7)
HAND_LIMITS = np.array([[-0.35, 1.65]] * 15)
JOINT_LIMITS = np.vstack([ARM_LIMITS, HAND_LIMITS])

# all-zero reference pose: palm at BASE_POS + BASE_ROT @ (0, 0, sum(lengths))
HOME_PALM_POS = BASE_POS + BASE_ROT @ np.array([0.0, 0.0, ARM_LINK_LENGTHS.sum()])

# episode start: palm folded just below the shelf opening facing forward,
# collision-free and clear of camera sightlines into the tiers (checked in
# tests); derived once by inverse kinematics for palm (0, -0.12, 0.38), +y
READY_Q_ARM = np.array([-0.217, 0.414, 0.225, 2.563, -0.475, 0.196, 0.456])
READY_Q_HAND = np.full(15, -0.05)


@dataclass
class RobotState:
    q_arm: np.ndarray
    q_hand: np.ndarray

    def __post_init__(self):
        self.q_arm = np.asarray(self.q_arm, float)
        self.q_hand = np.asarray(self.q_hand, float)
        if self.q_arm.shape != (7,) or self.q_hand.shape != (15,):
            raise DimensionError("RobotState needs 7 arm and 15 hand joints")

    @property
    def s(self) -> np.ndarray:
        """Proprioceptive vector, length 22."""
        return np.concatenate([self.q_arm, self.q_hand])

    @staticmethod
    def from_s(s: np.ndarray) -> "RobotState":
        s = np.asarray(s, float)
        if s.shape != (22,):
            raise DimensionError("state vector must have length 22")
        return RobotState(s[:7].copy(), s[7:].copy())

    @staticmethod
    def ready() -> "RobotState":
        return RobotState(READY_Q_ARM.copy(), READY_Q_HAND.copy())

    @staticmethod
    def home() -> "RobotState":
        return RobotState(np.zeros(7), np.zeros(15))

    def copy(self) -> "RobotState":
        return RobotState(self.q_arm.copy(), self.q_hand.copy())

    def within_limits(self, tol: float = 1e-9) -> bool:
        s = self.s
        return bool(np.all(s >= JOINT_LIMITS[:, 0] - tol) and np.all(s <= JOINT_LIMITS[:, 1] + tol))


def clamp_to_limits(s: np.ndarray) -> np.ndarray:
    return np.clip(s, JOINT_LIMITS[:, 0], JOINT_LIMITS[:, 1])


@dataclass
class FkResult:
    joints: np.ndarray        # (8, 3) arm joint positions, base .. palm
    palm_pos: np.ndarray      # (3,)
    palm_rot: np.ndarray      # (3, 3), columns = palm x, y, z (z = approach)
    finger_points: np.ndarray  # (5, 4, 3) base + after each finger link
    fingertips: np.ndarray    # (5, 3)
    joint_axes: np.ndarray | None = None  # (7, 3) world rotation axes (for IK)

    def arm_segments(self):
        """(p0, p1, radius) per arm link."""
        return self.joints[:-1], self.joints[1:], ARM_LINK_RADII

    def finger_segments(self):
        p0 = self.finger_points[:, :-1, :].reshape(-1, 3)
        p1 = self.finger_points[:, 1:, :].reshape(-1, 3)
        radii = np.full(p0.shape[0], FINGER_LINK_RADIUS)
        return p0, p1, radii


def forward_kinematics(state: RobotState, check_limits: bool = True) -> FkResult:
    """Deterministic chain evaluation; raises StateError outside joint limits."""
    if check_limits and not state.within_limits():
        raise StateError("joint outside configured limit interval")
    pos = BASE_POS.copy()
    rot = BASE_ROT.copy()
    joints = [pos.copy()]
    axes = np.zeros((7, 3))
    axis_col = {"x": 0, "y": 1, "z": 2}
    for i, (axis, q, length) in enumerate(zip(ARM_AXES, state.q_arm, ARM_LINK_LENGTHS)):
        axes[i] = rot[:, axis_col[axis]]  # rotation leaves its own axis fixed
        rot = rot @ AXIS_ROT[axis](q)
        pos = pos + rot[:, 2] * length
        joints.append(pos.copy())
    palm_pos = pos
    palm_rot = rot

    finger_points = finger_chain(palm_pos, palm_rot, state.q_hand)
    return FkResult(
        joints=np.array(joints),
        palm_pos=palm_pos,
        palm_rot=palm_rot,
        finger_points=finger_points,
        fingertips=finger_points[:, 3, :].copy(),
        joint_axes=axes,
    )


def finger_chain(palm_pos: np.ndarray, palm_rot: np.ndarray, q_hand: np.ndarray) -> np.ndarray:
    """Finger joint positions (5, 4, 3) for a palm frame; fingers point along
    the approach axis when straight and curl toward the palm center axis."""
    finger_points = np.zeros((5, 4, 3))
    for f in range(5):
        ang = FINGER_BASE_ANGLES[f]
        radial = np.cos(ang) * palm_rot[:, 0] + np.sin(ang) * palm_rot[:, 1]
        base = palm_pos + PALM_RADIUS * radial
        finger_points[f, 0] = base
        curl = 0.0
        p = base
        for k in range(3):
            curl += q_hand[3 * f + k]
            direction = np.cos(curl) * palm_rot[:, 2] - np.sin(curl) * radial
            p = p + FINGER_LINK_LENGTHS[k] * direction
            finger_points[f, k + 1] = p
    return finger_points


def fingertip_frames(fk: FkResult):
    """Per finger: (tip center, pad normal pointing inward, tangent axes).

    The 2x2 taxel grid sits on the pad plane spanned by the last link
    direction and the lateral axis.
    """
    tips = fk.fingertips
    last_dir = fk.finger_points[:, 3, :] - fk.finger_points[:, 2, :]
    last_dir = last_dir / np.maximum(np.linalg.norm(last_dir, axis=-1, keepdims=True), 1e-12)
    return tips, last_dir
