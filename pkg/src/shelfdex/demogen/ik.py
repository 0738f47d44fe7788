"""Damped-least-squares palm IK with analytic Jacobians, a backtracking line
search, and a bank of reach-posture seeds. Deterministic."""

from __future__ import annotations

import numpy as np

from shelfdex.shelfsim.robot import ARM_LIMITS, RobotState, forward_kinematics

W_AXIS = 0.35   # weight of the approach-axis alignment error
W_ROLL = 0.15   # weight of the palm-roll alignment error
POS_TOL = 8e-4
AXIS_TOL = 0.995
ROLL_TOL = 0.98

# reach postures mined from a workspace sweep; cover low/mid/high targets and
# lateral leans
IK_SEEDS = (
    np.array([0.0, -2.4, 0.5, -0.9, 0.2, 0.2, 0.0]),
    np.array([0.0, -2.0, 0.0, -1.2, 0.0, 0.4, 0.0]),
    np.array([0.0, -2.75, 2.0, -0.9, -2.75, -0.8, 0.0]),
    np.array([0.0, 1.9, 0.3, 0.74, -0.44, 0.72, 0.0]),
    np.array([0.0, 2.2, 0.0, 1.0, 0.0, 0.6, 0.0]),
    np.array([0.8, -2.2, 0.4, -1.0, 0.0, 0.3, 0.0]),
    np.array([-0.8, -2.2, -0.4, -1.0, 0.0, 0.3, 0.0]),
)


def approach_frame(approach, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Desired palm rotation: z = approach, x horizontal-ish from the up hint."""
    z = np.asarray(approach, float)
    z = z / np.linalg.norm(z)
    x = np.cross(np.asarray(up, float), z)
    if np.linalg.norm(x) < 1e-6:
        x = np.cross(np.array([0.0, 1.0, 0.0]), z)
    x = x / np.linalg.norm(x)
    return np.stack([x, np.cross(z, x), z], axis=1)


def _error(fk, target, rd):
    # palm roll is hemisphere-agnostic: the finger ring grasps with either
    # polarity, and pinning one side creates a zero-gradient manifold
    xd = rd[:, 0] if fk.palm_rot[:, 0] @ rd[:, 0] >= 0 else -rd[:, 0]
    e = np.concatenate(
        [
            target - fk.palm_pos,
            W_AXIS * np.cross(fk.palm_rot[:, 2], rd[:, 2]),
            W_ROLL * np.cross(fk.palm_rot[:, 0], xd),
        ]
    )
    return e, xd


def solve_from(target, rd, q0, iters: int = 160, lam: float = 0.08):
    q = np.asarray(q0, float).copy()
    fk = forward_kinematics(RobotState(q, np.zeros(15)), check_limits=False)
    e, xd = _error(fk, target, rd)
    cost = e @ e
    for _ in range(iters):
        ax = fk.joint_axes
        pj = fk.joints[:7]
        jp = np.cross(ax, fk.palm_pos[None, :] - pj).T
        jz = -W_AXIS * np.cross(np.cross(ax, fk.palm_rot[:, 2][None, :]), rd[:, 2][None, :]).T
        jx = -W_ROLL * np.cross(np.cross(ax, fk.palm_rot[:, 0][None, :]), xd[None, :]).T
        jac = np.vstack([jp, jz, jx])
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam * lam * np.eye(9), e)
        improved = False
        for alpha in (1.0, 0.5, 0.25, 0.1, 0.03):
            q_try = np.clip(q + alpha * np.clip(dq, -0.5, 0.5), ARM_LIMITS[:, 0], ARM_LIMITS[:, 1])
            fk_try = forward_kinematics(RobotState(q_try, np.zeros(15)), check_limits=False)
            e_try, xd_try = _error(fk_try, target, rd)
            if e_try @ e_try < cost * (1.0 - 1e-12):
                q, fk, e, xd, cost = q_try, fk_try, e_try, xd_try, e_try @ e_try
                improved = True
                break
        if not improved:
            break
        if (
            np.linalg.norm(target - fk.palm_pos) < POS_TOL
            and fk.palm_rot[:, 2] @ rd[:, 2] > AXIS_TOL
            and abs(fk.palm_rot[:, 0] @ rd[:, 0]) > ROLL_TOL
        ):
            return q, True
    return q, False


def solve_palm_ik(target, approach, q_init=None):
    """Arm joints reaching the palm target with the given approach axis.
    Warm-starts from q_init, then falls back to the seed bank. Returns
    (q_arm, ok)."""
    target = np.asarray(target, float)
    rd = approach_frame(approach)
    seeds = list(IK_SEEDS)
    if q_init is not None:
        seeds.insert(0, np.asarray(q_init, float))
    q_last = seeds[0]
    for s in seeds:
        q, ok = solve_from(target, rd, s)
        q_last = q
        if ok:
            return q, True
    return q_last, False
