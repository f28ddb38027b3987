"""Axis-angle / quaternion / rotation-matrix conversions and SLERP.

Quaternions are (w, x, y, z), unit-norm unless stated otherwise.
"""

from __future__ import annotations

import numpy as np


def axis_angle_to_quat(theta):
    theta = np.asarray(theta, dtype=np.float64)
    angle = np.linalg.norm(theta)
    if angle < 1e-12:
        # second-order series keeps the map smooth through zero
        half = 0.5 - angle * angle / 48.0
        return np.concatenate(([1.0 - angle * angle / 8.0], half * theta))
    axis = theta / angle
    return np.concatenate(([np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis))


def quat_to_axis_angle(q):
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    sin_half = np.linalg.norm(q[1:])
    if sin_half < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return angle * q[1:] / sin_half


def quat_to_matrix(q):
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def axis_angle_to_matrix(theta):
    return quat_to_matrix(axis_angle_to_quat(theta))


def slerp(q0, q1, t):
    """Spherical linear interpolation along the shorter great-circle arc."""
    q0 = np.asarray(q0, dtype=np.float64) / np.linalg.norm(q0)
    q1 = np.asarray(q1, dtype=np.float64) / np.linalg.norm(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 0.999999:
        out = (1.0 - t) * q0 + t * q1
        return out / np.linalg.norm(out)
    omega = np.arccos(np.clip(dot, -1.0, 1.0))
    so = np.sin(omega)
    return (np.sin((1.0 - t) * omega) / so) * q0 + (np.sin(t * omega) / so) * q1


def slerp_axis_angle(theta0, theta1, t):
    """SLERP on axis-angle inputs, returned as axis-angle."""
    q = slerp(axis_angle_to_quat(theta0), axis_angle_to_quat(theta1), t)
    return quat_to_axis_angle(q)


def rotation_about_axis(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    return axis_angle_to_matrix(axis / np.linalg.norm(axis) * angle)
