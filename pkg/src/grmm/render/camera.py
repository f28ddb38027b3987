"""Pinhole cameras (OpenCV axes: x right, y down, z forward) and the
composition of tracked head pose into the view transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import tensor as T


@dataclass
class Camera:
    K: np.ndarray          # 3x3 intrinsics, pixels
    E: np.ndarray          # 4x4 world-to-camera rigid transform
    width: int
    height: int

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64)
        self.E = np.asarray(self.E, dtype=np.float64)
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0 or np.any(np.abs(self.K[[1, 2, 2], [0, 0, 1]]) > 1e-9):
            raise ValueError("K must be upper-triangular with positive focal lengths")
        rot = self.E[:3, :3]
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6):
            raise ValueError("E must be rigid (orthonormal rotation)")

    def to_dict(self):
        return {"K": self.K.tolist(), "E": self.E.tolist(),
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d):
        return cls(K=np.asarray(d["K"]), E=np.asarray(d["E"]),
                   width=int(d["width"]), height=int(d["height"]))


def pose_matrix(rotation, translation):
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return m


def canonicalize_camera(camera: Camera, rotation, translation):
    """Compose head pose into the view: canonical -> world -> camera.

    Returns (view 4x4, view direction d). d is the unit vector from the
    canonical head origin to the camera center, fed to the appearance
    decoder.
    """
    rotation = np.asarray(rotation, dtype=np.float64)
    if abs(abs(np.linalg.det(rotation)) - 1.0) > 1e-6:
        raise ValueError("head rotation must be non-singular and rigid")
    view = camera.E @ pose_matrix(rotation, translation)
    d = view_direction(view)
    return view, d


def view_direction(view):
    a, b = view[:3, :3], view[:3, 3]
    center = -a.T @ b
    n = np.linalg.norm(center)
    if n < 1e-9:
        return np.array([0.0, 0.0, 1.0])
    return center / n


def canonicalize_camera_t(camera: Camera, rotation_t: T.Tensor, translation_t: T.Tensor):
    """Differentiable variant: view matrix as a Tensor for head-pose gradients."""
    e = T.constant(camera.E, dtype=rotation_t.dtype)
    top = T.concat([rotation_t, T.reshape(translation_t, (3, 1))], axis=1)
    bottom = T.constant(np.array([[0.0, 0.0, 0.0, 1.0]]), dtype=rotation_t.dtype)
    pose = T.concat([top, bottom], axis=0)
    return T.matmul(e, pose)


def orbit_camera(azimuth, elevation, distance, fov_deg, width, height, target=(0.0, 0.0, 0.0)):
    """Look-at camera on an orbit around the canonical head.

    azimuth rotates about the +y up axis (0 = front, +z), elevation lifts
    from the horizontal plane; angles in radians.
    """
    target = np.asarray(target, dtype=np.float64)
    pos = target + distance * np.array([
        np.sin(azimuth) * np.cos(elevation),
        np.sin(elevation),
        np.cos(azimuth) * np.cos(elevation),
    ])
    fwd = target - pos
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        right = np.array([1.0, 0.0, 0.0])
    else:
        right /= rn
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    e = np.eye(4)
    e[:3, :3] = rot
    e[:3, 3] = -rot @ pos
    f = 0.5 * height / np.tan(np.deg2rad(fov_deg) / 2.0)
    k = np.array([[f, 0.0, width / 2.0], [0.0, f, height / 2.0], [0.0, 0.0, 1.0]])
    return Camera(K=k, E=e, width=width, height=height)
