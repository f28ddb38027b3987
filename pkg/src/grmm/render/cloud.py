"""Gaussian attribute assembly from UV-anchored positions and decoder maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import tensor as T


@dataclass
class GaussianCloud:
    """Per-primitive attributes; fields are autodiff Tensors.

    p: (N,3) positions, r: (N,4) unit quaternions, s: (N,3) positive scales,
    o: (N,) opacity in (0,1), c: (N,3) color in (0,1), f: (N,F) features.
    """

    p: T.Tensor
    r: T.Tensor
    s: T.Tensor
    o: T.Tensor
    c: T.Tensor
    f: T.Tensor

    @property
    def n(self):
        return self.p.shape[0]


SCALE_CLAMP = (-8.0, 4.0)
IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def activate_scale(raw: T.Tensor) -> T.Tensor:
    """Positive scales via exp of a clamped raw channel."""
    return T.exp(T.clamp(raw, *SCALE_CLAMP))


def assemble_attributes(p_in: T.Tensor, decoded: dict, valid_mask: np.ndarray) -> GaussianCloud:
    """Eq-style attribute update: p = p_in + delta_p, r/s from raw channels.

    decoded: dict with delta_p, delta_r, delta_s, opacity, color, feature
    flattened in row-major UV order (cell (i,j) -> index i*n_g + j).
    Invalid UV cells get zero opacity so they never contribute.
    """
    dtype = p_in.data.dtype
    p = p_in + decoded["delta_p"]
    q_raw = T.constant(IDENTITY_QUAT[None, :], dtype=dtype) + decoded["delta_r"]
    norm = T.sqrt(T.sum_(q_raw * q_raw, axis=1, keepdims=True))
    r = q_raw / norm
    s = activate_scale(decoded["delta_s"])
    keep = T.constant(valid_mask.astype(dtype))
    o = decoded["opacity"] * keep
    return GaussianCloud(p=p, r=r, s=s, o=o, c=decoded["color"], f=decoded["feature"])


def raw_cloud(p, r, s, o, c, f, requires_grad=False, dtype=None):
    """Cloud from plain arrays (tests, benchmarks)."""
    def mk(x):
        t = T.Tensor(np.asarray(x, dtype=dtype), requires_grad=requires_grad)
        return t
    return GaussianCloud(p=mk(p), r=mk(r), s=mk(s), o=mk(o), c=mk(c), f=mk(f))
