"""Regularizers: piecewise scale penalty, code norms, mesh Laplacian energy."""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..config import LossWeights

SCALE_LO = 0.1
SCALE_HI = 10.0
SCALE_FLOOR = 1e-7


def scale_reg(s: T.Tensor) -> T.Tensor:
    """Mean over entries of: 1/max(s,1e-7) below 0.1, (s-10)^2 above 10, else 0."""
    x = s.data
    below = x < SCALE_LO
    above = x > SCALE_HI
    floored = np.maximum(x, SCALE_FLOOR)
    vals = np.where(below, 1.0 / floored, np.where(above, (x - SCALE_HI) ** 2, 0.0))
    out = np.array(vals.mean(), dtype=x.dtype)
    n = x.size

    def vjp(g):
        d = np.where(below & (x > SCALE_FLOOR), -1.0 / (floored * floored),
                     np.where(above, 2.0 * (x - SCALE_HI), 0.0))
        return ((g / n) * d.astype(x.dtype),)

    return T.record("scale_reg", (s,), out, vjp)


def laplacian_op(deg, edges, d: T.Tensor) -> T.Tensor:
    """(L d) with uniform weights; L is symmetric so the vjp reapplies it."""

    def apply_l(arr):
        out = deg[:, None].astype(arr.dtype) * arr
        np.subtract.at(out, edges[:, 0], arr[edges[:, 1]])
        np.subtract.at(out, edges[:, 1], arr[edges[:, 0]])
        return out

    return T.record("laplacian", (d,), apply_l(d.data), lambda g: (apply_l(g),))


def laplacian_energy_t(deg, edges, v_d: T.Tensor, v_ref) -> T.Tensor:
    """Mean squared row norm of L (v_d - v_ref)."""
    if not isinstance(v_ref, T.Tensor):
        v_ref = T.constant(np.asarray(v_ref), dtype=v_d.dtype)
    disp = v_d - v_ref
    ld = laplacian_op(deg, edges, disp)
    return T.mean(T.sum_(ld * ld, axis=1))


def code_norm(z_id: T.Tensor, z_exp: T.Tensor) -> T.Tensor:
    return T.sum_(z_id * z_id) + T.sum_(z_exp * z_exp)


def regularization_loss(z_id, z_exp, scales, v_d, v_ref, deg, edges,
                        weights: LossWeights | None = None,
                        terms: dict | None = None) -> T.Tensor:
    w = weights or LossWeights()
    l_s = scale_reg(scales)
    l_z = code_norm(z_id, z_exp)
    l_lap = laplacian_energy_t(deg, edges, v_d, v_ref)
    if terms is not None:
        terms["scale"] = float(l_s.data)
        terms["z"] = float(l_z.data)
        terms["lap"] = float(l_lap.data)
    return w.scale * l_s + w.z * l_z + w.lap * l_lap
