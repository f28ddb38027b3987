"""Screen-space refinement: a 3-level encoder-decoder with skip connections
predicting a bounded residual on top of the rasterized RGB. Resolution is
unchanged; inputs are padded to a multiple of 8 internally and cropped back.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.nn import Conv2d, merge_params


def normalize_depth(depth: T.Tensor, alpha: T.Tensor) -> T.Tensor:
    """Min-max normalize depth over covered pixels (alpha > 0).

    Uncovered pixels map to 0; a constant depth field maps to 0.5.
    Gradients flow through the selected min/max elements.
    """
    mask = alpha.data > 0.0
    d = depth.data
    if not mask.any():
        return T.record("normalize_depth", (depth,), np.zeros_like(d),
                        lambda g: (np.zeros_like(d),))
    vals = d[mask]
    lo, hi = float(vals.min()), float(vals.max())
    rng = hi - lo
    if rng <= 0.0:
        out = np.where(mask, 0.5, 0.0).astype(d.dtype)
        return T.record("normalize_depth", (depth,), out,
                        lambda g: (np.zeros_like(d),))
    flat_idx = np.flatnonzero(mask)
    i_min = flat_idx[int(np.argmin(vals))]
    i_max = flat_idx[int(np.argmax(vals))]
    out = np.where(mask, (d - lo) / rng, 0.0).astype(d.dtype)

    def vjp(g):
        gm = np.where(mask, g, 0.0)
        gd = gm / rng
        s_g = gm.sum()
        s_gn = (gm * out).sum()
        gd_flat = gd.reshape(-1).copy()
        gd_flat[i_min] += (s_gn - s_g) / rng
        gd_flat[i_max] += -s_gn / rng
        return (gd_flat.reshape(d.shape),)

    return T.record("normalize_depth", (depth,), out, vjp)


class Refiner:
    """U-style CNN: rgb stays dominant, output = clamp(rgb + bound*tanh(raw))."""

    def __init__(self, config, dtype=None):
        self.config = config
        b = config.refiner_base
        c_in = 3 + config.feature_dim + 1 + (1 if config.refiner_uses_alpha else 0)
        rng = np.random.default_rng(config.seed + 31)
        kw = dict(stride=1, padding=1, dtype=dtype)
        self.enc1 = Conv2d(rng, c_in, b, 3, "refiner.enc1", **kw)
        self.enc2 = Conv2d(rng, b, 2 * b, 3, "refiner.enc2", **kw)
        self.enc3 = Conv2d(rng, 2 * b, 4 * b, 3, "refiner.enc3", **kw)
        self.dec2 = Conv2d(rng, 6 * b, 2 * b, 3, "refiner.dec2", **kw)
        self.dec1 = Conv2d(rng, 3 * b, b, 3, "refiner.dec1", **kw)
        self.head = Conv2d(rng, b, 3, 3, "refiner.head", zero_init=True, **kw)

    def params(self):
        return merge_params(self.enc1.params(), self.enc2.params(), self.enc3.params(),
                            self.dec2.params(), self.dec1.params(), self.head.params())

    def __call__(self, rgb, feature, depth_norm, alpha=None):
        h, w = rgb.shape[0], rgb.shape[1]
        if feature.shape[:2] != (h, w) or depth_norm.shape != (h, w):
            raise T.ShapeError(
                f"refine: resolution mismatch rgb {rgb.shape} feature {feature.shape} "
                f"depth {depth_norm.shape}")
        planes = [rgb, feature, T.reshape(depth_norm, (h, w, 1))]
        if self.config.refiner_uses_alpha:
            if alpha is None:
                raise ValueError("refine: configured to consume alpha but none given")
            planes.append(T.reshape(alpha, (h, w, 1)))
        x = T.concat(planes, axis=2)
        x = T.reshape(T.transpose(x, (2, 0, 1)), (1, -1, h, w))
        ph = (-h) % 8
        pw = (-w) % 8
        if ph or pw:
            x = T.pad2d(x, ((0, ph), (0, pw)))
        e1 = T.leaky_relu(self.enc1(x))
        e2 = T.leaky_relu(self.enc2(T.avg_pool2d(e1, 2)))
        e3 = T.leaky_relu(self.enc3(T.avg_pool2d(e2, 2)))
        d2 = T.leaky_relu(self.dec2(T.concat([T.upsample_nearest(e3, 2), e2], axis=1)))
        d1 = T.leaky_relu(self.dec1(T.concat([T.upsample_nearest(d2, 2), e1], axis=1)))
        raw = self.head(d1)
        if ph or pw:
            raw = raw[:, :, :h, :w]
        residual = self.config.residual_bound * T.tanh(raw)
        out = T.transpose(T.reshape(residual, (3, h, w)), (1, 2, 0))
        return T.clamp(rgb + out, 0.0, 1.0)
