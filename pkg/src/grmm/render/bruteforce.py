"""Reference compositor: per-pixel loop over every Gaussian, exact sort,
no tiling or bounding-box culling. Correctness oracle for the tiled path."""

from __future__ import annotations

import numpy as np

from ..autodiff.tensor import Tensor
from ..config import RenderConfig
from .rasterize import _alpha_weights, _project


def render_bruteforce(cloud, view, K, width, height, cfg: RenderConfig | None = None):
    """Packed (H, W, 3+F+2) image matching render()'s layout."""
    cfg = cfg or RenderConfig()
    vd = view.data if isinstance(view, Tensor) else np.asarray(view, dtype=np.float64)
    p, q, s = cloud.p.data, cloud.r.data, cloud.s.data
    o, c, f = cloud.o.data, cloud.c.data, cloud.f.data
    n_feat = f.shape[1]
    proj = _project(p, q, s, o, vd, np.asarray(K), cfg, width, height)

    valid_ids = np.nonzero(proj["valid"])[0]
    order = valid_ids[np.argsort(proj["tz"][valid_ids], kind="stable")]
    image = np.zeros((height, width, 3 + n_feat + 2), dtype=p.dtype)
    if len(order) == 0:
        return image

    tz = proj["tz"]
    for iy in range(height):
        for ix in range(width):
            px = np.array([ix + 0.5], dtype=p.dtype)
            py = np.array([iy + 0.5], dtype=p.dtype)
            aw = _alpha_weights(proj, o, order, px, py, cfg)
            w = aw["w"][:, 0]
            acc = w.sum()
            draw = float(w @ tz[order])
            image[iy, ix, 0:3] = w @ c[order]
            image[iy, ix, 3:3 + n_feat] = w @ f[order]
            image[iy, ix, 3 + n_feat] = draw / acc if acc > 1e-4 else 0.0
            image[iy, ix, 4 + n_feat] = 1.0 - aw["t_final"][0]
    return image
