"""Differentiable SSIM with an 11x11 Gaussian window (sigma 1.5).

Statistics are taken over valid (fully interior) windows, per channel,
with C1=(0.01)^2, C2=(0.03)^2 for unit dynamic range.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T

WINDOW = 11
SIGMA = 1.5
C1 = 0.01 ** 2
C2 = 0.03 ** 2


def gaussian_window(n=WINDOW, sigma=SIGMA):
    x = np.arange(n) - (n - 1) / 2.0
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _blur_valid(x, win):
    """Separable valid-mode Gaussian filter on (C,1,H,W)."""
    kv = T.constant(win.reshape(1, 1, -1, 1), dtype=x.dtype)
    kh = T.constant(win.reshape(1, 1, 1, -1), dtype=x.dtype)
    return T.conv2d(T.conv2d(x, kv), kh)


def ssim(a: T.Tensor, b: T.Tensor) -> T.Tensor:
    """Mean structural similarity of two (H,W,C) or (H,W) images in [0,1]."""
    if a.shape != b.shape:
        raise T.ShapeError(f"ssim: shapes differ {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = T.reshape(a, (*a.shape, 1))
        b = T.reshape(b, (*b.shape, 1))
    h, w, c = a.shape
    if h < WINDOW or w < WINDOW:
        raise T.ShapeError(f"ssim: image {a.shape} smaller than {WINDOW}x{WINDOW} window")
    win = gaussian_window()
    xa = T.reshape(T.transpose(a, (2, 0, 1)), (c, 1, h, w))
    xb = T.reshape(T.transpose(b, (2, 0, 1)), (c, 1, h, w))
    mu_a = _blur_valid(xa, win)
    mu_b = _blur_valid(xb, win)
    var_a = _blur_valid(xa * xa, win) - mu_a * mu_a
    var_b = _blur_valid(xb * xb, win) - mu_b * mu_b
    cov = _blur_valid(xa * xb, win) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return T.mean(num / den)
