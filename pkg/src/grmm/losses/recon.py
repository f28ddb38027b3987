"""Image reconstruction objective: L1 + (1 - SSIM) + a pluggable perceptual
term. The default perceptual term is a multi-scale gradient-domain proxy
(mean absolute difference of finite-difference image gradients at 1x, 1/2x,
1/4x); any differentiable (pred, target) -> scalar callable can replace it.
"""

from __future__ import annotations

from ..autodiff import tensor as T
from ..config import LossWeights
from .ssim import ssim


def _image_grads(x):
    gx = x[:, 1:, :] - x[:, :-1, :]
    gy = x[1:, :, :] - x[:-1, :, :]
    return gx, gy


def _to_nchw(x):
    h, w, c = x.shape
    return T.reshape(T.transpose(x, (2, 0, 1)), (1, c, h, w))


def _to_hwc(x):
    _, c, h, w = x.shape
    return T.transpose(T.reshape(x, (c, h, w)), (1, 2, 0))


def gradient_domain_proxy(pred: T.Tensor, target: T.Tensor) -> T.Tensor:
    """Edge-structure discrepancy at three scales."""
    total = None
    a, b = pred, target
    for level in range(3):
        if level:
            a = _to_hwc(T.avg_pool2d(_to_nchw(a), 2))
            b = _to_hwc(T.avg_pool2d(_to_nchw(b), 2))
        gxa, gya = _image_grads(a)
        gxb, gyb = _image_grads(b)
        term = T.mean(T.abs_(gxa - gxb)) + T.mean(T.abs_(gya - gyb))
        total = term if total is None else total + term
    return total


def reconstruction_loss(pred: T.Tensor, target: T.Tensor,
                        weights: LossWeights | None = None,
                        perceptual=None, terms: dict | None = None) -> T.Tensor:
    if pred.shape != target.shape:
        raise T.ShapeError(f"reconstruction_loss: shapes differ {pred.shape} vs {target.shape}")
    w = weights or LossWeights()
    perceptual = perceptual or gradient_domain_proxy
    l1 = T.mean(T.abs_(pred - target))
    sim = ssim(pred, target)
    perc = perceptual(pred, target)
    if terms is not None:
        terms["l1"] = float(l1.data)
        terms["ssim"] = float(sim.data)
        terms["perc"] = float(perc.data)
    return w.l1 * l1 + w.ssim * (1.0 - sim) + w.perc * perc


def psnr(pred, target, cap=99.0):
    """10 log10(1/MSE) on [0,1] images, capped for identical inputs."""
    import numpy as np
    a = pred.data if isinstance(pred, T.Tensor) else np.asarray(pred)
    b = target.data if isinstance(target, T.Tensor) else np.asarray(target)
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse <= 0.0:
        return cap
    return min(10.0 * np.log10(1.0 / mse), cap)
