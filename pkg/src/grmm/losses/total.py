"""Training and fitting objectives assembled from the individual terms."""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..config import LossWeights
from .recon import reconstruction_loss
from .reg import code_norm, regularization_loss


def depth_loss(depth: T.Tensor, depth_gt, alpha, terms: dict | None = None) -> T.Tensor:
    """Masked L2 over pixels with valid ground-truth depth and alpha > 0.5."""
    gt = np.asarray(depth_gt)
    mask = (gt > 0.0) & (np.asarray(alpha.data if isinstance(alpha, T.Tensor) else alpha) > 0.5)
    m = T.constant(mask.astype(depth.data.dtype))
    n = max(int(mask.sum()), 1)
    diff = (depth - T.constant(gt, dtype=depth.data.dtype)) * m
    out = T.sum_(diff * diff) / float(n)
    if terms is not None:
        terms["depth"] = float(out.data)
        terms["depth_pixels"] = n
    return out


def total_training_loss(refined, raw_rgb, target, depth, depth_gt, alpha,
                        z_id, z_exp, scales, v_d, v_ref, deg, edges,
                        weights: LossWeights | None = None,
                        perceptual=None, terms: dict | None = None) -> T.Tensor:
    """Both the refined and the raw render are supervised against the same
    target; depth gets a masked L2; regularizers close the objective."""
    w = weights or LossWeights()
    t_ref, t_raw = {}, {}
    rec_refined = reconstruction_loss(refined, target, w, perceptual, t_ref)
    rec_raw = reconstruction_loss(raw_rgb, target, w, perceptual, t_raw)
    l_depth = depth_loss(depth, depth_gt, alpha, terms)
    l_reg = regularization_loss(z_id, z_exp, scales, v_d, v_ref, deg, edges, w, terms)
    total = rec_refined + rec_raw + w.depth * l_depth + l_reg
    if terms is not None:
        terms["rec_refined"] = float(rec_refined.data)
        terms["rec_raw"] = float(rec_raw.data)
        terms["reg"] = float(l_reg.data)
        terms["total"] = float(total.data)
        terms.update({f"refined_{k}": v for k, v in t_ref.items()})
        terms.update({f"raw_{k}": v for k, v in t_raw.items()})
    return total


def fit_stage1_loss(refined, raw_rgb, target, z_id, z_exp,
                    weights: LossWeights | None = None,
                    perceptual=None, terms: dict | None = None) -> T.Tensor:
    """Latent inversion objective; decoder weights stay out of the gradient set
    simply by not being optimized (codes are the only leaves updated)."""
    w = weights or LossWeights()
    rec_refined = reconstruction_loss(refined, target, w, perceptual)
    rec_raw = reconstruction_loss(raw_rgb, target, w, perceptual)
    l_z = code_norm(z_id, z_exp)
    total = rec_refined + rec_raw + w.z * l_z
    if terms is not None:
        terms["rec_refined"] = float(rec_refined.data)
        terms["rec_raw"] = float(rec_raw.data)
        terms["z"] = float(l_z.data)
        terms["total"] = float(total.data)
    return total


def locality_loss(img_tuned: T.Tensor, img_frozen,
                  weights: LossWeights | None = None, perceptual=None) -> T.Tensor:
    """Reconstruction distance between tuned and frozen renders at shared
    interpolated parameters; the frozen image is a constant."""
    frozen = img_frozen.detach() if isinstance(img_frozen, T.Tensor) else \
        T.constant(np.asarray(img_frozen), dtype=img_tuned.data.dtype)
    return reconstruction_loss(img_tuned, frozen, weights, perceptual)
