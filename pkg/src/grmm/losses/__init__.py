from .recon import gradient_domain_proxy, psnr, reconstruction_loss
from .reg import (code_norm, laplacian_energy_t, laplacian_op,
                  regularization_loss, scale_reg)
from .ssim import gaussian_window, ssim
from .total import depth_loss, fit_stage1_loss, locality_loss, total_training_loss

__all__ = [
    "gradient_domain_proxy", "psnr", "reconstruction_loss",
    "code_norm", "laplacian_energy_t", "laplacian_op",
    "regularization_loss", "scale_reg",
    "gaussian_window", "ssim",
    "depth_loss", "fit_stage1_loss", "locality_loss", "total_training_loss",
]
