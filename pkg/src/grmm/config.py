"""Dataclass configs with desk-scale defaults and paper-scale presets."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace


@dataclass
class LossWeights:
    l1: float = 0.8
    ssim: float = 0.2
    perc: float = 0.04
    z: float = 0.001
    lap: float = 0.01
    scale: float = 0.1
    depth: float = 0.5
    loc: float = 0.1

    def as_dict(self):
        return asdict(self)


@dataclass
class HeadConfig:
    """Toy linear 3DMM dimensions and articulation layout."""

    n_lat: int = 40
    n_lon: int = 48
    n_id_basis: int = 8
    n_exp_basis: int = 16
    seed: int = 1234


@dataclass
class ModelConfig:
    z_id_dim: int = 64
    z_exp_dim: int = 32
    alpha_id_dim: int = 8
    alpha_exp_dim: int = 16
    n_g: int = 64
    f_base_dim: int = 128
    mesh_hidden: int = 256
    film_hidden: int = 128
    conv_base: int = 128
    feature_dim: int = 32
    refiner_base: int = 8
    residual_bound: float = 0.5
    no_residuals: bool = False
    no_mesh_decoder: bool = False
    no_refiner: bool = False
    refiner_uses_alpha: bool = False
    seed: int = 0
    head: HeadConfig = field(default_factory=HeadConfig)

    @property
    def n_prim(self):
        return self.n_g * self.n_g

    def id_code_dim(self):
        return self.alpha_id_dim if self.no_residuals else self.z_id_dim

    def exp_code_dim(self):
        return self.alpha_exp_dim if self.no_residuals else self.z_exp_dim


def paper_scale_config() -> ModelConfig:
    """Published-scale dimensions; far beyond desk hardware, kept as a preset."""
    return ModelConfig(z_id_dim=512, z_exp_dim=256, alpha_id_dim=300,
                       alpha_exp_dim=100, n_g=512, f_base_dim=512,
                       mesh_hidden=256, conv_base=256)


@dataclass
class RenderConfig:
    tile_size: int = 16
    sigma_cutoff: float | None = 3.0
    alpha_min: float = 1e-4
    alpha_clamp: float = 0.99
    t_min: float = 1e-4
    dilation: float = 0.3
    z_near: float = 0.05
    threads: int = 1


@dataclass
class SceneSpec:
    n_identities: int = 4
    n_expressions: int = 6
    n_views: int = 8
    height: int = 128
    width: int = 128
    seed: int = 0
    detail_amplitude: float = 0.35
    texture_scale: float = 1.6
    specular: float = 0.35
    heldout_identities: int = 1
    heldout_views: int = 2


@dataclass
class TrainConfig:
    iterations: int = 20000
    lr: float = 1e-4
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    eval_interval: int = 1000
    checkpoint_interval: int = 5000
    log_interval: int = 50
    threads: int = 1


@dataclass
class FitConfig:
    stage1_iterations: int = 400
    stage2_iterations: int = 500
    stage1_lr: float = 1e-2
    stage2_lr: float = 1e-5
    lambda_z: float = 0.001
    lambda_loc: float = 0.1
    t_interp: float = 0.3
    seed: int = 0


def desk_config() -> ModelConfig:
    return ModelConfig()


def tiny_config(n_g: int = 4) -> ModelConfig:
    """Miniature model for gradient checks and fast tests."""
    return ModelConfig(z_id_dim=6, z_exp_dim=4, alpha_id_dim=3, alpha_exp_dim=3,
                       n_g=n_g, f_base_dim=8, mesh_hidden=16, film_hidden=8,
                       conv_base=8, feature_dim=32, refiner_base=4,
                       head=HeadConfig(n_lat=10, n_lon=12, n_id_basis=3, n_exp_basis=3))


def config_from_dict(d: dict) -> ModelConfig:
    head = HeadConfig(**d.pop("head")) if "head" in d else HeadConfig()
    return ModelConfig(head=head, **d)


def config_to_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)


def with_ablations(cfg: ModelConfig, *, no_residuals=None, no_mesh_decoder=None,
                   no_refiner=None) -> ModelConfig:
    kw = {}
    if no_residuals is not None:
        kw["no_residuals"] = no_residuals
    if no_mesh_decoder is not None:
        kw["no_mesh_decoder"] = no_mesh_decoder
    if no_refiner is not None:
        kw["no_refiner"] = no_refiner
    return replace(cfg, **kw)
