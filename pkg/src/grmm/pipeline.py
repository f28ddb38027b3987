"""Full forward pass: decode -> anchor -> assemble -> render -> refine."""

from __future__ import annotations

import numpy as np

from .autodiff import tensor as T
from .config import ModelConfig, RenderConfig
from .decoders import GRMM, Codebooks
from .head import TemplateTopology, base_mesh, build_head, build_laplacian
from .refine import Refiner, normalize_depth
from .render import (Camera, GaussianAnchor, assemble_attributes,
                     canonicalize_camera, render)


class Pipeline:
    """Owns the decoder bundle, refiner, and the UV anchor cache."""

    def __init__(self, config: ModelConfig, topology: TemplateTopology | None = None,
                 render_cfg: RenderConfig | None = None, dtype=None):
        self.config = config
        self.topology = topology if topology is not None else build_head(
            config.head.n_lat, config.head.n_lon, config.head.n_id_basis,
            config.head.n_exp_basis, config.head.seed)
        self.model = GRMM(config, self.topology, dtype=dtype)
        self.refiner = Refiner(config, dtype=dtype)
        self.anchor = GaussianAnchor(self.topology, config.n_g)
        self.render_cfg = render_cfg or RenderConfig()
        self.lap_deg, self.lap_edges = build_laplacian(self.topology)
        self.dtype = dtype or T.DEFAULT_DTYPE

    def params(self):
        p = dict(self.model.params())
        if not self.config.no_refiner:
            p.update(self.refiner.params())
        return p

    def rest_vertices(self, head_params):
        return base_mesh(self.topology, head_params).vertices

    def forward(self, id_code, exp_code, head_params, camera: Camera,
                refine=None, pose_tensors=None):
        """One frame end to end.

        id_code/exp_code: Tensors. head_params: HeadParams. Returns a dict
        with the packed render, refined image, cloud and mesh tensors.
        refine=None follows the config ablation flag.
        pose_tensors: optional (R Tensor, t Tensor) to get head-pose grads.
        """
        do_refine = (not self.config.no_refiner) if refine is None else refine
        v_rec = self.rest_vertices(head_params)
        if pose_tensors is not None:
            from .render.camera import canonicalize_camera_t, view_direction
            view = canonicalize_camera_t(camera, *pose_tensors)
            d = view_direction(view.data)
        else:
            view, d = canonicalize_camera(camera, head_params.rotation,
                                          head_params.translation)
        dec = self.model.forward(id_code, exp_code, head_params.alpha_exp,
                                 head_params.theta_neck, head_params.theta_jaw,
                                 d, v_rec.astype(self.dtype))
        p_in = self.anchor.positions(dec["v_d"])
        cloud = assemble_attributes(p_in, dec, self.anchor.valid)
        out = render(cloud, view, camera.K, camera.width, camera.height, self.render_cfg)
        rgb = out.rgb
        if do_refine:
            depth_norm = normalize_depth(out.depth, out.alpha)
            refined = self.refiner(rgb, out.feature, depth_norm,
                                   out.alpha if self.config.refiner_uses_alpha else None)
        else:
            refined = rgb
        return {
            "render": out, "raw_rgb": rgb, "refined": refined,
            "cloud": cloud, "decoded": dec, "v_rec": v_rec, "view": view,
            "view_dir": d,
        }

    def render_arrays(self, id_code_vec, exp_code_vec, head_params, camera,
                      refine=None):
        """Inference convenience: plain ndarray codes in, ndarray images out."""
        with T.no_grad():
            idc = T.constant(np.asarray(id_code_vec), dtype=self.dtype)
            exc = T.constant(np.asarray(exp_code_vec), dtype=self.dtype)
            res = self.forward(idc, exc, head_params, camera, refine=refine)
            out = res["render"]
            return {
                "rgb": np.clip(res["refined"].data, 0.0, 1.0),
                "raw_rgb": np.clip(res["raw_rgb"].data, 0.0, 1.0),
                "depth": out.depth.data,
                "alpha": out.alpha.data,
                "feature": out.feature.data,
            }


def make_codebooks(config: ModelConfig, n_identities, n_expressions, dtype=None):
    return Codebooks(n_identities, n_expressions, config.z_id_dim,
                     config.z_exp_dim, seed=config.seed, dtype=dtype)
