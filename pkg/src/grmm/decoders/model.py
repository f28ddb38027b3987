"""Full decoder set and residual codebooks.

Conditioning is deliberately literal: the opacity decoder sees only the
identity code, the appearance decoder sees identity plus view direction,
the transform decoder sees identity plus expression, and the mesh decoder
sees codes, expression coefficients and pose. The no-residuals ablation
swaps the learned codes for the base-model coefficients everywhere.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.nn import merge_params
from ..config import ModelConfig
from ..head import TemplateTopology, base_mesh
from .networks import ConvDecoder, MeshDecoder, flatten_map


class Codebooks:
    """One identity code per training identity; one expression code per
    distinct expression label, shared across identities."""

    def __init__(self, n_identities, n_expressions, id_dim, exp_dim, seed=0, dtype=None):
        rng = np.random.default_rng(seed + 77)
        dt = dtype or T.DEFAULT_DTYPE
        self.identity = [
            T.parameter((rng.standard_normal(id_dim) * 0.01).astype(dt), name=f"codebook.id.{i}")
            for i in range(n_identities)
        ]
        self.expression = [
            T.parameter((rng.standard_normal(exp_dim) * 0.01).astype(dt), name=f"codebook.exp.{e}")
            for e in range(n_expressions)
        ]

    def params(self):
        return merge_params({t.name: t for t in self.identity},
                            {t.name: t for t in self.expression})

    def mean_identity(self):
        return np.mean([t.data for t in self.identity], axis=0)

    def mean_expression(self):
        return np.mean([t.data for t in self.expression], axis=0)


class GRMM:
    """Decoder bundle operating in canonical head space."""

    def __init__(self, config: ModelConfig, topology: TemplateTopology, dtype=None):
        self.config = config
        self.topology = topology
        self.dtype = dtype or T.DEFAULT_DTYPE
        rng = np.random.default_rng(config.seed)
        id_dim = config.id_code_dim()
        exp_dim = config.exp_code_dim()
        kw = dict(dtype=self.dtype)
        self.mesh = None
        if not config.no_mesh_decoder:
            self.mesh = MeshDecoder(rng, id_dim, exp_dim, config.alpha_exp_dim,
                                    topology.n_vertices, hidden=config.mesh_hidden,
                                    f_base=config.f_base_dim,
                                    film_hidden=config.film_hidden, **kw)
        self.transform = ConvDecoder(rng, id_dim + exp_dim, 10, config.n_g, "transform",
                                     base_channels=config.conv_base, zero_final=True, **kw)
        self.opacity = ConvDecoder(rng, id_dim, 1, config.n_g, "opacity",
                                   base_channels=config.conv_base, **kw)
        self.appearance = ConvDecoder(rng, id_dim + 3, 3 + config.feature_dim, config.n_g,
                                      "appearance", base_channels=config.conv_base, **kw)
        mask = 1.0 - topology.teeth_mask().astype(self.dtype)
        self._teeth_keep = T.constant(mask[:, None], dtype=self.dtype)

    def params(self):
        maps = [self.transform.params(), self.opacity.params(), self.appearance.params()]
        if self.mesh is not None:
            maps.append(self.mesh.params())
        return merge_params(*maps)

    # individual decoders -------------------------------------------------

    def decode_mesh(self, id_code, exp_code, alpha_exp, theta_neck, theta_jaw, v_rec):
        """Deformed vertices v_d = v_rec + v_id + mask * v_exp."""
        if self.mesh is None:
            v_d = T.constant(v_rec, dtype=self.dtype)
            zero = T.constant(np.zeros_like(v_rec), dtype=self.dtype)
            return v_d, zero, zero
        v_id, v_exp = self.mesh(id_code, exp_code, alpha_exp,
                                T.constant(theta_neck, dtype=self.dtype),
                                T.constant(theta_jaw, dtype=self.dtype))
        v_exp_masked = v_exp * self._teeth_keep
        v_d = T.constant(v_rec, dtype=self.dtype) + v_id + v_exp_masked
        return v_d, v_id, v_exp_masked

    def decode_transform(self, id_code, exp_code):
        return self.transform(T.concat([id_code, exp_code]))

    def decode_opacity(self, id_code):
        return T.sigmoid(self.opacity(id_code))

    def decode_appearance(self, id_code, view_dir):
        d = np.asarray(view_dir, dtype=np.float64)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-6:
            self.nonunit_view_dirs = getattr(self, "nonunit_view_dirs", 0) + 1
            d = d / n
        raw = self.appearance(T.concat([id_code, T.constant(d, dtype=self.dtype)]))
        color = T.sigmoid(raw[:, :3])
        feature = raw[:, 3:]
        return T.concat([color, feature], axis=1)

    # full forward ---------------------------------------------------------

    def forward(self, id_code, exp_code, alpha_exp, theta_neck, theta_jaw,
                view_dir, v_rec):
        """All decoder outputs for one frame.

        id_code/exp_code: Tensors (residual codes, or alpha coefficients in
        the no-residuals ablation). alpha_exp/theta/view_dir: arrays.
        """
        alpha_t = T.constant(np.asarray(alpha_exp), dtype=self.dtype)
        v_d, v_id, v_exp = self.decode_mesh(id_code, exp_code, alpha_t,
                                            theta_neck, theta_jaw, v_rec)
        tmap = self.decode_transform(id_code, exp_code)
        omap = self.decode_opacity(id_code)
        amap = self.decode_appearance(id_code, view_dir)
        flat_t = flatten_map(tmap)
        flat_a = flatten_map(amap)
        return {
            "v_d": v_d, "v_delta_id": v_id, "v_delta_exp": v_exp,
            "delta_p": flat_t[:, 0:3],
            "delta_r": flat_t[:, 3:7],
            "delta_s": flat_t[:, 7:10],
            "opacity": T.reshape(flatten_map(omap), (-1,)),
            "color": flat_a[:, :3],
            "feature": flat_a[:, 3:],
        }

    def codes_for_frame(self, codebooks, params, identity_index, expression_index):
        """Input code pair: learned residual codes, or base coefficients
        under the no-residuals ablation."""
        if self.config.no_residuals:
            return (T.constant(params.alpha_id, dtype=self.dtype),
                    T.constant(params.alpha_exp, dtype=self.dtype))
        return codebooks.identity[identity_index], codebooks.expression[expression_index]


def rest_mesh(topology, params):
    """Tracked/base mesh for a frame (canonical space, pose applied to camera)."""
    return base_mesh(topology, params).vertices
