"""Decoder networks: shared-MLP mesh decoder with FiLM conditioning, and
convolutional UV-map decoders for per-primitive attributes."""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.nn import Conv2d, ConvTranspose2d, Linear, merge_params


class MeshDecoder:
    """Vertex displacement decoder.

    A shared MLP fuses the identity code with neck/jaw pose; an identity
    head maps it to per-vertex offsets; the expression path concatenates
    the expression code and modulates it with FiLM(alpha_exp) before its
    own head. Both heads are zero-initialized so the model starts at the
    base mesh.
    """

    def __init__(self, rng, id_dim, exp_dim, alpha_exp_dim, n_vertices,
                 hidden=256, f_base=128, film_hidden=128, dtype=None):
        self.n_vertices = n_vertices
        self.f_base = f_base
        self.f_exp = f_base + exp_dim
        d = dict(dtype=dtype)
        self.shared = [
            Linear(rng, id_dim + 6, hidden, "mesh.shared0", **d),
            Linear(rng, hidden, hidden, "mesh.shared1", **d),
            Linear(rng, hidden, f_base, "mesh.shared2", **d),
        ]
        self.head_id = [
            Linear(rng, f_base, hidden, "mesh.id0", **d),
            Linear(rng, hidden, hidden, "mesh.id1", **d),
            Linear(rng, hidden, n_vertices * 3, "mesh.id2", zero_init=True, **d),
        ]
        self.film = [
            Linear(rng, alpha_exp_dim, film_hidden, "mesh.film0", **d),
            Linear(rng, film_hidden, 2 * self.f_exp, "mesh.film1", **d),
        ]
        self.head_exp = [
            Linear(rng, self.f_exp, hidden, "mesh.exp0", **d),
            Linear(rng, hidden, hidden, "mesh.exp1", **d),
            Linear(rng, hidden, n_vertices * 3, "mesh.exp2", zero_init=True, **d),
        ]

    def _mlp(self, layers, x):
        for lyr in layers[:-1]:
            x = T.leaky_relu(lyr(x))
        return layers[-1](x)

    def __call__(self, id_code, exp_code, alpha_exp, theta_neck, theta_jaw):
        pose = T.concat([id_code, theta_neck, theta_jaw])
        f_base = self._mlp(self.shared, pose)
        v_id = T.reshape(self._mlp(self.head_id, f_base), (self.n_vertices, 3))
        f_exp = T.concat([f_base, exp_code])
        film_out = self._mlp(self.film, alpha_exp)
        gamma = film_out[: self.f_exp]
        beta = film_out[self.f_exp:]
        f_mod = f_exp + gamma * f_exp + beta
        v_exp = T.reshape(self._mlp(self.head_exp, f_mod), (self.n_vertices, 3))
        return v_id, v_exp

    def params(self):
        return merge_params(*[l.params() for l in
                              self.shared + self.head_id + self.film + self.head_exp])


class ConvDecoder:
    """Seed vector -> transposed-conv pyramid -> n_g x n_g x C map."""

    def __init__(self, rng, cond_dim, out_channels, n_g, name,
                 base_channels=128, zero_final=False, dtype=None):
        if n_g < 2 or n_g & (n_g - 1):
            raise ValueError(f"{name}: n_g must be a power of two >= 2, got {n_g}")
        self.n_g = n_g
        self.out_channels = out_channels
        seed_hw = min(n_g, 4)
        n_stages = int(np.log2(n_g // seed_hw)) if n_g > seed_hw else 0
        chans = [base_channels]
        for k in range(n_stages):
            chans.append(max(base_channels // 2 ** (k + 1), 8))
        self.seed_hw = seed_hw
        self.seed = Linear(rng, cond_dim, chans[0] * seed_hw * seed_hw, f"{name}.seed", dtype=dtype)
        self.stages = [
            ConvTranspose2d(rng, chans[k], chans[k + 1], 4, f"{name}.up{k}",
                            stride=2, padding=1, dtype=dtype)
            for k in range(n_stages)
        ]
        self.final = Conv2d(rng, chans[-1], out_channels, 3, f"{name}.out",
                            stride=1, padding=1, zero_init=zero_final, dtype=dtype)

    def __call__(self, cond):
        x = T.leaky_relu(self.seed(cond))
        x = T.reshape(x, (1, -1, self.seed_hw, self.seed_hw))
        for st in self.stages:
            x = T.leaky_relu(st(x))
        return self.final(x)           # (1, C, n_g, n_g)

    def params(self):
        return merge_params(self.seed.params(), self.final.params(),
                            *[s.params() for s in self.stages])


def flatten_map(m):
    """(1, C, n_g, n_g) -> (n_g*n_g, C) in row-major UV order."""
    _, c, h, w = m.shape
    return T.reshape(T.transpose(m, (0, 2, 3, 1)), (h * w, c))
