"""UV-grid anchoring of Gaussian primitives onto the deformed mesh."""

from __future__ import annotations

from ..head import TemplateTopology, grid_sampler
from ..head.uv import UVSampler


class GaussianAnchor:
    """Caches the UV->face correspondence for an n_g x n_g primitive grid.

    positions() is differentiable through the deformed vertex Tensor, so
    mesh-decoder offsets move the anchored primitives by the chain rule.
    """

    def __init__(self, topology: TemplateTopology, n_g: int):
        if n_g < 2:
            raise ValueError("n_g must be >= 2")
        self.n_g = n_g
        self.sampler: UVSampler = grid_sampler(topology, n_g)
        self.valid = self.sampler.valid

    def positions(self, vertices_t):
        return self.sampler.sample(vertices_t)
