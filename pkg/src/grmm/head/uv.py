"""Barycentric UV-space sampling with a cached face correspondence.

The correspondence (face id + barycentric weights per sample) is resolved
once on the template; re-evaluating on a deformed vertex set reuses it, so
sampled positions stay differentiable through the vertices.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from .topology import TemplateTopology


def uv_grid(n_g):
    """Cell-center UV lattice; cell (row i, col j) -> sample index i*n_g + j."""
    c = (np.arange(n_g) + 0.5) / n_g
    u, v = np.meshgrid(c, c, indexing="xy")
    return np.stack([u.reshape(-1), v.reshape(-1)], axis=1)


def locate_uv(topology: TemplateTopology, points):
    """Resolve each UV point to (face id, barycentric weights, valid flag).

    Points outside every chart get face -1 and zero weights; on shared
    edges the lowest face id wins so every valid point maps to exactly
    one face.
    """
    pts = np.asarray(points, dtype=np.float64)
    uv = topology.uv  # (F, 3, 2)
    a, b, c = uv[:, 0], uv[:, 1], uv[:, 2]
    v0 = b - a
    v1 = c - a
    den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    ok = np.abs(den) > 1e-14

    face = np.full(len(pts), -1, dtype=np.int64)
    wout = np.zeros((len(pts), 3))
    eps = 1e-9
    # vectorized over faces per point-chunk; charts are small so this is fast
    chunk = 1024
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]                        # (P, 2)
        d = p[:, None, :] - a[None, :, :]           # (P, F, 2)
        wb = (d[..., 0] * v1[None, :, 1] - d[..., 1] * v1[None, :, 0]) / np.where(ok, den, 1.0)
        wc = (v0[None, :, 0] * d[..., 1] - v0[None, :, 1] * d[..., 0]) / np.where(ok, den, 1.0)
        wa = 1.0 - wb - wc
        inside = ok[None, :] & (wa >= -eps) & (wb >= -eps) & (wc >= -eps)
        has = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        idx = np.where(has, first, -1)
        face[s:s + chunk] = idx
        rows = np.nonzero(has)[0]
        w = np.stack([wa[rows, first[rows]], wb[rows, first[rows]], wc[rows, first[rows]]], axis=1)
        w = np.clip(w, 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        wout[s + rows] = w
    return face, wout, face >= 0


class UVSampler:
    """Cached barycentric sampler over a fixed topology and UV point set."""

    def __init__(self, topology: TemplateTopology, points):
        self.topology = topology
        self.points = np.asarray(points, dtype=np.float64)
        self.face, self.weights, self.valid = locate_uv(topology, self.points)
        safe_face = np.where(self.valid, self.face, 0)
        self.corner_ids = topology.faces[safe_face].astype(np.int64)  # (P, 3)
        self.w_masked = self.weights * self.valid[:, None]

    def positions(self, vertices: np.ndarray) -> np.ndarray:
        v = vertices[self.corner_ids]              # (P, 3, 3)
        return np.einsum("pk,pkc->pc", self.w_masked, v)

    def sample(self, vertices: T.Tensor) -> T.Tensor:
        """Differentiable positions; invalid samples produce zeros."""
        ids = self.corner_ids
        w = self.w_masked.astype(vertices.data.dtype)

        out = np.einsum("pk,pkc->pc", w, vertices.data[ids])

        def vjp(g):
            gv = np.zeros_like(vertices.data)
            np.add.at(gv, ids.reshape(-1), (w[:, :, None] * g[:, None, :]).reshape(-1, 3))
            return (gv,)

        return T.record("uv_sample", (vertices,), out, vjp)


def grid_sampler(topology: TemplateTopology, n_g: int) -> UVSampler:
    return UVSampler(topology, uv_grid(n_g))
