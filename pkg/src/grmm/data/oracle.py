"""Oracle mesh renderer: plain z-buffer triangle rasterizer with Lambert +
Blinn-Phong shading and perspective-correct interpolation.

Deliberately a different code path from the Gaussian splatter so training
targets cannot be produced by the model's own renderer. Depth output is
camera-space z at the pixel center, matching ray-cast distances.
"""

from __future__ import annotations

import numpy as np

LIGHT_DIR = np.array([0.35, 0.45, 0.82])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)
AMBIENT = 0.36
DIFFUSE = 0.64
SPEC_POWER = 24.0


def shade(albedo, normals, points_world, cam_center, specular):
    """Per-point shading; normals flipped toward the camera (double-sided)."""
    view = cam_center[None, :] - points_world
    view = view / np.maximum(np.linalg.norm(view, axis=1, keepdims=True), 1e-12)
    n = normals / np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-12)
    flip = (n * view).sum(axis=1) < 0.0
    n = np.where(flip[:, None], -n, n)
    ndl = np.clip(n @ LIGHT_DIR, 0.0, None)
    half = LIGHT_DIR[None, :] + view
    half = half / np.maximum(np.linalg.norm(half, axis=1, keepdims=True), 1e-12)
    ndh = np.clip((n * half).sum(axis=1), 0.0, None)
    color = albedo * (AMBIENT + DIFFUSE * ndl)[:, None] + specular * (ndh ** SPEC_POWER)[:, None]
    return np.clip(color, 0.0, 1.0)


def rasterize_mesh(vertices_world, faces, albedo, camera, specular=0.0,
                   vertex_normals=None):
    """Render (rgb in [0,1], camera-z depth with 0 background)."""
    from ..head.topology import vertex_normals as vn
    if vertex_normals is None:
        vertex_normals = vn(vertices_world, faces)

    e = camera.E
    k = camera.K
    h, w = camera.height, camera.width
    cam_center = -e[:3, :3].T @ e[:3, 3]
    vc = vertices_world @ e[:3, :3].T + e[:3, 3]
    z = vc[:, 2]
    fx, fy, cx, cy = k[0, 0], k[1, 1], k[0, 2], k[1, 2]
    safe_z = np.where(z > 1e-6, z, 1.0)
    us = fx * vc[:, 0] / safe_z + cx
    vs = fy * vc[:, 1] / safe_z + cy

    rgb = np.zeros((h, w, 3), dtype=np.float64)
    depth = np.zeros((h, w), dtype=np.float64)
    zbuf = np.full((h, w), np.inf)

    for face in faces:
        i0, i1, i2 = int(face[0]), int(face[1]), int(face[2])
        if z[i0] <= 1e-4 or z[i1] <= 1e-4 or z[i2] <= 1e-4:
            continue
        xs = np.array([us[i0], us[i1], us[i2]])
        ys = np.array([vs[i0], vs[i1], vs[i2]])
        x0 = max(int(np.floor(xs.min() - 0.5)), 0)
        x1 = min(int(np.ceil(xs.max() + 0.5)), w - 1)
        y0 = max(int(np.floor(ys.min() - 0.5)), 0)
        y1 = min(int(np.ceil(ys.max() + 0.5)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        denom = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0])
        if abs(denom) < 1e-12:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(px, py)
        dx0, dy0 = gx - xs[0], gy - ys[0]
        # p = a + lb*(b-a) + lc*(c-a), solved by 2-D cross products
        lb = (dx0 * (ys[2] - ys[0]) - dy0 * (xs[2] - xs[0])) / denom
        lc = ((xs[1] - xs[0]) * dy0 - (ys[1] - ys[0]) * dx0) / denom
        la = 1.0 - lb - lc
        inside = (la >= 0) & (lb >= 0) & (lc >= 0)
        if not inside.any():
            continue
        iz = la / z[i0] + lb / z[i1] + lc / z[i2]
        zpix = 1.0 / np.maximum(iz, 1e-12)
        rows, cols = np.nonzero(inside)
        zi = zpix[rows, cols]
        ok = zi < zbuf[y0 + rows, x0 + cols]
        if not ok.any():
            continue
        rows, cols, zi = rows[ok], cols[ok], zi[ok]
        wa = (la[rows, cols] / z[i0]) * zi
        wb = (lb[rows, cols] / z[i1]) * zi
        wc = (lc[rows, cols] / z[i2]) * zi
        pts = (wa[:, None] * vertices_world[i0] + wb[:, None] * vertices_world[i1]
               + wc[:, None] * vertices_world[i2])
        nrm = (wa[:, None] * vertex_normals[i0] + wb[:, None] * vertex_normals[i1]
               + wc[:, None] * vertex_normals[i2])
        alb = (wa[:, None] * albedo[i0] + wb[:, None] * albedo[i1]
               + wc[:, None] * albedo[i2])
        col = shade(alb, nrm, pts, cam_center, specular)
        zbuf[y0 + rows, x0 + cols] = zi
        rgb[y0 + rows, x0 + cols] = col
        depth[y0 + rows, x0 + cols] = zi
    return rgb, depth
