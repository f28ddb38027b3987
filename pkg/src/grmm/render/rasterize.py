"""Tiled differentiable Gaussian splatting.

Forward: project 3-D Gaussians through the canonicalized view, bin them
into pixel tiles, and alpha-composite front-to-back per pixel into RGB,
feature, expected-depth and alpha planes. Backward: hand-derived
vector-Jacobian products to every Gaussian attribute and to the view
matrix (for head-pose gradients).

The packed image layout is [rgb(3) | feature(F) | depth(1) | alpha(1)].
Per-pixel compositing order is camera depth with ties broken by primitive
index (stable sort), so results are deterministic. The per-tile loop may
run on a thread pool; each tile owns a disjoint pixel block and backward
partials are reduced in fixed tile order, keeping results bit-identical
at any fixed thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..autodiff import tensor as T
from ..config import RenderConfig


@dataclass
class RenderDiagnostics:
    skipped_degenerate: int = 0
    behind_camera: int = 0
    n_pairs: int = 0


def _quat_to_mats(q):
    """Batched unit-quaternion to rotation matrices, (N,4) -> (N,3,3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], axis=1)


def _quat_mat_vjp(q, d_r):
    """VJP of _quat_to_mats for unit q: (N,4,3,3) partials contracted with d_r."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    dw = 2 * np.stack([
        np.stack([zero, -z, y], -1),
        np.stack([z, zero, -x], -1),
        np.stack([-y, x, zero], -1)], axis=1)
    dx = 2 * np.stack([
        np.stack([zero, y, z], -1),
        np.stack([y, -2 * x, -w], -1),
        np.stack([z, w, -2 * x], -1)], axis=1)
    dy = 2 * np.stack([
        np.stack([-2 * y, x, w], -1),
        np.stack([x, zero, z], -1),
        np.stack([-w, z, -2 * y], -1)], axis=1)
    dz = 2 * np.stack([
        np.stack([-2 * z, -w, x], -1),
        np.stack([w, -2 * z, y], -1),
        np.stack([x, y, zero], -1)], axis=1)
    return np.stack([(p * d_r).sum(axis=(1, 2)) for p in (dw, dx, dy, dz)], axis=1)


def _project(p, q, s, o, view, K, cfg: RenderConfig, width, height):
    """Per-Gaussian screen-space quantities shared by forward and backward."""
    a_view = view[:3, :3]
    b_view = view[:3, 3]
    fx, fy, cx, cy = K[0, 0], K[1, 1], K[0, 2], K[1, 2]

    t = p @ a_view.T + b_view
    tz = t[:, 2]
    front = tz > cfg.z_near

    qn = np.linalg.norm(q, axis=1, keepdims=True)
    qhat = q / np.maximum(qn, 1e-12)
    rot = _quat_to_mats(qhat)
    cov3 = np.einsum("nij,nj,nkj->nik", rot, s * s, rot)

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_z = np.where(front, 1.0 / np.where(front, tz, 1.0), 0.0)
    j = np.zeros((len(p), 2, 3), dtype=p.dtype)
    j[:, 0, 0] = fx * inv_z
    j[:, 0, 2] = -fx * t[:, 0] * inv_z ** 2
    j[:, 1, 1] = fy * inv_z
    j[:, 1, 2] = -fy * t[:, 1] * inv_z ** 2
    m = j @ a_view
    cov2 = np.einsum("nij,njk,nlk->nil", m, cov3, m)
    cov2[:, 0, 0] += cfg.dilation
    cov2[:, 1, 1] += cfg.dilation

    det = cov2[:, 0, 0] * cov2[:, 1, 1] - cov2[:, 0, 1] * cov2[:, 1, 0]
    nondegenerate = det > 1e-12
    valid = front & nondegenerate & (o > cfg.alpha_min)
    safe_det = np.where(nondegenerate, det, 1.0)
    conic = np.stack([cov2[:, 1, 1], -cov2[:, 0, 1], cov2[:, 0, 0]], axis=1) / safe_det[:, None]

    mean2 = np.stack([fx * t[:, 0] * inv_z + cx, fy * t[:, 1] * inv_z + cy], axis=1)
    mid = 0.5 * (cov2[:, 0, 0] + cov2[:, 1, 1])
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    if cfg.sigma_cutoff is None:
        radius = np.full(len(p), max(width, height) * 2.0)
    else:
        radius = cfg.sigma_cutoff * np.sqrt(np.maximum(lam_max, 0.0)) + 1.0

    diag = RenderDiagnostics(
        skipped_degenerate=int((front & ~nondegenerate).sum()),
        behind_camera=int((~front).sum()),
    )
    return {
        "t": t, "tz": tz, "qhat": qhat, "qnorm": qn[:, 0], "rot": rot,
        "cov3": cov3, "j": j, "m": m, "cov2": cov2, "conic": conic,
        "mean2": mean2, "radius": radius, "valid": valid,
        "a_view": a_view, "fx": fx, "fy": fy, "diag": diag,
    }


def _alpha_weights(proj, o, sub, px, py, cfg):
    """(m, P) alpha/transmittance stack for one pixel block, depth-ordered."""
    conic = proj["conic"][sub]
    mean2 = proj["mean2"][sub]
    dx = px[None, :] - mean2[:, 0][:, None]
    dy = py[None, :] - mean2[:, 1][:, None]
    qf = conic[:, 0][:, None] * dx * dx + 2.0 * conic[:, 1][:, None] * dx * dy \
        + conic[:, 2][:, None] * dy * dy
    g = np.exp(-0.5 * np.maximum(qf, 0.0))
    alpha_raw = o[sub][:, None] * g
    inside = qf <= (cfg.sigma_cutoff ** 2 if cfg.sigma_cutoff is not None else np.inf)
    live = inside & (alpha_raw > cfg.alpha_min)
    alpha = np.where(live, np.minimum(alpha_raw, cfg.alpha_clamp), 0.0)
    t_incl = np.cumprod(1.0 - alpha, axis=0)
    t_excl = np.empty_like(t_incl)
    t_excl[0] = 1.0
    t_excl[1:] = t_incl[:-1]
    m_mask = t_excl >= cfg.t_min
    w = alpha * t_excl * m_mask
    t_final = np.prod(1.0 - alpha * m_mask, axis=0)
    return dict(dx=dx, dy=dy, qf=qf, g=g, alpha_raw=alpha_raw, alpha=alpha,
                t_excl=t_excl, m_mask=m_mask, w=w, t_final=t_final, live=live)


def _bin_tiles(proj, order, width, height, tile):
    """CSR-style (tile -> depth-ordered ranks) via vectorized key sort."""
    nx = (width + tile - 1) // tile
    ny = (height + tile - 1) // tile
    mean2 = proj["mean2"][order]
    radius = proj["radius"][order]
    x0 = np.clip(np.floor((mean2[:, 0] - radius) / tile), 0, nx - 1).astype(np.int64)
    x1 = np.clip(np.floor((mean2[:, 0] + radius) / tile), 0, nx - 1).astype(np.int64)
    y0 = np.clip(np.floor((mean2[:, 1] - radius) / tile), 0, ny - 1).astype(np.int64)
    y1 = np.clip(np.floor((mean2[:, 1] + radius) / tile), 0, ny - 1).astype(np.int64)
    offscreen = (mean2[:, 0] + radius < 0) | (mean2[:, 0] - radius > width) | \
                (mean2[:, 1] + radius < 0) | (mean2[:, 1] - radius > height)
    spanx = np.where(offscreen, 0, x1 - x0 + 1)
    spany = np.where(offscreen, 0, y1 - y0 + 1)
    counts = spanx * spany
    total = int(counts.sum())
    if total == 0:
        return nx, ny, np.empty(0, np.int64), np.zeros(nx * ny + 1, np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rank = np.repeat(np.arange(len(order)), counts)
    local = np.arange(total) - np.repeat(starts, counts)
    tx = x0[rank] + local % spanx[rank]
    ty = y0[rank] + local // spanx[rank]
    tile_id = ty * nx + tx
    srt = np.lexsort((rank, tile_id))
    tile_id, rank = tile_id[srt], rank[srt]
    bounds = np.searchsorted(tile_id, np.arange(nx * ny + 1))
    return nx, ny, rank, bounds


def _tile_pixels(tix, tiy, tile, width, height, dtype):
    x0, y0 = tix * tile, tiy * tile
    x1, y1 = min(x0 + tile, width), min(y0 + tile, height)
    xs = np.arange(x0, x1, dtype=dtype) + 0.5
    ys = np.arange(y0, y1, dtype=dtype) + 0.5
    px = np.tile(xs, y1 - y0)
    py = np.repeat(ys, x1 - x0)
    return (y0, y1, x0, x1), px, py


class RenderOutput:
    """View of the packed render image: rgb, feature, depth, alpha."""

    def __init__(self, packed: T.Tensor, feature_dim: int):
        self.packed = packed
        self.feature_dim = feature_dim

    @property
    def rgb(self):
        return self.packed[:, :, 0:3]

    @property
    def feature(self):
        return self.packed[:, :, 3:3 + self.feature_dim]

    @property
    def depth(self):
        return self.packed[:, :, 3 + self.feature_dim]

    @property
    def alpha(self):
        return self.packed[:, :, 4 + self.feature_dim]


def render(cloud, view, K, width, height, cfg: RenderConfig | None = None,
           diagnostics: RenderDiagnostics | None = None) -> RenderOutput:
    """Differentiable splat of a GaussianCloud through view matrix `view`.

    view may be a Tensor (head-pose gradients flow through it) or ndarray.
    """
    cfg = cfg or RenderConfig()
    p, q, s, o, c, f = cloud.p, cloud.r, cloud.s, cloud.o, cloud.c, cloud.f
    view_t = view if isinstance(view, T.Tensor) else T.constant(np.asarray(view, dtype=np.float64))
    vd = view_t.data
    dtype = p.data.dtype
    n_feat = f.shape[1]
    n_chan = 3 + n_feat + 2

    proj = _project(p.data, q.data, s.data, o.data, vd, np.asarray(K), cfg, width, height)
    if diagnostics is not None:
        diagnostics.skipped_degenerate = proj["diag"].skipped_degenerate
        diagnostics.behind_camera = proj["diag"].behind_camera

    valid_ids = np.nonzero(proj["valid"])[0]
    order = valid_ids[np.argsort(proj["tz"][valid_ids], kind="stable")]
    nx, ny, rank, bounds = _bin_tiles(proj, order, width, height, cfg.tile_size)
    if diagnostics is not None:
        diagnostics.n_pairs = len(rank)

    image = np.zeros((height, width, n_chan), dtype=dtype)
    od, cd, fd, tzd = o.data, c.data, f.data, proj["tz"]

    def run_tile(ti):
        lo, hi = bounds[ti], bounds[ti + 1]
        if lo == hi:
            return
        sub = order[rank[lo:hi]]
        (y0, y1, x0, x1), px, py = _tile_pixels(ti % nx, ti // nx, cfg.tile_size,
                                                width, height, dtype)
        aw = _alpha_weights(proj, od, sub, px, py, cfg)
        w = aw["w"]
        block = np.empty((len(px), n_chan), dtype=dtype)
        block[:, 0:3] = w.T @ cd[sub]
        block[:, 3:3 + n_feat] = w.T @ fd[sub]
        acc = w.sum(axis=0)
        draw = tzd[sub] @ w
        block[:, 3 + n_feat] = np.where(acc > 1e-4, draw / np.maximum(acc, 1e-12), 0.0)
        block[:, 4 + n_feat] = 1.0 - aw["t_final"]
        image[y0:y1, x0:x1] = block.reshape(y1 - y0, x1 - x0, n_chan)

    tiles = range(nx * ny)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            list(ex.map(run_tile, tiles))
    else:
        for ti in tiles:
            run_tile(ti)

    def vjp(g):
        return _render_backward(g, proj, order, rank, bounds, nx, cfg,
                                width, height, p, q, s, o, c, f, view_t, n_feat)

    packed = T.record("render", (p, q, s, o, c, f, view_t), image, vjp)
    return RenderOutput(packed, n_feat)


def _render_backward(g, proj, order, rank, bounds, nx, cfg, width, height,
                     p, q, s, o, c, f, view_t, n_feat):
    dtype = np.float64 if p.data.dtype == np.float64 else np.float32
    n = len(p.data)
    gmean = np.zeros((n, 2), dtype)
    gconic = np.zeros((n, 3), dtype)
    gz = np.zeros(n, dtype)
    go = np.zeros(n, dtype)
    gc = np.zeros((n, 3), dtype)
    gf = np.zeros((n, n_feat), dtype)

    od, cd, fd, tzd = o.data, c.data, f.data, proj["tz"]
    conic = proj["conic"]

    def tile_backward(ti, acc_):
        gmean_, gconic_, gz_, go_, gc_, gf_ = acc_
        lo, hi = bounds[ti], bounds[ti + 1]
        if lo == hi:
            return
        sub = order[rank[lo:hi]]
        (y0, y1, x0, x1), px, py = _tile_pixels(ti % nx, ti // nx, cfg.tile_size,
                                                width, height, dtype)
        aw = _alpha_weights(proj, od, sub, px, py, cfg)
        gblk = g[y0:y1, x0:x1].reshape(-1, g.shape[-1])
        g_rgb = gblk[:, 0:3]
        g_feat = gblk[:, 3:3 + n_feat]
        g_depth = gblk[:, 3 + n_feat]
        g_alpha = gblk[:, 4 + n_feat]

        w, alpha, t_excl = aw["w"], aw["alpha"], aw["t_excl"]
        acc = w.sum(axis=0)
        draw = tzd[sub] @ w
        has = acc > 1e-4
        safe = np.maximum(acc, 1e-12)
        d_draw = np.where(has, g_depth / safe, 0.0)
        d_acc = np.where(has, -g_depth * draw / (safe * safe), 0.0)
        d_tfin = -g_alpha

        e = cd[sub] @ g_rgb.T + fd[sub] @ g_feat.T \
            + tzd[sub][:, None] * d_draw[None, :] + d_acc[None, :]
        we = w * e
        suffix = we[::-1].cumsum(axis=0)[::-1] - we
        contrib = (alpha > 0.0) & aw["m_mask"]
        da = np.where(contrib,
                      t_excl * e - (suffix + d_tfin * aw["t_final"][None, :]) / (1.0 - alpha),
                      0.0)

        unclamped = aw["alpha_raw"] < cfg.alpha_clamp
        da_eff = da * unclamped
        gvals = aw["g"]
        go_[sub] += (gvals * da_eff).sum(axis=1)
        dq_ = -0.5 * od[sub][:, None] * gvals * da_eff
        cn = conic[sub]
        dx, dy = aw["dx"], aw["dy"]
        gmean_[sub, 0] += (dq_ * -(2.0 * cn[:, 0][:, None] * dx + 2.0 * cn[:, 1][:, None] * dy)).sum(1)
        gmean_[sub, 1] += (dq_ * -(2.0 * cn[:, 1][:, None] * dx + 2.0 * cn[:, 2][:, None] * dy)).sum(1)
        gconic_[sub, 0] += (dq_ * dx * dx).sum(1)
        gconic_[sub, 1] += (dq_ * 2.0 * dx * dy).sum(1)
        gconic_[sub, 2] += (dq_ * dy * dy).sum(1)
        gc_[sub] += w @ g_rgb
        gf_[sub] += w @ g_feat
        gz_[sub] += w @ d_draw

    acc_main = (gmean, gconic, gz, go, gc, gf)
    n_tiles = nx * ((height + cfg.tile_size - 1) // cfg.tile_size)
    if cfg.threads > 1:
        n_chunks = min(cfg.threads * 4, n_tiles) or 1
        chunks = np.array_split(np.arange(n_tiles), n_chunks)
        partials = [tuple(np.zeros_like(a) for a in acc_main) for _ in chunks]

        def run_chunk(k):
            for ti in chunks[k]:
                tile_backward(int(ti), partials[k])

        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            list(ex.map(run_chunk, range(len(chunks))))
        for part in partials:            # fixed reduction order
            for a, b in zip(acc_main, part):
                a += b
    else:
        for ti in range(n_tiles):
            tile_backward(ti, acc_main)

    return _attribute_backward(proj, gmean, gconic, gz, go, gc, gf,
                               p, q, s, o, view_t, cfg)


def _attribute_backward(proj, gmean, gconic, gz, go, gc, gf, p, q, s, o, view_t, cfg):
    """Chain per-Gaussian screen-space grads to p, r, s and the view matrix."""
    valid = proj["valid"]
    a_view = proj["a_view"]
    fx, fy = proj["fx"], proj["fy"]
    t, tz = proj["t"], proj["tz"]
    inv_z = np.where(valid, 1.0 / np.where(valid, tz, 1.0), 0.0)

    # conic -> cov2
    cm = np.empty((len(tz), 2, 2), dtype=gconic.dtype)
    cn = proj["conic"]
    cm[:, 0, 0], cm[:, 0, 1] = cn[:, 0], cn[:, 1]
    cm[:, 1, 0], cm[:, 1, 1] = cn[:, 1], cn[:, 2]
    dcm = np.empty_like(cm)
    dcm[:, 0, 0] = gconic[:, 0]
    dcm[:, 0, 1] = dcm[:, 1, 0] = 0.5 * gconic[:, 1]
    dcm[:, 1, 1] = gconic[:, 2]
    dcov2 = -np.einsum("nij,njk,nkl->nil", cm, dcm, cm)

    # cov2 = M cov3 M^T (+ const dilation)
    m = proj["m"]
    cov3 = proj["cov3"]
    dm = 2.0 * np.einsum("nij,njk,nkl->nil", dcov2, m, cov3)
    dcov3 = np.einsum("nji,njk,nkl->nil", m, dcov2, m)

    # cov3 = R S^2 R^T
    rot = proj["rot"]
    s2 = s.data * s.data
    drot = 2.0 * np.einsum("nij,njk,nk->nik", dcov3, rot, s2)
    ds = 2.0 * s.data * np.einsum("nji,njk,nki->ni", rot, dcov3, rot)

    # M = J A
    dj = np.einsum("nij,kj->nik", dm, a_view)
    da_view = np.einsum("nji,njk->ik", proj["j"], dm)

    # t from mean2, J, and composited depth
    dt = np.zeros_like(t)
    dt[:, 0] = gmean[:, 0] * fx * inv_z + dj[:, 0, 2] * (-fx * inv_z ** 2)
    dt[:, 1] = gmean[:, 1] * fy * inv_z + dj[:, 1, 2] * (-fy * inv_z ** 2)
    dt[:, 2] = (-gmean[:, 0] * fx * t[:, 0] - gmean[:, 1] * fy * t[:, 1]) * inv_z ** 2 \
        + dj[:, 0, 0] * (-fx * inv_z ** 2) + dj[:, 0, 2] * (2 * fx * t[:, 0] * inv_z ** 3) \
        + dj[:, 1, 1] * (-fy * inv_z ** 2) + dj[:, 1, 2] * (2 * fy * t[:, 1] * inv_z ** 3) \
        + gz

    mask = valid[:, None]
    dt = np.where(mask, dt, 0.0)
    dp = dt @ a_view
    da_view = da_view + dt.T @ p.data
    db_view = dt.sum(axis=0)

    # quaternion through normalization
    dqhat = _quat_mat_vjp(proj["qhat"], np.where(mask[:, :, None], drot, 0.0))
    qh = proj["qhat"]
    dq = (dqhat - (dqhat * qh).sum(axis=1, keepdims=True) * qh) / np.maximum(
        proj["qnorm"][:, None], 1e-12)

    ds = np.where(mask, ds, 0.0)
    go = np.where(valid, go, 0.0)

    dview = None
    if view_t.requires_grad:
        dview = np.zeros((4, 4), dtype=da_view.dtype)
        dview[:3, :3] = da_view
        dview[:3, 3] = db_view

    def cast(x, like):
        return x.astype(like.data.dtype, copy=False)

    return (cast(dp, p), cast(dq, q), cast(ds, s), cast(go, o),
            cast(gc, o), cast(gf, o), None if dview is None else cast(dview, view_t))
