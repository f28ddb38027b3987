"""Procedural head template: ellipsoid shell with a mouth opening, teeth rows,
an inner-mouth pocket, blendshape bases, articulation weights, and a UV atlas.

Units: the head is roughly 22 units tall (think centimetres). The main skin
chart occupies u in [0,1], v in [0,0.85]; teeth and mouth-interior charts sit
in disjoint rectangles of the top strip so UV-space decoders can address them
separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RX, RY, RZ = 8.5, 11.0, 9.0
MOUTH_Y = -4.2
MOUTH_HALF_W = 3.1
MOUTH_HALF_H = 0.75
JAW_PIVOT = np.array([0.0, MOUTH_Y + 1.4, -1.8])
NECK_PIVOT = np.array([0.0, -RY - 1.0, 0.0])

UV_HEAD_V = 0.85
UV_TEETH_UPPER = (0.04, 0.26, 0.88, 0.97)   # (u0, u1, v0, v1)
UV_TEETH_LOWER = (0.32, 0.54, 0.88, 0.97)
UV_MOUTH = (0.60, 0.92, 0.88, 0.97)


@dataclass
class TemplateTopology:
    vertices: np.ndarray          # (N_v, 3) float64, neutral shape
    faces: np.ndarray             # (F, 3) int32
    uv: np.ndarray                # (F, 3, 2) float64, per-corner
    teeth_upper: np.ndarray       # vertex ids
    teeth_lower: np.ndarray       # vertex ids
    mouth_interior_faces: np.ndarray  # face ids
    teeth_faces: np.ndarray       # face ids
    jaw_weights: np.ndarray       # (N_v,)
    neck_weights: np.ndarray      # (N_v,)
    basis_id: np.ndarray          # (n_id, N_v, 3)
    basis_exp: np.ndarray         # (n_exp, N_v, 3)
    lip_vertices: np.ndarray      # vertex ids around the mouth opening

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def teeth_vertex_set(self):
        return np.concatenate([self.teeth_upper, self.teeth_lower])

    def teeth_mask(self):
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.teeth_vertex_set] = True
        return m

    def edges(self):
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)


def _smoothstep(x, lo, hi):
    t = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _grid_faces(rows, cols, offset, flip=False):
    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a = offset + r * cols + c
            b = a + 1
            d = a + cols
            e = d + 1
            if flip:
                faces.append([a, d, b])
                faces.append([b, d, e])
            else:
                faces.append([a, b, d])
                faces.append([b, e, d])
    return faces


def _grid_uv_for_faces(rows, cols, rect, flip=False):
    u0, u1, v0, v1 = rect
    uu = np.linspace(u0, u1, cols)
    vv = np.linspace(v0, v1, rows)
    corner = {(r, c): (uu[c], vv[r]) for r in range(rows) for c in range(cols)}
    uvs = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a, b, d, e = (r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)
            if flip:
                uvs.append([corner[a], corner[d], corner[b]])
                uvs.append([corner[b], corner[d], corner[e]])
            else:
                uvs.append([corner[a], corner[b], corner[d]])
                uvs.append([corner[b], corner[e], corner[d]])
    return uvs


def _ellipsoid_shell(n_lat, n_lon):
    """Lat-long ellipsoid with poles; returns verts, faces, per-corner UVs."""
    verts = [np.array([0.0, RY, 0.0])]           # top pole
    for i in range(1, n_lat):
        phi = np.pi * i / n_lat
        for j in range(n_lon):
            lam = -np.pi + 2.0 * np.pi * j / n_lon
            verts.append(np.array([RX * np.sin(phi) * np.sin(lam),
                                   RY * np.cos(phi),
                                   RZ * np.sin(phi) * np.cos(lam)]))
    verts.append(np.array([0.0, -RY, 0.0]))      # bottom pole
    verts = np.asarray(verts)
    bottom = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    def ring_u(i, j):
        # j may equal n_lon at the seam; uv is per-corner so that is fine
        return j / n_lon

    vstep = UV_HEAD_V / n_lat
    faces, uvs = [], []
    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
        uvs.append([(ring_u(1, j), 0.0), (ring_u(1, j), vstep), (ring_u(1, j + 1), vstep)])
    for i in range(1, n_lat - 1):
        v_hi, v_lo = i * vstep, (i + 1) * vstep
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            ua, ub = ring_u(i, j), ring_u(i, j + 1)
            faces.append([a, b, c])
            uvs.append([(ua, v_hi), (ub, v_hi), (ua, v_lo)])
            faces.append([b, d, c])
            uvs.append([(ub, v_hi), (ub, v_lo), (ua, v_lo)])
    v_hi = (n_lat - 1) * vstep
    for j in range(n_lon):
        faces.append([ring(n_lat - 1, j), bottom, ring(n_lat - 1, j + 1)])
        uvs.append([(ring_u(n_lat - 1, j), v_hi), (ring_u(n_lat - 1, j), UV_HEAD_V),
                    (ring_u(n_lat - 1, j + 1), v_hi)])
    return verts, np.asarray(faces, dtype=np.int32), np.asarray(uvs)


def _teeth_grid(y_top, y_bot, z_back_shift, rows=2, cols=9):
    """Arc of tooth quads spanning the mouth width."""
    xs = np.linspace(-MOUTH_HALF_W * 0.82, MOUTH_HALF_W * 0.82, cols)
    verts = []
    for r in range(rows):
        y = y_top + (y_bot - y_top) * r / (rows - 1)
        for x in xs:
            z_front = RZ * np.sqrt(max(1.0 - (x / RX) ** 2 - (y / RY) ** 2, 0.05))
            verts.append([x, y, z_front - z_back_shift])
    return np.asarray(verts)


def _mouth_pocket(rows=5, cols=9):
    """Curved back wall of the mouth cavity, top (skull) to bottom (jaw)."""
    xs = np.linspace(-MOUTH_HALF_W * 0.75, MOUTH_HALF_W * 0.75, cols)
    verts = []
    for r in range(rows):
        t = r / (rows - 1)
        y = (MOUTH_Y + 1.0) + (-2.4) * t           # sweeps down past mouth line
        depth = 2.4 + 1.5 * np.sin(np.pi * t)      # bulges backwards mid-way
        for x in xs:
            z_front = RZ * np.sqrt(max(1.0 - (x / RX) ** 2 - (y / RY) ** 2, 0.05))
            verts.append([x, y, z_front - depth])
    return np.asarray(verts)


def _low_freq_field(rng, verts, normals, n_modes=4, freq=0.25):
    """Smooth displacement field along normals plus a mild tangential part."""
    scale = np.zeros(len(verts))
    for _ in range(n_modes):
        w = rng.normal(0.0, freq, size=3)
        phase = rng.uniform(0, 2 * np.pi)
        scale += rng.normal(0.0, 1.0) * np.sin(verts @ w + phase)
    disp = scale[:, None] * normals
    sway = rng.normal(0.0, 0.15, size=3)
    disp += np.outer(np.sin(verts @ rng.normal(0, freq, 3)), sway)
    rms = np.sqrt((disp ** 2).sum(axis=1).mean())
    return disp / max(rms, 1e-9)


def build_head(n_lat=40, n_lon=48, n_id_basis=8, n_exp_basis=16, seed=1234):
    verts, orig_faces, orig_uvs = _ellipsoid_shell(n_lat, n_lon)
    n_shell = len(verts)

    # carve the mouth opening out of the shell
    centers = verts[orig_faces].mean(axis=1)
    lens = (np.abs(centers[:, 0]) < MOUTH_HALF_W) & \
           (np.abs(centers[:, 1] - MOUTH_Y) < MOUTH_HALF_H) & (centers[:, 2] > 0)
    faces, uvs = orig_faces[~lens], orig_uvs[~lens]

    # vertices ringing the opening = lips
    open_verts = set(int(i) for i in orig_faces[lens].reshape(-1))
    used = set(int(i) for i in faces.reshape(-1))
    lip_vertices = np.asarray(sorted(open_verts & used), dtype=np.int64)

    parts = [verts]
    all_faces = [faces]
    all_uvs = [uvs]
    offset = n_shell

    tu = _teeth_grid(MOUTH_Y + 0.95, MOUTH_Y + 0.1, 1.1)
    teeth_upper = np.arange(offset, offset + len(tu))
    all_faces.append(np.asarray(_grid_faces(2, 9, offset), dtype=np.int32))
    all_uvs.append(np.asarray(_grid_uv_for_faces(2, 9, UV_TEETH_UPPER)))
    parts.append(tu)
    offset += len(tu)

    tl = _teeth_grid(MOUTH_Y - 0.1, MOUTH_Y - 0.95, 1.1)
    teeth_lower = np.arange(offset, offset + len(tl))
    all_faces.append(np.asarray(_grid_faces(2, 9, offset), dtype=np.int32))
    all_uvs.append(np.asarray(_grid_uv_for_faces(2, 9, UV_TEETH_LOWER)))
    parts.append(tl)
    offset += len(tl)

    pk = _mouth_pocket()
    pocket = np.arange(offset, offset + len(pk))
    pocket_faces = np.asarray(_grid_faces(5, 9, offset), dtype=np.int32)
    all_faces.append(pocket_faces)
    all_uvs.append(np.asarray(_grid_uv_for_faces(5, 9, UV_MOUTH)))
    parts.append(pk)
    offset += len(pk)

    vertices = np.concatenate(parts)
    n_teeth_faces = 2 * (2 - 1) * (9 - 1) * 2
    face_counts = [len(all_faces[0]), n_teeth_faces, len(pocket_faces)]
    faces = np.concatenate(all_faces).astype(np.int32)
    uv = np.concatenate(all_uvs)
    teeth_faces = np.arange(face_counts[0], face_counts[0] + n_teeth_faces)
    mouth_interior_faces = np.arange(face_counts[0] + n_teeth_faces, len(faces))

    # articulation weights
    y, z = vertices[:, 1], vertices[:, 2]
    jaw_w = _smoothstep(-y, -(MOUTH_Y + 0.2), -(MOUTH_Y - 1.4)) * _smoothstep(z, 0.05 * RZ, 0.3 * RZ)
    jaw_w[teeth_upper] = 0.0
    jaw_w[teeth_lower] = 1.0
    rows = np.repeat(np.arange(5), 9)
    jaw_w[pocket] = rows / 4.0
    neck_w = _smoothstep(y, -RY + 0.5, -RY + 3.5)

    # blendshape bases on smooth normals
    normals = np.stack([vertices[:, 0] / RX ** 2, vertices[:, 1] / RY ** 2,
                        vertices[:, 2] / RZ ** 2], axis=1)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True) + 1e-12
    rng = np.random.default_rng(seed)
    basis_id = np.stack([_low_freq_field(rng, vertices, normals) for _ in range(n_id_basis)])

    face_region = _smoothstep(z, 0.0, 0.4 * RZ) * _smoothstep(-y, -6.0, 0.0)
    basis_exp = []
    for _ in range(n_exp_basis):
        field = _low_freq_field(rng, vertices, normals, freq=0.45)
        field = field * face_region[:, None]
        field[teeth_upper] = 0.0
        field[teeth_lower] = 0.0
        field[pocket] = 0.0
        rms = np.sqrt((field ** 2).sum(axis=1).mean())
        basis_exp.append(field / max(rms, 1e-9))
    basis_exp = np.stack(basis_exp)

    return TemplateTopology(
        vertices=vertices, faces=faces, uv=uv,
        teeth_upper=teeth_upper, teeth_lower=teeth_lower,
        mouth_interior_faces=mouth_interior_faces, teeth_faces=teeth_faces,
        jaw_weights=jaw_w, neck_weights=neck_w,
        basis_id=basis_id, basis_exp=basis_exp,
        lip_vertices=lip_vertices,
    )


def vertex_normals(vertices, faces):
    """Area-weighted vertex normals for an arbitrary vertex set."""
    v = vertices
    tri = v[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    out = np.zeros_like(v)
    for k in range(3):
        np.add.at(out, faces[:, k], fn)
    norm = np.linalg.norm(out, axis=1, keepdims=True)
    return out / np.maximum(norm, 1e-12)


def export_obj(topology, vertices, path):
    """Wavefront OBJ with per-corner texture coordinates."""
    lines = ["# head template export"]
    for p in vertices:
        lines.append(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}")
    for fuv in topology.uv:
        for u, vv in fuv:
            lines.append(f"vt {u:.6f} {1.0 - vv:.6f}")
    for i, f in enumerate(topology.faces):
        t = 3 * i
        lines.append(f"f {f[0]+1}/{t+1} {f[1]+1}/{t+2} {f[2]+1}/{t+3}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
