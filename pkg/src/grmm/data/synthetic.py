"""Synthetic multi-identity / multi-expression / multi-view dataset.

Each identity is a base-model coefficient draw plus high-frequency vertex
detail and a procedural albedo field that the residual codes must learn
(the linear basis cannot represent them). Expression coefficients are
shared across identities so expression labels are aligned by construction.
Ground truth comes from the oracle rasterizer: lossless-enough 8-bit PNG
for RGB and exact fp32 camera-z depth.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from ..config import SceneSpec
from ..head import HeadParams, TemplateTopology, base_mesh, vertex_normals
from ..render import Camera, orbit_camera
from ..render.image_io import load_png, load_raw, save_depth_raw, save_png
from ..rotations import rotation_about_axis
from .oracle import rasterize_mesh

SCHEMA_VERSION = 1
BASE_SKIN = np.array([0.72, 0.52, 0.42])
TEETH_COLOR = np.array([0.93, 0.91, 0.85])
MOUTH_COLOR = np.array([0.45, 0.12, 0.12])


def _detail_displacement(rng, topology, amplitude):
    """High-frequency normal displacement beyond the blendshape basis."""
    v = topology.vertices
    n = _smooth_normals(topology)
    field = np.zeros(len(v))
    for _ in range(6):
        w = rng.normal(0.0, 1.8, size=3)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.normal(0, 1.0) * np.sin(v @ w + phase)
    field *= amplitude / max(np.std(field), 1e-9)
    disp = field[:, None] * n
    disp[topology.teeth_vertex_set] = 0.0
    return disp


def _smooth_normals(topology):
    from ..head.topology import RX, RY, RZ
    v = topology.vertices
    n = np.stack([v[:, 0] / RX ** 2, v[:, 1] / RY ** 2, v[:, 2] / RZ ** 2], axis=1)
    return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-12)


def _identity_albedo(rng, topology, texture_scale):
    """Skin-tone base plus band-limited color variation; fixed mouth parts."""
    v = topology.vertices
    tone = BASE_SKIN + rng.normal(0.0, 0.06, size=3)
    albedo = np.tile(tone, (len(v), 1))
    for _ in range(5):
        w = rng.normal(0.0, texture_scale / 4.0, size=3)
        phase = rng.uniform(0, 2 * np.pi)
        color = rng.normal(0.0, 0.09, size=3)
        albedo += np.outer(np.sin(v @ w + phase), color)
    for _ in range(3):
        w = rng.normal(0.0, texture_scale, size=3)
        phase = rng.uniform(0, 2 * np.pi)
        color = rng.normal(0.0, 0.05, size=3)
        albedo += np.outer(np.sin(v @ w + phase), color)
    albedo[topology.teeth_upper] = TEETH_COLOR
    albedo[topology.teeth_lower] = TEETH_COLOR
    pocket = np.unique(topology.faces[topology.mouth_interior_faces].reshape(-1))
    albedo[pocket] = MOUTH_COLOR
    return np.clip(albedo, 0.03, 0.97)


def identity_payload(spec: SceneSpec, topology: TemplateTopology, index, heldout=False):
    """Deterministic per-identity parameters derived from the spec seed."""
    tag = 10_000 if heldout else 0
    rng = np.random.default_rng(spec.seed * 1000 + tag + index)
    n_id = topology.basis_id.shape[0]
    alpha_id = rng.normal(0.0, 0.7, size=n_id)
    detail = _detail_displacement(rng, topology, spec.detail_amplitude)
    albedo = _identity_albedo(rng, topology, spec.texture_scale)
    return {"alpha_id": alpha_id, "detail": detail, "albedo": albedo}


def expression_payload(spec: SceneSpec, topology: TemplateTopology, index):
    """Shared per-expression coefficients; expression 0 is neutral."""
    rng = np.random.default_rng(spec.seed * 2000 + 500 + index)
    n_exp = topology.basis_exp.shape[0]
    if index == 0:
        return {"alpha_exp": np.zeros(n_exp), "theta_jaw": np.zeros(3),
                "theta_neck": np.zeros(3)}
    alpha_exp = rng.normal(0.0, 0.8, size=n_exp)
    jaw = np.array([rng.uniform(0.0, np.deg2rad(16.0)), 0.0, 0.0])
    neck = rng.normal(0.0, np.deg2rad(4.0), size=3)
    return {"alpha_exp": alpha_exp, "theta_jaw": jaw, "theta_neck": neck}


def head_pose(spec: SceneSpec, identity_index, expression_index):
    rng = np.random.default_rng(spec.seed * 3000 + identity_index * 97 + expression_index)
    yaw = rng.uniform(-np.deg2rad(12), np.deg2rad(12))
    pitch = rng.uniform(-np.deg2rad(6), np.deg2rad(6))
    rot = rotation_about_axis([0, 1, 0], yaw) @ rotation_about_axis([1, 0, 0], pitch)
    t = rng.normal(0.0, 0.8, size=3)
    return rot, t


def view_camera(spec: SceneSpec, view_index, heldout=False):
    n = spec.n_views
    if heldout:
        az = np.deg2rad(-40.0 + 80.0 * view_index)
        el = np.deg2rad(12.0 - 20.0 * view_index)
    else:
        az = np.deg2rad(-55.0 + 110.0 * view_index / max(n - 1, 1))
        el = np.deg2rad(-10.0 + 22.0 * ((view_index * 5) % n) / max(n - 1, 1))
    return orbit_camera(az, el, 56.0, 26.0, spec.width, spec.height)


def render_frame(topology, identity, expression, rot, t, camera, specular):
    params = HeadParams(alpha_id=identity["alpha_id"],
                        alpha_exp=expression["alpha_exp"],
                        theta_neck=expression["theta_neck"],
                        theta_jaw=expression["theta_jaw"],
                        rotation=rot, translation=t)
    mesh = base_mesh(topology, params)
    verts = mesh.vertices + identity["detail"]
    world = verts @ rot.T + t
    normals = vertex_normals(world, topology.faces)
    rgb, depth = rasterize_mesh(world, topology.faces, identity["albedo"], camera,
                                specular=specular, vertex_normals=normals)
    return rgb, depth, params


def render_flat_baseline(topology, params: HeadParams, camera, gray=0.5):
    """Base-mesh oracle render: no detail field, uniform albedo. The desk
    reference that trained models must beat."""
    mesh = base_mesh(topology, params)
    world = mesh.vertices @ params.rotation.T + params.translation
    albedo = np.full((topology.n_vertices, 3), gray)
    rgb, _ = rasterize_mesh(world, topology.faces, albedo, camera, specular=0.0)
    return rgb


def generate_dataset(spec: SceneSpec, topology: TemplateTopology, out_dir):
    """Write PNG/depth frames plus a manifest; returns the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "frames")
    os.makedirs(img_dir, exist_ok=True)

    identities = [identity_payload(spec, topology, i) for i in range(spec.n_identities)]
    heldout_ids = [identity_payload(spec, topology, i, heldout=True)
                   for i in range(spec.heldout_identities)]
    expressions = [expression_payload(spec, topology, e) for e in range(spec.n_expressions)]

    frames = []

    def emit(identity, id_label, id_index, exp, exp_label, exp_index, cam, view_index, split):
        rot, t = head_pose(spec, id_index if split != "heldout_id" else 9000 + id_index,
                           exp_index)
        rgb, depth, params = render_frame(topology, identity, exp, rot, t, cam,
                                          spec.specular)
        frame_id = f"{id_label}_{exp_label}_v{view_index:02d}_{split}"
        rgb_path = os.path.join("frames", frame_id + ".png")
        depth_path = os.path.join("frames", frame_id + ".depth")
        try:
            save_png(os.path.join(out_dir, rgb_path), rgb)
            save_depth_raw(os.path.join(out_dir, depth_path), depth)
        except OSError as exc:
            raise OSError(f"failed writing frame {frame_id} under {out_dir}: {exc}") from exc
        frames.append({
            "frame_id": frame_id,
            "identity": id_label, "identity_index": id_index,
            "expression": exp_label, "expression_index": exp_index,
            "view": view_index, "split": split,
            "rgb": rgb_path, "depth": depth_path,
            "camera": cam.to_dict(),
            "head_params": params.to_dict(),
        })

    for i, identity in enumerate(identities):
        id_label = f"id{i:02d}"
        for e, exp in enumerate(expressions):
            exp_label = f"exp{e:02d}"
            for v in range(spec.n_views):
                emit(identity, id_label, i, exp, exp_label, e,
                     view_camera(spec, v), v, "train")
            for hv in range(spec.heldout_views):
                emit(identity, id_label, i, exp, exp_label, e,
                     view_camera(spec, hv, heldout=True), spec.n_views + hv,
                     "heldout_view")
    for i, identity in enumerate(heldout_ids):
        id_label = f"heldout{i:02d}"
        for e, exp in enumerate(expressions):
            exp_label = f"exp{e:02d}"
            for v in range(spec.n_views):
                emit(identity, id_label, spec.n_identities + i, exp, exp_label, e,
                     view_camera(spec, v), v, "heldout_id")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "spec": asdict(spec),
        "identities": [f"id{i:02d}" for i in range(spec.n_identities)],
        "expressions": [f"exp{e:02d}" for e in range(spec.n_expressions)],
        "frames": frames,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def load_manifest(path):
    mpath = path if path.endswith(".json") else os.path.join(path, "manifest.json")
    with open(mpath) as fh:
        manifest = json.load(fh)
    manifest["_root"] = os.path.dirname(os.path.abspath(mpath))
    return manifest


def frame_index(manifest):
    return {f["frame_id"]: f for f in manifest["frames"]}


def load_batch(manifest, frame_id):
    """Decoded images, camera and parameters for one frame."""
    frames = frame_index(manifest)
    if frame_id not in frames:
        raise KeyError(f"unknown frame id: {frame_id}")
    rec = frames[frame_id]
    root = manifest["_root"]
    try:
        rgb = load_png(os.path.join(root, rec["rgb"]))
        depth = load_raw(os.path.join(root, rec["depth"]))
    except (OSError, ValueError) as exc:
        raise OSError(f"frame {frame_id}: cannot load data ({exc})") from exc
    return {
        "rgb": rgb, "depth": depth,
        "camera": Camera.from_dict(rec["camera"]),
        "head_params": HeadParams.from_dict(rec["head_params"]),
        "identity_index": rec["identity_index"],
        "expression_index": rec["expression_index"],
        "split": rec["split"],
        "frame_id": frame_id,
    }
