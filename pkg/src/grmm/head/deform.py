"""Base 3DMM evaluation: blendshapes plus jaw/neck articulation.

base_mesh() returns canonical-space geometry; the global head pose (R, t)
is composed into the camera instead (see render.camera).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rotations import axis_angle_to_matrix
from .topology import JAW_PIVOT, NECK_PIVOT, TemplateTopology


@dataclass
class HeadParams:
    alpha_id: np.ndarray
    alpha_exp: np.ndarray
    theta_neck: np.ndarray = field(default_factory=lambda: np.zeros(3))
    theta_jaw: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.alpha_id = np.asarray(self.alpha_id, dtype=np.float64)
        self.alpha_exp = np.asarray(self.alpha_exp, dtype=np.float64)
        self.theta_neck = np.asarray(self.theta_neck, dtype=np.float64)
        self.theta_jaw = np.asarray(self.theta_jaw, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        for name in ("theta_neck", "theta_jaw"):
            if np.linalg.norm(getattr(self, name)) >= np.pi:
                raise ValueError(f"{name}: rotation magnitude must stay below pi")
        if not np.allclose(self.rotation.T @ self.rotation, np.eye(3), atol=1e-6):
            raise ValueError("rotation: must be orthonormal within 1e-6")

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in
                ("alpha_id", "alpha_exp", "theta_neck", "theta_jaw", "rotation", "translation")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(v) for k, v in d.items()})


@dataclass
class DeformedMesh:
    vertices: np.ndarray
    topology: TemplateTopology


def _blend_rigid(verts, weights, pivot, theta):
    if np.linalg.norm(theta) == 0.0:
        return verts
    rot = axis_angle_to_matrix(theta)
    moved = (verts - pivot) @ rot.T + pivot
    return verts + weights[:, None] * (moved - verts)


def base_mesh(topology: TemplateTopology, params: HeadParams) -> DeformedMesh:
    """Blendshape sum, then jaw rotation, then neck rotation (canonical space)."""
    if params.alpha_id.shape[0] > topology.basis_id.shape[0]:
        raise ValueError(f"alpha_id length {params.alpha_id.shape[0]} exceeds "
                         f"basis size {topology.basis_id.shape[0]}")
    if params.alpha_exp.shape[0] > topology.basis_exp.shape[0]:
        raise ValueError(f"alpha_exp length {params.alpha_exp.shape[0]} exceeds "
                         f"basis size {topology.basis_exp.shape[0]}")
    v = topology.vertices.copy()
    n_id = params.alpha_id.shape[0]
    n_exp = params.alpha_exp.shape[0]
    if n_id:
        v = v + np.einsum("i,ivc->vc", params.alpha_id, topology.basis_id[:n_id])
    if n_exp:
        v = v + np.einsum("i,ivc->vc", params.alpha_exp, topology.basis_exp[:n_exp])
    v = _blend_rigid(v, topology.jaw_weights, JAW_PIVOT, params.theta_jaw)
    v = _blend_rigid(v, topology.neck_weights, NECK_PIVOT, params.theta_neck)
    return DeformedMesh(vertices=v, topology=topology)


def apply_face_mask(topology: TemplateTopology, v_exp: np.ndarray) -> np.ndarray:
    """Zero expression offsets on teeth rows; all other rows pass unchanged."""
    out = v_exp.copy()
    out[topology.teeth_vertex_set] = 0.0
    return out


def build_laplacian(topology: TemplateTopology):
    """Uniform (combinatorial) graph Laplacian L = D - A as index arrays."""
    e = topology.edges()
    n = topology.n_vertices
    deg = np.zeros(n)
    np.add.at(deg, e[:, 0], 1.0)
    np.add.at(deg, e[:, 1], 1.0)
    return deg, e


def laplacian_apply(deg, edges, d):
    """(L d)_i = deg_i d_i - sum_{j ~ i} d_j ; d is (N_v, 3)."""
    out = deg[:, None] * d
    np.subtract.at(out, edges[:, 0], d[edges[:, 1]])
    np.subtract.at(out, edges[:, 1], d[edges[:, 0]])
    return out


def laplacian_energy(mesh: DeformedMesh, reference: DeformedMesh) -> float:
    """Mean squared row-norm of L applied to the displacement field."""
    if mesh.topology is not reference.topology and \
            mesh.vertices.shape != reference.vertices.shape:
        raise ValueError("laplacian_energy: meshes must share topology")
    deg, edges = build_laplacian(mesh.topology)
    ld = laplacian_apply(deg, edges, mesh.vertices - reference.vertices)
    return float((ld ** 2).sum(axis=1).mean())
