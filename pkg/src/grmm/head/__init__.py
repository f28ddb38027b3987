from .topology import TemplateTopology, build_head, export_obj, vertex_normals
from .deform import (DeformedMesh, HeadParams, apply_face_mask, base_mesh,
                     build_laplacian, laplacian_apply, laplacian_energy)
from .uv import UVSampler, grid_sampler, locate_uv, uv_grid

__all__ = [
    "TemplateTopology", "build_head", "export_obj", "vertex_normals",
    "DeformedMesh", "HeadParams", "apply_face_mask", "base_mesh",
    "build_laplacian", "laplacian_apply", "laplacian_energy",
    "UVSampler", "grid_sampler", "locate_uv", "uv_grid",
]
