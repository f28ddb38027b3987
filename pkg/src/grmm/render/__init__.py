from .anchor import GaussianAnchor
from .bruteforce import render_bruteforce
from .camera import (Camera, canonicalize_camera, canonicalize_camera_t,
                     orbit_camera, pose_matrix, view_direction)
from .cloud import GaussianCloud, activate_scale, assemble_attributes, raw_cloud
from .rasterize import RenderDiagnostics, RenderOutput, render

__all__ = [
    "GaussianAnchor", "render_bruteforce", "Camera", "canonicalize_camera",
    "canonicalize_camera_t", "orbit_camera", "pose_matrix", "view_direction",
    "GaussianCloud", "activate_scale", "assemble_attributes", "raw_cloud",
    "RenderDiagnostics", "RenderOutput", "render",
]
