from .oracle import rasterize_mesh, shade
from .synthetic import (expression_payload, frame_index, generate_dataset,
                        head_pose, identity_payload, load_batch, load_manifest,
                        render_flat_baseline, render_frame, view_camera)

__all__ = [
    "rasterize_mesh", "shade",
    "expression_payload", "frame_index", "generate_dataset", "head_pose",
    "identity_payload", "load_batch", "load_manifest", "render_flat_baseline",
    "render_frame", "view_camera",
]
