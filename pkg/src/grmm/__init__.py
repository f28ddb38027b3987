"""grmm: residual Gaussian head model with a toy 3DMM base, UV-anchored
Gaussian splatting, screen-space refinement, end-to-end training on a
synthetic oracle dataset, and two-stage inverse-rendering fitting."""

__version__ = "0.1.0"
