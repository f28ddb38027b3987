"""Image export/import: 8-bit RGB PNG, 16-bit depth PNG, raw float dumps
with a 16-byte header (magic, H, W, C), and a PCA preview for feature maps."""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

MAGIC_FLOAT = b"GRMF"
MAGIC_DEPTH = b"GRMD"


def to_uint8(img):
    return np.clip(np.asarray(img) * 255.0 + 0.5, 0, 255).astype(np.uint8)


def save_png(path, img):
    """RGB image in [0,1] -> 8-bit PNG."""
    Image.fromarray(to_uint8(img), mode="RGB").save(path)


def load_png(path):
    """8-bit PNG -> float array in [0,1]."""
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0


def png_bytes(img):
    import io
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_depth_png(path, depth):
    """Depth normalized to its own range -> 16-bit grayscale PNG."""
    d = np.asarray(depth, dtype=np.float64)
    lo, hi = d.min(), d.max()
    scale = (d - lo) / (hi - lo) if hi > lo else np.zeros_like(d)
    Image.fromarray((scale * 65535.0 + 0.5).astype(np.uint16), mode="I;16").save(path)


def save_raw(path, array, magic=MAGIC_FLOAT):
    """fp32 row-major dump: magic(4) H(u32) W(u32) C(u32) then data."""
    a = np.asarray(array, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, None]
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", magic, h, w, c))
        fh.write(a.tobytes())


def load_raw(path):
    with open(path, "rb") as fh:
        magic, h, w, c = struct.unpack("<4sIII", fh.read(16))
        if magic not in (MAGIC_FLOAT, MAGIC_DEPTH):
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(h * w * c * 4), dtype=np.float32)
    arr = data.reshape(h, w, c)
    return arr[:, :, 0] if c == 1 else arr


def save_depth_raw(path, depth):
    save_raw(path, np.asarray(depth)[:, :, None], magic=MAGIC_DEPTH)


def feature_pca_preview(feature):
    """(H, W, F) feature image -> (H, W, 3) PCA projection scaled to [0,1]."""
    h, w, f = feature.shape
    flat = feature.reshape(-1, f).astype(np.float64)
    flat = flat - flat.mean(axis=0)
    _, _, vt = np.linalg.svd(flat, full_matrices=False)
    proj = flat @ vt[:3].T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return ((proj - lo) / span).reshape(h, w, 3)
