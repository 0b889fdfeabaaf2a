"""Pixel <-> latent codec and PNG helpers.

The denoiser works on a 4x8x8 latent.  A 32x32 RGB image maps into it by a
fixed two-step transform: 4x4 average pooling per channel (the downsample)
followed by an exact channel lift through a constant 4x3 matrix with
orthonormal columns (three columns of the order-4 Hadamard basis).  The lift
is exactly invertible (M^T M = I), so decode(encode(img)) reproduces the
pooled image and encode(decode(z)) is a projection; decoding upsamples by
nearest neighbor back to 32x32.

Images are float arrays (3, 32, 32) in [0, 1]; latents are (4, 8, 8) on a
[-1, 1]-centered scale.
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ArgumentError

IMAGE_SIZE = 32
LATENT_SHAPE = (4, 8, 8)
_POOL = 4

# First three columns of the orthogonal Hadamard matrix H4 / 2.
CHANNEL_LIFT = 0.5 * np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0],
    ]
)


def image_to_latent(img: np.ndarray) -> np.ndarray:
    """(3, 32, 32) image in [0, 1] -> (4, 8, 8) latent."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (3, IMAGE_SIZE, IMAGE_SIZE):
        raise ArgumentError(f"expected (3, {IMAGE_SIZE}, {IMAGE_SIZE}) image, got {img.shape}")
    centered = 2.0 * img - 1.0
    pooled = centered.reshape(3, 8, _POOL, 8, _POOL).mean(axis=(2, 4))
    return np.einsum("kc,chw->khw", CHANNEL_LIFT, pooled)


def latent_to_image(z: np.ndarray) -> np.ndarray:
    """(4, 8, 8) latent -> (3, 32, 32) image in [0, 1], clipped."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != LATENT_SHAPE:
        raise ArgumentError(f"expected latent {LATENT_SHAPE}, got {z.shape}")
    pooled = np.einsum("kc,khw->chw", CHANNEL_LIFT, z)
    img = np.clip((pooled + 1.0) / 2.0, 0.0, 1.0)
    return img.repeat(_POOL, axis=1).repeat(_POOL, axis=2)


def canonical_image(img: np.ndarray) -> np.ndarray:
    """The model-representable version of an image (decode of its encode)."""
    return latent_to_image(image_to_latent(img))


def load_image(source) -> np.ndarray:
    """Decode PNG/JPEG bytes or a file path to a (3, 32, 32) [0, 1] array.

    Inputs of other sizes are resized; undecodable input raises ArgumentError.
    """
    try:
        if isinstance(source, (bytes, bytearray)):
            pil = Image.open(io.BytesIO(source))
        else:
            pil = Image.open(Path(source))
        pil = pil.convert("RGB")
    except Exception as exc:
        raise ArgumentError(f"cannot decode image: {exc}") from exc
    if pil.size != (IMAGE_SIZE, IMAGE_SIZE):
        pil = pil.resize((IMAGE_SIZE, IMAGE_SIZE), Image.LANCZOS)
    # values stay on the uint8 grid so png round-trips are lossless
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1)


def png_bytes(img: np.ndarray) -> bytes:
    """Encode a (3, H, W) [0, 1] array as PNG."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ArgumentError(f"expected (3, H, W) image, got {arr.shape}")
    u8 = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    buf = io.BytesIO()
    Image.fromarray(u8, "RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def save_png(img: np.ndarray, path) -> None:
    Path(path).write_bytes(png_bytes(img))


def image_fingerprint(img: np.ndarray) -> str:
    """Content hash of the canonical pixel grid; stable id for caption lookup."""
    u8 = np.clip(np.round(canonical_image(img) * 255.0), 0, 255).astype(np.uint8)
    return hashlib.sha256(u8.tobytes()).hexdigest()
