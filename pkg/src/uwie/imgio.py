"""8-bit PNG/JPEG image I/O and the pad/crop helpers for network inputs.

Images decode to float64 (3, H, W) arrays in [0, 1] and re-encode as 8-bit
PNG with round-half-up quantization, so a save/load round trip of any
8-bit-representable image is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError
from .tensor import Array, as_tensor

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def load_image(path) -> Array:
    """Decode a PNG/JPEG to a (3, H, W) float array in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    return arr.transpose(2, 0, 1)


def save_png(img: Array, path) -> None:
    """Encode a [0, 1] image as 8-bit PNG with round-half-up quantization."""
    arr = as_tensor(img, "image")
    quantized = np.clip(np.floor(arr * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)
    Image.fromarray(quantized.transpose(1, 2, 0), mode="RGB").save(Path(path), format="PNG")


def pad_to_multiple(img: Array, multiple: int = 8) -> tuple[Array, tuple[int, int]]:
    """Replicate-pad the bottom/right edges up to the next multiple.

    Returns the padded image and the original (H, W) for cropping back.
    Replicate padding avoids injecting false dark borders.
    """
    arr = as_tensor(img, "image")
    _, h, w = arr.shape
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        arr = np.pad(arr, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    return arr, (h, w)


def crop_to(img: Array, size: tuple[int, int]) -> Array:
    """Crop back to an original (H, W) after padding."""
    h, w = size
    return img[:, :h, :w]


def list_images(directory) -> list[Path]:
    """Image files in a directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory} is not a directory")
    return sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
    )
