"""Raster IO helpers. The only module that touches PNG encoding directly."""

from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

from .errors import AutoStoryError
from .model import ConditionMap


def encode_png_rgb(array: np.ndarray) -> bytes:
    if array.ndim != 3 or array.shape[2] != 3 or array.dtype != np.uint8:
        raise ValueError("expected a HxWx3 uint8 array")
    buf = io.BytesIO()
    Image.fromarray(array, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_rgb(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise AutoStoryError("IO_FAILED", f"could not decode PNG image: {exc}") from exc


def encode_png_gray(array: np.ndarray) -> bytes:
    if array.ndim != 2 or array.dtype != np.uint8:
        raise ValueError("expected a HxW uint8 array")
    buf = io.BytesIO()
    Image.fromarray(array, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_gray(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise AutoStoryError("IO_FAILED", f"could not decode PNG condition: {exc}") from exc


def condition_to_png(cond: ConditionMap) -> bytes:
    """8-bit single-channel PNG: 0 is background, 255 is full stroke."""
    return encode_png_gray(cond.to_u8())


def condition_from_png(data: bytes, kind: str) -> ConditionMap:
    return ConditionMap(decode_png_gray(data).astype(np.float64) / 255.0, kind=kind)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any mix of ints and strings."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1
