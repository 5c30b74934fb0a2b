"""8-bit grayscale image I/O: binary PGM (P5) and PNG.

Heatmap frames export as round(255 * intensity); binary masks as {0, 255}.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from corax.errors import IOFailure, ParameterError
from corax.gaze import BinaryMask, HeatmapFrame


def frame_to_u8(frame: HeatmapFrame) -> np.ndarray:
    return np.round(frame.values * 255.0).astype(np.uint8)


def mask_to_u8(mask: BinaryMask) -> np.ndarray:
    return np.where(mask.mask, 255, 0).astype(np.uint8)


def write_pgm(pixels: np.ndarray) -> bytes:
    if pixels.dtype != np.uint8 or pixels.ndim != 2:
        raise ParameterError("PGM export expects a 2-D uint8 array")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise IOFailure("not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; whitespace separated, '#' comments allowed.
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise IOFailure(f"unsupported PGM maxval {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    if raster.size != w * h:
        raise IOFailure("PGM raster truncated")
    return raster.reshape(h, w).copy()


def write_png(pixels: np.ndarray) -> bytes:
    if pixels.dtype != np.uint8 or pixels.ndim != 2:
        raise ParameterError("PNG export expects a 2-D uint8 array")
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def read_image(data: bytes) -> np.ndarray:
    """Decode PNG or PGM bytes into a 2-D uint8 grayscale array."""
    if data.startswith(b"P5"):
        return read_pgm(data)
    try:
        img = Image.open(io.BytesIO(data))
    except Exception as exc:
        raise IOFailure(f"could not decode image: {exc}") from exc
    return np.asarray(img.convert("L"), dtype=np.uint8)


def encode_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def decode_b64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except Exception as exc:
        raise IOFailure(f"invalid base64 image payload: {exc}") from exc
