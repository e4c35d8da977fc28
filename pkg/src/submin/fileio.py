"""Readers and writers for flow fields, disparity maps, masks and images.

All float payloads round-trip bit-exactly through their writers and readers.
"""

import struct

import numpy as np
from PIL import Image

from .errors import FileFormatError
from .grid import as_grid

FLO_MAGIC = 202021.25


def write_flo(path, flow):
    """Write a 2-channel flow field in the Middlebury .flo layout."""
    flow = as_grid(flow, "flow")
    if flow.shape[2] != 2:
        raise ValueError(f"flow field must have 2 channels, got {flow.shape[2]}")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(flow.astype("<f4").tobytes(order="C"))


def read_flo(path):
    """Read a Middlebury .flo file into an (h, w, 2) float array."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12:
        raise FileFormatError("truncated flow file header", offset=0, path=str(path))
    magic = struct.unpack_from("<f", raw, 0)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FileFormatError(f"bad flow magic {magic!r}", offset=0, path=str(path))
    w, h = struct.unpack_from("<ii", raw, 4)
    if w < 1 or h < 1:
        raise FileFormatError(f"bad flow dimensions {w}x{h}", offset=4, path=str(path))
    count = w * h * 2
    if len(raw) != 12 + count * 4:
        raise FileFormatError(
            f"flow payload has {len(raw) - 12} bytes, expected {count * 4}",
            offset=12, path=str(path),
        )
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=12)
    return data.reshape(h, w, 2).astype(np.float64)


def write_pfm(path, data, little_endian=True):
    """Write a grayscale PFM (header ``Pf``, rows stored bottom-to-top)."""
    data = as_grid(data, "data")
    if data.shape[2] != 1:
        raise ValueError("PFM writer handles single-channel data")
    h, w = data.shape[:2]
    scale = -1.0 if little_endian else 1.0
    dtype = "<f4" if little_endian else ">f4"
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(f"{scale}\n".encode("ascii"))
        f.write(data[::-1, :, 0].astype(dtype).tobytes(order="C"))


def read_pfm(path):
    """Read a grayscale PFM into an (h, w, 1) float array."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] != b"Pf":
        raise FileFormatError("bad PFM magic (expected 'Pf')", offset=0, path=str(path))

    def token(start):
        end = start
        while end < len(raw) and raw[end : end + 1] not in (b" ", b"\n", b"\r", b"\t"):
            end += 1
        return raw[start:end], end + 1

    off = 3
    w_tok, off = token(off)
    h_tok, off = token(off)
    s_tok, off = token(off)
    try:
        w, h = int(w_tok), int(h_tok)
        scale = float(s_tok)
    except ValueError as err:
        raise FileFormatError(f"bad PFM header field: {err}", offset=3, path=str(path))
    if w < 1 or h < 1 or scale == 0.0:
        raise FileFormatError("bad PFM dimensions or scale", offset=3, path=str(path))
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h
    if len(raw) - off != count * 4:
        raise FileFormatError(
            f"PFM payload has {len(raw) - off} bytes, expected {count * 4}",
            offset=off, path=str(path),
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=off)
    return data.reshape(h, w)[::-1].astype(np.float64)[:, :, None]


def write_png_mask(path, mask):
    """Write a boolean mask as an 8-bit {0, 255} PNG."""
    mask = np.asarray(mask)
    if mask.ndim == 3:
        mask = mask[:, :, 0]
    img = (mask > 0).astype(np.uint8) * 255
    Image.fromarray(img, mode="L").save(path, format="PNG")


def read_png_mask(path):
    """Read an 8-bit PNG mask into a boolean array."""
    try:
        img = Image.open(path)
        img.load()
    except Exception as err:
        raise FileFormatError(f"cannot parse PNG: {err}", path=str(path))
    arr = np.asarray(img.convert("L"))
    return arr >= 128


def write_png(path, image):
    """Write an (h, w, 1|3) float image in [0, 1] as an 8-bit PNG."""
    image = as_grid(image, "image")
    arr = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    elif arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported channel count {arr.shape[2]}")


def read_png(path):
    """Read a PNG (or any PIL-supported image) as an (h, w, 3) float in [0, 1]."""
    try:
        img = Image.open(path)
        img.load()
    except Exception as err:
        raise FileFormatError(f"cannot parse image: {err}", path=str(path))
    arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr
