"""Multi-level feature pyramids and coarse-to-fine solution transfer.

Each pyramid level holds a feature grid at a fixed stride relative to the
input image.  Features come from a deterministic handcrafted filter bank
(intensity, color, derivatives, oriented derivative-of-Gaussian responses)
or from an externally precomputed file, so the solvers stay agnostic to
where the features were produced.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import FileFormatError
from .grid import as_grid, bilinear_sample_map

DEFAULT_STRIDES = (32, 16, 8, 4)
DEFAULT_CHANNELS = (32, 32, 16, 16)

LSMF_MAGIC = b"LSMF"
LSMF_VERSION = 1


@dataclass
class PyramidConfig:
    strides: tuple = DEFAULT_STRIDES
    channels_per_level: tuple = DEFAULT_CHANNELS
    feature_kind: str = "filter-bank"  # or "external"
    blur_sigma: float = 0.5  # Gaussian sigma as a fraction of the stride
    feature_path: str | None = None  # for feature_kind == "external"

    def __post_init__(self):
        self.strides = tuple(int(s) for s in self.strides)
        self.channels_per_level = tuple(int(c) for c in self.channels_per_level)
        if len(self.strides) != len(self.channels_per_level):
            raise ValueError("strides and channels_per_level must have equal length")
        if len(self.strides) < 2:
            raise ValueError("a pyramid needs at least 2 levels")
        if any(a <= b for a, b in zip(self.strides, self.strides[1:])):
            raise ValueError("strides must be strictly decreasing coarse-to-fine")
        if self.feature_kind not in ("filter-bank", "external"):
            raise ValueError(f"unknown feature_kind {self.feature_kind!r}")


@dataclass
class FeaturePyramid:
    """Feature grids ordered coarse to fine, with their strides."""

    levels: list = field(default_factory=list)  # list of (h, w, c) arrays
    strides: tuple = DEFAULT_STRIDES
    input_shape: tuple = (0, 0)  # (h, w) of the source image

    @property
    def n_levels(self):
        return len(self.levels)


def level_shape(input_h, input_w, stride):
    """Spatial size of a level: ceiling division of the input size by the stride."""
    return (-(-input_h // stride), -(-input_w // stride))


def filter_bank(image):
    """Handcrafted per-pixel feature bank for a 1- or 3-channel image.

    Channels: intensity, R, G, B, x/y intensity derivatives, gradient
    magnitude, and derivative-of-Gaussian responses at 4 orientations
    (11 channels total).  A constant image yields exactly zero in every
    derivative channel.
    """
    image = as_grid(image, "image")
    if image.shape[2] == 1:
        rgb = np.repeat(image, 3, axis=2)
    elif image.shape[2] == 3:
        rgb = image
    else:
        raise ValueError(f"image must have 1 or 3 channels, got {image.shape[2]}")
    intensity = rgb.mean(axis=2)

    dx = np.zeros_like(intensity)
    dy = np.zeros_like(intensity)
    if intensity.shape[1] > 1:
        dx[:, 1:-1] = (intensity[:, 2:] - intensity[:, :-2]) * 0.5
        dx[:, 0] = intensity[:, 1] - intensity[:, 0]
        dx[:, -1] = intensity[:, -1] - intensity[:, -2]
    if intensity.shape[0] > 1:
        dy[1:-1] = (intensity[2:] - intensity[:-2]) * 0.5
        dy[0] = intensity[1] - intensity[0]
        dy[-1] = intensity[-1] - intensity[-2]
    grad_mag = np.hypot(dx, dy)

    dog_x = gaussian_filter(intensity, sigma=1.5, order=(0, 1), mode="nearest")
    dog_y = gaussian_filter(intensity, sigma=1.5, order=(1, 0), mode="nearest")
    oriented = [
        np.cos(theta) * dog_x + np.sin(theta) * dog_y
        for theta in (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)
    ]

    channels = [intensity, rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2], dx, dy, grad_mag]
    channels.extend(oriented)
    return np.stack(channels, axis=2)


def normalize_channels(features, min_std=1e-3):
    """Zero-mean unit-variance per channel; constant channels become all zeros.

    ``min_std`` widens "constant" to anything below the 8-bit quantization
    floor of a [0, 1] image: amplifying sub-quantization residue to unit
    variance would manufacture features out of rounding noise.
    """
    mean = features.mean(axis=(0, 1), keepdims=True)
    std = features.std(axis=(0, 1), keepdims=True)
    out = np.zeros_like(features)
    ok = std[0, 0] > min_std
    out[:, :, ok] = (features[:, :, ok] - mean[:, :, ok]) / std[:, :, ok]
    return out


def _resample_to(image, target_h, target_w, stride, blur_sigma):
    """Anti-alias blur followed by center-aligned bilinear subsampling."""
    sigma = blur_sigma * stride
    blurred = np.stack(
        [gaussian_filter(image[:, :, c], sigma=sigma, mode="nearest")
         for c in range(image.shape[2])],
        axis=2,
    )
    ys, xs = np.meshgrid(np.arange(target_h), np.arange(target_w), indexing="ij")
    src_x = (xs + 0.5) * stride - 0.5
    src_y = (ys + 0.5) * stride - 0.5
    return bilinear_sample_map(blurred, src_x, src_y)


def build_pyramid(image, cfg=None):
    """Build a coarse-to-fine feature pyramid from an RGB or grayscale image.

    With the filter-bank feature kind, each level is the handcrafted bank of
    the blurred-and-subsampled image, cycled to the configured channel count
    and normalized per channel.  With the external kind, levels are read
    verbatim from the configured feature file.
    """
    cfg = cfg or PyramidConfig()
    image = as_grid(image, "image")
    if image.shape[2] not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {image.shape[2]}")
    h, w = image.shape[:2]

    if cfg.feature_kind == "external":
        if cfg.feature_path is None:
            raise ValueError("external feature kind requires feature_path")
        levels = read_feature_file(cfg.feature_path)
        if len(levels) != len(cfg.strides):
            raise ValueError(
                f"feature file has {len(levels)} levels, config expects {len(cfg.strides)}"
            )
        return FeaturePyramid(levels=levels, strides=cfg.strides, input_shape=(h, w))

    levels = []
    for stride, n_channels in zip(cfg.strides, cfg.channels_per_level):
        lh, lw = level_shape(h, w, stride)
        small = _resample_to(image, lh, lw, stride, cfg.blur_sigma)
        bank = filter_bank(small)
        reps = -(-n_channels // bank.shape[2])
        cycled = np.concatenate([bank] * reps, axis=2)[:, :, :n_channels]
        levels.append(normalize_channels(cycled))
    return FeaturePyramid(levels=levels, strides=cfg.strides, input_shape=(h, w))


def upsample_solution(x, target_w, target_h, scale=1.0, displacement=False):
    """Bilinear upsample of a solution field to a new spatial size.

    Displacement-valued fields (stereo disparity, flow vectors) are measured
    in pixels of their own level, so their values are multiplied by ``scale``
    when moving to a finer grid; labeling fields pass through unscaled.
    """
    x = as_grid(x, "solution")
    src_h, src_w = x.shape[:2]
    ys, xs = np.meshgrid(np.arange(target_h), np.arange(target_w), indexing="ij")
    # Corner-aligned mapping keeps sample coordinates on the source lattice,
    # so linear ramps are reproduced exactly.
    sx = xs * ((src_w - 1) / (target_w - 1)) if target_w > 1 else np.zeros_like(xs, dtype=float)
    sy = ys * ((src_h - 1) / (target_h - 1)) if target_h > 1 else np.zeros_like(ys, dtype=float)
    out = bilinear_sample_map(x, sx, sy)
    if displacement:
        out = out * scale
    return out


def downsample_solution(x, target_w, target_h):
    """Bilinear downsample of a solution field (no value scaling)."""
    return upsample_solution(x, target_w, target_h, scale=1.0, displacement=False)


# --- external feature container ------------------------------------------

def write_feature_file(path, levels):
    """Write feature grids to the flat binary container.

    Layout: magic ``LSMF``, version u32, level count u32, per-level
    width/height/channels u32 triples, then per level float32 little-endian
    data, row-major and channel-interleaved.
    """
    with open(path, "wb") as f:
        f.write(LSMF_MAGIC)
        f.write(struct.pack("<II", LSMF_VERSION, len(levels)))
        for lv in levels:
            lv = as_grid(lv)
            lh, lw, lc = lv.shape
            f.write(struct.pack("<III", lw, lh, lc))
        for lv in levels:
            lv = as_grid(lv)
            f.write(lv.astype("<f4").tobytes(order="C"))


def read_feature_file(path):
    """Read feature grids from the container written by :func:`write_feature_file`."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != LSMF_MAGIC:
        raise FileFormatError("bad feature-file magic", offset=0, path=str(path))
    if len(raw) < 12:
        raise FileFormatError("truncated feature-file header", offset=4, path=str(path))
    version, n_levels = struct.unpack_from("<II", raw, 4)
    if version != LSMF_VERSION:
        raise FileFormatError(f"unsupported feature-file version {version}", offset=4, path=str(path))
    off = 12
    dims = []
    for _ in range(n_levels):
        if off + 12 > len(raw):
            raise FileFormatError("truncated level header", offset=off, path=str(path))
        lw, lh, lc = struct.unpack_from("<III", raw, off)
        dims.append((lh, lw, lc))
        off += 12
    levels = []
    for lh, lw, lc in dims:
        count = lh * lw * lc
        nbytes = count * 4
        if off + nbytes > len(raw):
            raise FileFormatError("truncated level payload", offset=off, path=str(path))
        data = np.frombuffer(raw, dtype="<f4", count=count, offset=off)
        levels.append(data.reshape(lh, lw, lc).astype(np.float64))
        off += nbytes
    return levels
