"""Subspace basis construction.

Two routes produce a basis per pyramid level: deterministic analytic bases
(low-frequency cosine modes or overlapping bilinear patches), and a
generation pipeline that mixes image context with minimization context
through multi-scale pooling and residual blocks, using externally supplied
weights.  Flow reuses the scalar pipeline by packing each pixel's 2x2
system into determinant maps (Cramer contexts), one set per component.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidWeightsError
from .grid import as_grid, box_mean, integral_image
from .solver import FlowBasisPair, SubspaceBasis, orthonormalize

LSMW_MAGIC = b"LSMW"
LSMW_VERSION = 1
N_SCALES = 4
N_RES_BLOCKS = 4


# --- analytic bases ---------------------------------------------------------

def _zigzag_pairs(max_x, max_y):
    """(p, q) frequency pairs by increasing diagonal, alternating direction."""
    for s in range(max_x + max_y - 1):
        diag = range(min(s, max_x - 1), -1, -1)
        if s % 2 == 0:
            diag = reversed(list(diag))
        for p in diag:
            q = s - p
            if 0 <= q < max_y:
                yield p, q


def analytic_basis(level_w, level_h, k, kind="constant+dct"):
    """Deterministic orthonormal basis for a level of the given size.

    ``constant+dct`` takes the first ``k`` 2D cosine modes in zigzag order
    (the first mode is the constant vector).  ``bilinear-patches`` uses
    ``k = gx * gy`` overlapping hat functions that form a partition of unity
    before orthonormalization.
    """
    n = level_w * level_h
    if k < 1:
        raise ValueError("basis dimension must be >= 1")
    if k > n:
        raise ValueError(f"basis dimension {k} exceeds pixel count {n}")

    if kind == "constant+dct":
        cols = []
        xs = (np.arange(level_w) + 0.5) / level_w
        ys = (np.arange(level_h) + 0.5) / level_h
        for p, q in _zigzag_pairs(level_w, level_h):
            mode = np.outer(np.cos(np.pi * q * ys), np.cos(np.pi * p * xs))
            cols.append(mode.ravel())
            if len(cols) == k:
                break
        v = np.stack(cols, axis=1)
    elif kind == "bilinear-patches":
        gx, gy = _patch_grid(k)
        hats_x = _hat_profiles(level_w, gx)
        hats_y = _hat_profiles(level_h, gy)
        cols = [
            np.outer(hats_y[j], hats_x[i]).ravel()
            for j in range(gy)
            for i in range(gx)
        ]
        v = np.stack(cols, axis=1)
    else:
        raise ValueError(f"unknown analytic basis kind {kind!r}")
    return SubspaceBasis(orthonormalize(v))


def _patch_grid(k):
    g = int(np.sqrt(k))
    while g > 1 and k % g != 0:
        g -= 1
    return k // g, g


def _hat_profiles(size, g):
    """Linear B-spline profiles over [0, size-1]; rows sum to one."""
    if g == 1:
        return np.ones((1, size))
    xs = np.arange(size, dtype=np.float64)
    nodes = np.linspace(0.0, size - 1.0, g)
    delta = (size - 1.0) / (g - 1)
    return np.maximum(0.0, 1.0 - np.abs(xs[None, :] - nodes[:, None]) / delta)


# --- minimization context ---------------------------------------------------

@dataclass
class MinimizationContext:
    """Per-group derivative maps plus the normalized intermediate solution."""

    grouped_first: np.ndarray   # (h, w, m)
    grouped_second: np.ndarray  # (h, w, m)
    normalized_x: np.ndarray    # (h, w, 1)


@dataclass
class CramerContext:
    """Per-group determinant maps of the 2x2 flow systems."""

    det_full: np.ndarray  # (h, w, m)
    det_x: np.ndarray     # (h, w, m)
    det_y: np.ndarray     # (h, w, m)


def normalize_solution(x):
    """Zero-mean unit-variance copy of a field; all-zero when the field is constant."""
    x = as_grid(x, "x")
    std = x.std()
    if std <= 1e-12:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def build_min_context(grouped, x):
    """Pack grouped scalar-task derivatives and the normalized solution."""
    if grouped.d.ndim != 3:
        raise ValueError("scalar-task grouped context expected (h, w, m) maps")
    return MinimizationContext(
        grouped_first=grouped.d,
        grouped_second=grouped.h,
        normalized_x=normalize_solution(x)[:, :, :1],
    )


def build_cramer_context(grouped):
    """Determinant maps from grouped flow blocks, per the Cramer's-rule recipe.

    det is the determinant of each group's 2x2 second-order block; det_x and
    det_y replace its first and second column with the group's first-order
    2-vector.  No division happens here, so singular (aperture) blocks pass
    through as zeros.
    """
    d = grouped.d  # (h, w, m, 2)
    h = grouped.h  # (h, w, m, 3)
    if d.ndim != 4 or d.shape[3] != 2 or h.shape[3] != 3:
        raise ValueError("flow grouped context expected (h, w, m, 2) and (h, w, m, 3)")
    hxx, hxy, hyy = h[..., 0], h[..., 1], h[..., 2]
    dx, dy = d[..., 0], d[..., 1]
    det = hxx * hyy - hxy * hxy
    det_x = dx * hyy - hxy * dy
    det_y = hxx * dy - dx * hxy
    return CramerContext(det_full=det, det_x=det_x, det_y=det_y)


def flow_min_contexts(cramer, x):
    """Component-wise minimization contexts for the flow basis generators.

    The horizontal generator sees (det_x, det) and the normalized u field;
    the vertical one sees (det_y, det) and the normalized v field, which
    matches the scalar-task context layout channel for channel.
    """
    x = as_grid(x, "x")
    if x.shape[2] != 2:
        raise ValueError("flow solution must have 2 channels")
    ctx_u = MinimizationContext(
        grouped_first=cramer.det_x,
        grouped_second=cramer.det_full,
        normalized_x=normalize_solution(x[:, :, 0])[:, :, :1],
    )
    ctx_v = MinimizationContext(
        grouped_first=cramer.det_y,
        grouped_second=cramer.det_full,
        normalized_x=normalize_solution(x[:, :, 1])[:, :, :1],
    )
    return ctx_u, ctx_v


# --- generator weights ------------------------------------------------------

@dataclass
class LevelWeights:
    """Channel-mixing matrices for one pyramid level's basis generator."""

    c: int
    m: int
    k: int
    w_img: np.ndarray                 # (m, c)
    b_img: np.ndarray                 # (m,)
    w_scales: list = field(default_factory=list)  # 4 x (2m, 3m+1)
    b_scales: list = field(default_factory=list)  # 4 x (2m,)
    res_blocks: list = field(default_factory=list)  # 4 x (w1, b1, w2, b2), 8m wide
    w_out: np.ndarray = None          # (k, 8m)
    b_out: np.ndarray = None          # (k,)

    def validate(self):
        c, m, k = self.c, self.m, self.k
        def check(arr, shape, name):
            if np.asarray(arr).shape != shape:
                raise InvalidWeightsError(
                    f"{name} has shape {np.asarray(arr).shape}, expected {shape}"
                )
        check(self.w_img, (m, c), "image-context matrix")
        check(self.b_img, (m,), "image-context bias")
        if len(self.w_scales) != N_SCALES or len(self.b_scales) != N_SCALES:
            raise InvalidWeightsError("expected 4 per-scale projections")
        for i in range(N_SCALES):
            check(self.w_scales[i], (2 * m, 3 * m + 1), f"scale-{i} matrix")
            check(self.b_scales[i], (2 * m,), f"scale-{i} bias")
        if len(self.res_blocks) != N_RES_BLOCKS:
            raise InvalidWeightsError("expected 4 residual blocks")
        for i, (w1, b1, w2, b2) in enumerate(self.res_blocks):
            check(w1, (8 * m, 8 * m), f"residual-{i} first matrix")
            check(b1, (8 * m,), f"residual-{i} first bias")
            check(w2, (8 * m, 8 * m), f"residual-{i} second matrix")
            check(b2, (8 * m,), f"residual-{i} second bias")
        check(self.w_out, (k, 8 * m), "output matrix")
        check(self.b_out, (k,), "output bias")


@dataclass
class GeneratorWeights:
    levels: list  # of LevelWeights, coarse to fine

    def validate(self):
        for lv in self.levels:
            lv.validate()


def _level_matrices(lv):
    """Matrices in serialization order, paired with their biases."""
    mats = [(lv.w_img, lv.b_img)]
    mats += list(zip(lv.w_scales, lv.b_scales))
    for w1, b1, w2, b2 in lv.res_blocks:
        mats += [(w1, b1), (w2, b2)]
    mats.append((lv.w_out, lv.b_out))
    return mats


def random_weights(level_specs, seed=0, scale=0.2):
    """Random-seeded generator weights for the given (c, m, k) level specs."""
    rng = np.random.RandomState(seed)
    levels = []
    for c, m, k in level_specs:
        def mat(rows, cols):
            return rng.randn(rows, cols) * scale / np.sqrt(cols)
        lw = LevelWeights(
            c=c, m=m, k=k,
            w_img=mat(m, c), b_img=rng.randn(m) * 0.01,
            w_scales=[mat(2 * m, 3 * m + 1) for _ in range(N_SCALES)],
            b_scales=[rng.randn(2 * m) * 0.01 for _ in range(N_SCALES)],
            res_blocks=[
                (mat(8 * m, 8 * m), rng.randn(8 * m) * 0.01,
                 mat(8 * m, 8 * m), rng.randn(8 * m) * 0.01)
                for _ in range(N_RES_BLOCKS)
            ],
            w_out=mat(k, 8 * m), b_out=rng.randn(k) * 0.01,
        )
        levels.append(lw)
    return GeneratorWeights(levels=levels)


def identity_weights(level_specs):
    """Deterministic pass-through-style weights (spread selectors, zero biases).

    Each matrix selects input channels at evenly spread positions, so the
    output is a plain reading of the image context through the pipeline.
    """
    def eye_like(rows, cols):
        w = np.zeros((rows, cols))
        for i in range(rows):
            w[i, (i * cols) // rows] = 1.0
        return w

    levels = []
    for c, m, k in level_specs:
        lw = LevelWeights(
            c=c, m=m, k=k,
            w_img=eye_like(m, c), b_img=np.zeros(m),
            w_scales=[eye_like(2 * m, 3 * m + 1) for _ in range(N_SCALES)],
            b_scales=[np.zeros(2 * m) for _ in range(N_SCALES)],
            res_blocks=[
                (eye_like(8 * m, 8 * m), np.zeros(8 * m),
                 eye_like(8 * m, 8 * m), np.zeros(8 * m))
                for _ in range(N_RES_BLOCKS)
            ],
            w_out=eye_like(k, 8 * m), b_out=np.zeros(k),
        )
        levels.append(lw)
    return GeneratorWeights(levels=levels)


def zero_weights(level_specs, bias=1.0):
    """All-zero matrices with constant biases; degenerate by construction."""
    levels = []
    for c, m, k in level_specs:
        lw = LevelWeights(
            c=c, m=m, k=k,
            w_img=np.zeros((m, c)), b_img=np.full(m, bias),
            w_scales=[np.zeros((2 * m, 3 * m + 1)) for _ in range(N_SCALES)],
            b_scales=[np.full(2 * m, bias) for _ in range(N_SCALES)],
            res_blocks=[
                (np.zeros((8 * m, 8 * m)), np.full(8 * m, bias),
                 np.zeros((8 * m, 8 * m)), np.full(8 * m, bias))
                for _ in range(N_RES_BLOCKS)
            ],
            w_out=np.zeros((k, 8 * m)), b_out=np.full(k, bias),
        )
        levels.append(lw)
    return GeneratorWeights(levels=levels)


def write_weights(path, weights):
    """Serialize generator weights to the LSMW container.

    Layout: magic, version u32, level count u32, per-level c/m/K u32 triples,
    then each matrix as row count u32, column count u32, row-major float32
    entries with the bias vector appended, and a trailing CRC32 over all
    preceding bytes.
    """
    weights.validate()
    buf = bytearray()
    buf += LSMW_MAGIC
    buf += struct.pack("<II", LSMW_VERSION, len(weights.levels))
    for lv in weights.levels:
        buf += struct.pack("<III", lv.c, lv.m, lv.k)
    for lv in weights.levels:
        for w, b in _level_matrices(lv):
            w = np.asarray(w, dtype=np.float64)
            buf += struct.pack("<II", w.shape[0], w.shape[1])
            buf += w.astype("<f4").tobytes(order="C")
            buf += np.asarray(b, dtype="<f4").tobytes(order="C")
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(buf))


def read_weights(path):
    """Parse and checksum-validate an LSMW weight file."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise InvalidWeightsError(f"weight file too short ({len(raw)} bytes)")
    body, crc_stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise InvalidWeightsError("weight file checksum mismatch")
    if body[:4] != LSMW_MAGIC:
        raise InvalidWeightsError("bad weight-file magic")
    version, n_levels = struct.unpack_from("<II", body, 4)
    if version != LSMW_VERSION:
        raise InvalidWeightsError(f"unsupported weight-file version {version}")
    off = 12
    specs = []
    for _ in range(n_levels):
        c, m, k = struct.unpack_from("<III", body, off)
        specs.append((c, m, k))
        off += 12

    def take_matrix():
        nonlocal off
        if off + 8 > len(body):
            raise InvalidWeightsError("truncated matrix header")
        rows, cols = struct.unpack_from("<II", body, off)
        off += 8
        n = rows * cols
        if off + 4 * (n + rows) > len(body):
            raise InvalidWeightsError("truncated matrix payload")
        w = np.frombuffer(body, dtype="<f4", count=n, offset=off).reshape(rows, cols)
        off += 4 * n
        b = np.frombuffer(body, dtype="<f4", count=rows, offset=off)
        off += 4 * rows
        return w.astype(np.float64), b.astype(np.float64)

    levels = []
    for c, m, k in specs:
        w_img, b_img = take_matrix()
        scales = [take_matrix() for _ in range(N_SCALES)]
        blocks = []
        for _ in range(N_RES_BLOCKS):
            w1, b1 = take_matrix()
            w2, b2 = take_matrix()
            blocks.append((w1, b1, w2, b2))
        w_out, b_out = take_matrix()
        lv = LevelWeights(
            c=c, m=m, k=k, w_img=w_img, b_img=b_img,
            w_scales=[s[0] for s in scales], b_scales=[s[1] for s in scales],
            res_blocks=blocks, w_out=w_out, b_out=b_out,
        )
        levels.append(lv)
    weights = GeneratorWeights(levels=levels)
    weights.validate()
    return weights


# --- generation pipeline ----------------------------------------------------

def pooling_kernels(level_w):
    """Four box-filter sizes spanning local to near-global context."""
    def odd(v):
        return max(1, 2 * (int(v) // 2) + 1)
    return (1, odd(level_w / 8), odd(level_w / 4), odd(level_w / 2))


def _mix(features, w, b):
    return np.einsum("hwc,mc->hwm", features, w) + b


def generate_basis(image_ctx, min_ctx, weights, k=None):
    """Run the basis-generation pipeline for one level.

    Stages: image-context reduction to m channels; concatenation with the 2m
    minimization-context channels and the normalized solution; multi-scale
    box pooling via one integral image; per-scale projections to 2m channels
    concatenated to 8m; four residual blocks; final projection to K channels,
    each reshaped into a basis column and orthonormalized.
    """
    image_ctx = as_grid(image_ctx, "image_ctx")
    lv = weights
    if image_ctx.shape[2] != lv.c:
        raise InvalidWeightsError(
            f"image context has {image_ctx.shape[2]} channels, weights expect {lv.c}"
        )
    if k is not None and k != lv.k:
        raise InvalidWeightsError(f"requested K={k} but weights produce K={lv.k}")
    m = lv.m
    if min_ctx.grouped_first.shape[2] != m or min_ctx.grouped_second.shape[2] != m:
        raise InvalidWeightsError(
            f"minimization context has {min_ctx.grouped_first.shape[2]} groups, "
            f"weights expect m={m}"
        )

    img_m = _mix(image_ctx, lv.w_img, lv.b_img)
    ctx = np.concatenate(
        [img_m, min_ctx.grouped_first, min_ctx.grouped_second, min_ctx.normalized_x],
        axis=2,
    )
    assert ctx.shape[2] == 3 * m + 1

    sat = integral_image(ctx)
    scales = []
    for i, kernel in enumerate(pooling_kernels(ctx.shape[1])):
        pooled = box_mean(sat, kernel)
        scales.append(_mix(pooled, lv.w_scales[i], lv.b_scales[i]))
    feat = np.concatenate(scales, axis=2)
    assert feat.shape[2] == 8 * m

    for w1, b1, w2, b2 in lv.res_blocks:
        inner = np.maximum(_mix(feat, w1, b1), 0.0)
        feat = feat + _mix(inner, w2, b2)

    out = _mix(feat, lv.w_out, lv.b_out)
    v = out.reshape(-1, lv.k)
    return SubspaceBasis(orthonormalize(v))


def analytic_flow_pair(level_w, level_h, k, kind="constant+dct"):
    """Identical analytic bases for the two flow components."""
    b = analytic_basis(level_w, level_h, k, kind)
    return FlowBasisPair(v_u=b, v_v=SubspaceBasis(b.v.copy()))
