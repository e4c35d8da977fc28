"""Task data terms and their per-pixel quadratic (Gauss-Newton) models.

Every task exposes the same contract: given the current solution field,
produce the first-order derivative map ``d``, the (approximated)
second-order map ``h`` and the energy at the expansion point, plus per-group
partial derivatives used as minimization context by the basis generator.

The energy carries a factor 1/2 relative to the raw sum of squares so that
``d`` is exactly its derivative; the factor rescales the whole quadratic
model and leaves every solver step unchanged.
"""

from dataclasses import dataclass

import numpy as np

from .grid import as_grid, bilinear_sample_map, central_gradient

PROB_EPS = 1e-12


@dataclass
class QuadraticModel:
    """Per-pixel Taylor expansion of a data term at the current solution.

    ``d`` has 1 channel for scalar tasks and 2 for flow; ``h`` has 1 channel
    for scalar tasks and 3 (h_xx, h_xy, h_yy) for flow, each (h, w, c).
    """

    d: np.ndarray
    h: np.ndarray
    energy: float


@dataclass
class GroupedContext:
    """Per-group partial derivatives (channel groups of the feature map)."""

    d: np.ndarray  # (h, w, m) scalar tasks; (h, w, m, 2) flow
    h: np.ndarray  # (h, w, m) scalar tasks; (h, w, m, 3) flow


@dataclass
class LabelProbabilities:
    alpha: np.ndarray
    beta: np.ndarray


@dataclass
class Scribbles:
    """Foreground/background pixel coordinates as (x, y) integer pairs."""

    foreground: np.ndarray
    background: np.ndarray

    def __post_init__(self):
        self.foreground = np.atleast_2d(np.asarray(self.foreground, dtype=np.int64))
        self.background = np.atleast_2d(np.asarray(self.background, dtype=np.int64))

    def validate(self, w, h):
        for name, pts in (("foreground", self.foreground), ("background", self.background)):
            if pts.size == 0:
                raise ValueError(f"{name} scribble set is empty")
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise ValueError(f"{name} scribbles must be (n, 2) (x, y) pairs")
            if (pts[:, 0] < 0).any() or (pts[:, 0] >= w).any() \
                    or (pts[:, 1] < 0).any() or (pts[:, 1] >= h).any():
                raise ValueError(f"{name} scribble coordinates out of bounds for {w}x{h}")

    def scaled(self, factor, w, h):
        """Scribble coordinates mapped onto a grid ``factor`` times smaller."""
        def scale(pts):
            s = np.floor(pts.astype(np.float64) / factor).astype(np.int64)
            s[:, 0] = np.clip(s[:, 0], 0, w - 1)
            s[:, 1] = np.clip(s[:, 1], 0, h - 1)
            return np.unique(s, axis=0)
        return Scribbles(scale(self.foreground), scale(self.background))


def rasterize_polylines(polylines):
    """Bresenham rasterization of [[x, y], ...] polylines to pixel (x, y) pairs."""
    points = []
    for line in polylines:
        if len(line) == 1:
            points.append(tuple(int(v) for v in line[0]))
            continue
        for (x0, y0), (x1, y1) in zip(line[:-1], line[1:]):
            points.extend(_bresenham(int(x0), int(y0), int(x1), int(y1)))
    if not points:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.array(points, dtype=np.int64), axis=0)


def _bresenham(x0, y0, x1, y1):
    out = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        out.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return out


# --- binary labeling -------------------------------------------------------

def labeling_energy(x, probs):
    """Data-term value for binary labeling (half the weighted sum of squares)."""
    t = np.tanh(as_grid(x)[:, :, 0])
    a = as_grid(probs.alpha)[:, :, 0]
    b = as_grid(probs.beta)[:, :, 0]
    return 0.5 * float(np.sum(a * (t - 1.0) ** 2 + b * (t + 1.0) ** 2))


def labeling_quadratic(x, probs):
    """Quadratic model of the binary labeling term with tanh relaxation.

    Per pixel with t = tanh(x) and t' = 1 - t^2:
    d = [(alpha+beta) t + (beta-alpha)] t',  h = (alpha+beta) t'^2.
    """
    x = as_grid(x, "x")[:, :, 0]
    a = as_grid(probs.alpha, "alpha")[:, :, 0]
    b = as_grid(probs.beta, "beta")[:, :, 0]
    t = np.tanh(x)
    tp = 1.0 - t * t
    d = ((a + b) * t + (b - a)) * tp
    h = (a + b) * tp * tp
    energy = 0.5 * float(np.sum(a * (t - 1.0) ** 2 + b * (t + 1.0) ** 2))
    return QuadraticModel(d=d[:, :, None], h=h[:, :, None], energy=energy)


def labeling_grouped(x, probs, group_count):
    """Grouped labeling context: the single term split into equal-weight shares.

    The labeling term has no channel axis to split, so each of the ``m``
    groups carries 1/m of the full derivatives; the group sum reproduces the
    full model exactly.
    """
    model = labeling_quadratic(x, probs)
    m = int(group_count)
    if m < 1:
        raise ValueError("group_count must be >= 1")
    share_d = np.repeat(model.d / m, m, axis=2)
    share_h = np.repeat(model.h / m, m, axis=2)
    return model, GroupedContext(d=share_d, h=share_h)


def scribble_probabilities(features, scribbles, sigma=0.5, top_k=5):
    """Nonparametric label probabilities from scribble feature similarity.

    For each pixel, the foreground score is the mean of the ``top_k`` largest
    Gaussian feature affinities to foreground scribble pixels (background
    likewise); alpha normalizes the two scores.
    """
    features = as_grid(features, "features")
    h, w, c = features.shape
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scribbles.validate(w, h)

    flat = features.reshape(-1, c)
    inv = 1.0 / (2.0 * sigma * sigma)

    def score(points):
        ref = features[points[:, 1], points[:, 0]]  # (s, c)
        d2 = ((flat[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2)
        aff = np.exp(-d2 * inv)
        k = min(top_k, aff.shape[1])
        top = np.partition(aff, aff.shape[1] - k, axis=1)[:, aff.shape[1] - k :]
        return top.mean(axis=1)

    s_f = score(scribbles.foreground)
    s_b = score(scribbles.background)
    alpha = (s_f / (s_f + s_b + PROB_EPS)).reshape(h, w)
    return LabelProbabilities(alpha=alpha, beta=1.0 - alpha)


def temporal_probabilities(features_cur, features_prev, mask_prev, window=9, sigma=0.5):
    """Label probabilities propagated from a labeled previous frame.

    Each current pixel gathers Gaussian feature affinities to the previous
    frame inside a ``window x window`` neighborhood; alpha is the affinity
    mass on previously-foreground pixels over the total.
    """
    cur = as_grid(features_cur, "features_cur")
    prev = as_grid(features_prev, "features_prev")
    if cur.shape != prev.shape:
        raise ValueError(f"frame feature shapes differ: {cur.shape} vs {prev.shape}")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    mask = as_grid(mask_prev, "mask_prev")[:, :, 0]
    if mask.shape != cur.shape[:2]:
        raise ValueError("mask_prev size does not match features")

    h, w, c = cur.shape
    r = window // 2
    inv = 1.0 / (2.0 * sigma * sigma)
    fg_mass = np.zeros((h, w))
    total = np.zeros((h, w))
    for dy in range(-r, r + 1):
        ys = np.clip(np.arange(h) + dy, 0, h - 1)
        in_y = (np.arange(h) + dy >= 0) & (np.arange(h) + dy < h)
        for dx in range(-r, r + 1):
            xs = np.clip(np.arange(w) + dx, 0, w - 1)
            in_x = (np.arange(w) + dx >= 0) & (np.arange(w) + dx < w)
            valid = in_y[:, None] & in_x[None, :]
            shifted = prev[ys][:, xs]
            d2 = ((cur - shifted) ** 2).sum(axis=2)
            aff = np.exp(-d2 * inv) * valid
            total += aff
            fg_mass += aff * mask[ys][:, xs]
    alpha = fg_mass / (total + PROB_EPS)
    return LabelProbabilities(alpha=alpha, beta=1.0 - alpha)


# --- dense correspondence ---------------------------------------------------

def _warp_coords(h, w, x):
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    if x.shape[2] == 1:
        return xs + x[:, :, 0], ys
    return xs + x[:, :, 0], ys + x[:, :, 1]


def correspondence_energy(pyr_src, pyr_tgt, x):
    """Feature-consistency data term: half the squared warped residual."""
    src = as_grid(pyr_src)
    tgt = as_grid(pyr_tgt)
    x = as_grid(x)
    wx, wy = _warp_coords(*src.shape[:2], x)
    rho = bilinear_sample_map(src, wx, wy) - tgt
    return 0.5 * float(np.sum(rho * rho))


def _grouped_slices(channels, group_count):
    m = int(group_count)
    if m < 1:
        raise ValueError("group_count must be >= 1")
    if channels % m != 0:
        raise ValueError(f"{channels} channels not divisible into {m} groups")
    size = channels // m
    return [slice(g * size, (g + 1) * size) for g in range(m)]


def stereo_quadratic(pyr_src, pyr_tgt, x, group_count=1):
    """Quadratic model of the stereo term at disparity field ``x``.

    The source features are sampled at ``p + (x_p, 0)``; positive disparity
    points rightward.  ``d`` accumulates the channel products of the warped
    horizontal feature gradient with the residual, ``h`` the squared gradient.
    """
    src = as_grid(pyr_src, "pyr_src")
    tgt = as_grid(pyr_tgt, "pyr_tgt")
    if src.shape != tgt.shape:
        raise ValueError(f"source/target shapes differ: {src.shape} vs {tgt.shape}")
    x = as_grid(x, "x")
    if x.shape[2] != 1:
        raise ValueError("stereo solution must have 1 channel")
    slices = _grouped_slices(src.shape[2], group_count)

    gx, _ = central_gradient(src)
    wx, wy = _warp_coords(*src.shape[:2], x)
    warped = bilinear_sample_map(src, wx, wy)
    grad = bilinear_sample_map(gx, wx, wy)
    rho = warped - tgt

    d_full = (grad * rho).sum(axis=2)
    h_full = (grad * grad).sum(axis=2)
    energy = 0.5 * float(np.sum(rho * rho))

    m = len(slices)
    gd = np.empty(src.shape[:2] + (m,))
    gh = np.empty(src.shape[:2] + (m,))
    for i, sl in enumerate(slices):
        gd[:, :, i] = (grad[:, :, sl] * rho[:, :, sl]).sum(axis=2)
        gh[:, :, i] = (grad[:, :, sl] ** 2).sum(axis=2)

    model = QuadraticModel(d=d_full[:, :, None], h=h_full[:, :, None], energy=energy)
    return model, GroupedContext(d=gd, h=gh)


def flow_quadratic(pyr_src, pyr_tgt, x, group_count=1):
    """Quadratic model of the flow term at motion field ``x`` (2 channels).

    Per pixel the Jacobian stacks the warped x/y feature gradients; ``d`` is
    J^T rho (2 channels) and ``h`` holds the J^T J entries (h_xx, h_xy, h_yy).
    """
    src = as_grid(pyr_src, "pyr_src")
    tgt = as_grid(pyr_tgt, "pyr_tgt")
    if src.shape != tgt.shape:
        raise ValueError(f"source/target shapes differ: {src.shape} vs {tgt.shape}")
    x = as_grid(x, "x")
    if x.shape[2] != 2:
        raise ValueError("flow solution must have 2 channels (u, v)")
    slices = _grouped_slices(src.shape[2], group_count)

    gx, gy = central_gradient(src)
    wx, wy = _warp_coords(*src.shape[:2], x)
    warped = bilinear_sample_map(src, wx, wy)
    jx = bilinear_sample_map(gx, wx, wy)
    jy = bilinear_sample_map(gy, wx, wy)
    rho = warped - tgt

    d_full = np.stack([(jx * rho).sum(axis=2), (jy * rho).sum(axis=2)], axis=2)
    h_full = np.stack(
        [(jx * jx).sum(axis=2), (jx * jy).sum(axis=2), (jy * jy).sum(axis=2)], axis=2
    )
    energy = 0.5 * float(np.sum(rho * rho))

    m = len(slices)
    gd = np.empty(src.shape[:2] + (m, 2))
    gh = np.empty(src.shape[:2] + (m, 3))
    for i, sl in enumerate(slices):
        gd[:, :, i, 0] = (jx[:, :, sl] * rho[:, :, sl]).sum(axis=2)
        gd[:, :, i, 1] = (jy[:, :, sl] * rho[:, :, sl]).sum(axis=2)
        gh[:, :, i, 0] = (jx[:, :, sl] ** 2).sum(axis=2)
        gh[:, :, i, 1] = (jx[:, :, sl] * jy[:, :, sl]).sum(axis=2)
        gh[:, :, i, 2] = (jy[:, :, sl] ** 2).sum(axis=2)

    model = QuadraticModel(d=d_full, h=h_full, energy=energy)
    return model, GroupedContext(d=gd, h=gh)
