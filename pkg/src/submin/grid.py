"""Dense 2D grid operations: bilinear sampling, integral images, box means.

A "grid" throughout this library is a numpy array of shape ``(h, w)`` or
``(h, w, c)``, row-major with the channel axis last.  Coordinates are
``(x, y)`` with ``x`` along the width axis, matching image conventions.
"""

import numpy as np


def as_grid(a, name="grid"):
    """Coerce ``a`` to a float64 ``(h, w, c)`` array, adding a channel axis if absent."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"{name} must be 2D or 3D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1 or a.shape[2] < 1:
        raise ValueError(f"{name} has empty dimension: shape {a.shape}")
    return a


def bilinear_sample(g, x, y, ch=0):
    """Sample one channel of a grid at a subpixel coordinate.

    Out-of-bounds coordinates clamp to the border pixel, so every input
    yields a finite value.  At integer lattice points the stored value is
    reproduced exactly.
    """
    g = as_grid(g)
    h, w, c = g.shape
    if not 0 <= ch < c:
        raise ValueError(f"channel {ch} out of range for {c}-channel grid")
    return float(_sample_channel(g[:, :, ch], np.float64(x), np.float64(y)))


def bilinear_sample_map(g, xs, ys):
    """Sample all channels of ``g`` at coordinate arrays ``xs``, ``ys``.

    ``xs`` and ``ys`` must share a shape; the result has that shape plus a
    trailing channel axis.  Border policy is clamp-to-edge, as in
    :func:`bilinear_sample`.
    """
    g = as_grid(g)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"coordinate shapes differ: {xs.shape} vs {ys.shape}")
    h, w, c = g.shape

    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0

    # Clamping both corners collapses fully out-of-range coordinates onto the
    # border pixel; the fractional weight then has no effect.
    ix0 = np.clip(x0.astype(np.int64), 0, w - 1)
    ix1 = np.clip(x0.astype(np.int64) + 1, 0, w - 1)
    iy0 = np.clip(y0.astype(np.int64), 0, h - 1)
    iy1 = np.clip(y0.astype(np.int64) + 1, 0, h - 1)

    wx = fx[..., None]
    wy = fy[..., None]
    top = g[iy0, ix0] * (1.0 - wx) + g[iy0, ix1] * wx
    bot = g[iy1, ix0] * (1.0 - wx) + g[iy1, ix1] * wx
    return top * (1.0 - wy) + bot * wy


def _sample_channel(plane, x, y):
    h, w = plane.shape
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    ix0 = min(max(x0, 0), w - 1)
    ix1 = min(max(x0 + 1, 0), w - 1)
    iy0 = min(max(y0, 0), h - 1)
    iy1 = min(max(y0 + 1, 0), h - 1)
    top = plane[iy0, ix0] * (1.0 - fx) + plane[iy0, ix1] * fx
    bot = plane[iy1, ix0] * (1.0 - fx) + plane[iy1, ix1] * fx
    return top * (1.0 - fy) + bot * fy


def integral_image(g):
    """Summed-area table per channel: entry (x, y) = sum of g over [0..x] x [0..y]."""
    g = as_grid(g)
    return np.cumsum(np.cumsum(g, axis=0), axis=1)


def box_mean(integral, kernel):
    """Per-pixel mean over a ``kernel x kernel`` window, from a summed-area table.

    Windows are clipped at the image borders and the divisor is the clipped
    window area, so border means stay unbiased.  The output has the same
    spatial size as the input.  ``kernel`` must be odd and >= 1; ``kernel=1``
    recovers the original grid from its integral image.
    """
    integral = as_grid(integral, "integral")
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 1, got {kernel}")
    h, w, c = integral.shape
    r = kernel // 2

    ys = np.arange(h)
    xs = np.arange(w)
    y1 = np.clip(ys - r, 0, h - 1)[:, None]
    y2 = np.clip(ys + r, 0, h - 1)[:, None]
    x1 = np.clip(xs - r, 0, w - 1)[None, :]
    x2 = np.clip(xs + r, 0, w - 1)[None, :]

    # Inclusive-exclusive corner lookup; indices below zero contribute 0.
    def corner(yy, xx):
        out = np.zeros((h, w, c), dtype=np.float64)
        valid = (yy >= 0) & (xx >= 0)
        yy_c = np.clip(yy, 0, h - 1)
        xx_c = np.clip(xx, 0, w - 1)
        vals = integral[yy_c, xx_c]
        out[valid] = vals[valid]
        return out

    yy2, xx2 = np.broadcast_arrays(y2, x2)
    yy1, xx1 = np.broadcast_arrays(y1 - 1, x1 - 1)
    total = (
        corner(yy2, xx2)
        - corner(yy1, xx2)
        - corner(yy2, xx1)
        + corner(yy1, xx1)
    )
    area = (y2 - y1 + 1) * (x2 - x1 + 1)
    return total / area[:, :, None]


def central_gradient(g):
    """Per-channel spatial gradients by central differences.

    Returns ``(gx, gy)`` with one-sided differences at the borders, matching
    the clamp-to-edge sampling policy.
    """
    g = as_grid(g)
    gx = np.empty_like(g)
    gy = np.empty_like(g)
    gx[:, 1:-1] = (g[:, 2:] - g[:, :-2]) * 0.5
    gx[:, 0] = g[:, 1] - g[:, 0] if g.shape[1] > 1 else 0.0
    gx[:, -1] = g[:, -1] - g[:, -2] if g.shape[1] > 1 else 0.0
    gy[1:-1] = (g[2:] - g[:-2]) * 0.5
    gy[0] = g[1] - g[0] if g.shape[0] > 1 else 0.0
    gy[-1] = g[-1] - g[-2] if g.shape[0] > 1 else 0.0
    return gx, gy
