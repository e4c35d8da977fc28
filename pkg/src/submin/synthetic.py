"""Synthetic scenes with exact ground truth for benchmarks and demos.

Scenes are sampled from band-limited analytic functions, so shifted variants
carry no resampling error: the target image is the same continuous scene
evaluated at displaced coordinates.
"""

import numpy as np

from .dataterms import Scribbles


class SmoothScene:
    """Band-limited random RGB scene evaluable at arbitrary coordinates."""

    def __init__(self, seed=0, n_waves=12, min_wavelength=20.0, max_wavelength=80.0):
        rng = np.random.RandomState(seed)
        self.params = []
        for _ in range(3):  # channels
            waves = []
            amps = rng.uniform(0.3, 1.0, size=n_waves)
            amps *= 0.45 / amps.sum()
            for i in range(n_waves):
                wavelength = rng.uniform(min_wavelength, max_wavelength)
                theta = rng.uniform(0, 2 * np.pi)
                k = 2 * np.pi / wavelength
                waves.append(
                    (k * np.cos(theta), k * np.sin(theta), rng.uniform(0, 2 * np.pi), amps[i])
                )
            self.params.append(waves)

    def render(self, w, h, offset=(0.0, 0.0)):
        """Evaluate the scene on a w-by-h grid shifted by ``offset`` (dx, dy)."""
        ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float),
                             indexing="ij")
        xs = xs + offset[0]
        ys = ys + offset[1]
        out = np.empty((h, w, 3))
        for ch, waves in enumerate(self.params):
            acc = np.full((h, w), 0.5)
            for kx, ky, phase, amp in waves:
                acc += amp * np.cos(kx * xs + ky * ys + phase)
            out[:, :, ch] = acc
        return np.clip(out, 0.0, 1.0)


def translated_pair(w, h, shift, seed=0):
    """(source, target) pair where the true warp is the constant ``shift``.

    The target equals the continuous scene sampled at p + shift, so a
    solution field equal to ``shift`` everywhere zeroes the residual.
    """
    scene = SmoothScene(seed=seed)
    source = scene.render(w, h)
    target = scene.render(w, h, offset=shift)
    return source, target


def mirrored_pair(w, h, shift, seed=0):
    """A stereo pair built from an exactly mirror-symmetric continuous scene.

    With a scene satisfying g(x) = g(W-1-x), matching right-to-left is the
    spatial mirror of matching left-to-right, so both directions see the
    same problem and their errors agree.
    """
    scene = SmoothScene(seed=seed)
    s = float(shift)
    base = scene.render(w, h)
    left = 0.5 * (base + base[:, ::-1])
    fwd = scene.render(w, h, offset=(s, 0.0))
    bwd = scene.render(w, h, offset=(-s, 0.0))
    right = 0.5 * (fwd + bwd[:, ::-1])
    return left, right


def two_color_fixture(size=128, seed=0):
    """Vertically split two-color image with scribbles and ground-truth mask.

    Returns (image, gt_mask, scribbles): the left half is foreground.  The
    regions are exactly flat; constant feature channels normalize to zero
    instead of amplifying noise.
    """
    h = w = size
    image = np.empty((h, w, 3))
    # distinct intensities as well as colors, so every bank channel separates
    left_color = np.array([0.85, 0.25, 0.2])
    right_color = np.array([0.15, 0.45, 0.9])
    half = w // 2
    image[:, :half] = left_color
    image[:, half:] = right_color

    gt = np.zeros((h, w), dtype=bool)
    gt[:, :half] = True

    margin = size // 8
    fg_col = half // 2
    bg_col = half + half // 2
    rows = np.arange(margin, size - margin)
    fg = np.stack([np.full_like(rows, fg_col), rows], axis=1)
    bg = np.stack([np.full_like(rows, bg_col), rows], axis=1)
    return image, gt, Scribbles(foreground=fg, background=bg)


def static_sequence_fixture(size=128, seed=0):
    """Two identical frames plus the ground-truth mask of the first."""
    image, gt, _ = two_color_fixture(size=size, seed=seed)
    return image, image.copy(), gt


def iou(mask_a, mask_b):
    a = np.asarray(mask_a, dtype=bool)
    b = np.asarray(mask_b, dtype=bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def endpoint_error(flow, true_shift):
    du = flow[:, :, 0] - true_shift[0]
    dv = flow[:, :, 1] - true_shift[1]
    return float(np.hypot(du, dv).mean())
