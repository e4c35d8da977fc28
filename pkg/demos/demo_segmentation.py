"""
Scribble segmentation and mask propagation
==========================================

The binary labeling data term drives both interactive segmentation (label
probabilities from scribble feature similarity) and video segmentation
(probabilities from correlation with the previous labeled frame).
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from submin import run_iseg, run_vseg
from submin.fileio import write_png_mask
from submin.synthetic import iou, static_sequence_fixture, two_color_fixture

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# %% Interactive: one foreground stroke, one background stroke.
image, gt, scribbles = two_color_fixture(128)
result = run_iseg(image, scribbles)
print(f"interactive IoU vs color partition: {iou(result.mask, gt):.3f}")
write_png_mask(OUT / "iseg_mask.png", result.mask)

# %% The relaxed solution is a smooth field; the mask is its sign.
print(f"solution range: [{result.solution.min():.2f}, {result.solution.max():.2f}]")
print(f"foreground pixels: {int(result.mask.sum())} / {result.mask.size}")

# %% Video: propagate the mask across a static two-frame sequence.
prev_frame, cur_frame, prev_mask = static_sequence_fixture(128)
vres = run_vseg(prev_frame, cur_frame, prev_mask.astype(float))
print(f"propagated IoU vs previous mask: {iou(vres.mask, prev_mask):.3f}")
write_png_mask(OUT / "vseg_mask.png", vres.mask)

fig, axes = plt.subplots(1, 3, figsize=(10, 3))
axes[0].imshow(image)
fg, bg = scribbles.foreground, scribbles.background
axes[0].plot(fg[:, 0], fg[:, 1], "g.", ms=2)
axes[0].plot(bg[:, 0], bg[:, 1], "r.", ms=2)
axes[0].set_title("image + scribbles")
axes[1].imshow(result.solution[:, :, 0], cmap="coolwarm")
axes[1].set_title("relaxed solution")
axes[2].imshow(result.mask, cmap="gray")
axes[2].set_title("mask = solution > 0")
fig.tight_layout()
fig.savefig(OUT / "segmentation_demo.png", dpi=110)
print(f"wrote {OUT / 'segmentation_demo.png'}")
