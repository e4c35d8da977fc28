"""
Basis generation: analytic modes and the context pipeline
=========================================================

Shows the two basis routes side by side: deterministic cosine / patch
bases, and the generation pipeline that pools image and minimization
context through an integral image and residual blocks.  Flow's 2x2
systems are folded into determinant maps so one generator serves every
task.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from submin import analytic_basis, build_cramer_context, generate_basis
from submin.basis import build_min_context, flow_min_contexts, random_weights
from submin.dataterms import flow_quadratic, stereo_quadratic
from submin.pyramid import PyramidConfig, build_pyramid
from submin.synthetic import translated_pair

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# %% Analytic bases: first cosine modes (constant first), orthonormal columns.
basis = analytic_basis(32, 24, 8, "constant+dct")
print(f"cosine basis: {basis.v.shape}, gram error "
      f"{np.max(np.abs(basis.v.T @ basis.v - np.eye(8))):.1e}")

patches = analytic_basis(32, 24, 9, "bilinear-patches")
print(f"patch basis:  {patches.v.shape} (3x3 hat functions)")

fig, axes = plt.subplots(2, 4, figsize=(11, 5))
for i, ax in enumerate(axes.flat):
    ax.imshow(basis.v[:, i].reshape(24, 32), cmap="coolwarm")
    ax.set_title(f"mode {i}")
    ax.axis("off")
fig.tight_layout()
fig.savefig(OUT / "analytic_modes.png", dpi=110)
print(f"wrote {OUT / 'analytic_modes.png'}")

# %% The generated route: image context + minimization context -> basis.
source, target = translated_pair(128, 96, (2.0, 0.0), seed=5)
cfg = PyramidConfig(strides=(8, 4), channels_per_level=(16, 16))
feats_src = build_pyramid(source, cfg).levels[1]
feats_tgt = build_pyramid(target, cfg).levels[1]
lh, lw, c = feats_tgt.shape
m = c // 8
print(f"level features: {feats_tgt.shape}, m = {m} groups")

x = np.zeros((lh, lw, 1))
_, grouped = stereo_quadratic(feats_src, feats_tgt, x, group_count=m)
ctx = build_min_context(grouped, x)
weights = random_weights([(c, m, 6)], seed=42)
gen = generate_basis(feats_tgt, ctx, weights.levels[0])
print(f"generated stereo basis: {gen.v.shape}, gram error "
      f"{np.max(np.abs(gen.v.T @ gen.v - np.eye(6))):.1e}")

# %% Flow reuses the same weights: its 2x2 blocks become determinant maps.
xf = np.zeros((lh, lw, 2))
_, fgrouped = flow_quadratic(feats_src, feats_tgt, xf, group_count=m)
cramer = build_cramer_context(fgrouped)
print(f"determinant maps: det {cramer.det_full.shape}, "
      f"det_x {cramer.det_x.shape}, det_y {cramer.det_y.shape}")
ctx_u, ctx_v = flow_min_contexts(cramer, xf)
gen_u = generate_basis(feats_tgt, ctx_u, weights.levels[0])
gen_v = generate_basis(feats_tgt, ctx_v, weights.levels[0])
print(f"flow bases from the same weights: u {gen_u.v.shape}, v {gen_v.v.shape}")
