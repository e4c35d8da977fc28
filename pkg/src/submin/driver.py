"""Coarse-to-fine task drivers.

Each task walks the feature pyramid from coarse to fine.  Per level it
evaluates the task's quadratic model at the intermediate solution, obtains a
subspace basis (analytic or generated), runs the projection-corrected
subspace solve, and applies the step under a backtracking guard so the
recorded data-term energy never increases.  Solutions transfer between
levels by bilinear upsampling, with displacement values rescaled to the
finer grid's pixel units.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import basis as basisgen
from . import dataterms as dt
from .errors import IndefiniteSystemError, InvalidWeightsError
from .grid import as_grid
from .pyramid import (
    PyramidConfig,
    build_pyramid,
    downsample_solution,
    upsample_solution,
)
from .solver import FlowBasisPair, solve_flow_subspace, solve_projected

TASKS = ("iseg", "vseg", "stereo", "flow")
MAX_BACKTRACKS = 4


@dataclass
class SolverConfig:
    k_schedule: tuple = (2, 4, 8, 16)
    iterations_per_level: int = 3
    damping: float | None = None
    basis_source: str = "analytic"  # or "generated:<weights path>"
    basis_kind: str = "constant+dct"
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    convergence_tol: float = 1e-4
    scribble_sigma: float = 0.5
    scribble_top_k: int = 5
    temporal_window: int = 9
    temporal_sigma: float = 0.5

    def __post_init__(self):
        self.k_schedule = tuple(int(k) for k in self.k_schedule)
        if len(self.k_schedule) != len(self.pyramid.strides):
            raise ValueError(
                f"k_schedule length {len(self.k_schedule)} != "
                f"pyramid level count {len(self.pyramid.strides)}"
            )

    def weights_path(self):
        if self.basis_source == "analytic":
            return None
        if self.basis_source.startswith("generated:"):
            return self.basis_source.split(":", 1)[1]
        raise ValueError(f"unknown basis_source {self.basis_source!r}")


@dataclass
class IterationRecord:
    level: int
    k: int
    energy_before: float
    energy_after: float
    step_norm: float
    damping: float


@dataclass
class TaskResult:
    task: str
    solution: np.ndarray          # input-resolution field (h, w, 1 or 2)
    mask: np.ndarray | None       # boolean (h, w) for labeling tasks
    per_level_energy: list        # (before-first, after-last) per level
    iterations: list
    reports: list
    wall_ms: float = 0.0


class _BasisProvider:
    """Per-level basis factory: cached analytic bases or the weighted generator."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.weights = None
        path = cfg.weights_path()
        if path is not None:
            self.weights = basisgen.read_weights(path)
            if len(self.weights.levels) != len(cfg.k_schedule):
                raise InvalidWeightsError(
                    f"weight file has {len(self.weights.levels)} levels, "
                    f"config expects {len(cfg.k_schedule)}"
                )
        self._cache = {}

    def group_count(self, level_idx, channels):
        if self.weights is not None:
            return self.weights.levels[level_idx].m
        return channels // 8 if channels % 8 == 0 else 1

    def _analytic(self, w, h, k):
        key = (w, h, k, self.cfg.basis_kind)
        if key not in self._cache:
            self._cache[key] = basisgen.analytic_basis(w, h, k, self.cfg.basis_kind)
        return self._cache[key]

    def scalar(self, level_idx, features, grouped, x, k):
        h, w = features.shape[:2]
        if self.weights is None:
            return self._analytic(w, h, k)
        ctx = basisgen.build_min_context(grouped, x)
        return basisgen.generate_basis(features, ctx, self.weights.levels[level_idx], k)

    def flow(self, level_idx, features, grouped, x, k):
        h, w = features.shape[:2]
        if self.weights is None:
            b = self._analytic(w, h, k)
            return FlowBasisPair(v_u=b, v_v=b)
        cramer = basisgen.build_cramer_context(grouped)
        ctx_u, ctx_v = basisgen.flow_min_contexts(cramer, x)
        lw = self.weights.levels[level_idx]
        return FlowBasisPair(
            v_u=basisgen.generate_basis(features, ctx_u, lw, k),
            v_v=basisgen.generate_basis(features, ctx_v, lw, k),
        )


def _minimize_level(x, quadratic_fn, energy_fn, basis_fn, solve_fn, cfg, level_idx, k):
    """Inner Gauss-Newton iterations at one level with backtracking."""
    records = []
    reports = []
    for iteration in range(cfg.iterations_per_level):
        model, grouped = quadratic_fn(x)
        e0 = model.energy
        basis = basis_fn(model, grouped, x)
        try:
            dx_flat, report = solve_fn(model, basis, x)
        except IndefiniteSystemError as err:
            raise IndefiniteSystemError(
                err.damping,
                cause=f"pyramid level {level_idx}, iteration {iteration}: {err}",
            ) from err
        dx = dx_flat.reshape(x.shape)

        alpha = 1.0
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            x_try = x + alpha * dx
            e1 = energy_fn(x_try)
            if e1 <= e0:
                accepted = (x_try, e1, alpha)
                break
            alpha *= 0.5
        if accepted is None:
            records.append(IterationRecord(level_idx, k, e0, e0, 0.0, report.damping_used))
            reports.append(report)
            break
        x, e1, alpha = accepted
        step_norm = float(np.linalg.norm(alpha * dx))
        records.append(IterationRecord(level_idx, k, e0, e1, step_norm, report.damping_used))
        reports.append(report)
        if step_norm <= cfg.convergence_tol * max(float(np.linalg.norm(x)), 1.0):
            break
    return x, records, reports


def _run_pyramid(task, cfg, provider, level_data, initial=None, channels=1):
    """Shared coarse-to-fine loop.

    ``level_data`` yields per level a dict with the feature grid and the
    task's quadratic/energy callables.  ``initial`` optionally seeds the
    coarsest level (warm start), given at any resolution.
    """
    t0 = time.perf_counter()
    strides = cfg.pyramid.strides
    records = []
    reports = []
    per_level = []
    x = None

    for idx, data in enumerate(level_data):
        feats = data["features"]
        lh, lw = feats.shape[:2]
        if x is None:
            if initial is not None:
                x = downsample_solution(as_grid(initial), lw, lh)
            else:
                x = np.zeros((lh, lw, channels))
        else:
            scale = strides[idx - 1] / strides[idx]
            x = upsample_solution(
                x, lw, lh, scale=scale, displacement=data["displacement"]
            )

        k = cfg.k_schedule[idx]
        if task == "flow":
            def basis_fn(model, grouped, xf, _idx=idx, _f=feats, _k=k):
                return provider.flow(_idx, _f, grouped, xf, _k)

            def solve_fn(model, pair, xf):
                return solve_flow_subspace(model, pair, xf, cfg.damping)
        else:
            def basis_fn(model, grouped, xf, _idx=idx, _f=feats, _k=k):
                return provider.scalar(_idx, _f, grouped, xf, _k)

            def solve_fn(model, b, xf):
                dx, rep = solve_projected(model, b, xf, cfg.damping)
                return dx, rep

        x, recs, reps = _minimize_level(
            x, data["quadratic"], data["energy"], basis_fn, solve_fn, cfg, idx, k
        )
        records.extend(recs)
        reports.extend(reps)
        if recs:
            per_level.append((recs[0].energy_before, recs[-1].energy_after))
        else:
            per_level.append((float("nan"), float("nan")))

    wall_ms = (time.perf_counter() - t0) * 1e3
    return x, records, reports, per_level, wall_ms


def _correspondence_levels(pyr_src, pyr_tgt):
    return enumerate(zip(pyr_src.levels, pyr_tgt.levels))


def run_stereo(source, target, cfg=None, initial=None):
    """Disparity of the target image by feature alignment against the source.

    The solution is a 1-channel field on the target grid; positive values
    sample the source to the right.  No direction or range is assumed.
    """
    cfg = cfg or SolverConfig()
    source = as_grid(source, "source")
    target = as_grid(target, "target")
    pyr_s = build_pyramid(source, cfg.pyramid)
    pyr_t = build_pyramid(target, cfg.pyramid)
    provider = _BasisProvider(cfg)

    def levels():
        for idx, (fs, ft) in _correspondence_levels(pyr_s, pyr_t):
            m = provider.group_count(idx, fs.shape[2])
            yield {
                "features": ft,
                "displacement": True,
                "quadratic": lambda x, fs=fs, ft=ft, m=m: dt.stereo_quadratic(fs, ft, x, m),
                "energy": lambda x, fs=fs, ft=ft: dt.correspondence_energy(fs, ft, x),
            }

    x, records, reports, per_level, wall_ms = _run_pyramid(
        "stereo", cfg, provider, levels(), initial=initial, channels=1
    )
    h, w = target.shape[:2]
    solution = upsample_solution(x, w, h, scale=cfg.pyramid.strides[-1], displacement=True)
    return TaskResult("stereo", solution, None, per_level, records, reports, wall_ms)


def run_flow(source, target, cfg=None, initial=None):
    """2-channel motion field warping target-grid pixels into the source."""
    cfg = cfg or SolverConfig()
    source = as_grid(source, "source")
    target = as_grid(target, "target")
    pyr_s = build_pyramid(source, cfg.pyramid)
    pyr_t = build_pyramid(target, cfg.pyramid)
    provider = _BasisProvider(cfg)

    def levels():
        for idx, (fs, ft) in _correspondence_levels(pyr_s, pyr_t):
            m = provider.group_count(idx, fs.shape[2])
            yield {
                "features": ft,
                "displacement": True,
                "quadratic": lambda x, fs=fs, ft=ft, m=m: dt.flow_quadratic(fs, ft, x, m),
                "energy": lambda x, fs=fs, ft=ft: dt.correspondence_energy(fs, ft, x),
            }

    x, records, reports, per_level, wall_ms = _run_pyramid(
        "flow", cfg, provider, levels(), initial=initial, channels=2
    )
    h, w = target.shape[:2]
    solution = upsample_solution(x, w, h, scale=cfg.pyramid.strides[-1], displacement=True)
    return TaskResult("flow", solution, None, per_level, records, reports, wall_ms)


def run_iseg(image, scribbles, cfg=None, pyramid=None, initial=None):
    """Interactive segmentation from foreground/background scribbles.

    Label probabilities are estimated per level from scribble feature
    similarity; the relaxed solution is thresholded at zero for the mask.
    """
    cfg = cfg or SolverConfig()
    image = as_grid(image, "image")
    h, w = image.shape[:2]
    scribbles.validate(w, h)
    pyr = pyramid if pyramid is not None else build_pyramid(image, cfg.pyramid)
    provider = _BasisProvider(cfg)
    if initial is not None:
        # keep the warm start inside tanh's responsive range: at saturation
        # the quadratic model goes flat and cannot correct projection ringing
        initial = np.clip(as_grid(initial), -2.0, 2.0)

    def levels():
        for idx, feats in enumerate(pyr.levels):
            lh, lw = feats.shape[:2]
            stride = cfg.pyramid.strides[idx]
            scaled = scribbles.scaled(stride, lw, lh)
            # sigma is per normalized channel unit; the estimator's distance
            # sums over channels, so widen it with the channel count
            sigma = cfg.scribble_sigma * np.sqrt(feats.shape[2])
            probs = dt.scribble_probabilities(
                feats, scaled, sigma=sigma, top_k=cfg.scribble_top_k
            )
            m = provider.group_count(idx, feats.shape[2])
            yield {
                "features": feats,
                "displacement": False,
                "quadratic": lambda x, probs=probs, m=m: dt.labeling_grouped(x, probs, m),
                "energy": lambda x, probs=probs: dt.labeling_energy(x, probs),
            }

    x, records, reports, per_level, wall_ms = _run_pyramid(
        "iseg", cfg, provider, levels(), initial=initial, channels=1
    )
    solution = upsample_solution(x, w, h, scale=1.0, displacement=False)
    mask = solution[:, :, 0] > 0.0
    return TaskResult("iseg", solution, mask, per_level, records, reports, wall_ms)


def run_vseg(prev_frame, cur_frame, prev_mask, cfg=None):
    """Propagate a binary mask from a labeled previous frame to the current one."""
    cfg = cfg or SolverConfig()
    prev_frame = as_grid(prev_frame, "prev_frame")
    cur_frame = as_grid(cur_frame, "cur_frame")
    if prev_frame.shape != cur_frame.shape:
        raise ValueError("frames must share a shape")
    mask = as_grid(prev_mask, "prev_mask")[:, :, :1]
    if mask.shape[:2] != prev_frame.shape[:2]:
        raise ValueError("prev_mask size does not match frames")
    pyr_prev = build_pyramid(prev_frame, cfg.pyramid)
    pyr_cur = build_pyramid(cur_frame, cfg.pyramid)
    provider = _BasisProvider(cfg)

    def levels():
        for idx, (fp, fc) in enumerate(zip(pyr_prev.levels, pyr_cur.levels)):
            lh, lw = fc.shape[:2]
            lvl_mask = (downsample_solution(mask, lw, lh)[:, :, 0] > 0.5).astype(float)
            sigma = cfg.temporal_sigma * np.sqrt(fc.shape[2])
            probs = dt.temporal_probabilities(
                fc, fp, lvl_mask, window=cfg.temporal_window, sigma=sigma
            )
            m = provider.group_count(idx, fc.shape[2])
            yield {
                "features": fc,
                "displacement": False,
                "quadratic": lambda x, probs=probs, m=m: dt.labeling_grouped(x, probs, m),
                "energy": lambda x, probs=probs: dt.labeling_energy(x, probs),
            }

    x, records, reports, per_level, wall_ms = _run_pyramid(
        "vseg", cfg, provider, levels(), channels=1
    )
    h, w = cur_frame.shape[:2]
    solution = upsample_solution(x, w, h, scale=1.0, displacement=False)
    out_mask = solution[:, :, 0] > 0.0
    return TaskResult("vseg", solution, out_mask, per_level, records, reports, wall_ms)


def run_task(task, cfg=None, **inputs):
    """Dispatch to a task driver; raises ValueError on task/input mismatch."""
    if task == "stereo":
        return run_stereo(inputs.pop("source"), inputs.pop("target"), cfg, **inputs)
    if task == "flow":
        return run_flow(inputs.pop("source"), inputs.pop("target"), cfg, **inputs)
    if task == "iseg":
        return run_iseg(inputs.pop("image"), inputs.pop("scribbles"), cfg, **inputs)
    if task == "vseg":
        return run_vseg(
            inputs.pop("prev_frame"), inputs.pop("cur_frame"), inputs.pop("prev_mask"), cfg
        )
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def run_stereo_bidirectional(left, right, cfg=None):
    """Disparity in both directions; nothing in the pipeline pins a direction."""
    cfg = cfg or SolverConfig()
    l2r = run_stereo(source=right, target=left, cfg=cfg)
    r2l = run_stereo(source=left, target=right, cfg=cfg)
    return l2r, r2l
