"""Self-contained property suites behind the ``verify`` CLI subcommand.

Each suite draws random instances, checks the library against an explicit
dense construction or an independent numerical estimate, and reports one
pass/fail line.  Tolerances are fixed here, not configurable.
"""

from dataclasses import dataclass

import numpy as np

from . import basis as basisgen
from . import dataterms as dt
from .equivalence import build_consistent_instance, fast_vtrx, verify_proposition
from .linalg import cramer2
from .solver import FlowBasisPair, SubspaceBasis, solve_flow_subspace, solve_projected


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _random_basis(rng, n, k):
    return SubspaceBasis(rng.randn(n, k))


def _as_model_scalar(d, h, n):
    return dt.QuadraticModel(d=d.reshape(1, n, 1), h=h.reshape(1, n, 1), energy=0.0)


def _as_model_flow(dx, dy, hxx, hxy, hyy, n):
    d = np.stack([dx, dy], axis=1).reshape(1, n, 2)
    h = np.stack([hxx, hxy, hyy], axis=1).reshape(1, n, 3)
    return dt.QuadraticModel(d=d, h=h, energy=0.0)


def _random_flow_blocks(rng, n):
    g1 = rng.randn(n, 3)
    g2 = rng.randn(n, 3)
    hxx = (g1 * g1).sum(axis=1) + 0.1
    hyy = (g2 * g2).sum(axis=1) + 0.1
    hxy = (g1 * g2).sum(axis=1)
    return hxx, hxy, hyy


def suite_solver_oracle(trials=200, seed=0):
    """Subspace solves vs. explicit dense normal equations (scalar and flow)."""
    rng = np.random.RandomState(seed)
    worst = 0.0
    for t in range(trials):
        n = int(rng.randint(9, 65))
        k = int(rng.randint(1, 9))
        if t % 2 == 0:
            v = rng.randn(n, k)
            basis = SubspaceBasis(v)
            h = rng.uniform(0.1, 2.0, size=n)
            d = rng.randn(n)
            x = rng.randn(n)
            model = _as_model_scalar(d, h, n)
            dx, rep = solve_projected(model, basis, x, damping=0.0)

            p = v @ np.linalg.solve(v.T @ v, v.T)
            r = (p - np.eye(n)) @ x
            a = v.T @ np.diag(h) @ v
            c_ref = np.linalg.solve(a, -(v.T @ (d + h * r)))
            worst = max(worst, float(np.max(np.abs(rep.coefficients - c_ref))))
        else:
            vu = rng.randn(n, k)
            vv = rng.randn(n, k)
            pair = FlowBasisPair(SubspaceBasis(vu), SubspaceBasis(vv))
            hxx, hxy, hyy = _random_flow_blocks(rng, n)
            dx_ = rng.randn(n)
            dy_ = rng.randn(n)
            x = rng.randn(n, 2)
            model = _as_model_flow(dx_, dy_, hxx, hxy, hyy, n)
            _, rep = solve_flow_subspace(model, pair, x, damping=0.0)

            big_h = np.block(
                [[np.diag(hxx), np.diag(hxy)], [np.diag(hxy), np.diag(hyy)]]
            )
            big_v = np.block(
                [[vu, np.zeros((n, k))], [np.zeros((n, k)), vv]]
            )
            pu = vu @ np.linalg.solve(vu.T @ vu, vu.T)
            pv = vv @ np.linalg.solve(vv.T @ vv, vv.T)
            r = np.concatenate([(pu - np.eye(n)) @ x[:, 0], (pv - np.eye(n)) @ x[:, 1]])
            dd = np.concatenate([dx_, dy_])
            a = big_v.T @ big_h @ big_v
            c_ref = np.linalg.solve(a, -(big_v.T @ (dd + big_h @ r)))
            worst = max(worst, float(np.max(np.abs(rep.coefficients - c_ref))))
    return SuiteResult(
        "solver-oracle", worst <= 1e-7,
        f"{trials} instances, worst coefficient deviation {worst:.2e} (tol 1e-7)",
    )


def suite_projection(trials=100, seed=1):
    """Updated solutions stay on the subspace after projected solves."""
    rng = np.random.RandomState(seed)
    worst = 0.0
    for t in range(trials):
        n = int(rng.randint(9, 65))
        k = int(rng.randint(1, 9))
        if t % 2 == 0:
            basis = _random_basis(rng, n, k)
            h = rng.uniform(0.1, 2.0, size=n)
            model = _as_model_scalar(rng.randn(n), h, n)
            x = rng.randn(n)
            dx, rep = solve_projected(model, basis, x, damping=0.0)
            rel = rep.projection_residual_norm / max(np.linalg.norm(x + dx), 1e-30)
        else:
            pair = FlowBasisPair(_random_basis(rng, n, k), _random_basis(rng, n, k))
            hxx, hxy, hyy = _random_flow_blocks(rng, n)
            model = _as_model_flow(rng.randn(n), rng.randn(n), hxx, hxy, hyy, n)
            x = rng.randn(n, 2)
            dx, rep = solve_flow_subspace(model, pair, x, damping=0.0)
            rel = rep.projection_residual_norm / max(np.linalg.norm(x + dx), 1e-30)
        worst = max(worst, float(rel))
    return SuiteResult(
        "projection-invariant", worst <= 1e-9,
        f"{trials} instances, worst relative orthogonal residual {worst:.2e} (tol 1e-9)",
    )


def suite_proposition(trials=100, seed=2):
    """Regularized-system coefficients equal subspace-solve coefficients."""
    rng = np.random.RandomState(seed)
    worst_c = 0.0
    worst_id = 0.0
    for t in range(trials):
        n = int(rng.randint(8, 65))
        k = int(rng.randint(1, 9))
        v = rng.randn(n, k)
        if t % 3 == 0:
            v = basisgen.orthonormalize(v)
        basis = SubspaceBasis(v)
        h = rng.uniform(0.2, 3.0, size=n)
        c0 = rng.randn(k)
        x = rng.randn(n)
        sys = build_consistent_instance(basis, h, c0, x)
        report = verify_proposition(sys, basis)
        worst_c = max(worst_c, report.max_diff,
                      float(np.max(np.abs(report.c_sub - c0))))

        lhs = fast_vtrx(basis, h, x)
        rhs = v.T @ (sys.r_mat @ x)
        worst_id = max(worst_id, float(np.max(np.abs(lhs - rhs))))
    ok = worst_c <= 1e-7 and worst_id <= 1e-9
    return SuiteResult(
        "proposition-1", ok,
        f"{trials} instances, worst coefficient gap {worst_c:.2e} (tol 1e-7), "
        f"worst multiplication-identity gap {worst_id:.2e} (tol 1e-9)",
    )


# --- gradient checks --------------------------------------------------------

class WaveField:
    """Band-limited random field evaluable at arbitrary (continuous) points.

    Feeding its lattice samples to the data terms while finite-differencing
    its exact continuous energy isolates the discretization error of the
    sampled central-difference gradients, which stays below the gradient
    tolerance for the wavenumbers used here.
    """

    def __init__(self, rng, channels, n_waves=3, kmin=0.01, kmax=0.03):
        self.channels = channels
        self.waves = []
        for _ in range(channels):
            chan = []
            for _ in range(n_waves):
                theta = rng.uniform(0, 2 * np.pi)
                kmag = rng.uniform(kmin, kmax)
                chan.append((
                    kmag * np.cos(theta), kmag * np.sin(theta),
                    rng.uniform(0, 2 * np.pi), rng.uniform(0.5, 1.0),
                ))
            self.waves.append(chan)

    def sample(self, xs, ys):
        out = np.empty(xs.shape + (self.channels,))
        for ch, chan in enumerate(self.waves):
            acc = np.zeros_like(xs, dtype=float)
            for kx, ky, phase, amp in chan:
                acc += amp * np.cos(kx * xs + ky * ys + phase)
            out[..., ch] = acc
        return out

    def grid(self, h, w):
        ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float),
                             indexing="ij")
        return self.sample(xs, ys)


def smooth_features(rng, h, w, c, n_waves=3, kmin=0.01, kmax=0.03):
    """Lattice samples of a band-limited random feature field."""
    return WaveField(rng, c, n_waves=n_waves, kmin=kmin, kmax=kmax).grid(h, w)


def _fd_correspondence(field, tgt, x, component, delta=1e-4):
    """Per-pixel central difference of the continuous-scene energy.

    The warped term samples the analytic field, so the finite difference
    approximates the true derivative rather than the interpolant's.
    """
    h, w = tgt.shape[:2]
    ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float),
                         indexing="ij")

    def per_pixel(xf):
        wx = xs + xf[:, :, 0]
        wy = ys + (xf[:, :, 1] if xf.shape[2] == 2 else 0.0)
        rho = field.sample(wx, wy) - tgt
        return 0.5 * (rho * rho).sum(axis=2)

    shift = np.zeros_like(x)
    shift[:, :, component] = delta
    return (per_pixel(x + shift) - per_pixel(x - shift)) / (2.0 * delta)


def _rel_gap(analytic, reference, mask=None):
    if mask is not None:
        analytic = analytic[mask]
        reference = reference[mask]
    return float(np.max(np.abs(analytic - reference)) / max(np.max(np.abs(reference)), 1e-12))


def interior_mask(h, w, x):
    """Pixels whose warp stays clear of the border-clamp region.

    Central differences and clamp-to-edge sampling disagree within a pixel
    of the border, so gradient comparisons are confined to warps that stay
    at least 1.5 px inside.
    """
    ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float),
                         indexing="ij")
    wx = xs + x[:, :, 0]
    wy = ys + (x[:, :, 1] if x.shape[2] == 2 else 0.0)
    return (wx >= 1.5) & (wx <= w - 2.5) & (wy >= 1.5) & (wy <= h - 2.5)


def suite_gradients(trials=50, seed=3):
    """Analytic first derivatives vs. central finite differences, all tasks."""
    rng = np.random.RandomState(seed)
    worst_label = 0.0
    worst_warp = 0.0
    for _ in range(trials):
        h = int(rng.randint(12, 21))
        w = int(rng.randint(12, 21))

        # labeling
        x = rng.uniform(-1.5, 1.5, size=(h, w))
        alpha = rng.uniform(0.05, 0.95, size=(h, w))
        probs = dt.LabelProbabilities(alpha=alpha, beta=1.0 - alpha)
        model = dt.labeling_quadratic(x, probs)
        delta = 1e-5
        t_p = np.tanh(x + delta)
        t_m = np.tanh(x - delta)
        e_p = 0.5 * (alpha * (t_p - 1) ** 2 + (1 - alpha) * (t_p + 1) ** 2)
        e_m = 0.5 * (alpha * (t_m - 1) ** 2 + (1 - alpha) * (t_m + 1) ** 2)
        fd = (e_p - e_m) / (2 * delta)
        worst_label = max(worst_label, _rel_gap(model.d[:, :, 0], fd))

        # stereo
        src_field = WaveField(rng, 3)
        tgt_field = WaveField(rng, 3)
        src = src_field.grid(h, w)
        tgt = tgt_field.grid(h, w)
        xs_ = rng.uniform(0.15, 0.85, size=(h, w, 1)) + rng.randint(-1, 2, size=(h, w, 1))
        model, _ = dt.stereo_quadratic(src, tgt, xs_, group_count=1)
        fd = _fd_correspondence(src_field, tgt, xs_, 0)
        mask = interior_mask(h, w, xs_)
        worst_warp = max(worst_warp, _rel_gap(model.d[:, :, 0], fd, mask))

        # flow
        xf = rng.uniform(0.15, 0.85, size=(h, w, 2)) + rng.randint(-1, 2, size=(h, w, 2))
        model, _ = dt.flow_quadratic(src, tgt, xf, group_count=1)
        fd_u = _fd_correspondence(src_field, tgt, xf, 0)
        fd_v = _fd_correspondence(src_field, tgt, xf, 1)
        mask = interior_mask(h, w, xf)
        worst_warp = max(worst_warp, _rel_gap(model.d[:, :, 0], fd_u, mask))
        worst_warp = max(worst_warp, _rel_gap(model.d[:, :, 1], fd_v, mask))
    ok = worst_label <= 1e-4 and worst_warp <= 1e-3
    return SuiteResult(
        "gradient-check", ok,
        f"{trials} trials, labeling gap {worst_label:.2e} (tol 1e-4), "
        f"warping gap {worst_warp:.2e} (tol 1e-3)",
    )


def suite_cramer(trials=50, seed=4):
    """Determinant contexts reproduce per-group 2x2 solves where nonsingular."""
    rng = np.random.RandomState(seed)
    worst = 0.0
    checked = 0
    for _ in range(trials):
        h, w, m = 6, 7, int(rng.randint(1, 5))
        src = smooth_features(rng, h, w, 4 * m)
        tgt = smooth_features(rng, h, w, 4 * m)
        x = rng.uniform(-0.4, 0.4, size=(h, w, 2))
        _, grouped = dt.flow_quadratic(src, tgt, x, group_count=m)
        ctx = basisgen.build_cramer_context(grouped)
        for i in range(h):
            for j in range(w):
                for g in range(m):
                    det = ctx.det_full[i, j, g]
                    if abs(det) <= 1e-6:
                        continue
                    block = np.array(
                        [[grouped.h[i, j, g, 0], grouped.h[i, j, g, 1]],
                         [grouped.h[i, j, g, 1], grouped.h[i, j, g, 2]]]
                    )
                    ref = cramer2(block, grouped.d[i, j, g])
                    got = np.array([ctx.det_x[i, j, g] / det, ctx.det_y[i, j, g] / det])
                    worst = max(worst, float(np.max(np.abs(got - ref))))
                    checked += 1
    return SuiteResult(
        "cramer-context", worst <= 1e-9,
        f"{checked} nonsingular blocks, worst deviation {worst:.2e} (tol 1e-9)",
    )


def suite_shapes(seed=5):
    """Generator pipeline shape schedule for the four level configurations."""
    rng = np.random.RandomState(seed)
    configs = list(zip((32, 32, 16, 16), (2, 4, 8, 16)))
    problems = []
    for c, k in configs:
        m = c // 8
        weights = basisgen.random_weights([(c, m, k)], seed=int(rng.randint(10_000)))
        lv = weights.levels[0]
        h, w = 10, 12
        feats = rng.randn(h, w, c)
        grouped = dt.GroupedContext(d=rng.randn(h, w, m), h=rng.rand(h, w, m))
        ctx = basisgen.build_min_context(grouped, rng.randn(h, w))
        b = basisgen.generate_basis(feats, ctx, lv)
        if b.v.shape != (h * w, k):
            problems.append(f"c={c}: basis shape {b.v.shape}")
            continue
        gram = b.v.T @ b.v
        if np.max(np.abs(gram - np.eye(k))) > 1e-10:
            problems.append(f"c={c}: basis not orthonormal")
        expected = {
            "image": (m, c), "scale": (2 * m, 3 * m + 1),
            "res": (8 * m, 8 * m), "out": (k, 8 * m),
        }
        if lv.w_img.shape != expected["image"] or lv.w_out.shape != expected["out"]:
            problems.append(f"c={c}: weight shapes off schedule")
    ok = not problems
    detail = "4 level configs (K=2,4,8,16) follow the m/2m/3m+1/8m/K schedule" \
        if ok else "; ".join(problems)
    return SuiteResult("shape-schedule", ok, detail)


ALL_SUITES = (
    suite_solver_oracle,
    suite_projection,
    suite_proposition,
    suite_gradients,
    suite_cramer,
    suite_shapes,
)


def run_all(trial_scale=1.0):
    results = []
    for fn in ALL_SUITES:
        results.append(fn())
    return results
