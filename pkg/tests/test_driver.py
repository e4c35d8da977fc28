import numpy as np
import pytest

from submin.basis import analytic_basis
from submin.driver import (
    SolverConfig,
    run_flow,
    run_iseg,
    run_stereo,
    run_stereo_bidirectional,
    run_task,
    run_vseg,
)
from submin.linalg import cramer2
from submin.pyramid import PyramidConfig, build_pyramid
from submin.dataterms import flow_quadratic, stereo_quadratic
from submin.solver import FlowBasisPair, SubspaceBasis, solve_flow_subspace, solve_projected
from submin.synthetic import (
    endpoint_error,
    iou,
    mirrored_pair,
    static_sequence_fixture,
    translated_pair,
    two_color_fixture,
)

INTERIOR = np.s_[24:-24, 24:-24]


@pytest.fixture(scope="module")
def stereo_result():
    src, tgt = translated_pair(256, 192, (3.0, 0.0), seed=7)
    return run_stereo(source=src, target=tgt)


@pytest.fixture(scope="module")
def flow_result():
    src, tgt = translated_pair(256, 192, (2.0, -1.5), seed=8)
    return run_flow(source=src, target=tgt)


class TestStereo:
    def test_recovers_synthetic_shift(self, stereo_result):
        mae = np.abs(stereo_result.solution[:, :, 0][INTERIOR] - 3.0).mean()
        assert mae <= 0.25

    def test_monotone_energy_per_iteration(self, stereo_result):
        for rec in stereo_result.iterations:
            assert rec.energy_after <= rec.energy_before

    def test_solution_is_input_resolution(self, stereo_result):
        assert stereo_result.solution.shape == (192, 256, 1)

    def test_deterministic_across_runs(self):
        src, tgt = translated_pair(96, 64, (1.0, 0.0), seed=3)
        a = run_stereo(source=src, target=tgt)
        b = run_stereo(source=src, target=tgt)
        assert (a.solution == b.solution).all()


class TestStereoBidirectional:
    def test_mirror_pair_errors_agree(self):
        left, right = mirrored_pair(256, 192, 3.0, seed=9)
        l2r, r2l = run_stereo_bidirectional(left, right)
        epe_l = np.abs(l2r.solution[:, :, 0][INTERIOR] + 3.0).mean()
        epe_r = np.abs(r2l.solution[:, :, 0][INTERIOR] - 3.0).mean()
        assert abs(epe_l - epe_r) <= 0.05

    def test_directions_negate(self):
        src, tgt = translated_pair(128, 96, (2.0, 0.0), seed=10)
        # target(p) = scene(p + 2): forward sees +2, swapped sees -2
        fwd = run_stereo(source=src, target=tgt)
        bwd = run_stereo(source=tgt, target=src)
        inner = np.s_[16:-16, 16:-16]
        assert fwd.solution[:, :, 0][inner].mean() == pytest.approx(2.0, abs=0.2)
        assert bwd.solution[:, :, 0][inner].mean() == pytest.approx(-2.0, abs=0.2)

    def test_zero_shift_pair_is_zero_everywhere(self):
        src, _ = translated_pair(96, 64, (0.0, 0.0), seed=11)
        l2r, r2l = run_stereo_bidirectional(src, src.copy())
        assert np.max(np.abs(l2r.solution)) == 0.0
        assert np.max(np.abs(r2l.solution)) == 0.0


class TestFlow:
    def test_recovers_synthetic_translation(self, flow_result):
        epe = endpoint_error(flow_result.solution[INTERIOR], (2.0, -1.5))
        assert epe <= 0.25

    def test_zero_motion_fixed_point_exact(self):
        src, _ = translated_pair(128, 96, (0.0, 0.0), seed=12)
        res = run_flow(source=src, target=src.copy())
        assert np.max(np.abs(res.solution)) == 0.0

    def test_monotone_energy(self, flow_result):
        for rec in flow_result.iterations:
            assert rec.energy_after <= rec.energy_before


class TestLabelingTasks:
    def test_two_color_segmentation(self):
        image, gt, scribbles = two_color_fixture(128)
        res = run_iseg(image, scribbles)
        assert iou(res.mask, gt) >= 0.95

    def test_static_video_propagation(self):
        prev_f, cur_f, mask = static_sequence_fixture(128)
        res = run_vseg(prev_f, cur_f, mask.astype(float))
        assert iou(res.mask, mask) >= 0.9

    def test_warm_start_converges_to_same_mask(self):
        image, gt, scribbles = two_color_fixture(128)
        cold = run_iseg(image, scribbles)
        warm = run_iseg(image, scribbles, initial=cold.solution)
        assert (warm.mask == cold.mask).all()

    def test_scribbles_out_of_bounds_rejected(self):
        image, _, _ = two_color_fixture(64)
        from submin.dataterms import Scribbles

        bad = Scribbles(foreground=[[500, 2]], background=[[1, 1]])
        with pytest.raises(ValueError):
            run_iseg(image, bad)


class TestRunTaskDispatch:
    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError):
            run_task("depth")

    def test_dispatches_stereo(self):
        src, tgt = translated_pair(96, 64, (1.0, 0.0), seed=13)
        res = run_task("stereo", source=src, target=tgt)
        assert res.task == "stereo"

    def test_mismatched_frames_rejected(self):
        with pytest.raises(ValueError):
            run_vseg(np.zeros((64, 64, 3)), np.zeros((32, 32, 3)), np.zeros((64, 64)))


class TestConstantBasisDegeneration:
    """K=1 constant bases reduce one iteration to global Lucas-Kanade."""

    def _pyramids(self, shift, seed):
        src, tgt = translated_pair(96, 96, shift, seed=seed)
        cfg = PyramidConfig(strides=(8, 4), channels_per_level=(16, 16))
        return build_pyramid(src, cfg), build_pyramid(tgt, cfg)

    def test_stereo_matches_aggregate_scalar_solve(self):
        pyr_s, pyr_t = self._pyramids((1.0, 0.0), seed=14)
        fs, ft = pyr_s.levels[-1], pyr_t.levels[-1]
        lh, lw = fs.shape[:2]
        n = lh * lw
        model, _ = stereo_quadratic(fs, ft, np.zeros((lh, lw, 1)))
        basis = SubspaceBasis(np.ones((n, 1)))
        dx, rep = solve_projected(model, basis, np.zeros(n), damping=0.0)
        d = model.d[:, :, 0].ravel()
        h = model.h[:, :, 0].ravel()
        expected = -d.sum() / h.sum()
        np.testing.assert_allclose(dx, expected, atol=1e-6)

    def test_flow_matches_aggregate_cramer(self):
        pyr_s, pyr_t = self._pyramids((0.7, -0.4), seed=15)
        fs, ft = pyr_s.levels[-1], pyr_t.levels[-1]
        lh, lw = fs.shape[:2]
        n = lh * lw
        model, _ = flow_quadratic(fs, ft, np.zeros((lh, lw, 2)))
        pair = FlowBasisPair(SubspaceBasis(np.ones((n, 1))), SubspaceBasis(np.ones((n, 1))))
        delta, _ = solve_flow_subspace(model, pair, np.zeros((n, 2)), damping=0.0)
        hxx = model.h[:, :, 0].sum()
        hxy = model.h[:, :, 1].sum()
        hyy = model.h[:, :, 2].sum()
        rhs = -np.array([model.d[:, :, 0].sum(), model.d[:, :, 1].sum()])
        expected = cramer2(np.array([[hxx, hxy], [hxy, hyy]]), rhs)
        np.testing.assert_allclose(delta[:, 0], expected[0], atol=1e-6)
        np.testing.assert_allclose(delta[:, 1], expected[1], atol=1e-6)


class TestGeneratedBasisPath:
    def test_end_to_end_with_random_weights(self, tmp_path):
        from submin.basis import random_weights, write_weights

        cfg = SolverConfig(
            k_schedule=(2, 4),
            pyramid=PyramidConfig(strides=(8, 4), channels_per_level=(16, 16)),
        )
        weights = random_weights([(16, 2, 2), (16, 2, 4)], seed=21)
        path = tmp_path / "w.lsmw"
        write_weights(path, weights)
        cfg = SolverConfig(
            k_schedule=(2, 4),
            basis_source=f"generated:{path}",
            pyramid=PyramidConfig(strides=(8, 4), channels_per_level=(16, 16)),
        )
        src, tgt = translated_pair(96, 64, (1.0, 0.0), seed=16)
        res = run_stereo(source=src, target=tgt, cfg=cfg)
        for rec in res.iterations:
            assert rec.energy_after <= rec.energy_before

    def test_flow_generated_bases(self, tmp_path):
        from submin.basis import random_weights, write_weights

        weights = random_weights([(16, 2, 2), (16, 2, 4)], seed=22)
        path = tmp_path / "w.lsmw"
        write_weights(path, weights)
        cfg = SolverConfig(
            k_schedule=(2, 4),
            basis_source=f"generated:{path}",
            pyramid=PyramidConfig(strides=(8, 4), channels_per_level=(16, 16)),
        )
        src, tgt = translated_pair(96, 64, (0.5, 0.5), seed=17)
        res = run_flow(source=src, target=tgt, cfg=cfg)
        for rec in res.iterations:
            assert rec.energy_after <= rec.energy_before


class TestConfig:
    def test_k_schedule_length_enforced(self):
        with pytest.raises(ValueError):
            SolverConfig(k_schedule=(2, 4))

    def test_unknown_basis_source(self):
        cfg = SolverConfig(basis_source="magic")
        with pytest.raises(ValueError):
            cfg.weights_path()
