import numpy as np
import pytest

from submin.dataterms import QuadraticModel
from submin.errors import IndefiniteSystemError, RankDeficientBasisError
from submin.linalg import cramer2
from submin.solver import (
    FlowBasisPair,
    SubspaceBasis,
    orthonormalize,
    project,
    solve_flow_subspace,
    solve_projected,
    solve_subspace,
)


def scalar_model(d, h):
    n = d.size
    return QuadraticModel(d=d.reshape(1, n, 1), h=h.reshape(1, n, 1), energy=0.0)


def flow_model(dx, dy, hxx, hxy, hyy):
    n = dx.size
    d = np.stack([dx, dy], axis=1).reshape(1, n, 2)
    h = np.stack([hxx, hxy, hyy], axis=1).reshape(1, n, 3)
    return QuadraticModel(d=d, h=h, energy=0.0)


def random_psd_blocks(rng, n):
    g1 = rng.randn(n, 3)
    g2 = rng.randn(n, 3)
    return (
        (g1 * g1).sum(1) + 0.1,
        (g1 * g2).sum(1),
        (g2 * g2).sum(1) + 0.1,
    )


class TestSubspaceBasis:
    def test_rank_deficient_rejected(self):
        v = np.ones((8, 2))  # identical columns
        with pytest.raises(RankDeficientBasisError):
            SubspaceBasis(v)

    def test_orthonormalize_gram_is_identity(self):
        rng = np.random.RandomState(0)
        v = orthonormalize(rng.randn(30, 5))
        np.testing.assert_allclose(v.T @ v, np.eye(5), atol=1e-12)

    def test_orthonormalize_detects_collapse(self):
        v = np.ones((6, 2))
        with pytest.raises(RankDeficientBasisError):
            orthonormalize(v)


class TestSolveSubspace:
    def test_identity_curvature_orthonormal_basis(self):
        rng = np.random.RandomState(1)
        v = orthonormalize(rng.randn(20, 4))
        d = rng.randn(20)
        c = solve_subspace(scalar_model(d, np.ones(20)), SubspaceBasis(v), damping=0.0)
        np.testing.assert_allclose(c, -(v.T @ d), atol=1e-12)

    def test_constant_basis_is_scalar_reduction(self):
        rng = np.random.RandomState(2)
        n = 25
        d = rng.randn(n)
        h = rng.uniform(0.5, 2.0, size=n)
        basis = SubspaceBasis(np.ones((n, 1)))
        damping = 1e-3
        c = solve_subspace(scalar_model(d, h), basis, damping=damping)
        assert c[0] == pytest.approx(-d.sum() / (h.sum() + damping))

    def test_matches_dense_oracle(self):
        rng = np.random.RandomState(3)
        n, k = 64, 8
        v = rng.randn(n, k)
        h = rng.uniform(0.1, 2.0, size=n)
        d = rng.randn(n)
        c = solve_subspace(scalar_model(d, h), SubspaceBasis(v), damping=0.0)
        a = v.T @ np.diag(h) @ v
        np.testing.assert_allclose(c, np.linalg.solve(a, -(v.T @ d)), atol=1e-8)

    def test_indefinite_after_escalation_raises(self):
        # negative curvature cannot be rescued by the bounded escalation
        n = 6
        v = np.eye(n)[:, :2]
        model = scalar_model(np.ones(n), np.full(n, -100.0))
        with pytest.raises(IndefiniteSystemError):
            solve_subspace(model, SubspaceBasis(v), damping=1e-12)


class TestProject:
    def test_vector_in_span_has_zero_residual(self):
        rng = np.random.RandomState(4)
        v = rng.randn(15, 3)
        x = v @ rng.randn(3)
        _, r = project(SubspaceBasis(v), x)
        assert np.max(np.abs(r)) <= 1e-10

    def test_coordinate_projection(self):
        basis = SubspaceBasis(np.array([[1.0], [0.0]]))
        p, r = project(basis, np.array([3.0, 4.0]))
        np.testing.assert_allclose(p, [3.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(r, [0.0, -4.0], atol=1e-14)

    def test_idempotent(self):
        rng = np.random.RandomState(5)
        v = rng.randn(40, 6)
        basis = SubspaceBasis(v)
        x = rng.randn(40)
        p1, _ = project(basis, x)
        p2, _ = project(basis, p1)
        np.testing.assert_allclose(p1, p2, atol=1e-9)


class TestSolveProjected:
    def test_x_zero_degenerates_to_plain_solve(self):
        rng = np.random.RandomState(6)
        n, k = 30, 4
        v = rng.randn(n, k)
        model = scalar_model(rng.randn(n), rng.uniform(0.2, 1.5, n))
        basis = SubspaceBasis(v)
        c_plain = solve_subspace(model, basis, damping=1e-6)
        dx, rep = solve_projected(model, basis, np.zeros(n), damping=1e-6)
        assert (rep.coefficients == c_plain).all()
        np.testing.assert_allclose(dx, v @ c_plain, atol=0)

    def test_x_in_span_degenerates(self):
        rng = np.random.RandomState(7)
        n, k = 24, 3
        v = orthonormalize(rng.randn(n, k))
        basis = SubspaceBasis(v)
        model = scalar_model(rng.randn(n), rng.uniform(0.2, 1.5, n))
        x = v @ rng.randn(k)
        c_plain = solve_subspace(model, basis, damping=1e-6)
        dx, rep = solve_projected(model, basis, x, damping=1e-6)
        np.testing.assert_allclose(rep.coefficients, c_plain, atol=1e-10)

    def test_updated_solution_lies_on_subspace(self):
        rng = np.random.RandomState(8)
        for _ in range(20):
            n = int(rng.randint(10, 60))
            k = int(rng.randint(1, 8))
            v = rng.randn(n, k)
            basis = SubspaceBasis(v)
            model = scalar_model(rng.randn(n), rng.uniform(0.1, 2.0, n))
            x = rng.randn(n)
            dx, rep = solve_projected(model, basis, x, damping=0.0)
            rel = rep.projection_residual_norm / max(np.linalg.norm(x + dx), 1e-30)
            assert rel <= 1e-9

    def test_predicted_decrease_nonnegative(self):
        rng = np.random.RandomState(9)
        for _ in range(20):
            n = int(rng.randint(8, 40))
            k = int(rng.randint(1, 6))
            basis = SubspaceBasis(rng.randn(n, k))
            model = scalar_model(rng.randn(n), rng.uniform(0.05, 2.0, n))
            x = rng.randn(n)
            _, rep = solve_projected(model, basis, x)
            assert rep.predicted_decrease >= -1e-12

    def test_zero_gradient_in_span_is_fixed_point(self):
        rng = np.random.RandomState(10)
        n, k = 20, 3
        v = orthonormalize(rng.randn(n, k))
        basis = SubspaceBasis(v)
        model = scalar_model(np.zeros(n), rng.uniform(0.5, 1.5, n))
        x = v @ rng.randn(k)
        dx, _ = solve_projected(model, basis, x, damping=0.0)
        assert np.max(np.abs(dx)) <= 1e-9


class TestSolveFlowSubspace:
    def test_decouples_when_hxy_zero(self):
        rng = np.random.RandomState(11)
        n, k = 36, 4
        vu = rng.randn(n, k)
        vv = rng.randn(n, k)
        hxx = rng.uniform(0.2, 2.0, n)
        hyy = rng.uniform(0.2, 2.0, n)
        dx_ = rng.randn(n)
        dy_ = rng.randn(n)
        x = rng.randn(n, 2)
        model = flow_model(dx_, dy_, hxx, np.zeros(n), hyy)
        pair = FlowBasisPair(SubspaceBasis(vu), SubspaceBasis(vv))
        delta, rep = solve_flow_subspace(model, pair, x, damping=1e-8)

        du, _ = solve_projected(scalar_model(dx_, hxx), pair.v_u, x[:, 0], damping=1e-8)
        dv, _ = solve_projected(scalar_model(dy_, hyy), pair.v_v, x[:, 1], damping=1e-8)
        np.testing.assert_allclose(delta[:, 0], du, atol=1e-9)
        np.testing.assert_allclose(delta[:, 1], dv, atol=1e-9)

    def test_constant_basis_reduces_to_aggregate_cramer(self):
        rng = np.random.RandomState(12)
        n = 30
        hxx, hxy, hyy = random_psd_blocks(rng, n)
        dx_ = rng.randn(n)
        dy_ = rng.randn(n)
        model = flow_model(dx_, dy_, hxx, hxy, hyy)
        pair = FlowBasisPair(
            SubspaceBasis(np.ones((n, 1))), SubspaceBasis(np.ones((n, 1)))
        )
        delta, _ = solve_flow_subspace(model, pair, np.zeros((n, 2)), damping=0.0)
        agg = np.array([[hxx.sum(), hxy.sum()], [hxy.sum(), hyy.sum()]])
        expected = cramer2(agg, -np.array([dx_.sum(), dy_.sum()]))
        np.testing.assert_allclose(delta[:, 0], expected[0], atol=1e-9)
        np.testing.assert_allclose(delta[:, 1], expected[1], atol=1e-9)

    def test_matches_dense_block_oracle(self):
        rng = np.random.RandomState(13)
        n, k = 32, 4
        vu = rng.randn(n, k)
        vv = rng.randn(n, k)
        hxx, hxy, hyy = random_psd_blocks(rng, n)
        dx_ = rng.randn(n)
        dy_ = rng.randn(n)
        x = rng.randn(n, 2)
        model = flow_model(dx_, dy_, hxx, hxy, hyy)
        pair = FlowBasisPair(SubspaceBasis(vu), SubspaceBasis(vv))
        _, rep = solve_flow_subspace(model, pair, x, damping=0.0)

        big_h = np.block([[np.diag(hxx), np.diag(hxy)], [np.diag(hxy), np.diag(hyy)]])
        big_v = np.block([[vu, np.zeros((n, k))], [np.zeros((n, k)), vv]])
        pu = vu @ np.linalg.solve(vu.T @ vu, vu.T)
        pv = vv @ np.linalg.solve(vv.T @ vv, vv.T)
        r = np.concatenate([(pu - np.eye(n)) @ x[:, 0], (pv - np.eye(n)) @ x[:, 1]])
        a = big_v.T @ big_h @ big_v
        b = -(big_v.T @ (np.concatenate([dx_, dy_]) + big_h @ r))
        c_ref = np.linalg.solve(a, b)
        np.testing.assert_allclose(rep.coefficients, c_ref, atol=1e-7)

    def test_updated_flow_on_component_subspaces(self):
        rng = np.random.RandomState(14)
        n, k = 28, 3
        pair = FlowBasisPair(
            SubspaceBasis(rng.randn(n, k)), SubspaceBasis(rng.randn(n, k))
        )
        hxx, hxy, hyy = random_psd_blocks(rng, n)
        model = flow_model(rng.randn(n), rng.randn(n), hxx, hxy, hyy)
        x = rng.randn(n, 2)
        delta, rep = solve_flow_subspace(model, pair, x, damping=0.0)
        rel = rep.projection_residual_norm / max(np.linalg.norm(x + delta), 1e-30)
        assert rel <= 1e-9

    def test_quadratic_decrease_vs_projection_only(self):
        rng = np.random.RandomState(15)
        for _ in range(10):
            n, k = 24, 3
            pair = FlowBasisPair(
                SubspaceBasis(rng.randn(n, k)), SubspaceBasis(rng.randn(n, k))
            )
            hxx, hxy, hyy = random_psd_blocks(rng, n)
            model = flow_model(rng.randn(n), rng.randn(n), hxx, hxy, hyy)
            x = rng.randn(n, 2)
            _, rep = solve_flow_subspace(model, pair, x)
            assert rep.predicted_decrease >= -1e-12
