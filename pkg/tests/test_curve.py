"""Plane curve: branch points, fibers, series at infinity and continuation."""
import cmath

import numpy as np
import pytest

from spectral.curve import (
    BranchCollision,
    DegenerateCurve,
    Monodromy,
    PlaneCurve,
    SheetDrop,
    branch_points,
    branches_at,
    branch_series_at_infinity,
    continue_branch,
    fiber_roots,
    fiber_roots_batch,
    labeled_at_infinity,
    match_to,
    pairwise_gaps,
    track_sheets,
    xi_roots,
)
from spectral.poly import ComplexPolynomial


def _square_root_curve() -> PlaneCurve:
    """w² − z = 0 written with a constant Q_2, branch point at 0."""
    return PlaneCurve((ComplexPolynomial((0, -1)), ComplexPolynomial(), ComplexPolynomial.constant(1)))


class TestPlaneCurve:
    def test_zero_leading_entry(self):
        with pytest.raises(DegenerateCurve):
            PlaneCurve((ComplexPolynomial.constant(1), ComplexPolynomial()))

    def test_fiber_roots_solve_the_curve(self, fig1):
        z = 0.7 - 1.3j
        for w in fiber_roots(fig1.curve, z):
            value = sum(complex(q.eval(z)) * w ** i for i, q in enumerate(fig1.curve.Q))
            assert abs(value) < 1e-9

    def test_batch_matches_single(self, fig1):
        zs = np.array([0.3 + 0.1j, -2.0 + 0.5j])
        batch = fiber_roots_batch(fig1.curve, zs)
        for z, row in zip(zs, batch):
            single = fiber_roots(fig1.curve, z)
            assert np.allclose(np.sort_complex(row), np.sort_complex(single))

    def test_batch_marks_poles(self, product_pencil, triangle_bs):
        vals = fiber_roots_batch(product_pencil.curve, np.array([triangle_bs[0]]))
        assert np.isnan(vals).all()

    def test_branches_at_far_point(self, fig1, policy):
        ws = branches_at(fig1.curve, 10, policy)
        assert len(ws) == 3
        for w in ws:
            terms = [q.eval(10) * w ** i for i, q in enumerate(fig1.curve.Q)]
            assert abs(sum(terms)) <= 1e-10 * max(abs(t) for t in terms)

    def test_branches_at_pole_drops_a_sheet(self, product_pencil, triangle_bs, policy):
        with pytest.raises(SheetDrop) as info:
            branches_at(product_pencil.curve, triangle_bs[0], policy)
        assert len(info.value.finite_roots) == 2


class TestBranchPoints:
    def test_square_root_curve(self, policy):
        bps = branch_points(_square_root_curve(), policy)
        assert len(bps) == 1
        assert abs(bps[0]) < 1e-12

    def test_fig1_has_six(self, fig1, policy):
        bps = branch_points(fig1.curve, policy)
        assert len(bps) == 6
        for b in bps:
            w = fiber_roots(fig1.curve, b)
            gaps = pairwise_gaps(w)
            assert np.min(gaps) < 1e-3 * max(1.0, np.max(np.abs(w)))

    def test_product_curve_has_none(self, product_pencil, policy):
        assert branch_points(product_pencil.curve, policy) == ()

    def test_trivial_pencil_pole_filtered(self, trivial_k1, policy):
        assert branch_points(trivial_k1.curve, policy) == ()

    def test_pairwise_gaps_are_finite_off_diagonal(self):
        gaps = pairwise_gaps(np.array([0j, 1.0, 1j]))
        assert not np.isnan(gaps).any()
        assert np.isinf(np.diag(gaps)).all()
        assert np.min(gaps) == pytest.approx(1.0)


class TestBehaviourAtInfinity:
    def test_xi_pairs_with_alpha(self, fig1, policy):
        for xi, alpha in zip(xi_roots(fig1.curve, policy), fig1.alphas(policy)):
            assert abs(xi * alpha - 1) < 1e-9

    def test_series_predicts_far_branch(self, fig1, policy):
        z = 40.0 * cmath.exp(0.3j)
        fiber = fiber_roots(fig1.curve, z)
        for j in (1, 2, 3):
            expansion = branch_series_at_infinity(fig1.curve, j, 12, policy)
            predicted = complex(expansion.eval_at(z))
            assert np.min(np.abs(fiber - predicted)) < 1e-8
            assert abs(predicted * z - complex(expansion.xi)) < 0.2

    def test_series_order_validated(self, fig1, policy):
        with pytest.raises(ValueError):
            branch_series_at_infinity(fig1.curve, 1, 0, policy)
        with pytest.raises(ValueError):
            branch_series_at_infinity(fig1.curve, 4, 5, policy)

    def test_far_fiber_labeled_by_xi(self, fig1, policy):
        z = 60.0 * cmath.exp(1.1j)
        labeled = labeled_at_infinity(fig1.curve, z, policy)
        xis = [complex(x) for x in xi_roots(fig1.curve, policy)]
        for w, xi in zip(labeled, xis):
            assert abs(w * z - xi) < 0.2


class TestContinuation:
    def test_match_to_recovers_permutation(self):
        ref = np.array([1.0, 2.0j, -3.0])
        assert np.allclose(match_to(ref, ref[[2, 0, 1]] + 1e-3), ref + 1e-3)

    def test_loop_around_branch_point_swaps_sheets(self, policy):
        curve = _square_root_curve()
        loop = [cmath.exp(1j * t) for t in np.linspace(0, 2 * np.pi, 33)]
        loop[-1] = loop[0]
        with pytest.warns(Monodromy):
            result = continue_branch(curve, loop, 1.0, policy=policy)
        assert result.monodromy
        assert abs(result.endpoint + 1.0) < 1e-8

    def test_start_must_be_on_the_fiber(self, policy):
        with pytest.raises(ValueError, match="not on the fiber"):
            continue_branch(_square_root_curve(), [4.0, 4.0 + 1j], 1.0, policy=policy)

    def test_segment_through_branch_point_rejected(self, policy):
        with pytest.raises(BranchCollision):
            track_sheets(_square_root_curve(), [-1.0, 1.0], [1j, -1j], policy=policy)

    def test_tracking_follows_single_valued_branches(self, product_pencil, triangle_bs, policy):
        a, b = 0.2 + 0.1j, -0.4 + 0.6j
        start = np.array([1 / (bb - a) for bb in triangle_bs])
        end = track_sheets(product_pencil.curve, [a, b], start, policy=policy)[-1][1]
        assert np.allclose(end, [1 / (bb - b) for bb in triangle_bs], atol=1e-9)
