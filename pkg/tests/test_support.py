"""Support geometry: labeled branches, Γ loci, H differences, level curves, densities."""
import cmath
import math

import numpy as np
import pytest

from spectral.curve import labeled_at_infinity, singular_points
from spectral.measures import RootMeasure
from spectral.support import (
    CollinearB,
    GammaLocus,
    LevelCurve,
    SparseWindow,
    anchor_point,
    branches_by_label,
    colocation_fraction,
    densest_cluster_seed,
    density_vs_roots,
    example3_circle,
    gamma_locus,
    h_difference,
    h_difference_along,
    infer_pair,
    label_route,
    locus_crossings,
    mean_spacing,
    polyline_tangents,
    scaled_branches,
    tangent_defects,
    trace_level_curve,
)


def _b_of_labels(P, z, policy) -> np.ndarray:
    """On the product curve γ_i(z) = 1/(b − z), so each label names one b."""
    return z + 1 / branches_by_label(P.curve, z, policy)


def _h_closed_form(alpha: complex, bs: np.ndarray, pair: tuple, base: complex, z: complex) -> float:
    i, j = pair[0] - 1, pair[1] - 1
    term = [-alpha * cmath.log((b - z) / (b - base)) for b in (bs[i], bs[j])]
    return (term[0] - term[1]).real


def _line(points: np.ndarray, diff: complex, closed: bool = False) -> LevelCurve:
    return LevelCurve(
        pair=(1, 2), family=1, base=complex(points[0]), level=0.0, points=points,
        diffs=np.full(points.size, diff, dtype=complex), closed=closed,
    )


class TestLabels:
    def test_anchor_beyond_singular_points(self, fig1, policy):
        anchor = anchor_point(fig1.curve, policy)
        assert anchor.imag == 0
        assert anchor.real > 2 * np.max(np.abs(singular_points(fig1.curve, policy)))

    def test_route_runs_from_anchor_to_target(self, fig1, policy):
        z = -0.3 + 2.9j
        route = label_route(fig1.curve, z, policy)
        assert route[0] == anchor_point(fig1.curve, policy)
        assert route[-1] == z

    def test_anchor_labels_match_infinity_order(self, fig1, policy):
        anchor = anchor_point(fig1.curve, policy)
        assert np.allclose(branches_by_label(fig1.curve, anchor, policy), labeled_at_infinity(fig1.curve, anchor, policy))

    def test_scaled_branches(self, fig1, policy):
        z = 1.1 - 0.7j
        alpha = complex(fig1.alphas(policy)[1])
        assert np.allclose(scaled_branches(fig1, 2, z, policy), alpha * branches_by_label(fig1.curve, z, policy))

    def test_product_labels_name_the_b(self, product_pencil, triangle_bs, policy):
        bs = _b_of_labels(product_pencil, 0.3 + 0.1j, policy)
        assert np.allclose(np.sort_complex(bs), np.sort_complex(np.array(triangle_bs)), atol=1e-9)


class TestProductCircle:
    def test_circle_through_the_b(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            bs = [complex(*rng.normal(size=2)) for _ in range(3)]
            circle = example3_circle(*bs)
            assert np.max(circle.distance(np.array(bs))) < 1e-9

    def test_equilateral_centre(self, triangle_bs):
        circle = example3_circle(*triangle_bs)
        assert abs(circle.center) < 1e-12
        assert abs(circle.radius - 2) < 1e-12

    def test_collinear_rejected(self):
        with pytest.raises(CollinearB):
            example3_circle(0, 1 + 1j, 2 + 2j)

    def test_fiber_is_reciprocal_offsets(self, product_pencil, triangle_bs):
        z = 0.4 - 0.9j
        expected = np.array([1 / (b - z) for b in triangle_bs])
        assert np.allclose(np.sort_complex(np.array(labeled_at_infinity(product_pencil.curve, z))), np.sort_complex(expected))


class TestGammaLocus:
    @pytest.fixture(scope="class")
    def loci(self, product_pencil, policy):
        rect = (-2.5, -2.5, 2.5, 2.5)
        return [gamma_locus(product_pencil, 1, triple, rect, 0.05, policy) for triple in ((1, 2, 3), (3, 1, 2))]

    def test_locus_is_the_circle(self, loci, triangle_bs):
        circle = example3_circle(*triangle_bs)
        for locus in loci:
            assert len(locus) > 50
            assert np.max(circle.distance(locus.points)) <= 0.1
            assert np.max(locus.residuals) < 5e-2

    def test_no_points_on_the_ray_beyond_a_pole(self, loci):
        for locus in loci:
            on_ray = (np.abs(locus.points.imag) < 0.05) & (locus.points.real > 2.15)
            assert not np.any(on_ray)

    def test_cyclic_relabeling_gives_same_set(self, loci):
        base, perm = loci
        gaps = np.min(np.abs(perm.points[:, None] - base.points[None, :]), axis=1)
        assert np.max(gaps) <= 0.1

    def test_needs_three_sheets(self, trivial_k1, policy):
        assert len(gamma_locus(trivial_k1, 1, (1, 2, 3), (-1, -1, 1, 1), 0.1, policy)) == 0

    def test_bad_rectangle(self, product_pencil, policy):
        with pytest.raises(ValueError):
            gamma_locus(product_pencil, 1, (1, 2, 3), (1, 0, -1, 1), 0.1, policy)

    def test_crossings_of_two_lines(self):
        s = np.linspace(-1, 1, 41)
        a = GammaLocus(triple=(1, 2, 3), family=1, rect=(-1, -1, 1, 1), res=0.05, points=s.astype(complex))
        b = GammaLocus(triple=(1, 2, 4), family=1, rect=(-1, -1, 1, 1), res=0.05, points=1j * s)
        centres = locus_crossings(a, b)
        assert centres.size == 1
        assert abs(centres[0]) < 0.05


class TestHDifference:
    BASE = 0.3 + 0.1j
    Z = 0.5 + 0.4j

    def test_matches_logarithms(self, product_pencil, policy):
        bs = _b_of_labels(product_pencil, self.BASE, policy)
        alpha = complex(product_pencil.alphas(policy)[0])
        for pair in ((1, 2), (2, 3), (1, 3)):
            value = h_difference(product_pencil, 1, pair, self.BASE, self.Z, policy)
            assert value == pytest.approx(_h_closed_form(alpha, bs, pair, self.BASE, self.Z), abs=1e-7)

    def test_antisymmetric_and_cyclic(self, product_pencil, policy):
        h = {pair: h_difference(product_pencil, 1, pair, self.BASE, self.Z, policy) for pair in ((1, 2), (2, 1), (2, 3), (3, 1))}
        assert h[(1, 2)] == pytest.approx(-h[(2, 1)], abs=1e-9)
        assert h[(1, 2)] + h[(2, 3)] + h[(3, 1)] == pytest.approx(0.0, abs=1e-8)

    def test_path_independent_away_from_poles(self, product_pencil, policy):
        direct = h_difference(product_pencil, 1, (1, 2), self.BASE, self.Z, policy)
        bent = h_difference_along(product_pencil, 1, (1, 2), [self.BASE, 0.6 + 0.0j, self.Z], policy)
        assert bent == pytest.approx(direct, abs=1e-8)

    def test_zero_at_base(self, product_pencil, policy):
        assert h_difference(product_pencil, 1, (1, 3), self.BASE, self.BASE, policy) == 0.0

    def test_validation(self, product_pencil, trivial_k1, policy):
        with pytest.raises(ValueError):
            h_difference(trivial_k1, 1, (1, 2), 0.5, 1.0, policy)
        with pytest.raises(ValueError):
            h_difference(product_pencil, 1, (2, 2), self.BASE, self.Z, policy)
        with pytest.raises(ValueError):
            h_difference(product_pencil, 1, (1, 4), self.BASE, self.Z, policy)


class TestLevelCurve:
    SEED = 1.788 + 0.212j  # 0.3 from the b at 2, off the real axis

    @pytest.fixture(scope="class")
    def pair(self, product_pencil, policy) -> tuple:
        bs = _b_of_labels(product_pencil, self.SEED, policy)
        near = int(np.argmin(np.abs(bs - 2.0)))
        other = (near + 1) % 3
        return near + 1, other + 1

    @pytest.fixture(scope="class")
    def level(self, product_pencil, pair, policy):
        return trace_level_curve(product_pencil, 1, pair, self.SEED, step=0.05, max_len=4.0, policy=policy)

    def test_closes_around_the_b(self, level):
        assert level.closed
        assert level.stops == ("closed", "closed")
        assert np.all(np.abs(level.points - 2.0) > 0.2)
        assert 1.5 < level.length < 2.6

    def test_stays_on_apollonius_circle(self, level, product_pencil, pair, policy):
        bs = _b_of_labels(product_pencil, self.SEED, policy)
        b_i, b_j = bs[pair[0] - 1], bs[pair[1] - 1]
        ratio = np.abs(b_i - level.points) / np.abs(b_j - level.points)
        target = abs(b_i - self.SEED) / abs(b_j - self.SEED)
        assert np.max(np.abs(ratio / target - 1)) < 1e-3
        assert np.max(np.abs(level.h_values)) < 1e-8

    def test_tangents_orthogonal_to_normal(self, level):
        defects = tangent_defects(level)
        assert defects.shape == level.points.shape
        assert np.max(defects) < 1e-2

    def test_vertices_near_the_seed_agree_with_h_difference(self, level, product_pencil, pair, policy):
        near = [z for z in level.points if 0 < abs(z - self.SEED) < 0.3]
        assert near
        for z in near:
            assert abs(h_difference(product_pencil, 1, pair, self.SEED, z, policy)) < 1e-7

    def test_densities_follow_branch_gap(self, level):
        assert np.allclose(level.densities, np.abs(level.diffs) / (2 * math.pi))

    def test_numeric_level_measured_from_anchor(self, product_pencil, pair, policy):
        route = label_route(product_pencil.curve, self.SEED, policy)
        h0 = h_difference_along(product_pencil, 1, pair, route, policy)
        traced = trace_level_curve(product_pencil, 1, pair, self.SEED, step=0.05, max_len=0.3, level=h0, policy=policy)
        assert traced.base == anchor_point(product_pencil.curve, policy)
        assert traced.level == pytest.approx(h0)
        assert np.max(np.abs(traced.h_values - h0)) < 1e-8
        assert "max length" in traced.stops

    def test_step_shrinks_near_singular_points(self, product_pencil, pair, policy):
        # a nominal step wider than the curve's distance to the b
        coarse = trace_level_curve(product_pencil, 1, pair, self.SEED, step=0.2, max_len=4.0, policy=policy)
        assert coarse.closed
        singular = singular_points(product_pencil.curve, policy)
        dist = np.min(np.abs(coarse.points[:, None] - singular[None, :]), axis=1)
        chords = np.abs(np.diff(coarse.points))
        assert np.all(chords <= 0.5 * np.maximum(dist[:-1], dist[1:]) + 1e-9)
        assert np.max(tangent_defects(coarse)[2:-2]) < 1e-2

    def test_needs_positive_step(self, product_pencil, pair, policy):
        with pytest.raises(ValueError):
            trace_level_curve(product_pencil, 1, pair, self.SEED, step=0.0, policy=policy)


class TestTangents:
    def test_circle_tangents_are_exact(self):
        pts = 1.5 * np.exp(2j * np.pi * np.arange(40) / 40) + (0.2 - 0.1j)
        tangents = polyline_tangents(pts, closed=True)
        radial = pts - (0.2 - 0.1j)
        assert np.max(np.abs((tangents * np.conj(radial)).real)) < 1e-12

    def test_open_ends_are_one_sided(self):
        pts = np.array([0, 1, 2 + 1j], dtype=complex)
        tangents = polyline_tangents(pts)
        assert tangents[0] == pytest.approx(1.0)
        assert tangents[-1] == pytest.approx((1 + 1j) / math.sqrt(2))


class TestDensity:
    # atoms every 0.1 on [0.05, 9.95]; density 1/(0.1·100) = 0.1 matches |d|/(2π) with d = 0.2π
    ATOMS = RootMeasure(tuple(0.05 + 0.1 * np.arange(100)))
    POINTS = np.linspace(0.0, 10.0, 201).astype(complex)

    def test_uniform_chain_matches_prediction(self):
        report = density_vs_roots(_line(self.POINTS, 0.2 * math.pi), self.ATOMS, window=1.02)
        assert report.vertices.size > 100
        assert report.atoms_near == 100
        assert abs(report.mean_ratio - 1) < 0.1

    def test_window_covering_curve_reports_mass(self):
        report = density_vs_roots(_line(self.POINTS, 0.2 * math.pi), self.ATOMS, window=20.0)
        assert report.global_mass == pytest.approx(1.0)
        assert report.predicted_mass == pytest.approx(1.0)
        assert report.vertices.size == 0

    def test_sparse_window(self):
        far = RootMeasure((50 + 50j, 60 + 50j, 70 + 50j))
        with pytest.raises(SparseWindow):
            density_vs_roots(_line(self.POINTS, 1.0), far, window=1.0)

    def test_spacing_and_colocation(self):
        assert mean_spacing(self.ATOMS) == pytest.approx(0.1)
        assert colocation_fraction(_line(self.POINTS, 1.0), self.ATOMS) == 1.0

    def test_densest_cluster_seed(self):
        atoms = list(0.01 * np.arange(10)) + [5.0, 7.0, 9.0 + 3j]
        seed = densest_cluster_seed(RootMeasure(tuple(atoms)))
        assert 0.0 <= seed.real <= 0.09
        assert seed.imag == 0

    def test_pair_inference_needs_two_sheets(self, trivial_k1, policy):
        with pytest.raises(ValueError):
            infer_pair(trivial_k1, 1, self.ATOMS, 1.0, policy)
