"""Root-counting measures, Cauchy transforms, potentials and convergence checks."""
import math
from fractions import Fraction

import numpy as np
import pytest

from spectral.curve import branch_points
from spectral.measures import (
    AtomCollision,
    RootMeasure,
    algebraic_defect,
    branch_deviation,
    cauchy_deviation,
    cauchy_transform,
    derivative_potential_gap,
    log_potential,
    outside_inflated_hull,
    potential_ordering_check,
    root_measure,
)
from spectral.pencil import eigenpolynomial, spectral_eigenvalues
from spectral.poly import ComplexPolynomial


def _unit_roots(m: int) -> ComplexPolynomial:
    return ComplexPolynomial.monomial(m) - ComplexPolynomial.constant(1)


class TestRootMeasure:
    def test_mass_is_one(self, policy):
        mu = root_measure(ComplexPolynomial.from_roots([1, 1, 2j]), policy)
        assert mu.count == 3
        assert mu.weight == Fraction(1, 3)
        assert mu.total_mass == 1

    def test_rejects_constants(self, policy):
        with pytest.raises(ValueError):
            root_measure(ComplexPolynomial.constant(2), policy)

    def test_cauchy_transform_is_normalized_log_derivative(self, policy):
        p = ComplexPolynomial((2 - 1j, 0.5, -3j, 1, 0.25))
        mu = root_measure(p, policy)
        z = 1.7 + 0.4j
        expected = complex(p.derivative().eval(z) / (p.degree * p.eval(z)))
        assert abs(cauchy_transform(mu, z) - expected) < 1e-12 * abs(expected)

    def test_vectorized_shapes(self):
        mu = RootMeasure((0j, 1.0))
        zs = np.array([2.0, 3.0j, -1.0])
        assert cauchy_transform(mu, zs).shape == (3,)
        assert isinstance(log_potential(mu, 2.0), float)

    def test_collision_raises(self):
        mu = RootMeasure((0j, 1.0))
        with pytest.raises(AtomCollision):
            cauchy_transform(mu, 1.0)

    def test_unit_circle_potential(self, policy):
        mu = root_measure(_unit_roots(200), policy)
        assert abs(log_potential(mu, 2.0) - math.log(2)) <= 0.01
        assert abs(log_potential(mu, 0.5)) <= 0.02


class TestPotentials:
    def test_ordering_holds_for_unit_roots(self, policy):
        xs = np.linspace(-2.05, 2.05, 21)
        grid = xs[None, :] + 1j * xs[:, None]
        report = potential_ordering_check([_unit_roots(10), _unit_roots(20)], grid, policy)
        assert report.ok
        assert [e.degree for e in report.entries] == [10, 20]
        assert all(e.max_gap_outside_hull < 0.05 for e in report.entries)

    def test_ordering_needs_degree_two(self, policy):
        with pytest.raises(ValueError):
            potential_ordering_check([ComplexPolynomial((1, 1))], np.array([2.0]), policy)

    def test_derivative_gap_reports_each_order(self, policy):
        p = ComplexPolynomial.from_roots([1, -1, 1j, -1j, 0.5 + 0.5j, -0.5 + 0.2j])
        grid = np.array([2.0, 2.5j, -3.0 + 1j, 1.5 - 2j])
        gaps = derivative_potential_gap(p, (1, 3), grid, policy)
        assert set(gaps) == {1, 3}
        assert all(g >= 0 for g in gaps.values())

    def test_derivative_gap_stays_open_for_unit_roots(self, policy):
        # every derivative of z^20 - 1 has all roots at 0
        gaps = derivative_potential_gap(_unit_roots(20), (1, 2), np.array([0.5, 0.3j]), policy)
        assert all(g > 0.5 for g in gaps.values())

    def test_hull_fallback_for_collinear_atoms(self):
        atoms = np.array([-1.0, 0.0, 1.0], dtype=complex)
        outside = outside_inflated_hull(atoms, np.array([0.0, 5.0], dtype=complex))
        assert list(outside) == [False, True]


class TestConvergenceChecks:
    @pytest.fixture(scope="class")
    def solution(self, fig1, policy):
        lam = dict((j, value) for value, j in spectral_eigenvalues(fig1, 40, policy))[1]
        return eigenpolynomial(fig1, 40, lam, policy, j=1)

    @pytest.fixture(scope="class")
    def radius(self, fig1, policy):
        return 2.05 * max(abs(b) for b in branch_points(fig1.curve, policy))

    def test_radius_inside_branch_points_rejected(self, fig1, policy, solution):
        with pytest.raises(ValueError):
            branch_deviation(fig1, 1, 40, 0.1, 16, policy, solution=solution)

    def test_deviations_on_safe_circle_are_small(self, fig1, policy, solution, radius):
        branch = branch_deviation(fig1, 1, 40, radius, 32, policy, solution=solution)
        cauchy = cauchy_deviation(fig1, 1, 40, radius, 32, policy, solution=solution)
        assert branch < 0.5
        assert cauchy < 0.5 * max(1.0, abs(complex(fig1.alphas(policy)[0])))

    def test_algebraic_defect_small(self, fig1, policy, solution, radius):
        defect = algebraic_defect(fig1, 1, 40, radius, 32, policy, solution=solution)
        assert 0 <= defect < 0.5
