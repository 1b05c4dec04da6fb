"""Log-derivative series, the ε recurrence and its constants."""
import math

import mpmath
import pytest

from spectral.curve import branch_series_at_infinity
from spectral.pencil import Pencil, eigenpolynomial, spectral_eigenvalues
from spectral.poly import ComplexPolynomial
from spectral.recurrence import (
    RootDeficient,
    epsilon1_candidates,
    log_derivative_series,
    majorant_radius,
    pencil_series_residual,
    phi0,
    phi0_sup_scan,
    series_gap,
    solve_recurrence,
)
from spectral.series import TruncatedSeries


class TestLogDerivativeSeries:
    def test_monomial(self):
        # p = z^n: p'/(λp) = n/(λz), so ε₁ = n/λ and nothing else
        s = log_derivative_series(ComplexPolynomial.monomial(4), 2, 5)
        assert s.coeffs[0] == 0
        assert abs(s.coeffs[1] - 2) < 1e-15
        assert all(abs(c) < 1e-15 for c in s.coeffs[2:])

    def test_power_sums(self):
        # coefficient of y^(m+1) is (Σ r^m)/λ
        rts = [1, 2, -1j]
        s = log_derivative_series(ComplexPolynomial.from_roots(rts), 1, 4)
        for m in range(4):
            assert abs(s.coeffs[m + 1] - sum(mpmath.mpc(r) ** m for r in rts)) < 1e-12

    def test_rejects_constants(self):
        with pytest.raises(ValueError):
            log_derivative_series(ComplexPolynomial.constant(1), 1, 3)
        with pytest.raises(ValueError):
            log_derivative_series(ComplexPolynomial.monomial(2), 0, 3)

    def test_truncations_converge_to_the_value(self):
        p = ComplexPolynomial.from_roots([1, -1.5j, 0.5 + 0.5j, 2])
        lam, z = 3, 8.0
        exact = p.derivative().eval(z) / (lam * p.eval(z))
        errors = [abs(log_derivative_series(p, lam, M).eval(1 / z) - exact) for M in (5, 10, 20)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-10


class TestRecurrence:
    def test_matches_log_derivative(self, fig1, policy):
        with mpmath.workdps(40):
            high = policy.with_digits(40)
            lam, j = spectral_eigenvalues(fig1, 30, high)[1]
            sol = eigenpolynomial(fig1, 30, lam, high, j=j)
            direct = log_derivative_series(sol.p, sol.lam, 10)
            recurred = solve_recurrence(fig1, sol.lam, mpmath.mpf(30) / sol.lam, 10, high)
            assert series_gap(recurred.coeffs, direct.coeffs, 10) < 1e-8

    def test_residual_vanishes_on_solution(self, fig1, policy):
        with mpmath.workdps(30):
            lam = spectral_eigenvalues(fig1, 25, policy.with_digits(30))[0][0]
            L = solve_recurrence(fig1, lam, mpmath.mpf(25) / lam, 8, policy.with_digits(30))
            residual = pencil_series_residual(fig1, lam, L)
            assert max(abs(c) for c in residual.coeffs) < 1e-15 * abs(lam) ** 3

    def test_wrong_first_coefficient_rejected(self, fig1, policy):
        lam = spectral_eigenvalues(fig1, 25, policy)[0][0]
        with pytest.raises(ValueError):
            solve_recurrence(fig1, lam, mpmath.mpf(7), 5, policy)

    def test_order_validated(self, fig1):
        with pytest.raises(ValueError):
            solve_recurrence(fig1, 10, 1, 0)

    def test_large_lambda_roots_approach_xi(self, fig1, policy):
        lam = mpmath.mpc(1e6, 3e5)
        candidates = epsilon1_candidates(fig1, lam, policy)
        for eps1, xi in zip(candidates, fig1.xis(policy)):
            assert abs(eps1 - xi) < 1e-3

    def test_first_order_pencil_near_its_xi(self, trivial_k1, policy):
        (eps1,) = epsilon1_candidates(trivial_k1, 10, policy)
        assert abs(eps1 - 1) <= 0.2

    def test_vanishing_top_diagonal_is_root_deficient(self, policy):
        P = Pencil.from_complex([[1], [0, 1], [1]])  # a_22 = 0
        with pytest.raises(RootDeficient):
            epsilon1_candidates(P, 1000, policy)

    def test_small_lambda_rejected(self, fig1, policy):
        with pytest.raises(ValueError):
            epsilon1_candidates(fig1, 1, policy)


class TestPhi0:
    def test_quadratic_closed_form(self):
        P = Pencil.from_complex([[1.5 - 0.5j], [0.3j, 0.7 + 0.2j], [1, -0.4, 2 - 1j]])
        a11, a22 = P.a(1, 1), P.a(2, 2)
        with mpmath.workdps(30):
            lam = mpmath.mpc(35, -12)
            prefix = TruncatedSeries((0, 0.8 - 0.1j, 0.25j, -0.3))
            extracted = phi0(P, prefix, lam, 3)
            closed = a22 * (2 * prefix.coeffs[1] - 3 / lam) + a11 - a22 / lam
            assert abs(extracted - closed) <= 1e-12 * max(1, abs(closed))

    def test_prefix_must_reach_m(self, fig1):
        with pytest.raises(ValueError):
            phi0(fig1, TruncatedSeries((0, 1)), 10, 2)

    def test_sup_scan_is_finite_for_large_lambda(self, fig1, policy):
        with mpmath.workdps(30):
            lam = spectral_eigenvalues(fig1, 40, policy)[0][0]
            scan = phi0_sup_scan(fig1, lam, mpmath.mpf(40) / lam, 6)
        assert 0 < scan.sup_value < float("inf")
        assert 0 <= scan.worst[0] <= 6

    def test_sup_scan_blows_up_where_phi0_vanishes(self):
        # with Σ a_ii t^i = t² − 1 and ε₁ = 1, Φ₀ = 2 − (m + 1)/λ vanishes at m = 2λ − 1
        P = Pencil.from_complex([[-1], [0.5], [0, 0, 1]])
        with mpmath.workdps(30):
            sups = [phi0_sup_scan(P, 50, 1, m_max) for m_max in (60, 90, 98, 99)]
        assert sups[0].sup_value < sups[1].sup_value < sups[2].sup_value < math.inf
        assert sups[2].worst == (98, 1)
        assert sups[3].sup_value == math.inf
        assert sups[3].worst[0] == 99


def test_majorant_radius():
    assert majorant_radius(0) == 1
    assert majorant_radius(2) == 1 / 25
    with pytest.raises(ValueError):
        majorant_radius(-1)


def test_formal_limit_approaches_curve_branch(fig1, policy):
    with mpmath.workdps(40):
        high = policy.with_digits(40)
        limit = branch_series_at_infinity(fig1.curve, 1, 6, high).coeffs
        gaps = []
        for n in (20, 80):
            lam = spectral_eigenvalues(fig1, n, high)[0][0]
            eps = solve_recurrence(fig1, lam, mpmath.mpf(n) / lam, 6, high).epsilons
            gaps.append(max(float(abs(e - c)) for e, c in zip(eps, limit)))
    assert gaps[1] < gaps[0]
