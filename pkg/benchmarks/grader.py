"""
Acceptance battery. Each criterion takes a Battery and returns (passed, details);
details carry the measured values so failures are reported, not raised.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from spectral.curve import branch_points, branch_series_at_infinity
from spectral.measures import branch_deviation, cauchy_transform, log_potential, root_measure
from spectral.pencil import EigenSolution, Pencil, eigenpolynomial, localization_profile, polish_eigenvalue, spectral_eigenvalues
from spectral.poly import DEFAULT_POLICY, ComplexPolynomial, PrecisionPolicy, discriminant_in_w
from spectral.recurrence import log_derivative_series, majorant_radius, phi0, series_gap, solve_recurrence
from spectral.series import TruncatedSeries
from spectral.support import (
    density_vs_roots,
    densest_cluster_seed,
    example3_circle,
    example3_pencil,
    gamma_locus,
    infer_pair,
    mean_spacing,
    tangent_defects,
    trace_level_curve,
)

SERIES_DIGITS = 40
ASYMPTOTIC_NS = (15, 25, 40, 55)
LOCALIZATION_NS = tuple(range(10, 60, 5))
FORMAL_LIMIT_NS = (20, 40, 80)
LOCUS_RES = 0.01


@dataclass
class Battery:
    """Pencil under test plus caches shared across criteria."""
    P: Pencil
    policy: PrecisionPolicy = DEFAULT_POLICY
    seed: int = 20240611
    asymptotic_ns: tuple = ASYMPTOTIC_NS
    formal_limit_ns: tuple = FORMAL_LIMIT_NS
    locus_res: float = LOCUS_RES
    _eigen: dict = field(default_factory=dict)
    _solutions: dict = field(default_factory=dict)

    def eigenvalues(self, n: int) -> dict:
        if n not in self._eigen:
            self._eigen[n] = {j: lam for lam, j in spectral_eigenvalues(self.P, n, self.policy)}
        return self._eigen[n]

    def solution(self, n: int, j: int, digits: Optional[int] = None) -> EigenSolution:
        key = (n, j, digits)
        if key not in self._solutions:
            policy = self.policy.with_digits(digits) if digits else self.policy
            self._solutions[key] = eigenpolynomial(self.P, n, self.eigenvalues(n)[j], policy, j=j)
        return self._solutions[key]

    @property
    def families(self) -> range:
        return range(1, self.P.k + 1)


def _strictly_decreasing(values: list) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


def branch_point_count(b: Battery) -> tuple[bool, dict[str, Any]]:
    bps = branch_points(b.P.curve, b.policy)
    disc = discriminant_in_w(b.P.curve.Q)
    residuals = []
    for z in bps:
        scale = sum(abs(c) * abs(z) ** m for m, c in enumerate(disc.coeffs))
        residuals.append(float(abs(disc.eval(z)) / scale) if scale else 0.0)
    worst = max(residuals, default=0.0)
    passed = len(bps) == 6 and worst <= 1e-8
    return passed, {"count": len(bps), "max_residual": worst, "points": [[z.real, z.imag] for z in bps]}


def eigenvalue_asymptotics(b: Battery) -> tuple[bool, dict[str, Any]]:
    alphas = b.P.alphas(b.policy)
    detail, passed = {}, True
    for j in b.families:
        gaps = [float(abs(b.eigenvalues(n)[j] / n - alphas[j - 1])) for n in b.asymptotic_ns]
        ok = _strictly_decreasing(gaps) and gaps[-1] < 0.05
        detail[f"j{j}"] = {"gaps": gaps, "passed": ok}
        passed = passed and ok
    return passed, detail


def root_localization(b: Battery) -> tuple[bool, dict[str, Any]]:
    rows = localization_profile(b.P, LOCALIZATION_NS, b.policy)
    tops = {n: top for n, top, _ in rows}
    running = {n: run for n, _, run in rows}
    baseline = running[30]
    overall = max(tops.values())
    settled = running[LOCALIZATION_NS[-1]] <= 1.05 * baseline
    passed = overall <= 1.1 * baseline and settled
    return passed, {"baseline_n30": baseline, "max_modulus": overall, "running_max": [running[n] for n in LOCALIZATION_NS]}


def two_route_series(b: Battery) -> tuple[bool, dict[str, Any]]:
    policy = b.policy.with_digits(SERIES_DIGITS)
    detail, passed = {}, True
    with mpmath.workdps(SERIES_DIGITS):
        for j in b.families:
            sol = b.solution(55, j, SERIES_DIGITS)
            direct = log_derivative_series(sol.p, sol.lam, 20)
            recurred = solve_recurrence(b.P, sol.lam, mpmath.mpf(55) / sol.lam, 20, policy)
            gap = series_gap(recurred.coeffs, direct.coeffs, 20)
            detail[f"j{j}"] = gap
            passed = passed and gap <= 1e-8
    return passed, detail


def formal_limit(b: Battery) -> tuple[bool, dict[str, Any]]:
    policy = b.policy.with_digits(SERIES_DIGITS)
    detail, passed = {}, True
    with mpmath.workdps(SERIES_DIGITS):
        for j in b.families:
            limit = branch_series_at_infinity(b.P.curve, j, 10, policy)
            gaps = []
            for n in b.formal_limit_ns:
                lam = polish_eigenvalue(b.P, n, b.eigenvalues(n)[j])
                eps = solve_recurrence(b.P, lam, mpmath.mpf(n) / lam, 10, policy).epsilons
                gaps.append(max(float(abs(e - c)) for e, c in zip(eps, limit.coeffs)))
            ok = _strictly_decreasing(gaps)
            detail[f"j{j}"] = {"gaps": gaps, "passed": ok}
            passed = passed and ok
    return passed, detail


def phi0_closed_form(b: Battery) -> tuple[bool, dict[str, Any]]:
    rng = np.random.default_rng(b.seed)

    def c() -> complex:
        return complex(rng.normal(), rng.normal())

    P = Pencil.from_complex([[c()], [c(), c()], [c(), c(), c()]])
    a11, a22 = P.a(1, 1), P.a(2, 2)
    worst = 0.0
    with mpmath.workdps(30):
        for _ in range(50):
            m = int(rng.integers(1, 12))
            lam = mpmath.mpc(c()) * 20
            prefix = TruncatedSeries(tuple([0] + [c() for _ in range(m)]))
            eps1 = prefix.coeffs[1]
            extracted = phi0(P, prefix, lam, m)
            closed = a22 * (2 * eps1 - m / lam) + a11 - a22 / lam
            worst = max(worst, float(abs(extracted - closed) / max(1, abs(closed))))
    return worst <= 1e-12, {"max_error": worst}


def majorant_spot_values(b: Battery) -> tuple[bool, dict[str, Any]]:
    values = {"L=0": majorant_radius(0), "L=2": majorant_radius(2)}
    return values["L=0"] == 1 and values["L=2"] == 1 / 25, values


def branch_convergence(b: Battery) -> tuple[bool, dict[str, Any]]:
    largest = max(abs(z) for z in branch_points(b.P.curve, b.policy))
    radius = 2.05 * largest
    detail, passed = {"radius": radius}, True
    for j in b.families:
        devs = [branch_deviation(b.P, j, n, radius, 64, b.policy, solution=b.solution(n, j)) for n in b.asymptotic_ns]
        ok = _strictly_decreasing(devs)
        detail[f"j{j}"] = {"deviations": devs, "passed": ok}
        passed = passed and ok
    return passed, detail


def unit_circle_potential(b: Battery) -> tuple[bool, dict[str, Any]]:
    m = 200
    p = ComplexPolynomial.monomial(m) - ComplexPolynomial.constant(1)
    mu = root_measure(p, b.policy)
    mu_prime = root_measure(p.derivative(), b.policy)
    u2, u_half, up_half = log_potential(mu, 2.0), log_potential(mu, 0.5), log_potential(mu_prime, 0.5)
    passed = abs(u2 - math.log(2)) <= 0.01 and abs(u_half) <= 0.02 and up_half < u_half - 0.5
    return passed, {"u(2)": u2, "u(0.5)": u_half, "u'(0.5)": up_half}


def example3_circle_check(b: Battery) -> tuple[bool, dict[str, Any]]:
    res = b.locus_res
    bs = [2 * complex(math.cos(2 * math.pi * s / 3), math.sin(2 * math.pi * s / 3)) for s in range(3)]
    P3 = example3_pencil(*bs)
    circle = example3_circle(*bs)
    rect = (-2.5, -2.5, 2.5, 2.5)
    base = gamma_locus(P3, 1, (1, 2, 3), rect, res, b.policy)
    perm = gamma_locus(P3, 1, (3, 1, 2), rect, res, b.policy)
    if len(base) == 0 or len(perm) == 0:
        return False, {"points": [len(base), len(perm)]}
    off_circle = float(max(circle.distance(base.points).max(), circle.distance(perm.points).max()))
    tree = cKDTree(np.column_stack([base.points.real, base.points.imag]))
    sym, _ = tree.query(np.column_stack([perm.points.real, perm.points.imag]))
    symmetry = float(np.max(sym))
    passed = off_circle <= 2 * res and symmetry <= 2 * res
    return passed, {"points": [len(base), len(perm)], "max_off_circle": off_circle, "max_permutation_gap": symmetry,
                    "center": [circle.center.real, circle.center.imag], "radius": circle.radius}


def tangent_and_density(b: Battery) -> tuple[bool, dict[str, Any]]:
    sol = b.solution(55, 1)
    mu = root_measure(sol.p, b.policy)
    seed = densest_cluster_seed(mu)
    pair = infer_pair(b.P, 1, mu, seed, b.policy)
    level = trace_level_curve(b.P, 1, pair, seed, step=0.005, max_len=3.0, policy=b.policy)
    defects = tangent_defects(level)
    interior = defects if level.closed else defects[1:-1]
    report = density_vs_roots(level, mu, window=4.0 * mean_spacing(mu))
    worst = float(np.max(interior)) if interior.size else 0.0
    passed = worst <= 1e-4 and 0.7 <= report.mean_ratio <= 1.3
    return passed, {"pair": list(pair), "vertices": int(level.points.size), "max_tangent_defect": worst,
                    "mean_density_ratio": report.mean_ratio, "spread": report.spread, "stops": list(level.stops)}


def cauchy_identity(b: Battery) -> tuple[bool, dict[str, Any]]:
    rng = np.random.default_rng(b.seed + 1)
    policy = PrecisionPolicy(initial_digits=b.policy.initial_digits, max_digits=b.policy.max_digits, residual_target=1e-13)
    worst = 0.0
    for _ in range(100):
        deg = int(rng.integers(1, 31))
        p = ComplexPolynomial(tuple(complex(x, y) for x, y in rng.normal(size=(deg + 1, 2))))
        mu = root_measure(p, policy)
        atoms = mu.as_array()
        while True:
            z = complex(*rng.uniform(-3, 3, size=2))
            if np.min(np.abs(atoms - z)) > 0.1:
                break
        expected = complex(p.derivative().eval(z) / (p.degree * p.eval(z)))
        got = cauchy_transform(mu, z)
        worst = max(worst, abs(got - expected) / abs(expected))
    return worst <= 1e-10, {"max_relative_error": worst}


CRITERIA: list[tuple[int, str, Callable[[Battery], tuple[bool, dict[str, Any]]]]] = [
    (1, "branch-point count", branch_point_count),
    (2, "eigenvalue asymptotics", eigenvalue_asymptotics),
    (3, "root localization", root_localization),
    (4, "two-route series agreement", two_route_series),
    (5, "formal limit to the curve", formal_limit),
    (6, "phi0 closed form", phi0_closed_form),
    (7, "majorant radius", majorant_spot_values),
    (8, "branch convergence", branch_convergence),
    (9, "unit-circle potential", unit_circle_potential),
    (10, "product-curve circle", example3_circle_check),
    (11, "tangent orthogonality and density", tangent_and_density),
    (12, "cauchy identity", cauchy_identity),
]
