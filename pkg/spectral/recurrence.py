"""
Series at infinity for eigenpolynomials and the recurrence that builds them.

In the chart y = 1/z the normalized log-derivative is L = yN(y) = Σ ε_i y^i.
The pencil equation becomes Σ_i P_i(y) λ^(-i) y^(-i) r_i = 0 with
r_0 = 1 and r_(i+1) = λ·L·r_i − y²·r_i'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath

from app.config import SPECTRAL_LAMBDA_FACTOR
from spectral import series
from spectral.curve import DegenerateCharEq, xi_roots
from spectral.pencil import Pencil
from spectral.poly import DEFAULT_POLICY, ComplexPolynomial, DegenerateCurve, PrecisionPolicy, roots
from spectral.resilience import PrecisionShortfall, SpectralError, escalate_precision, logger
from spectral.series import TruncatedSeries

# r_i coefficients below order i must vanish to this fraction of max|r_i|
ORDER_TOL = 1e-12
PHI0_TOL = 1e-12
RECURRENCE_TOL = 1e-10


class OrderViolation(SpectralError):
    """Some r_i carries a nonzero coefficient below y-order i."""
    pass


class RootDeficient(SpectralError):
    """The constant-term polynomial in ε₁ has degree < k at this λ."""
    pass


class ResonantPhi0(SpectralError):
    """Φ₀ vanishes at some order m, so ε_(m+1) is not determined."""

    def __init__(self, message: str, m: int):
        super().__init__(message)
        self.m = m


def reciprocal_polynomials(P: Pencil) -> list:
    """P_i(y) = Σ_j a_ij y^(i-j) as coefficient lists."""
    return [[P.a(i, i - s) for s in range(i + 1)] for i in range(P.k + 1)]


def log_derivative_series(p: ComplexPolynomial, lam, M: int) -> TruncatedSeries:
    """Taylor coefficients at y = 0 of p'/(λp) with z = 1/y, through y^M."""
    n = p.degree
    if n < 1:
        raise ValueError("log-derivative needs deg p >= 1")
    lam = mpmath.mpc(lam)
    if lam == 0:
        raise ValueError("λ must be nonzero")
    lead = p.leading
    reversed_p = [p.coefficient(n - m) / lead for m in range(n + 1)]
    reversed_dp = [(n - m) * p.coefficient(n - m) / lead for m in range(n + 1)]
    ratio = series.div(reversed_dp, reversed_p, M)
    coeffs = [mpmath.mpc(0)] + [c / lam for c in ratio]
    # ε₁ = n/λ identically
    coeffs[1] = mpmath.mpc(n) / lam
    return TruncatedSeries(tuple(coeffs), origin="log-derivative", lam=lam)


def pencil_series_residual(P: Pencil, lam, L: TruncatedSeries) -> TruncatedSeries:
    """λ^(-k) S_λ(yN) through y^(M-1) for L = yN known through y^M."""
    M = L.M
    if M < 1:
        raise ValueError("series must be known through order >= 1")
    lam = mpmath.mpc(lam)
    k = P.k
    work = M + k
    Ly = series.pad(L.coeffs, work)
    r = series.pad([1], work)
    out = [mpmath.mpc(0)] * M
    reciprocal = reciprocal_polynomials(P)
    for i in range(k + 1):
        if i > 0:
            lifted = series.shift_up(series.y_derivative(r), 1, work)
            r = [lam * a - b for a, b in zip(series.mul(Ly, r, work), lifted)]
            low = series.max_abs(r[:i])
            if low > ORDER_TOL * max(series.max_abs(r), mpmath.mpf(1e-300)):
                raise OrderViolation(f"r_{i} has order below {i} (|low| = {float(low):.3e})")
        shifted = [c / lam ** i for c in r[i:i + M]]
        out = series.add(out, series.mul(reciprocal[i], shifted, M), M)
    return TruncatedSeries(tuple(out), origin="residual", lam=lam)


def _constant_term(P: Pencil, lam, eps1) -> mpmath.mpc:
    trial = TruncatedSeries((0, eps1), origin="recurrence")
    return pencil_series_residual(P, lam, trial).coeffs[0]


def large_lambda_threshold(P: Pencil, factor: float = SPECTRAL_LAMBDA_FACTOR) -> float:
    return factor * P.k * float(max(abs(a) for a in P.diagonal))


def constant_term_polynomial(P: Pencil, lam) -> ComplexPolynomial:
    """The y⁰ residual coefficient as a polynomial in ε₁, interpolated on k+1 circle nodes."""
    try:
        radius = max(1.0, 2.0 * max(float(abs(x)) for x in xi_roots(P.curve)))
    except (DegenerateCharEq, DegenerateCurve):
        radius = 1.0
    count = P.k + 1
    nodes = [radius * mpmath.expjpi(mpmath.mpf(2 * s) / count) for s in range(count)]
    values = [_constant_term(P, lam, x) for x in nodes]
    coeffs = []
    for d in range(count):
        acc = mpmath.fsum(values[s] * mpmath.expjpi(-mpmath.mpf(2 * s * d) / count) for s in range(count))
        coeffs.append(acc / count / mpmath.mpf(radius) ** d)
    return ComplexPolynomial(tuple(coeffs))


def epsilon1_candidates(
    P: Pencil,
    lam,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    factor: float = SPECTRAL_LAMBDA_FACTOR,
) -> tuple:
    """The k roots ε₁ of the constant-term equation, ordered to match ξ_1…ξ_k."""
    lam = mpmath.mpc(lam)
    threshold = large_lambda_threshold(P, factor)
    if abs(lam) < threshold:
        raise ValueError(f"|λ| = {float(abs(lam)):.4g} below the large-λ threshold {threshold:.4g}")
    poly = constant_term_polynomial(P, lam)
    top = max([abs(c) for c in poly.coeffs] + [mpmath.mpf(0)])
    if poly.is_zero or poly.degree < P.k or abs(poly.coefficient(P.k)) <= 1e-12 * top:
        raise RootDeficient(f"constant-term polynomial has degree < {P.k} at λ={complex(lam):.6g}")
    found = list(roots(poly.trim(1e-12 * top), policy))
    try:
        xis = xi_roots(P.curve, policy)
    except (DegenerateCharEq, DegenerateCurve):
        return tuple(found)
    ordered = []
    for xi in xis:
        best = min(range(len(found)), key=lambda i: abs(found[i] - xi))
        ordered.append(found.pop(best))
    return tuple(ordered)


def phi0(P: Pencil, eps_prefix: TruncatedSeries, lam, m: int) -> mpmath.mpc:
    """Coefficient of ε_(m+1) in the y^m residual coefficient (affine, so two evaluations suffice)."""
    if m < 1:
        raise ValueError("phi0 needs m >= 1")
    if eps_prefix.M < m:
        raise ValueError(f"prefix defines ε up to {eps_prefix.M}, needs {m}")
    base = list(eps_prefix.coeffs[: m + 1])
    at_zero = pencil_series_residual(P, lam, TruncatedSeries(tuple(base + [0]))).coeffs[m]
    at_one = pencil_series_residual(P, lam, TruncatedSeries(tuple(base + [1]))).coeffs[m]
    return at_one - at_zero


def _phi0_scale(P: Pencil, eps1, lam, m: int) -> mpmath.mpf:
    size = max(mpmath.mpf(1), abs(eps1), abs(mpmath.mpf(m) / lam))
    return mpmath.fsum(i * abs(P.a(i, i)) * size ** (i - 1) for i in range(1, P.k + 1))


def solve_recurrence(
    P: Pencil,
    lam,
    eps1,
    M: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> TruncatedSeries:
    """ε_(m+1) = −B/Φ₀ for m = 1…M−1, starting from ε₁."""
    if M < 1:
        raise ValueError("truncation order M must be >= 1")

    def attempt(digits: int) -> TruncatedSeries:
        lam_mp = mpmath.mpc(lam)
        e1 = mpmath.mpc(eps1)
        constant = _constant_term(P, lam_mp, e1)
        constant_scale = mpmath.fsum(abs(P.a(i, i)) * max(1, abs(e1)) ** i for i in range(P.k + 1))
        if abs(constant) > 1e-8 * constant_scale:
            raise ValueError(f"ε₁ = {complex(e1):.6g} does not solve the constant-term equation")
        L = [mpmath.mpc(0), e1]
        scales = [constant_scale]
        for m in range(1, M):
            at_zero = pencil_series_residual(P, lam_mp, TruncatedSeries(tuple(L + [0]))).coeffs[m]
            at_one = pencil_series_residual(P, lam_mp, TruncatedSeries(tuple(L + [1]))).coeffs[m]
            phi = at_one - at_zero
            if abs(phi) < PHI0_TOL * _phi0_scale(P, e1, lam_mp, m):
                raise ResonantPhi0(f"Φ₀ vanishes at m={m}", m=m)
            nxt = -at_zero / phi
            L.append(nxt)
            scales.append(max(abs(at_zero), abs(phi * nxt)))
        residual = pencil_series_residual(P, lam_mp, TruncatedSeries(tuple(L))).coeffs
        worst = 0.0
        for m, (res, sc) in enumerate(zip(residual, scales)):
            if m == 0:
                continue
            if sc == 0:
                ratio = 0.0 if res == 0 else math.inf
            else:
                ratio = float(abs(res) / sc)
            worst = max(worst, ratio)
        if worst > RECURRENCE_TOL:
            raise PrecisionShortfall(f"recurrence residual {worst:.3e}", worst)
        return TruncatedSeries(tuple(L), origin="recurrence", lam=lam_mp)

    return escalate_precision(
        attempt,
        initial_digits=policy.initial_digits,
        max_digits=policy.max_digits,
        name="solve_recurrence",
    )


@dataclass(frozen=True)
class Phi0Scan:
    lam: mpmath.mpc
    eps1: mpmath.mpc
    m_max: int
    sup_value: float
    worst: tuple  # (m, r)


def phi0_sup_scan(P: Pencil, lam, eps1, m_max: int) -> Phi0Scan:
    """sup over 0<=m<=m_max, 0<=r<=k-1 of |Φ₀(ε₁, 1/λ, m/λ)|^(-1) |m/λ|^r."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    lam = mpmath.mpc(lam)
    e1 = mpmath.mpc(eps1)
    sup_value, worst = 0.0, (0, 0)
    for m in range(m_max + 1):
        if m == 0:
            value = constant_term_polynomial(P, lam).derivative().eval(e1)
        else:
            prefix = TruncatedSeries(tuple([0, e1] + [0] * (m - 1)))
            value = phi0(P, prefix, lam, m)
        if value == 0 or abs(value) < PHI0_TOL * _phi0_scale(P, e1, lam, m):
            logger.warning(f"Φ₀ vanishes at m={m}; sup is infinite")
            return Phi0Scan(lam=lam, eps1=e1, m_max=m_max, sup_value=math.inf, worst=(m, 0))
        ratio = mpmath.mpf(m) / abs(lam)
        for r in range(P.k):
            candidate = float(ratio ** r / abs(value))
            if candidate > sup_value:
                sup_value, worst = candidate, (m, r)
    return Phi0Scan(lam=lam, eps1=e1, m_max=m_max, sup_value=sup_value, worst=worst)


def majorant_radius(L: float) -> float:
    """1/(1+2L)², the convergence radius guaranteed by the majorant series."""
    if L < 0:
        raise ValueError("L must be non-negative")
    return 1 / (1 + 2 * L) ** 2


def series_gap(a: Sequence, b: Sequence, count: int) -> float:
    """max over i = 1..count of |a_i − b_i| / |b_i| (coefficients indexed by power)."""
    worst = 0.0
    floor = mpmath.mpf(10) ** -300
    for i in range(1, count + 1):
        worst = max(worst, float(abs(a[i] - b[i]) / max(abs(b[i]), floor)))
    return worst
