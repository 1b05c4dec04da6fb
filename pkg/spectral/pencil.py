"""
Homogenized spectral pencils T_λ = Σ Q_i(z) λ^(k-i) d^i/dz^i with deg Q_i <= i.

T_λ is upper triangular on {1, z, …, z^n}; eigenvalues come from the diagonal
entry at degree n and eigenpolynomials from back-substitution.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import mpmath

from spectral.curve import PlaneCurve, characteristic_roots, xi_roots
from spectral.poly import (
    DEFAULT_POLICY,
    ComplexPolynomial,
    PrecisionPolicy,
    falling_factorial,
    polish_roots,
    roots,
)
from spectral.resilience import PrecisionShortfall, SpectralError, escalate_precision, logger

# diagonal entries below this fraction of their row scale count as zero
RESONANCE_TOL = 1e-12
# Newton may move a supplied eigenvalue by at most this fraction of |λ|
EIGENVALUE_MOVE_TOL = 1e-6


class PencilFormatError(ValueError):
    """The Q tuple violates the pencil shape (k >= 1, deg Q_i <= i)."""
    pass


class ResonantDegree(SpectralError):
    """A diagonal entry below degree n vanishes: λ is shared with a lower degree."""

    def __init__(self, message: str, degree: int):
        super().__init__(message)
        self.degree = degree


class LabelAmbiguity(UserWarning):
    """Two eigenvalues are equally near the same α_j·n; the smaller label won."""
    pass


@dataclass(frozen=True)
class Pencil:
    Q: tuple

    def __post_init__(self) -> None:
        qs = tuple(q if isinstance(q, ComplexPolynomial) else ComplexPolynomial(tuple(q)) for q in self.Q)
        if len(qs) < 2:
            raise PencilFormatError("a pencil needs k >= 1, i.e. at least Q_0 and Q_1")
        for i, q in enumerate(qs):
            if not q.is_zero and q.degree > i:
                raise PencilFormatError(f"deg Q_{i} = {q.degree} exceeds {i}")
        object.__setattr__(self, "Q", qs)

    @classmethod
    def from_complex(cls, rows: Sequence[Sequence[complex]]) -> "Pencil":
        return cls(tuple(ComplexPolynomial(tuple(r)) for r in rows))

    @property
    def k(self) -> int:
        return len(self.Q) - 1

    def a(self, i: int, j: int) -> mpmath.mpc:
        return self.Q[i].coefficient(j)

    @property
    def diagonal(self) -> tuple:
        return tuple(self.a(i, i) for i in range(self.k + 1))

    @cached_property
    def curve(self) -> PlaneCurve:
        return PlaneCurve(self.Q)

    def alphas(self, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
        return characteristic_roots(self.diagonal, policy)

    def xis(self, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
        return xi_roots(self.curve, policy)

    def diagonal_entry(self, m: int, lam) -> mpmath.mpc:
        """Σ_i m(m-1)…(m-i+1) a_ii λ^(k-i): the z^m coefficient of T_λ z^m."""
        lam = mpmath.mpc(lam)
        return mpmath.fsum(
            falling_factorial(m, i) * self.a(i, i) * lam ** (self.k - i) for i in range(self.k + 1)
        )


# ── general type ──

@dataclass
class GeneralTypeReport:
    leading_ok: bool
    constant_ok: bool
    roots_distinct: bool
    no_collinear_pair: bool
    alphas: tuple
    reasons: list = field(default_factory=list)

    @property
    def is_general_type(self) -> bool:
        return self.leading_ok and self.constant_ok and self.roots_distinct and self.no_collinear_pair


def validate_general_type(P: Pencil, tol: float = 1e-9, policy: PrecisionPolicy = DEFAULT_POLICY) -> GeneralTypeReport:
    diag = P.diagonal
    leading_ok = diag[-1] != 0
    constant_ok = diag[0] != 0
    alphas = characteristic_roots(diag, policy)
    reasons: list[str] = []
    if not leading_ok:
        reasons.append("a_kk = 0 (deg Q_k < k)")
    if not constant_ok:
        reasons.append("a_00 = 0 (characteristic equation loses a root)")

    roots_distinct = True
    no_collinear_pair = True
    scale = max([abs(a) for a in alphas] + [mpmath.mpf(1)])
    for r in range(len(alphas)):
        if alphas[r] == 0:
            no_collinear_pair = False
            reasons.append(f"α_{r + 1} = 0 lies on every line through the origin")
        for s in range(r + 1, len(alphas)):
            ar, as_ = alphas[r], alphas[s]
            if abs(ar - as_) <= tol * scale:
                roots_distinct = False
                reasons.append(f"α_{r + 1} and α_{s + 1} coincide")
            elif ar != 0 and as_ != 0 and abs((ar * mpmath.conj(as_)).imag) <= tol * abs(ar) * abs(as_):
                no_collinear_pair = False
                reasons.append(f"α_{r + 1} and α_{s + 1} lie on one line through the origin")
    return GeneralTypeReport(
        leading_ok=leading_ok,
        constant_ok=constant_ok,
        roots_distinct=roots_distinct,
        no_collinear_pair=no_collinear_pair,
        alphas=alphas,
        reasons=reasons,
    )


# ── eigenvalues ──

def eigenvalue_equation(P: Pencil, n: int) -> ComplexPolynomial:
    """Σ_i n(n-1)…(n-i+1) a_ii λ^(k-i) as a polynomial in λ."""
    coeffs = [0] * (P.k + 1)
    for i in range(P.k + 1):
        coeffs[P.k - i] = falling_factorial(n, i) * P.a(i, i)
    return ComplexPolynomial(tuple(coeffs))


def spectral_eigenvalues(
    P: Pencil,
    n: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    tol: float = 1e-9,
) -> list:
    """The k eigenvalues λ_{n,j} as (λ, j) pairs sorted by j, labeled by nearest α_j·n."""
    if n < 1:
        raise ValueError("degree n must be >= 1")
    report = validate_general_type(P, policy=policy)
    if not report.is_general_type:
        raise ValueError(f"pencil is not of general type: {'; '.join(report.reasons)}")
    alphas = report.alphas
    lams = list(roots(eigenvalue_equation(P, n), policy))

    def rel(idx: int, j: int) -> float:
        return float(abs(lams[idx] / n - alphas[j]) / abs(alphas[j]))

    candidates = sorted(
        ((rel(idx, j), j, idx) for j in range(len(alphas)) for idx in range(len(lams))),
        key=lambda t: (t[0], t[1]),
    )
    assigned: dict[int, int] = {}
    used: set[int] = set()
    for dist, j, idx in candidates:
        if j in assigned or idx in used:
            continue
        rivals = [rel(o, j) for o in range(len(lams)) if o != idx and o not in used]
        if rivals and min(rivals) - dist <= tol * (1.0 + dist):
            msg = f"n={n}: two eigenvalues equidistant from α_{j + 1}·n; label {j + 1} kept the first"
            logger.warning(msg)
            warnings.warn(LabelAmbiguity(msg))
        assigned[j] = idx
        used.add(idx)
    return [(lams[assigned[j]], j + 1) for j in sorted(assigned)]


def eigenvalues_distinct(pairs: Sequence, tol: float = 1e-9) -> bool:
    lams = [lam for lam, _ in pairs]
    scale = max([abs(l) for l in lams] + [mpmath.mpf(1)])
    return all(abs(lams[r] - lams[s]) > tol * scale for r in range(len(lams)) for s in range(r + 1, len(lams)))


def distinctness_threshold(P: Pencil, n_max: int, policy: PrecisionPolicy = DEFAULT_POLICY) -> Optional[int]:
    """Smallest n such that the k eigenvalues are pairwise distinct for every degree in [n, n_max]."""
    threshold = None
    for n in range(n_max, 0, -1):
        if not eigenvalues_distinct(spectral_eigenvalues(P, n, policy)):
            break
        threshold = n
    return threshold


# ── eigenpolynomials ──

@dataclass(frozen=True)
class EigenSolution:
    n: int
    j: int
    lam: mpmath.mpc
    p: ComplexPolynomial
    roots: tuple
    residual: float


def operator_apply(P: Pencil, lam, p: ComplexPolynomial) -> ComplexPolynomial:
    """Σ_i Q_i λ^(k-i) p^(i)."""
    lam = mpmath.mpc(lam)
    out = ComplexPolynomial()
    deriv = p
    for i in range(P.k + 1):
        if i > 0:
            deriv = deriv.derivative()
        if deriv.is_zero:
            break
        out = out + P.Q[i] * deriv * (lam ** (P.k - i))
    return out


def _matrix_entry(P: Pencil, lam_powers: list, m: int, l: int) -> mpmath.mpc:
    """Row m, column l of T_λ on the monomial basis."""
    acc = mpmath.mpc(0)
    for i in range(max(0, l - m), min(P.k, l) + 1):
        j = m - l + i
        if 0 <= j <= i:
            acc += lam_powers[P.k - i] * falling_factorial(l, i) * P.a(i, j)
    return acc


def polish_eigenvalue(P: Pencil, n: int, lam) -> mpmath.mpc:
    """
    Newton on the degree-n diagonal entry at the working precision.
    Raises ValueError when `lam` is not already close to an eigenvalue.
    """
    equation = eigenvalue_equation(P, n)
    slope = equation.derivative()
    start = mpmath.mpc(lam)
    lam = start
    tol = mpmath.mpf(10) ** (-(mpmath.mp.dps - 2))
    for _ in range(8):
        d = slope.eval(lam)
        if d == 0:
            break
        step = equation.eval(lam) / d
        lam -= step
        if abs(step) <= tol * max(1, abs(lam)):
            break
    if abs(lam - start) > EIGENVALUE_MOVE_TOL * max(1, abs(start)):
        raise ValueError(
            f"λ = {complex(start):.6g} is not an eigenvalue at degree {n} (nearest {complex(lam):.6g})"
        )
    return lam


def _back_substitute(P: Pencil, n: int, lam) -> tuple:
    """(λ, monic p, scale-relative residual of T_λ p) at the ambient precision."""
    lam_mp = polish_eigenvalue(P, n, lam)
    lam_powers = [lam_mp ** e for e in range(P.k + 1)]
    c = [mpmath.mpc(0)] * (n + 1)
    c[n] = mpmath.mpc(1)
    scale = mpmath.mpf(0)
    for m in range(n - 1, -1, -1):
        diag = _matrix_entry(P, lam_powers, m, m)
        upper = [(l, _matrix_entry(P, lam_powers, m, l)) for l in range(m + 1, min(n, m + P.k) + 1)]
        diag_terms = mpmath.fsum(
            abs(lam_powers[P.k - i] * falling_factorial(m, i) * P.a(i, i)) for i in range(P.k + 1)
        )
        row_scale = max([diag_terms] + [abs(t) for _, t in upper])
        if abs(diag) <= RESONANCE_TOL * row_scale:
            raise ResonantDegree(f"diagonal entry at degree {m} < {n} vanishes", degree=m)
        rhs = mpmath.fsum(t * c[l] for l, t in upper)
        c[m] = -rhs / diag
        scale = max(scale, mpmath.fsum(abs(t * c[l]) for l, t in upper) + abs(diag * c[m]))
    p = ComplexPolynomial(tuple(c))
    scale = max(scale, mpmath.fsum(
        abs(lam_powers[P.k - i] * falling_factorial(n, i) * P.a(i, i)) for i in range(P.k + 1)
    ))
    image = operator_apply(P, lam_mp, p)
    residual = float(image.max_abs() / scale) if scale else 0.0
    return lam_mp, p, residual


def forward_drift(lam, found: Sequence, lam_guard, guard_roots: Sequence) -> float:
    """Largest relative move of λ or of any root between a solve and its guard-precision rerun."""
    drift = float(abs(lam_guard - lam) / max(1, abs(lam_guard)))
    for r, g in zip(found, guard_roots):
        drift = max(drift, float(abs(g - r) / max(1, abs(g))))
    return drift


def eigenpolynomial(
    P: Pencil,
    n: int,
    lam,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    j: int = 0,
) -> EigenSolution:
    """
    Monic degree-n kernel vector of T_λ by back-substitution on the triangular matrix.

    Each attempt is repeated at twice the digits; the digits escalate until the backward
    residual meets the target and λ and every root agree with the rerun to the same target.
    """
    if n < 1:
        raise ValueError("degree n must be >= 1")

    def attempt(digits: int) -> tuple:
        lam_mp, p, residual = _back_substitute(P, n, lam)
        if residual > policy.residual_target:
            raise PrecisionShortfall(f"eigenpolynomial residual {residual:.3e} (n={n})", residual)
        found = roots(p, policy.with_digits(digits))
        with mpmath.workdps(2 * digits):
            lam_guard, p_guard, _ = _back_substitute(P, n, lam_mp)
            guard_roots = polish_roots(p_guard, found)
        drift = forward_drift(lam_mp, found, lam_guard, guard_roots)
        if drift > policy.residual_target:
            raise PrecisionShortfall(f"eigenpolynomial roots move by {drift:.3e} at {2 * digits} digits (n={n})", drift)
        return lam_mp, p, residual, found

    lam_mp, p, residual, found = escalate_precision(
        attempt,
        initial_digits=policy.initial_digits,
        max_digits=policy.max_digits,
        name=f"eigenpolynomial(n={n})",
    )
    return EigenSolution(n=n, j=j, lam=lam_mp, p=p, roots=tuple(found), residual=residual)


def solve_family(P: Pencil, n: int, policy: PrecisionPolicy = DEFAULT_POLICY) -> list:
    """EigenSolutions for every family at degree n."""
    return [eigenpolynomial(P, n, lam, policy, j=j) for lam, j in spectral_eigenvalues(P, n, policy)]


def localization_profile(P: Pencil, ns: Sequence[int], policy: PrecisionPolicy = DEFAULT_POLICY) -> list:
    """(n, max root modulus over families, running max) rows in the order of `ns`."""
    rows = []
    running = 0.0
    for n in ns:
        top = max(float(abs(r)) for sol in solve_family(P, n, policy) for r in sol.roots)
        running = max(running, top)
        rows.append((n, top, running))
    return rows
