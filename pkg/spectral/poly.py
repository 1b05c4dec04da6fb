"""
Dense univariate complex polynomials over mpmath scalars.

Coefficients are stored low-to-high (index = power). Arithmetic runs at the
ambient mpmath precision; callers that need more digits wrap work in
`mpmath.workdps` (see resilience.escalate_precision).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

import mpmath
import numpy as np

from app.config import SPECTRAL_DIGITS, SPECTRAL_MAX_DIGITS, SPECTRAL_RESIDUAL_TARGET
from spectral.resilience import (
    PrecisionShortfall,
    SpectralError,
    escalate_precision,
    logger,
)

Scalar = Union[int, float, complex, mpmath.mpf, mpmath.mpc]

# complex128 carries ~16 significant digits; above that the mpmath iteration takes over
_DOUBLE_DIGITS = 16


class DegenerateCurve(SpectralError):
    """The bivariate polynomial is identically zero (or has a vanishing leading entry)."""
    pass


@dataclass(frozen=True)
class PrecisionPolicy:
    initial_digits: int = SPECTRAL_DIGITS
    max_digits: int = SPECTRAL_MAX_DIGITS
    residual_target: float = SPECTRAL_RESIDUAL_TARGET

    def __post_init__(self) -> None:
        if self.initial_digits < 1:
            raise ValueError("initial_digits must be positive")
        if self.initial_digits > self.max_digits:
            raise ValueError(
                f"initial_digits ({self.initial_digits}) exceeds max_digits ({self.max_digits})"
            )
        if not self.residual_target > 0:
            raise ValueError("residual_target must be > 0")

    def with_digits(self, digits: int) -> "PrecisionPolicy":
        return replace(self, initial_digits=digits, max_digits=max(digits, self.max_digits))


DEFAULT_POLICY = PrecisionPolicy()


def _as_mpc(c: Scalar) -> mpmath.mpc:
    # mpc values keep the precision they were computed at
    if isinstance(c, mpmath.mpc):
        return c
    return mpmath.mpc(c)


@dataclass(frozen=True)
class ComplexPolynomial:
    """Σ coeffs[m] z^m. The zero polynomial has an empty coefficient tuple."""

    coeffs: tuple = ()

    def __post_init__(self) -> None:
        cs = [_as_mpc(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    # ── constructors ──

    @classmethod
    def constant(cls, c: Scalar) -> "ComplexPolynomial":
        return cls((c,))

    @classmethod
    def monomial(cls, m: int, c: Scalar = 1) -> "ComplexPolynomial":
        return cls(tuple([0] * m + [c]))

    @classmethod
    def from_roots(cls, roots: Iterable[Scalar]) -> "ComplexPolynomial":
        out = cls((1,))
        for r in roots:
            out = out * cls((-_as_mpc(r), 1))
        return out

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "ComplexPolynomial":
        """Build from [[re, im], ...] low-to-high, the pencil-file layout."""
        return cls(tuple(mpmath.mpc(float(re), float(im)) for re, im in pairs))

    # ── structure ──

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        if self.is_zero:
            raise ValueError("degree of the zero polynomial is undefined")
        return len(self.coeffs) - 1

    def coefficient(self, m: int) -> mpmath.mpc:
        return self.coeffs[m] if 0 <= m < len(self.coeffs) else mpmath.mpc(0)

    @property
    def leading(self) -> mpmath.mpc:
        if self.is_zero:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def max_abs(self) -> mpmath.mpf:
        return max((abs(c) for c in self.coeffs), default=mpmath.mpf(0))

    def trim(self, tol: float) -> "ComplexPolynomial":
        """Drop trailing coefficients with |c| <= tol (absolute)."""
        cs = list(self.coeffs)
        while cs and abs(cs[-1]) <= tol:
            cs.pop()
        return ComplexPolynomial(tuple(cs))

    def monic(self) -> "ComplexPolynomial":
        lead = self.leading
        return ComplexPolynomial(tuple(c / lead for c in self.coeffs))

    def to_numpy(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)

    # ── evaluation ──

    def eval(self, z: Scalar) -> mpmath.mpc:
        """Horner evaluation of Σ c_m z^m."""
        acc = mpmath.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    __call__ = eval

    def eval_numpy(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.is_zero:
            return np.zeros_like(z)
        return np.polynomial.polynomial.polyval(z, self.to_numpy())

    # ── arithmetic ──

    def __add__(self, other: "ComplexPolynomial") -> "ComplexPolynomial":
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return ComplexPolynomial(tuple(
            (a[m] if m < len(a) else 0) + (b[m] if m < len(b) else 0) for m in range(n)
        ))

    def __neg__(self) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "ComplexPolynomial") -> "ComplexPolynomial":
        return self + (-other)

    def __mul__(self, other: Union["ComplexPolynomial", Scalar]) -> "ComplexPolynomial":
        if not isinstance(other, ComplexPolynomial):
            s = _as_mpc(other)
            return ComplexPolynomial(tuple(c * s for c in self.coeffs))
        if self.is_zero or other.is_zero:
            return ComplexPolynomial()
        out = [mpmath.mpc(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ComplexPolynomial(tuple(out))

    __rmul__ = __mul__

    def derivative(self) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(m * c for m, c in enumerate(self.coeffs) if m > 0))

    def nth_derivative(self, order: int) -> "ComplexPolynomial":
        out = self
        for _ in range(order):
            out = out.derivative()
        return out

    def divmod(self, divisor: "ComplexPolynomial") -> tuple["ComplexPolynomial", "ComplexPolynomial"]:
        """Long division: self = q·divisor + r with deg r < deg divisor."""
        if divisor.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dd = divisor.degree
        lead = divisor.leading
        if len(rem) - 1 < dd:
            return ComplexPolynomial(), self
        quot = [mpmath.mpc(0)] * (len(rem) - dd)
        for shift in range(len(rem) - 1 - dd, -1, -1):
            c = rem[shift + dd] / lead
            quot[shift] = c
            if c == 0:
                continue
            for m, d in enumerate(divisor.coeffs):
                rem[shift + m] -= c * d
        return ComplexPolynomial(tuple(quot)), ComplexPolynomial(tuple(rem[:dd]))


def derivative(p: ComplexPolynomial) -> ComplexPolynomial:
    return p.derivative()


def falling_factorial(m: int, i: int) -> int:
    """m(m-1)...(m-i+1); 1 for i = 0."""
    out = 1
    for l in range(i):
        out *= m - l
    return out


# ── root finding ──

def fujiwara_bound(monic: np.ndarray) -> float:
    """Upper bound on root moduli of a monic polynomial (coefficients low-to-high)."""
    deg = len(monic) - 1
    terms = [abs(monic[deg - l]) ** (1.0 / l) for l in range(1, deg)]
    terms.append(abs(monic[0] / 2.0) ** (1.0 / deg))
    return 2.0 * max(terms) if terms else 1.0


def _start_circle(deg: int, radius: float) -> np.ndarray:
    # the angular offset keeps the start off any symmetry axis of real polynomials
    angles = 2.0 * np.pi * (np.arange(deg) + 0.25) / deg + 0.4
    return max(radius, 1e-3) * np.exp(1j * angles)


def _aberth_numpy(coeffs: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Aberth–Ehrlich simultaneous iteration in complex128."""
    deg = len(coeffs) - 1
    monic = coeffs / coeffs[-1]
    dmonic = np.polynomial.polynomial.polyder(monic)
    z = _start_circle(deg, fujiwara_bound(monic))
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        with np.errstate(all="ignore"):
            pz = np.polynomial.polynomial.polyval(z, monic)
            dpz = np.polynomial.polynomial.polyval(z, dmonic)
            ratio = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = (1.0 / diff).sum(axis=1)
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step), step, 0.0)
        step = np.where(pz == 0, 0.0, step)
        z = z - step
        if np.all(np.abs(step) <= 4.0 * eps * (1.0 + np.abs(z))):
            break
    return z


def _aberth_mp(p: ComplexPolynomial, start: Sequence[complex], max_iter: int = 200) -> list:
    """Aberth–Ehrlich at the ambient mpmath precision, refining `start`."""
    monic = p.monic()
    high_to_low = list(reversed(monic.coeffs))
    deg = monic.degree
    fallback = _start_circle(deg, fujiwara_bound(monic.to_numpy()))
    z = [mpmath.mpc(s) if np.isfinite(s) else mpmath.mpc(fallback[i]) for i, s in enumerate(start)]
    tol = mpmath.mpf(10) ** (-(mpmath.mp.dps - 2))
    for _ in range(max_iter):
        done = True
        nxt = list(z)
        for i in range(deg):
            pz, dpz = mpmath.polyval(high_to_low, z[i], derivative=True)
            if pz == 0:
                continue
            if dpz == 0:
                done = False
                nxt[i] = z[i] + tol
                continue
            ratio = pz / dpz
            repulsion = mpmath.fsum(1 / (z[i] - z[l]) for l in range(deg) if l != i and z[i] != z[l])
            step = ratio / (1 - ratio * repulsion)
            nxt[i] = z[i] - step
            if abs(step) > tol * (1 + abs(nxt[i])):
                done = False
        z = nxt
        if done:
            break
    return z


def root_residual(p: ComplexPolynomial, r: Scalar) -> float:
    """|p(r)| / (max|c| · max(1,|r|)^deg), the scale-relative residual."""
    scale = p.max_abs() * max(mpmath.mpf(1), abs(r)) ** p.degree
    return float(abs(p.eval(r)) / scale)


def _split_zero_roots(p: ComplexPolynomial) -> tuple[tuple, ComplexPolynomial]:
    shift = 0
    while p.coeffs[shift] == 0:
        shift += 1
    return tuple(mpmath.mpc(0) for _ in range(shift)), ComplexPolynomial(p.coeffs[shift:])


def roots(p: ComplexPolynomial, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """
    All deg(p) roots with multiplicity. Exact zero roots are split off first; the rest
    come from Aberth–Ehrlich, escalating digits until every root meets the residual bound.
    """
    if p.is_zero or p.degree < 1:
        raise ValueError("roots needs a polynomial of degree >= 1")
    zeros, reduced = _split_zero_roots(p)
    if reduced.degree == 0:
        return zeros

    def attempt(digits: int) -> tuple:
        start = _aberth_numpy(reduced.to_numpy())
        if digits > _DOUBLE_DIGITS or not np.all(np.isfinite(start)):
            found = _aberth_mp(reduced, start)
        else:
            found = [mpmath.mpc(complex(s)) for s in start]
        worst = max(root_residual(reduced, r) for r in found)
        if not worst <= policy.residual_target:
            raise PrecisionShortfall(f"root residual {worst:.3e} at {digits} digits", worst)
        return tuple(found)

    return zeros + escalate_precision(
        attempt,
        initial_digits=policy.initial_digits,
        max_digits=policy.max_digits,
        name="roots",
    )


def roots_numpy(p: ComplexPolynomial, policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    return np.array([complex(r) for r in roots(p, policy)], dtype=complex)


def polish_roots(p: ComplexPolynomial, start: Sequence[Scalar]) -> tuple:
    """Refine approximate roots of p at the ambient precision; entry i stays the refinement of start[i]."""
    if p.is_zero or p.degree < 1:
        raise ValueError("polish_roots needs a polynomial of degree >= 1")
    if len(start) != p.degree:
        raise ValueError(f"expected {p.degree} starting roots, got {len(start)}")
    zeros, reduced = _split_zero_roots(p)
    order = sorted(range(len(start)), key=lambda i: abs(complex(start[i])))
    out: list = [None] * len(start)
    for i in order[: len(zeros)]:
        out[i] = mpmath.mpc(0)
    rest = order[len(zeros):]
    if rest:
        refined = _aberth_mp(reduced, [complex(start[i]) for i in rest])
        for i, r in zip(rest, refined):
            out[i] = r
    return tuple(out)


# ── resultant / discriminant ──

def _noise_free(num: ComplexPolynomial, reference: mpmath.mpf, digits: int) -> ComplexPolynomial:
    """Zero out a Bareiss entry whose magnitude is pure cancellation noise."""
    if num.is_zero:
        return num
    if num.max_abs() <= reference * mpmath.mpf(10) ** (-(digits - 6)):
        return ComplexPolynomial()
    return num.trim(num.max_abs() * mpmath.mpf(10) ** (-(digits - 6)))


def _det_bareiss(matrix: list[list[ComplexPolynomial]], digits: int) -> ComplexPolynomial:
    """Fraction-free determinant of a matrix of polynomials."""
    n = len(matrix)
    a = [row[:] for row in matrix]
    denom = ComplexPolynomial((1,))
    sign = 1
    for k in range(n - 1):
        if a[k][k].is_zero:
            piv = next((i for i in range(k + 1, n) if not a[i][k].is_zero), None)
            if piv is None:
                return ComplexPolynomial()
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        pivot = a[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * pivot - a[i][k] * a[k][j]
                reference = a[i][j].max_abs() * pivot.max_abs() + a[i][k].max_abs() * a[k][j].max_abs()
                num = _noise_free(num, reference, digits)
                if k > 0 and not num.is_zero:
                    # exact in exact arithmetic; the remainder is roundoff
                    num, _ = num.divmod(denom)
                a[i][j] = num
            a[i][k] = ComplexPolynomial()
        denom = pivot
    return a[n - 1][n - 1] * sign


def sylvester_in_w(curve_coeffs: Sequence[ComplexPolynomial]) -> list[list[ComplexPolynomial]]:
    """Sylvester matrix of P = Σ Q_i w^i and ∂P/∂w, entries polynomial in z."""
    k = len(curve_coeffs) - 1
    dcoeffs = [curve_coeffs[i + 1] * (i + 1) for i in range(k)]
    size = 2 * k - 1
    zero = ComplexPolynomial()
    rows = [[zero] * size for _ in range(size)]
    for r in range(k - 1):
        for j in range(k + 1):
            rows[r][r + j] = curve_coeffs[j]
    for r in range(k):
        for j in range(k):
            rows[k - 1 + r][r + j] = dcoeffs[j]
    return rows


def discriminant_in_w(curve_coeffs: Sequence[ComplexPolynomial], digits: int = 2 * _DOUBLE_DIGITS) -> ComplexPolynomial:
    """
    Resultant in w of P(z, w) and ∂P/∂w, a polynomial in z (up to a constant factor).
    An identically zero result means every fiber has a repeated root.
    """
    if all(q.is_zero for q in curve_coeffs):
        raise DegenerateCurve("P(z, w) is identically zero")
    if len(curve_coeffs) < 2 or curve_coeffs[-1].is_zero:
        raise DegenerateCurve("leading entry Q_k is identically zero")
    with mpmath.workdps(digits):
        res = _det_bareiss(sylvester_in_w(curve_coeffs), digits)
    if res.is_zero:
        logger.info("discriminant in w vanishes identically")
    return res


