"""
The associated plane curve Σ Q_i(z) w^i = 0: fibers, branch points, the
expansion at infinity, and analytic continuation of sheets along paths.
"""
from __future__ import annotations

import functools
import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from app.config import SPECTRAL_CLEARANCE
from spectral import series
from spectral.poly import (
    DEFAULT_POLICY,
    ComplexPolynomial,
    DegenerateCurve,
    PrecisionPolicy,
    discriminant_in_w,
    roots,
)
from spectral.resilience import PrecisionShortfall, SpectralError, escalate_precision, logger

# |Q_k(z)| below this fraction of its coefficient scale counts as a dropped sheet
SHEET_DROP_TOL = 1e-12
# continuation accepts a step when nearest/second-nearest root distance stays below this
SAFETY_RATIO = 0.5
# a starting value w0 must lie this close (relative) to a root of the fiber
FIBER_MATCH_TOL = 1e-6


class SheetDrop(SpectralError):
    """Q_k(z) vanishes: fewer than k finite sheets. Carries the finite roots."""

    def __init__(self, message: str, finite_roots: tuple = ()):
        super().__init__(message)
        self.finite_roots = finite_roots


class BranchCollision(SpectralError):
    """A path or region comes within clearance of a branch point or a zero of Q_k."""
    pass


class DegenerateCharEq(SpectralError):
    """a_00 or a_kk vanishes, so the characteristic equation loses a root."""
    pass


class MultipleXi(SpectralError):
    """ξ_j is not a simple root; Newton on series is singular."""
    pass


class Monodromy(UserWarning):
    """A closed continuation path returned on a different sheet."""
    pass


# ── characteristic roots ──

def characteristic_roots(diagonal: Sequence, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """
    Roots α of a_kk + a_{k-1,k-1} t + … + a_00 t^k, ordered by (arg α, |α|).
    `diagonal` holds a_00…a_kk.
    """
    char_poly = ComplexPolynomial(tuple(reversed(list(diagonal))))
    if char_poly.is_zero or char_poly.degree < 1:
        return ()
    found = roots(char_poly, policy)
    return tuple(sorted(found, key=lambda a: (round(float(mpmath.arg(a)), 12), float(abs(a)))))


# ── curve ──

@dataclass(frozen=True)
class PlaneCurve:
    Q: tuple

    def __post_init__(self) -> None:
        qs = tuple(q if isinstance(q, ComplexPolynomial) else ComplexPolynomial(tuple(q)) for q in self.Q)
        if len(qs) < 2:
            raise DegenerateCurve("a curve needs at least Q_0 and Q_1")
        if qs[-1].is_zero:
            raise DegenerateCurve("Q_k is identically zero; not a k-sheeted covering")
        object.__setattr__(self, "Q", qs)

    @property
    def k(self) -> int:
        return len(self.Q) - 1

    def a(self, i: int, j: int) -> mpmath.mpc:
        return self.Q[i].coefficient(j)

    @property
    def diagonal(self) -> tuple:
        """a_00, a_11, …, a_kk."""
        return tuple(self.a(i, i) for i in range(self.k + 1))

    def fiber(self, z) -> ComplexPolynomial:
        """The w-polynomial Σ Q_i(z) w^i at frozen z."""
        return ComplexPolynomial(tuple(q.eval(z) for q in self.Q))

    def leading_is_small(self, z) -> bool:
        qk = self.Q[-1]
        scale = sum(abs(c) * abs(mpmath.mpc(z)) ** m for m, c in enumerate(qk.coeffs))
        return abs(qk.eval(z)) <= SHEET_DROP_TOL * scale

    def coefficient_matrix(self) -> np.ndarray:
        """Rows i = Q_i coefficients (low-to-high in z), zero padded, complex128."""
        width = max(len(q.coeffs) for q in self.Q)
        out = np.zeros((self.k + 1, width), dtype=complex)
        for i, q in enumerate(self.Q):
            out[i, : len(q.coeffs)] = q.to_numpy()
        return out


def branches_at(curve: PlaneCurve, z, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """The k values w with Σ Q_i(z) w^i = 0."""
    fiber = curve.fiber(z)
    if curve.leading_is_small(z):
        trimmed = ComplexPolynomial(fiber.coeffs[:-1])
        finite = roots(trimmed, policy) if not trimmed.is_zero and trimmed.degree >= 1 else ()
        raise SheetDrop(f"Q_k vanishes at z={complex(z):.6g}", finite_roots=finite)
    return roots(fiber, policy)


def fiber_roots_batch(curve: PlaneCurve, zs: np.ndarray) -> np.ndarray:
    """
    Branch values at many points via batched companion eigenvalues (complex128).
    Returns shape zs.shape + (k,); rows where Q_k is tiny are NaN.
    """
    zs = np.asarray(zs, dtype=complex)
    flat = zs.ravel()
    k = curve.k
    coeffs = curve.coefficient_matrix()
    fib = np.stack([np.polynomial.polynomial.polyval(flat, coeffs[i]) for i in range(k + 1)], axis=-1)
    lead = fib[:, k]
    lead_scale = np.polynomial.polynomial.polyval(np.abs(flat), np.abs(coeffs[k]))
    dropped = np.abs(lead) <= SHEET_DROP_TOL * np.maximum(lead_scale, 1e-300)
    safe_lead = np.where(dropped, 1.0, lead)
    comp = np.zeros((flat.size, k, k), dtype=complex)
    if k > 1:
        idx = np.arange(k - 1)
        comp[:, idx + 1, idx] = 1.0
    comp[:, :, k - 1] = -fib[:, :k] / safe_lead[:, None]
    vals = np.linalg.eigvals(comp)
    vals[dropped] = np.nan
    return vals.reshape(zs.shape + (k,))


def fiber_roots(curve: PlaneCurve, z: complex) -> np.ndarray:
    return fiber_roots_batch(curve, np.array([z]))[0]


# ── branch points ──

def pairwise_gaps(values: np.ndarray) -> np.ndarray:
    """|v_r - v_s| with +inf on the diagonal."""
    values = np.asarray(values)
    gaps = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(gaps, np.inf)
    return gaps


def _fiber_is_repeated(curve: PlaneCurve, z: complex, tol: float = 1e-4) -> bool:
    """True when two fiber values at z nearly coincide; discards discriminant noise roots."""
    values = fiber_roots(curve, z)
    if values.size < 2 or np.any(np.isnan(values)):
        return True
    scale = max(1.0, float(np.max(np.abs(values))))
    gaps = pairwise_gaps(values)
    return bool(np.min(gaps) <= tol * scale)


@functools.lru_cache(maxsize=64)
def _branch_points_cached(curve: PlaneCurve, policy: PrecisionPolicy) -> tuple:
    disc = discriminant_in_w(curve.Q)
    if disc.is_zero:
        raise DegenerateCurve("discriminant in w vanishes identically; every fiber is degenerate")
    if disc.degree == 0:
        return ()
    candidates = roots(disc, policy)
    qk = curve.Q[-1]
    pole_roots = roots(qk, policy) if qk.degree >= 1 else ()
    scale = max([1.0] + [float(abs(c)) for c in candidates])
    # multiple roots of Q_k reappear only to ~sqrt(eps) accuracy
    pole_radius = 1e-6 * scale
    dedup_radius = 1e-6 * scale
    kept: list = []
    for c in candidates:
        if any(abs(c - r) <= pole_radius for r in pole_roots):
            continue
        if any(abs(c - r) <= dedup_radius for r in kept):
            continue
        if not _fiber_is_repeated(curve, complex(c)):
            continue
        kept.append(c)
    logger.info(f"{len(kept)} branch points from a degree-{disc.degree} discriminant")
    return tuple(complex(c) for c in kept)


def branch_points(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """Roots of the discriminant in w where Q_k does not vanish, deduplicated."""
    return _branch_points_cached(curve, policy)


def singular_points(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Branch points together with the zeros of Q_k."""
    qk = curve.Q[-1]
    poles = [complex(r) for r in roots(qk, policy)] if qk.degree >= 1 else []
    return np.array(list(branch_points(curve, policy)) + poles, dtype=complex)


def curve_scale(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    return max([1.0] + [abs(b) for b in branch_points(curve, policy)])


def default_clearance(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> float:
    return SPECTRAL_CLEARANCE * curve_scale(curve, policy)


# ── behaviour at infinity ──

def xi_roots(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """Roots of a_kk ξ^k + … + a_00, paired with the α labels so that ξ_j α_j = 1."""
    diag = curve.diagonal
    if diag[0] == 0 or diag[-1] == 0:
        raise DegenerateCharEq("a_00 and a_kk must both be nonzero")
    alphas = characteristic_roots(diag, policy)
    xis = list(roots(ComplexPolynomial(diag), policy))
    paired = []
    for alpha in alphas:
        target = 1 / alpha
        best = min(range(len(xis)), key=lambda i: abs(xis[i] - target))
        paired.append(xis.pop(best))
    return tuple(paired)


def reciprocal_coefficients(curve: PlaneCurve) -> list:
    """P_i(y) = Σ_j a_ij y^(i-j) as coefficient lists in y."""
    out = []
    for i, q in enumerate(curve.Q):
        if not q.is_zero and q.degree > i:
            raise DegenerateCharEq(f"deg Q_{i} > {i}: the y = 1/z chart has no polynomial form")
        out.append([curve.a(i, i - s) for s in range(i + 1)])
    return out


@dataclass(frozen=True)
class BranchSeries:
    j: int
    xi: mpmath.mpc
    coeffs: tuple  # ε_1 … ε_M
    M: int
    residual: float = 0.0

    def as_truncated(self) -> series.TruncatedSeries:
        return series.TruncatedSeries((mpmath.mpc(0),) + tuple(self.coeffs), origin="curve-branch")

    def eval_at(self, z) -> mpmath.mpc:
        """w ≈ Σ ε_i y^i at y = 1/z."""
        return self.as_truncated().eval(1 / mpmath.mpc(z))


def _plug_in(P: list, N: list, n: int) -> tuple[list, list]:
    """Σ P_i N^i and Σ i P_i N^(i-1), both mod y^n."""
    value = [mpmath.mpc(0)] * n
    slope = [mpmath.mpc(0)] * n
    power = series.pad([1], n)  # N^(i-1) for slope, N^i for value
    for i, Pi in enumerate(P):
        if i > 0:
            slope = series.add(slope, series.scale(series.mul(Pi, power, n), i), n)
            power = series.mul(power, N, n)
        value = series.add(value, series.mul(Pi, power, n), n)
    return value, slope


def branch_series_at_infinity(
    curve: PlaneCurve,
    j: int,
    M: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> BranchSeries:
    """
    Expansion w = Σ ε_i y^i of the branch with z·w → ξ_j, by Newton iteration
    on truncated series with doubling order.
    """
    if M < 1:
        raise ValueError("truncation order M must be >= 1")
    xis = xi_roots(curve, policy)
    if not 1 <= j <= len(xis):
        raise ValueError(f"branch label {j} outside 1..{len(xis)}")
    P = reciprocal_coefficients(curve)
    diag = curve.diagonal

    def attempt(digits: int) -> BranchSeries:
        xi = mpmath.mpc(xis[j - 1])
        dF0 = mpmath.fsum(i * diag[i] * xi ** (i - 1) for i in range(1, len(diag)))
        dF0_scale = mpmath.fsum(i * abs(diag[i]) * abs(xi) ** (i - 1) for i in range(1, len(diag)))
        others = [x for l, x in enumerate(xis) if l != j - 1]
        if abs(dF0) <= 1e-10 * dF0_scale or any(abs(x - xi) <= 1e-8 * max(1, abs(xi)) for x in others):
            raise MultipleXi(f"ξ_{j} is not a simple root of the reciprocal equation")

        N = [xi]
        order = 1
        while True:
            order = min(2 * order, M)
            N = series.pad(N, order)
            for _ in range(2):
                value, slope = _plug_in(P, N, order)
                N = [a - b for a, b in zip(N, series.div(value, slope, order))]
            if order >= M:
                break
        value, _ = _plug_in(P, N, M)
        growth = max(mpmath.mpf(1), series.max_abs(N))
        scale = max(max(abs(c) for c in Pi) for Pi in P) * growth ** curve.k
        residual = float(series.max_abs(value) / scale)
        if residual > 1e-12:
            raise PrecisionShortfall(f"branch series residual {residual:.3e}", residual)
        return BranchSeries(j=j, xi=xi, coeffs=tuple(N), M=M, residual=residual)

    return escalate_precision(
        attempt,
        initial_digits=max(policy.initial_digits, 20),
        max_digits=policy.max_digits,
        name="branch_series_at_infinity",
    )


# ── sheet labeling and continuation ──

def match_to(reference: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Reorder candidates to minimize Σ |reference - candidates| over permutations (k <= 6)."""
    k = len(reference)
    if k == 1:
        return candidates.copy()
    if k > 6:
        out = np.empty_like(candidates)
        free = list(range(k))
        for s in range(k):
            best = min(free, key=lambda c: abs(candidates[c] - reference[s]))
            out[s] = candidates[best]
            free.remove(best)
        return out
    perms = np.array(list(itertools.permutations(range(k))))
    cost = np.abs(candidates[perms] - reference[None, :]).sum(axis=1)
    return candidates[perms[int(np.argmin(cost))]]


def match_batch(reference: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Row-wise match_to for arrays of shape (N, k); NaN rows pass through."""
    k = reference.shape[-1]
    if k == 1:
        return candidates.copy()
    perms = np.array(list(itertools.permutations(range(k))))
    permuted = candidates[:, perms]  # (N, P, k)
    cost = np.abs(permuted - reference[:, None, :]).sum(axis=2)
    cost = np.where(np.isnan(cost), np.inf, cost)
    best = np.argmin(cost, axis=1)
    return permuted[np.arange(len(best)), best]


def labeled_at_infinity(curve: PlaneCurve, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Fiber at large |z| ordered so that entry i behaves like ξ_(i+1)/z."""
    values = fiber_roots(curve, z)
    try:
        xis = np.array([complex(x) for x in xi_roots(curve, policy)])
    except DegenerateCharEq:
        xis = None
    if xis is not None and len(xis) == curve.k:
        gaps = pairwise_gaps(xis)
        if np.all(gaps > 1e-8):
            return match_to(xis / z, values)
    # coincident ξ: any fixed order is a valid labeling
    return values[np.lexsort((values.imag, values.real))]


@dataclass
class ContinuationResult:
    samples: list = field(default_factory=list)  # (z, w) pairs; w is an array for multi-sheet tracks
    monodromy: bool = False

    @property
    def endpoint(self):
        return self.samples[-1][1]


def segment_distance(points: np.ndarray, a: complex, b: complex) -> float:
    if points.size == 0:
        return float("inf")
    d = b - a
    if d == 0:
        return float(np.min(np.abs(points - a)))
    t = np.clip(((points - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return float(np.min(np.abs(points - (a + t * d))))


def _accept(previous: np.ndarray, found: np.ndarray) -> Optional[np.ndarray]:
    """Nearest-root assignment when every sheet passes the safety ratio, else None."""
    if found.size == 1:
        return found.copy()
    if np.any(np.isnan(found)):
        return None
    dist = np.abs(previous[:, None] - found[None, :])
    order = np.argsort(dist, axis=1)
    nearest = order[:, 0]
    d1 = dist[np.arange(len(previous)), nearest]
    d2 = dist[np.arange(len(previous)), order[:, 1]]
    if np.any(d1 >= SAFETY_RATIO * d2) or len(set(nearest.tolist())) != len(nearest):
        return None
    return found[nearest]


def track_sheets(
    curve: PlaneCurve,
    path: Sequence[complex],
    start: Sequence[complex],
    clearance: Optional[float] = None,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> list:
    """
    Continue one or more sheet values along a polyline. Returns (z, values) samples,
    values an array aligned with `start`.
    """
    path = [complex(z) for z in path]
    if len(path) < 2:
        raise ValueError("a path needs at least two points")
    clear = default_clearance(curve, policy) if clearance is None else clearance
    singular = singular_points(curve, policy)
    for a, b in zip(path[:-1], path[1:]):
        if segment_distance(singular, a, b) < clear:
            raise BranchCollision(f"segment {a:.6g} -> {b:.6g} within {clear:.3g} of a singular point")

    current = np.array([complex(w) for w in start], dtype=complex)
    samples = [(path[0], current.copy())]
    for a, b in zip(path[:-1], path[1:]):
        length = abs(b - a)
        if length == 0:
            continue
        t, h = 0.0, 0.125
        while t < 1.0:
            z_now = a + t * (b - a)
            near = float(np.min(np.abs(singular - z_now))) if singular.size else float("inf")
            h = min(h, 1.0 - t, 0.25 * near / length)
            z_next = a + (t + h) * (b - a)
            accepted = _accept(current, fiber_roots(curve, z_next))
            if accepted is None:
                h *= 0.5
                if h * length < 1e-12 * max(1.0, abs(z_now)):
                    raise BranchCollision(f"continuation step underflow near z={z_now:.6g}")
                continue
            t = t + h if t + h < 1.0 - 1e-15 else 1.0
            current = accepted
            samples.append((z_next if t < 1.0 else b, current.copy()))
            h *= 1.5
    return samples


def continue_branch(
    curve: PlaneCurve,
    path: Sequence[complex],
    w0: complex,
    clearance: Optional[float] = None,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> ContinuationResult:
    """Track the sheet through w0 along `path`; closed paths report monodromy."""
    fiber = np.array([complex(w) for w in branches_at(curve, path[0], policy)])
    miss = float(np.min(np.abs(fiber - complex(w0))))
    if miss > FIBER_MATCH_TOL * max(1.0, abs(complex(w0))):
        raise ValueError(f"w0={complex(w0):.6g} is not on the fiber at z={complex(path[0]):.6g} (off by {miss:.3e})")
    tracked = track_sheets(curve, path, [w0], clearance, policy)
    samples = [(z, complex(w[0])) for z, w in tracked]
    result = ContinuationResult(samples=samples)
    closed = abs(complex(path[-1]) - complex(path[0])) <= 1e-12 * max(1.0, abs(complex(path[0])))
    w_end = samples[-1][1]
    if closed and abs(w_end - complex(w0)) > 1e-6 * max(1.0, abs(complex(w0))):
        result.monodromy = True
        logger.warning(f"Monodromy: closed path returned w={w_end:.6g} from w0={complex(w0):.6g}")
        warnings.warn(Monodromy(f"closed path returned on a different sheet (w={w_end:.6g})"))
    return result
