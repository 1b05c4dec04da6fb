"""
Support geometry of the limiting root measures: scaled branches A_i = α_j·γ_i,
Γ_{i,j,l} loci, level curves of H_i − H_j with their densities, and the
closed-form circle of the product curve Π((b_i − z)w − 1).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from spectral.curve import (
    BranchCollision,
    PlaneCurve,
    branch_points,
    default_clearance,
    fiber_roots,
    fiber_roots_batch,
    labeled_at_infinity,
    match_batch,
    match_to,
    segment_distance,
    singular_points,
    track_sheets,
)
from spectral.measures import RootMeasure, cauchy_transform
from spectral.pencil import Pencil
from spectral.poly import DEFAULT_POLICY, ComplexPolynomial, PrecisionPolicy, roots
from spectral.resilience import SpectralError, logger

QUAD_TOL = 1e-9
# bisection halvings that take an edge of length res below res/10
REFINE_STEPS = 4
TRACE_TOL = 1e-9
SINGULAR_STEP_FRACTION = 0.25
ARC_STEP = math.pi / 16


class CollinearB(SpectralError):
    """The three b's are collinear; the Γ circle degenerates to a line."""
    pass


class QuadratureFail(SpectralError):
    pass


class LostTrack(SpectralError):
    """The level-curve corrector did not converge even at the smallest step."""
    pass


class SparseWindow(SpectralError):
    """A density window holds fewer than three atoms."""
    pass


# ── scaled branches ──

def _family_alpha(P: Pencil, j_family: int, policy: PrecisionPolicy) -> complex:
    alphas = P.alphas(policy)
    if not 1 <= j_family <= len(alphas):
        raise ValueError(f"family {j_family} outside 1..{len(alphas)}")
    return complex(alphas[j_family - 1])


def _check_labels(P: Pencil, labels: Sequence[int]) -> tuple:
    if len(set(labels)) != len(labels):
        raise ValueError(f"branch labels {tuple(labels)} must be distinct")
    for label in labels:
        if not 1 <= label <= P.k:
            raise ValueError(f"branch label {label} outside 1..{P.k}")
    return tuple(label - 1 for label in labels)


def anchor_point(curve: PlaneCurve, policy: PrecisionPolicy = DEFAULT_POLICY) -> complex:
    """Labeling anchor on the positive real axis, beyond every singular point."""
    singular = singular_points(curve, policy)
    largest = float(np.max(np.abs(singular))) if singular.size else 0.0
    return complex(2.0 * (1.0 + largest))


def label_route(curve: PlaneCurve, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY, clearance: Optional[float] = None) -> list:
    """Polyline from the anchor to z: an arc on the anchor circle, then radially inward."""
    anchor = anchor_point(curve, policy)
    z = complex(z)
    if abs(z - anchor) <= 1e-14 * abs(anchor):
        return [anchor]
    clear = default_clearance(curve, policy) if clearance is None else clearance
    singular = singular_points(curve, policy)
    radius = abs(anchor)
    theta = math.atan2(z.imag, z.real)
    count = max(1, int(math.ceil(abs(theta) / ARC_STEP)))
    arc = [radius * complex(math.cos(theta * s / count), math.sin(theta * s / count)) for s in range(count + 1)]
    route = arc + ([z] if abs(z - arc[-1]) > 0 else [])
    if all(segment_distance(singular, a, b) >= clear for a, b in zip(route[:-1], route[1:])):
        return route
    if segment_distance(singular, anchor, z) >= clear:
        return [anchor, z]
    raise BranchCollision(f"no clear labeling route from the anchor to z={z:.6g}")


def branches_by_label(curve: PlaneCurve, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY, clearance: Optional[float] = None) -> np.ndarray:
    """γ_1…γ_k at z, labels carried from the anchor by continuation."""
    route = label_route(curve, z, policy, clearance)
    start = labeled_at_infinity(curve, route[0], policy)
    if len(route) == 1:
        return start
    return track_sheets(curve, route, start, clearance, policy)[-1][1]


def scaled_branches(P: Pencil, j_family: int, z: complex, policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """A_i(z) = α_(j_family)·γ_i(z) for i = 1…k."""
    alpha = _family_alpha(P, j_family, policy)
    return alpha * branches_by_label(P.curve, z, policy)


# ── product curve ──

def example3_pencil(*bs: complex) -> Pencil:
    """The pencil whose curve is Π((b_i − z)w − 1) = 0."""
    if len(bs) < 1:
        raise ValueError("need at least one b")
    zero = ComplexPolynomial()
    product = [ComplexPolynomial.constant(1)]  # coefficients in w, each a polynomial in z
    for b in bs:
        linear = ComplexPolynomial((complex(b), -1))
        shifted = [zero] + [c * linear for c in product]
        product = [s - c for s, c in itertools.zip_longest(shifted, product, fillvalue=zero)]
    return Pencil(tuple(product))


@dataclass(frozen=True)
class ProductCircle:
    center: complex
    radius: float
    coefficients: tuple  # (c_uu, c_u, c_v, c_0) of c_uu(u²+v²) + c_u·u + c_v·v + c_0 = 0

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(np.abs(np.asarray(points) - self.center) - self.radius)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    for a, b in itertools.combinations(range(len(perm)), 2):
        if perm[a] > perm[b]:
            sign = -sign
    return sign


def _eta(term, pairs: Sequence[tuple]) -> float:
    """Alternating sum Σ_σ sign(σ)·term(pairs[σ1], pairs[σ2], pairs[σ3])."""
    return sum(_perm_sign(p) * term(*(pairs[i] for i in p)) for p in itertools.permutations(range(3)))


def example3_circle(b1: complex, b2: complex, b3: complex) -> ProductCircle:
    pairs = [(complex(b).real, complex(b).imag) for b in (b1, b2, b3)]

    def sq(x):
        return x[0] ** 2 + x[1] ** 2

    d1 = _eta(lambda x, y, z: x[0] * y[1], pairs)
    d2 = _eta(lambda x, y, z: sq(x) * y[1], pairs)
    d3 = _eta(lambda x, y, z: sq(x) * y[0], pairs)
    d4 = _eta(lambda x, y, z: sq(x) * y[0] * z[1], pairs)
    scale = max([1.0] + [abs(complex(b)) for b in (b1, b2, b3)])
    if abs(d1) <= 1e-12 * scale ** 2:
        raise CollinearB("b1, b2, b3 are collinear; the locus is a line")
    center = complex(d2 / (2 * d1), -d3 / (2 * d1))
    radius = math.sqrt(max(0.0, abs(center) ** 2 + d4 / d1))
    return ProductCircle(center=center, radius=radius, coefficients=(d1, -d2, d3, -d4))


# ── Γ loci ──

@dataclass
class GammaLocus:
    triple: tuple
    family: int
    rect: tuple  # (x0, y0, x1, y1)
    res: float
    points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return int(self.points.size)


def _poles(curve: PlaneCurve, policy: PrecisionPolicy) -> np.ndarray:
    qk = curve.Q[-1]
    return np.array([complex(r) for r in roots(qk, policy)] if qk.degree >= 1 else [], dtype=complex)


def _label_grid(curve: PlaneCurve, Z: np.ndarray, valid: np.ndarray, start: np.ndarray, r0: int) -> np.ndarray:
    """Labels on the grid: column 0 swept from row r0, then every row swept left to right."""
    vals = fiber_roots_batch(curve, Z)
    ny, nx, _ = vals.shape
    out = np.full_like(vals, np.nan)
    out[r0, 0] = match_to(start, vals[r0, 0])
    for rows in (range(r0 + 1, ny), range(r0 - 1, -1, -1)):
        ref = out[r0, 0]
        for r in rows:
            if valid[r, 0]:
                out[r, 0] = match_to(ref, vals[r, 0])
                ref = out[r, 0]
    ref = out[:, 0].copy()
    have = ~np.isnan(ref).any(axis=1)
    for c in range(1, nx):
        ok = valid[:, c] & have
        if np.any(ok):
            out[ok, c] = match_batch(ref[ok], vals[ok, c])
            ref[ok] = out[ok, c]
        # rows without a reference pick one up from a labeled vertical neighbour
        for r in np.flatnonzero(valid[:, c] & ~have):
            for s in (r - 1, r + 1):
                if 0 <= s < ny and not np.isnan(out[s, c]).any():
                    out[r, c] = match_to(out[s, c], vals[r, c])
                    ref[r] = out[r, c]
                    have[r] = True
                    break
    return out


def _collinearity(A: np.ndarray, idx: tuple) -> np.ndarray:
    i, j, l = idx
    return ((A[..., i] - A[..., l]) * np.conj(A[..., j] - A[..., l])).imag


def gamma_locus(
    P: Pencil,
    j_family: int,
    triple: tuple,
    rect: tuple,
    res: float,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    clearance: Optional[float] = None,
) -> GammaLocus:
    """Zero set of Im[(A_i − A_l)·conj(A_j − A_l)] on a grid over rect = (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = rect
    if res <= 0 or x1 <= x0 or y1 <= y0:
        raise ValueError("rect must be (x0, y0, x1, y1) with x0 < x1, y0 < y1 and res > 0")
    locus = GammaLocus(triple=tuple(triple), family=j_family, rect=tuple(rect), res=res)
    if P.k < 3:
        return locus
    idx = _check_labels(P, triple)
    curve = P.curve
    alpha = _family_alpha(P, j_family, policy)
    clear = default_clearance(curve, policy) if clearance is None else clearance
    for b in branch_points(curve, policy):
        if x0 - clear <= b.real <= x1 + clear and y0 - clear <= b.imag <= y1 + clear:
            raise BranchCollision(f"branch point {b:.6g} lies in the rectangle")

    xs = np.arange(x0, x1 + 0.5 * res, res)
    ys = np.arange(y0, y1 + 0.5 * res, res)
    Z = xs[None, :] + 1j * ys[:, None]
    valid = np.ones(Z.shape, dtype=bool)
    poles = _poles(curve, policy)
    if poles.size:
        valid &= np.min(np.abs(Z[..., None] - poles), axis=-1) > max(clear, 2.0 * res)
    column = np.flatnonzero(valid[:, 0])
    if column.size == 0:
        raise BranchCollision("the left edge of the rectangle has no usable grid node")
    r0 = int(column[0])
    start = branches_by_label(curve, Z[r0, 0], policy, clearance)
    G = _label_grid(curve, Z, valid, start, r0)
    F = _collinearity(alpha * G, idx)

    lo, hi, g_lo, g_hi, f_lo = [], [], [], [], []
    for sl_a, sl_b in (((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
                       ((slice(None, -1), slice(None)), (slice(1, None), slice(None)))):
        fa, fb = F[sl_a], F[sl_b]
        cross = np.isfinite(fa) & np.isfinite(fb) & (fa * fb < 0)
        lo.append(Z[sl_a][cross])
        hi.append(Z[sl_b][cross])
        g_lo.append(G[sl_a][cross])
        g_hi.append(G[sl_b][cross])
        f_lo.append(fa[cross])
    lo, hi = np.concatenate(lo), np.concatenate(hi)
    g_lo, g_hi, f_lo = np.concatenate(g_lo), np.concatenate(g_hi), np.concatenate(f_lo)
    # sign flips on edges where the sweep's labels jump are label cuts, not crossings
    continuous = np.all(match_batch(g_lo, g_hi) == g_hi, axis=1)
    if not np.all(continuous):
        logger.debug(f"Γ{tuple(triple)}: {int(np.count_nonzero(~continuous))} sign changes on label cuts dropped")
    lo, hi, g_lo, g_hi, f_lo = lo[continuous], hi[continuous], g_lo[continuous], g_hi[continuous], f_lo[continuous]
    if lo.size == 0:
        return locus

    for _ in range(REFINE_STEPS):
        mid = 0.5 * (lo + hi)
        g_mid = match_batch(0.5 * (g_lo + g_hi), fiber_roots_batch(curve, mid))
        f_mid = _collinearity(alpha * g_mid, idx)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        g_lo = np.where(left[:, None], g_mid, g_lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
        g_hi = np.where(left[:, None], g_hi, g_mid)
    points = 0.5 * (lo + hi)
    A = alpha * match_batch(0.5 * (g_lo + g_hi), fiber_roots_batch(curve, points))
    i, j, l = idx
    scale = np.abs(A[:, i] - A[:, l]) * np.abs(A[:, j] - A[:, l])
    locus.points = points
    locus.residuals = np.abs(_collinearity(A, idx)) / np.where(scale > 0, scale, 1.0)
    logger.info(f"Γ{tuple(triple)} family {j_family}: {points.size} points at res {res:g}")
    return locus


def locus_crossings(a: GammaLocus, b: GammaLocus, res: Optional[float] = None) -> np.ndarray:
    """Centres of clusters where two loci come within 2·res of each other."""
    res = res or max(a.res, b.res)
    if a.points.size == 0 or b.points.size == 0:
        return np.zeros(0, dtype=complex)
    tree_a = cKDTree(np.column_stack([a.points.real, a.points.imag]))
    tree_b = cKDTree(np.column_stack([b.points.real, b.points.imag]))
    hits = tree_a.query_ball_tree(tree_b, r=2.0 * res)
    mids = np.array([0.5 * (a.points[p] + b.points[q]) for p, near in enumerate(hits) for q in near], dtype=complex)
    if mids.size == 0:
        return np.zeros(0, dtype=complex)
    pairs = cKDTree(np.column_stack([mids.real, mids.imag])).query_pairs(r=5.0 * res, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(mids.size, mids.size)) if len(pairs) else coo_matrix((mids.size, mids.size))
    count, labels = connected_components(graph, directed=False)
    centres = np.array([mids[labels == c].mean() for c in range(count)], dtype=complex)
    return centres[np.lexsort((centres.imag, centres.real))]


# ── H_i − H_j ──

def _segment_integral(
    curve: PlaneCurve,
    alpha: complex,
    pair: tuple,
    a: complex,
    b: complex,
    start: np.ndarray,
    clearance: Optional[float],
    policy: PrecisionPolicy,
) -> tuple:
    """(Re ∫_a^b (A_i − A_j) dz, γ values at b) with labels continued from `start` at a."""
    samples = track_sheets(curve, [a, b], start, clearance, policy)
    span = b - a
    ts = np.array([abs(z - a) / abs(span) for z, _ in samples])
    vals = np.array([v for _, v in samples])
    i, j = pair

    def integrand(t: float) -> float:
        s = int(np.clip(np.searchsorted(ts, t), 1, len(ts) - 1))
        w = (t - ts[s - 1]) / (ts[s] - ts[s - 1]) if ts[s] > ts[s - 1] else 0.0
        reference = (1 - w) * vals[s - 1] + w * vals[s]
        g = match_to(reference, fiber_roots(curve, a + t * span))
        return float((alpha * (g[i] - g[j]) * span).real)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-11, epsrel=1e-11, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFail(f"quadrature on {a:.6g} -> {b:.6g}: {exc}") from exc
    if abserr > QUAD_TOL:
        raise QuadratureFail(f"quadrature error {abserr:.3e} on {a:.6g} -> {b:.6g}")
    return value, samples[-1][1]


def h_difference_along(
    P: Pencil,
    j_family: int,
    pair: tuple,
    path: Sequence[complex],
    policy: PrecisionPolicy = DEFAULT_POLICY,
    clearance: Optional[float] = None,
) -> float:
    """Re ∫ (A_i − A_j) dz along a polyline; labels fixed at path[0] from the anchor."""
    if P.k < 2:
        raise ValueError("H_i − H_j needs at least two branches")
    idx = _check_labels(P, pair)
    path = [complex(z) for z in path]
    alpha = _family_alpha(P, j_family, policy)
    current = branches_by_label(P.curve, path[0], policy, clearance)
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        if a == b:
            continue
        value, current = _segment_integral(P.curve, alpha, idx, a, b, current, clearance, policy)
        total += value
    return total


def h_difference(
    P: Pencil,
    j_family: int,
    pair: tuple,
    base: complex,
    z: complex,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    clearance: Optional[float] = None,
) -> float:
    """(H_i − H_j)(z) with H_i(z) = Re ∫_base^z A_i along the straight segment."""
    if P.k < 2:
        raise ValueError("H_i − H_j needs at least two branches")
    if complex(base) == complex(z):
        _check_labels(P, pair)
        return 0.0
    return h_difference_along(P, j_family, pair, [base, z], policy, clearance)


# ── level curves ──

@dataclass
class LevelCurve:
    pair: tuple
    family: int
    base: complex
    level: float
    points: np.ndarray
    diffs: np.ndarray  # A_i − A_j at each vertex
    tangents: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    h_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    closed: bool = False
    stops: tuple = ()

    @property
    def densities(self) -> np.ndarray:
        """Mass per unit length |A_i − A_j|/(2π)."""
        return np.abs(self.diffs) / (2 * math.pi)

    def arclength(self) -> np.ndarray:
        steps = np.abs(np.diff(self.points))
        return np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def length(self) -> float:
        total = float(self.arclength()[-1]) if self.points.size else 0.0
        if self.closed and self.points.size > 1:
            total += abs(self.points[0] - self.points[-1])
        return total


class _Tracer:
    def __init__(self, P: Pencil, j_family: int, pair: tuple, policy: PrecisionPolicy, clearance: Optional[float], tol: float):
        self.curve = P.curve
        self.alpha = _family_alpha(P, j_family, policy)
        self.idx = _check_labels(P, pair)
        self.policy = policy
        self.clearance = clearance
        self.tol = tol
        self.singular = singular_points(self.curve, policy)
        self.stop_radius = default_clearance(self.curve, policy) if clearance is None else clearance

    def diff(self, g: np.ndarray) -> complex:
        i, j = self.idx
        return complex(self.alpha * (g[i] - g[j]))

    def move(self, z: complex, g: np.ndarray, h: float, z_new: complex) -> tuple:
        if z_new == z:
            return g, h
        dh, g_new = _segment_integral(self.curve, self.alpha, self.idx, z, z_new, g, self.clearance, self.policy)
        return g_new, h + dh

    def correct(self, z: complex, g: np.ndarray, h: float, level: float, cap: float) -> tuple:
        """Newton on h(z) = level along n̂ = conj(d)/|d|, where the slope is |d|."""
        moved = 0.0
        for _ in range(12):
            gap = h - level
            if abs(gap) <= self.tol:
                return z, g, h
            d = self.diff(g)
            if abs(d) == 0:
                raise LostTrack(f"A_i = A_j at z={z:.6g}")
            dz = -gap / abs(d) * np.conj(d) / abs(d)
            moved += abs(dz)
            if moved > cap:
                raise LostTrack(f"corrector left the step neighbourhood at z={z:.6g}")
            g, h = self.move(z, g, h, z + dz)
            z = z + dz
        raise LostTrack(f"corrector did not converge at z={z:.6g} (gap {h - level:.3e})")

    def near_singular(self, z: complex) -> float:
        return float(np.min(np.abs(self.singular - z))) if self.singular.size else math.inf

    def step_at(self, z: complex, size: float) -> float:
        """Step length at z: never more than a quarter of the distance to the nearest singular point."""
        return min(size, SINGULAR_STEP_FRACTION * self.near_singular(z))

    def walk(self, z: complex, g: np.ndarray, h: float, level: float, heading: complex, step: float, max_len: float, seed: complex, closable: bool) -> tuple:
        vertices = []
        length, size = 0.0, step
        stop = max(self.stop_radius, 1e-3 * step)
        while length < max_len:
            if self.near_singular(z) <= stop:
                return vertices, False, "singular point"
            d = self.diff(g)
            tangent = 1j * np.conj(d) / abs(d)
            if (tangent * np.conj(heading)).real < 0:
                tangent = -tangent
            stride = self.step_at(z, size)
            try:
                g_pred, h_pred = self.move(z, g, h, z + stride * tangent)
                z_new, g_new, h_new = self.correct(z + stride * tangent, g_pred, h_pred, level, cap=stride)
            except (LostTrack, QuadratureFail):
                size = 0.5 * stride
                if size < 1e-3 * stop:
                    raise LostTrack(f"step underflow while tracing near z={z:.6g}")
                continue
            except BranchCollision:
                return vertices, False, "singular point"
            length += abs(z_new - z)
            z, g, h, heading = z_new, g_new, h_new, tangent
            vertices.append((z, g, h, tangent))
            size = min(step, 1.5 * stride)
            if closable and length > 4 * step and abs(z - seed) < step:
                return vertices, True, "closed"
        return vertices, False, "max length"


def trace_level_curve(
    P: Pencil,
    j_family: int,
    pair: tuple,
    seed: complex,
    step: float = 0.01,
    max_len: float = 4.0,
    level: Optional[float] = None,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    clearance: Optional[float] = None,
    tol: float = TRACE_TOL,
) -> LevelCurve:
    """
    Predictor-corrector trace of H_i − H_j through `seed`. With level=None the
    level is the value at the seed and h is measured from the seed; a numeric
    level is measured from the labeling anchor and the seed is projected first.
    """
    if P.k < 2:
        raise ValueError("level curves need at least two branches")
    if step <= 0 or max_len <= 0:
        raise ValueError("step and max_len must be positive")
    tracer = _Tracer(P, j_family, pair, policy, clearance, tol)
    seed = complex(seed)
    g0 = branches_by_label(P.curve, seed, policy, clearance)
    if level is None:
        base, target, h0 = seed, 0.0, 0.0
    else:
        base, target = anchor_point(P.curve, policy), float(level)
        h0 = h_difference_along(P, j_family, pair, label_route(P.curve, seed, policy, clearance), policy, clearance)
        seed, g0, h0 = tracer.correct(seed, g0, h0, target, cap=10 * step)

    d0 = tracer.diff(g0)
    if abs(d0) == 0:
        raise LostTrack("seed sits where A_i = A_j")
    heading = 1j * np.conj(d0) / abs(d0)
    forward, closed, stop_fwd = tracer.walk(seed, g0, h0, target, heading, step, max_len, seed, closable=True)
    backward, stop_bwd = [], "closed"
    if not closed:
        backward, _, stop_bwd = tracer.walk(seed, g0, h0, target, -heading, step, max_len, seed, closable=False)

    rows = list(reversed(backward)) + [(seed, g0, h0, heading)] + forward
    if closed:
        rows = rows[:-1]
    points = np.array([r[0] for r in rows], dtype=complex)
    diffs = np.array([tracer.diff(r[1]) for r in rows], dtype=complex)
    tangents = np.array([r[3] for r in rows], dtype=complex)
    tangents[: len(backward)] *= -1
    logger.info(f"level curve {tuple(pair)} family {j_family}: {points.size} vertices, stops {stop_bwd}/{stop_fwd}")
    return LevelCurve(
        pair=tuple(pair),
        family=j_family,
        base=base,
        level=target,
        points=points,
        diffs=diffs,
        tangents=tangents,
        h_values=np.array([r[2] for r in rows]),
        closed=closed,
        stops=(stop_bwd, stop_fwd),
    )


def polyline_tangents(points: np.ndarray, closed: bool = False) -> np.ndarray:
    """Unit tangents from the second-order three-point formula on chord lengths; ends one-sided."""
    n = points.size
    out = np.empty(n, dtype=complex)
    for v in range(n):
        if closed or 0 < v < n - 1:
            prev, nxt = points[v - 1], points[(v + 1) % n]
            h1, h2 = abs(points[v] - prev), abs(nxt - points[v])
            t = (h1 ** 2 * (nxt - points[v]) + h2 ** 2 * (points[v] - prev)) / (h1 * h2 * (h1 + h2))
        elif v == 0:
            t = points[1] - points[0]
        else:
            t = points[-1] - points[-2]
        out[v] = t / abs(t)
    return out


def tangent_defects(level: LevelCurve) -> np.ndarray:
    """Per vertex |angle(tangent, normal) − π/2| in radians, normal = conj(A_i) − conj(A_j)."""
    if level.points.size < 3:
        raise ValueError("tangent defects need at least three vertices")
    tangents = polyline_tangents(level.points, level.closed)
    normal = np.conj(level.diffs)
    cosine = np.abs((tangents * np.conj(normal)).real) / np.abs(normal)
    return np.arcsin(np.clip(cosine, 0.0, 1.0))


# ── densities ──

@dataclass
class DensityReport:
    window: float
    vertices: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    atoms_near: int
    atom_total: int
    global_mass: Optional[float] = None
    predicted_mass: Optional[float] = None

    @property
    def ratios(self) -> np.ndarray:
        return self.empirical / self.predicted

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios)) if self.vertices.size else float("nan")

    @property
    def spread(self) -> float:
        return float(np.std(self.ratios)) if self.vertices.size else float("nan")


def project_onto_polyline(points: np.ndarray, atoms: np.ndarray, closed: bool = False) -> tuple:
    """(arclength position, distance) of each atom's nearest point on the polyline."""
    a = points
    b = np.roll(points, -1) if closed else points[1:]
    a = a if closed else points[:-1]
    seg = b - a
    lengths = np.abs(seg)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    safe = np.where(lengths > 0, lengths, 1.0) ** 2
    t = np.clip(((atoms[:, None] - a[None, :]) * np.conj(seg)[None, :]).real / safe[None, :], 0.0, 1.0)
    dist = np.abs(atoms[:, None] - (a[None, :] + t * seg[None, :]))
    best = np.argmin(dist, axis=1)
    rows = np.arange(atoms.size)
    return starts[best] + t[rows, best] * lengths[best], dist[rows, best]


def density_vs_roots(level: LevelCurve, mu: RootMeasure, window: float) -> DensityReport:
    """Empirical linear density of atoms along the curve against |A_i − A_j|/(2π)."""
    if window <= 0:
        raise ValueError("window must be positive")
    if level.points.size < 2:
        raise ValueError("density comparison needs a polyline")
    atoms = mu.as_array()
    s_atoms, dist = project_onto_polyline(level.points, atoms, level.closed)
    near = dist <= window
    s_near = s_atoms[near]
    s_vertices = level.arclength()
    total = level.length
    predicted = level.densities

    if window >= total:
        steps = np.abs(np.diff(level.points))
        mass = float(np.sum(0.5 * (predicted[1:] + predicted[:-1]) * steps))
        return DensityReport(
            window=window,
            vertices=np.zeros(0, dtype=int),
            empirical=np.zeros(0),
            predicted=np.zeros(0),
            atoms_near=int(near.sum()),
            atom_total=mu.count,
            global_mass=float(near.sum()) / mu.count,
            predicted_mass=mass,
        )
    if s_near.size < 3:
        raise SparseWindow(f"only {s_near.size} atoms lie within {window:g} of the curve")

    half = 0.5 * window
    if level.closed:
        selected = np.arange(level.points.size)
    else:
        selected = np.flatnonzero((s_vertices >= s_near.min() + half) & (s_vertices <= s_near.max() - half))
    if selected.size == 0:
        raise SparseWindow("no vertex has a full window inside the atom-covered span")
    empirical = np.empty(selected.size)
    for slot, v in enumerate(selected):
        gap = np.abs(s_near - s_vertices[v])
        if level.closed:
            gap = np.minimum(gap, total - gap)
        count = int(np.sum(gap <= half))
        if count < 3:
            raise SparseWindow(f"window at vertex {v} holds {count} atoms")
        empirical[slot] = count / (window * mu.count)
    return DensityReport(
        window=window,
        vertices=selected,
        empirical=empirical,
        predicted=predicted[selected],
        atoms_near=int(near.sum()),
        atom_total=mu.count,
    )


def mean_spacing(mu: RootMeasure) -> float:
    atoms = mu.as_array()
    if atoms.size < 2:
        raise ValueError("spacing needs at least two atoms")
    tree = cKDTree(np.column_stack([atoms.real, atoms.imag]))
    dist, _ = tree.query(np.column_stack([atoms.real, atoms.imag]), k=2)
    return float(np.mean(dist[:, 1]))


def colocation_fraction(level: LevelCurve, mu: RootMeasure, hit_factor: float = 3.0, near_factor: float = 10.0) -> float:
    """Share of atoms within near_factor spacings of the curve that lie within hit_factor spacings."""
    spacing = mean_spacing(mu)
    _, dist = project_onto_polyline(level.points, mu.as_array(), level.closed)
    nearby = dist <= near_factor * spacing
    if not np.any(nearby):
        return 0.0
    return float(np.sum(dist[nearby] <= hit_factor * spacing) / np.sum(nearby))


# ── automatic seeding ──

def densest_cluster_seed(mu: RootMeasure, neighbors: int = 5) -> complex:
    """Midpoint between the atom with the smallest mean neighbour distance and its nearest neighbour."""
    atoms = mu.as_array()
    if atoms.size < 2:
        raise ValueError("seeding needs at least two atoms")
    k = min(neighbors, atoms.size - 1)
    xy = np.column_stack([atoms.real, atoms.imag])
    dist, idx = cKDTree(xy).query(xy, k=k + 1)
    best = int(np.argmin(dist[:, 1:].mean(axis=1)))
    return complex(0.5 * (atoms[best] + atoms[idx[best, 1]]))


def infer_pair(P: Pencil, j_family: int, mu: RootMeasure, seed: complex, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """
    Branch pair whose level curve carries the root chain through `seed`: the
    Cauchy transform on either side of the chain is matched to the A_i there.
    """
    if P.k < 2:
        raise ValueError("pair inference needs at least two branches")
    atoms = mu.as_array()
    xy = np.column_stack([atoms.real, atoms.imag])
    _, idx = cKDTree(xy).query([complex(seed).real, complex(seed).imag], k=min(7, atoms.size))
    local = atoms[np.atleast_1d(idx)]
    centred = local - local.mean()
    _, _, vt = np.linalg.svd(np.column_stack([centred.real, centred.imag]))
    along = complex(vt[0, 0], vt[0, 1])
    offset = 3.0 * mean_spacing(mu) * 1j * along
    picks = []
    for side in (seed + offset, seed - offset):
        gaps = np.abs(scaled_branches(P, j_family, side, policy) - cauchy_transform(mu, side))
        picks.append(list(np.argsort(gaps)))
    first = picks[0][0]
    second = next(c for c in picks[1] if c != first)
    return tuple(sorted((int(first) + 1, int(second) + 1)))
