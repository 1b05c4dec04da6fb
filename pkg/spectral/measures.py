"""
Root-counting measures, their Cauchy transforms and logarithmic potentials,
and the convergence checks that compare eigenpolynomials with curve branches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from spectral.curve import PlaneCurve, branch_points, branch_series_at_infinity, branches_at
from spectral.pencil import EigenSolution, Pencil, eigenpolynomial, spectral_eigenvalues
from spectral.poly import DEFAULT_POLICY, ComplexPolynomial, PrecisionPolicy, roots
from spectral.resilience import SpectralError, logger

# z closer than this fraction of the atom scale counts as sitting on an atom
COLLISION_TOL = 1e-13
# grid points this close (× scale) to an atom are skipped in grid comparisons
EXCLUSION_RADIUS = 1e-3
SERIES_ORDER = 20


class AtomCollision(SpectralError):
    pass


@dataclass(frozen=True)
class RootMeasure:
    """Mass 1/count at each atom; repeated atoms carry multiplicity."""

    atoms: tuple

    def __post_init__(self) -> None:
        if len(self.atoms) < 1:
            raise ValueError("a root measure needs at least one atom")
        object.__setattr__(self, "atoms", tuple(complex(a) for a in self.atoms))

    @property
    def count(self) -> int:
        return len(self.atoms)

    @property
    def weight(self) -> Fraction:
        return Fraction(1, self.count)

    @property
    def total_mass(self) -> Fraction:
        return sum((self.weight for _ in self.atoms), Fraction(0))

    def as_array(self) -> np.ndarray:
        return np.array(self.atoms, dtype=complex)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.as_array()))))


def root_measure(p: ComplexPolynomial, policy: PrecisionPolicy = DEFAULT_POLICY) -> RootMeasure:
    if p.is_zero or p.degree < 1:
        raise ValueError("root measure needs deg p >= 1")
    return RootMeasure(roots(p, policy))


def _offsets(mu: RootMeasure, z) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(z) == 0
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    diff = zs[..., None] - mu.as_array()
    if np.any(np.abs(diff) <= COLLISION_TOL * mu.scale):
        raise AtomCollision("evaluation point coincides with an atom")
    return diff, scalar


def cauchy_transform(mu: RootMeasure, z) -> Union[complex, np.ndarray]:
    """(1/count) Σ 1/(z − atom); vectorized over z."""
    diff, scalar = _offsets(mu, z)
    out = np.mean(1.0 / diff, axis=-1)
    return complex(out[0]) if scalar else out


def log_potential(mu: RootMeasure, z) -> Union[float, np.ndarray]:
    """(1/count) Σ log|z − atom|; vectorized over z."""
    diff, scalar = _offsets(mu, z)
    out = np.mean(np.log(np.abs(diff)), axis=-1)
    return float(out[0]) if scalar else out


# ── convergence to curve branches ──

def _solution_for(P: Pencil, j: int, n: int, policy: PrecisionPolicy) -> EigenSolution:
    lam = dict((label, value) for value, label in spectral_eigenvalues(P, n, policy))[j]
    return eigenpolynomial(P, n, lam, policy, j=j)


def _circle(radius: float, samples: int) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(samples) / samples)


def branch_on_circle(curve: PlaneCurve, j: int, zs: np.ndarray, policy: PrecisionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """γ_j at each z: the fiber value nearest the truncated series of branch j."""
    expansion = branch_series_at_infinity(curve, j, SERIES_ORDER, policy)
    out = np.empty(len(zs), dtype=complex)
    for s, z in enumerate(zs):
        predicted = complex(expansion.eval_at(z))
        fiber = [complex(w) for w in branches_at(curve, z, policy)]
        out[s] = min(fiber, key=lambda w: abs(w - predicted))
    return out


def _check_radius(curve: PlaneCurve, radius: float, policy: PrecisionPolicy) -> None:
    largest = max([abs(b) for b in branch_points(curve, policy)] + [0.0])
    if radius <= 2.0 * largest:
        raise ValueError(f"radius {radius:.4g} must exceed twice the largest branch-point modulus {largest:.4g}")


def normalized_log_derivative(solution: EigenSolution, zs: np.ndarray) -> np.ndarray:
    """L_{n,j}(z) = p'/(λp) = (1/λ) Σ 1/(z − root)."""
    atoms = np.array([complex(r) for r in solution.roots], dtype=complex)
    return np.sum(1.0 / (zs[:, None] - atoms[None, :]), axis=1) / complex(solution.lam)


def branch_deviation(
    P: Pencil,
    j: int,
    n: int,
    radius: float,
    samples: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    solution: Optional[EigenSolution] = None,
) -> float:
    """max over the circle |z| = radius of |L_{n,j}(z) − γ_j(z)|."""
    _check_radius(P.curve, radius, policy)
    sol = solution or _solution_for(P, j, n, policy)
    zs = _circle(radius, samples)
    deviation = float(np.max(np.abs(normalized_log_derivative(sol, zs) - branch_on_circle(P.curve, j, zs, policy))))
    logger.info(f"branch deviation n={n} j={j} radius={radius:.4g}: {deviation:.3e}")
    return deviation


def cauchy_deviation(
    P: Pencil,
    j: int,
    n: int,
    radius: float,
    samples: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    solution: Optional[EigenSolution] = None,
) -> float:
    """max over the circle of |C_{μ_{n,j}}(z) − α_j γ_j(z)|."""
    _check_radius(P.curve, radius, policy)
    sol = solution or _solution_for(P, j, n, policy)
    zs = _circle(radius, samples)
    alpha = complex(P.alphas(policy)[j - 1])
    transform = cauchy_transform(RootMeasure(sol.roots), zs)
    return float(np.max(np.abs(transform - alpha * branch_on_circle(P.curve, j, zs, policy))))


def algebraic_defect(
    P: Pencil,
    j: int,
    n: int,
    radius: float,
    samples: int,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    solution: Optional[EigenSolution] = None,
) -> float:
    """max over the circle of |Σ Q_i L^i| / Σ |Q_i||L|^i for L = L_{n,j}."""
    sol = solution or _solution_for(P, j, n, policy)
    zs = _circle(radius, samples)
    L = normalized_log_derivative(sol, zs)
    terms = np.stack([q.eval_numpy(zs) * L ** i for i, q in enumerate(P.Q)])
    return float(np.max(np.abs(terms.sum(axis=0)) / np.abs(terms).sum(axis=0)))


# ── potentials ──

@dataclass
class PotentialOrderingEntry:
    degree: int
    slack: float
    max_violation: float
    max_gap_outside_hull: float
    points_used: int


@dataclass
class PotentialOrderingReport:
    entries: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.max_violation == 0.0 for e in self.entries)


def _usable(points: np.ndarray, measures: Sequence[RootMeasure]) -> np.ndarray:
    keep = np.ones(points.shape, dtype=bool)
    for mu in measures:
        d = np.min(np.abs(points[:, None] - mu.as_array()[None, :]), axis=1)
        keep &= d > EXCLUSION_RADIUS * mu.scale
    return keep


def outside_inflated_hull(atoms: np.ndarray, points: np.ndarray, inflation: float = 1.2) -> np.ndarray:
    """Points outside the convex hull of `atoms` scaled by `inflation` about its centroid."""
    centroid = atoms.mean()
    pulled = centroid + (points - centroid) / inflation
    xy = np.column_stack([atoms.real, atoms.imag])
    try:
        hull = ConvexHull(xy)
    except (QhullError, ValueError):
        radius = float(np.max(np.abs(atoms - centroid)))
        return np.abs(pulled - centroid) > radius
    planes = hull.equations  # rows (a, b, c): a x + b y + c <= 0 inside
    side = planes[:, 0][None, :] * pulled.real[:, None] + planes[:, 1][None, :] * pulled.imag[:, None] + planes[:, 2][None, :]
    return np.any(side > 1e-12, axis=1)


def potential_ordering_check(
    p_list: Sequence[ComplexPolynomial],
    grid: np.ndarray,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> PotentialOrderingReport:
    """Compare u' (roots of p') with u (roots of p) on a fixed grid; slack 5/deg."""
    grid = np.asarray(grid, dtype=complex).ravel()
    report = PotentialOrderingReport()
    for p in p_list:
        if p.degree < 2:
            raise ValueError("potential ordering needs deg p >= 2")
        mu = root_measure(p, policy)
        mu_prime = root_measure(p.derivative(), policy)
        points = grid[_usable(grid, (mu, mu_prime))]
        slack = 5.0 / p.degree
        if points.size == 0:
            report.entries.append(PotentialOrderingEntry(p.degree, slack, 0.0, float("nan"), 0))
            continue
        u = log_potential(mu, points)
        u_prime = log_potential(mu_prime, points)
        violation = float(max(0.0, np.max(u_prime - u - slack)))
        outside = outside_inflated_hull(mu.as_array(), points)
        gap = float(np.max(np.abs(u - u_prime)[outside])) if np.any(outside) else float("nan")
        report.entries.append(PotentialOrderingEntry(p.degree, slack, violation, gap, int(points.size)))
    return report


def derivative_potential_gap(
    p: ComplexPolynomial,
    orders: Sequence[int],
    grid: np.ndarray,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> dict:
    """{i: max over the grid of |u^(i) − u|} where u^(i) is the potential of the roots of p^(i)."""
    grid = np.asarray(grid, dtype=complex).ravel()
    base = root_measure(p, policy)
    measures = {i: root_measure(p.nth_derivative(i), policy) for i in orders}
    points = grid[_usable(grid, [base] + list(measures.values()))]
    if points.size == 0:
        return {i: float("nan") for i in orders}
    u = log_potential(base, points)
    return {i: float(np.max(np.abs(log_potential(mu, points) - u))) for i, mu in measures.items()}
