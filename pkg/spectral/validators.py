"""
Precondition checks run before any computation. Each returns (ok, reason);
validate_run collects every failure instead of stopping at the first.
"""
from typing import Optional, Sequence

from spectral.curve import branch_points
from spectral.pencil import Pencil, validate_general_type
from spectral.poly import DEFAULT_POLICY, PrecisionPolicy

MAX_FAMILY_DEGREE = 400


def require_general_type(P: Pencil, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple[bool, str]:
    report = validate_general_type(P, policy=policy)
    if not report.is_general_type:
        return False, "Pencil is not of general type: " + "; ".join(report.reasons)
    return True, ""


def require_degrees(ns: Sequence[int], limit: int = MAX_FAMILY_DEGREE) -> tuple[bool, str]:
    bad = [n for n in ns if not 1 <= n <= limit]
    if bad:
        return False, f"Degrees must lie in 1..{limit}; got {bad}."
    return True, ""


def require_families(families: Optional[Sequence[int]], k: int) -> tuple[bool, str]:
    if families is None:
        return True, ""
    bad = [j for j in families if not 1 <= j <= k]
    if bad:
        return False, f"Family labels must lie in 1..{k}; got {bad}."
    return True, ""


def require_outside_branch_points(P: Pencil, radius: Optional[float], policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple[bool, str]:
    """Behaviour-at-infinity checks need |z| = radius beyond twice every branch point."""
    if radius is None:
        return True, ""
    largest = max([abs(b) for b in branch_points(P.curve, policy)] + [0.0])
    if radius <= 2.0 * largest:
        return False, f"Radius {radius:g} must exceed twice the largest branch-point modulus ({largest:.4g})."
    return True, ""


def require_rect_clear(P: Pencil, rect: Optional[tuple], clearance: float, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple[bool, str]:
    if rect is None:
        return True, ""
    x0, y0, x1, y1 = rect
    inside = [b for b in branch_points(P.curve, policy)
              if x0 - clearance <= b.real <= x1 + clearance and y0 - clearance <= b.imag <= y1 + clearance]
    if inside:
        return False, f"Rectangle contains {len(inside)} branch point(s), e.g. {inside[0]:.4g}."
    return True, ""


def validate_run(
    P: Pencil,
    *,
    command: str,
    ns: Sequence[int],
    families: Optional[Sequence[int]],
    radius: Optional[float] = None,
    rect: Optional[tuple] = None,
    clearance: float = 0.0,
    policy: PrecisionPolicy = DEFAULT_POLICY,
) -> tuple[bool, list[str]]:
    """All preconditions for `command`. Returns (ok, list of failure reasons)."""
    errors = []
    checks = [require_degrees(ns), require_families(families, P.k)]
    if command in ("eigen", "fig1", "series", "support"):
        checks.append(require_general_type(P, policy))
    if command == "series":
        checks.append(require_outside_branch_points(P, radius, policy))
    if command == "support":
        checks.append(require_rect_clear(P, rect, clearance, policy))
    for ok, msg in checks:
        if not ok:
            errors.append(msg)
    return len(errors) == 0, errors
