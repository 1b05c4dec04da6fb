"""Truncated power series in y = 1/z. Coefficient lists are low-to-high mpmath scalars."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import mpmath
import numpy as np

ORIGINS = ("log-derivative", "recurrence", "curve-branch", "residual")


@dataclass(frozen=True)
class TruncatedSeries:
    """
    Σ coeffs[i] y^i known exactly modulo y^(M+1), M = len(coeffs) - 1.
    For yN(y) the constant coefficient is 0 and coeffs[i] = ε_i.
    """

    coeffs: tuple
    origin: str = "recurrence"
    lam: Optional[mpmath.mpc] = None

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise ValueError("a truncated series needs at least one coefficient")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown series origin '{self.origin}'")
        object.__setattr__(self, "coeffs", tuple(
            c if isinstance(c, mpmath.mpc) else mpmath.mpc(c) for c in self.coeffs
        ))

    @property
    def M(self) -> int:
        return len(self.coeffs) - 1

    @property
    def epsilons(self) -> tuple:
        """ε_1…ε_M."""
        return self.coeffs[1:]

    def eval(self, y) -> mpmath.mpc:
        acc = mpmath.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * y + c
        return acc

    def to_numpy(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)


def pad(a: Sequence, n: int) -> list:
    """First n coefficients of a, zero-filled."""
    out = list(a[:n])
    out.extend(mpmath.mpc(0) for _ in range(n - len(out)))
    return out


def mul(a: Sequence, b: Sequence, n: int) -> list:
    out = [mpmath.mpc(0)] * n
    for i in range(min(len(a), n)):
        ai = a[i]
        if ai == 0:
            continue
        for j in range(min(len(b), n - i)):
            out[i + j] += ai * b[j]
    return out


def inv(a: Sequence, n: int) -> list:
    """1/a mod y^n; a[0] must be nonzero."""
    if a[0] == 0:
        raise ZeroDivisionError("series with zero constant term is not invertible")
    a = pad(a, n)
    out = [mpmath.mpc(0)] * n
    out[0] = 1 / a[0]
    for m in range(1, n):
        acc = mpmath.fsum(a[l] * out[m - l] for l in range(1, m + 1))
        out[m] = -acc * out[0]
    return out


def div(a: Sequence, b: Sequence, n: int) -> list:
    return mul(a, inv(b, n), n)


def derivative(a: Sequence) -> list:
    """d/dy, one coefficient shorter."""
    return [i * a[i] for i in range(1, len(a))]


def y_derivative(a: Sequence) -> list:
    """y·d/dy, same length."""
    return [i * a[i] for i in range(len(a))]


def shift_up(a: Sequence, s: int, n: int) -> list:
    """y^s · a mod y^n."""
    return pad([mpmath.mpc(0)] * s + list(a), n)


def add(a: Sequence, b: Sequence, n: int) -> list:
    a, b = pad(a, n), pad(b, n)
    return [x + y for x, y in zip(a, b)]


def scale(a: Sequence, s) -> list:
    return [s * c for c in a]


def max_abs(a: Sequence) -> mpmath.mpf:
    return max((abs(c) for c in a), default=mpmath.mpf(0))
