"""
Resilience utilities: precision escalation, the error hierarchy, structured logging.
Numeric routines that can lose accuracy run through `escalate_precision`.
"""
import logging
from typing import Callable, Optional, TypeVar

import mpmath

from app.config import DEBUG, LOG_LEVEL

T = TypeVar("T")

# ── Structured logger ──
logger = logging.getLogger("spectral_lab")
if not logger.handlers:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s.%(funcName)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    ))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if DEBUG else getattr(logging, LOG_LEVEL, logging.INFO))


class SpectralError(Exception):
    """Base for every domain failure; the CLI maps it to exit code 1."""
    pass


class PrecisionShortfall(SpectralError):
    """Raised by one attempt when its residual misses the target at the current digits."""

    def __init__(self, message: str, residual: float = float("inf")):
        super().__init__(message)
        self.residual = residual


class PrecisionExhausted(SpectralError):
    """Raised when the residual target still fails at max_digits."""

    def __init__(self, message: str, residual: float = float("inf"), digits: int = 0):
        super().__init__(message)
        self.residual = residual
        self.digits = digits


def escalate_precision(
    func: Callable[[int], T],
    *,
    initial_digits: int,
    max_digits: int,
    name: Optional[str] = None,
) -> T:
    """
    Run `func(digits)` under an mpmath working precision of `digits`.
    On PrecisionShortfall the digits double (capped at max_digits) and the call repeats;
    after the attempt at max_digits fails, PrecisionExhausted is raised.
    """
    label = name or getattr(func, "__name__", "computation")
    digits = max(1, int(initial_digits))
    last_exc: Optional[PrecisionShortfall] = None

    while True:
        try:
            with mpmath.workdps(digits):
                return func(digits)
        except PrecisionShortfall as e:
            last_exc = e
            if digits >= max_digits:
                break
            nxt = min(2 * digits, max_digits)
            logger.warning(
                f"Escalating {label}: {digits} -> {nxt} digits (residual {e.residual:.3e})"
            )
            digits = nxt

    residual = last_exc.residual if last_exc else float("inf")
    logger.error(f"Precision exhausted for {label} at {digits} digits: {last_exc}")
    raise PrecisionExhausted(
        f"{label}: residual {residual:.3e} above target at {digits} digits",
        residual=residual,
        digits=digits,
    )
