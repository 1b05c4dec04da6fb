"""Tests for precision escalation and the error hierarchy."""
import mpmath
import pytest

from spectral.resilience import (
    PrecisionExhausted,
    PrecisionShortfall,
    SpectralError,
    escalate_precision,
)


class TestEscalatePrecision:
    def test_succeeds_first_try(self):
        seen = []

        def attempt(digits):
            seen.append(digits)
            return 42

        assert escalate_precision(attempt, initial_digits=16, max_digits=64) == 42
        assert seen == [16]

    def test_doubles_until_target_met(self):
        seen = []

        def attempt(digits):
            seen.append(digits)
            if digits < 64:
                raise PrecisionShortfall("not yet", residual=10.0 ** -digits)
            return "ok"

        assert escalate_precision(attempt, initial_digits=16, max_digits=256) == "ok"
        assert seen == [16, 32, 64]

    def test_runs_under_working_precision(self):
        assert escalate_precision(lambda d: mpmath.mp.dps, initial_digits=40, max_digits=40) == 40

    def test_caps_at_max_digits(self):
        seen = []

        def attempt(digits):
            seen.append(digits)
            raise PrecisionShortfall("never", residual=1e-3)

        with pytest.raises(PrecisionExhausted) as info:
            escalate_precision(attempt, initial_digits=16, max_digits=50, name="trial")
        assert seen == [16, 32, 50]
        assert info.value.digits == 50
        assert info.value.residual == 1e-3
        assert "trial" in str(info.value)

    def test_other_errors_propagate(self):
        def attempt(digits):
            raise ValueError("bad input")

        with pytest.raises(ValueError, match="bad input"):
            escalate_precision(attempt, initial_digits=16, max_digits=64)


class TestErrorHierarchy:
    def test_domain_errors_share_a_base(self):
        from spectral.curve import BranchCollision, SheetDrop
        from spectral.measures import AtomCollision
        from spectral.support import LostTrack, QuadratureFail

        for exc in (PrecisionShortfall, PrecisionExhausted, BranchCollision, SheetDrop, AtomCollision, LostTrack, QuadratureFail):
            assert issubclass(exc, SpectralError)

    def test_shortfall_carries_residual(self):
        e = PrecisionShortfall("x", residual=2.5)
        assert e.residual == 2.5
