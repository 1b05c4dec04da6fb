"""Shared pencils for the test suite."""
import cmath
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
PENCILS = ROOT / "benchmarks" / "pencils"

if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from ingest.pencil_file import load_pencil  # noqa: E402
from spectral.poly import PrecisionPolicy  # noqa: E402
from spectral.support import example3_pencil  # noqa: E402


@pytest.fixture(scope="session")
def policy():
    return PrecisionPolicy(initial_digits=16, max_digits=128, residual_target=1e-10)


@pytest.fixture(scope="session")
def fig1_path() -> Path:
    return PENCILS / "fig1.json"


@pytest.fixture(scope="session")
def fig1(fig1_path):
    _, P = load_pencil(fig1_path)
    return P


@pytest.fixture(scope="session")
def trivial_k1():
    """T_λ = −λ + z d/dz: λ_n = n, eigenpolynomial z^n."""
    _, P = load_pencil(PENCILS / "trivial_k1.json")
    return P


@pytest.fixture(scope="session")
def triangle_bs() -> tuple:
    return tuple(2 * cmath.exp(2j * cmath.pi * s / 3) for s in range(3))


@pytest.fixture(scope="session")
def product_pencil(triangle_bs):
    """Curve Π((b_i − z)w − 1) = 0 with b on the circle |z| = 2."""
    return example3_pencil(*triangle_bs)
