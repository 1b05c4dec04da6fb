"""
Smoke test for the acceptance battery: run the cheap criteria and make sure the
runner turns failures into reported results instead of exceptions.
"""
import pytest

from benchmarks.grader import (
    CRITERIA,
    Battery,
    branch_convergence,
    branch_point_count,
    eigenvalue_asymptotics,
    example3_circle_check,
    formal_limit,
    majorant_spot_values,
    phi0_closed_form,
)
from benchmarks.run_benchmark import DEFAULT_PENCIL, run_battery
from ingest.pencil_file import load_pencil, pencil_sha256
from spectral.poly import PrecisionPolicy


def test_criteria_ids_are_complete():
    assert [cid for cid, _, _ in CRITERIA] == list(range(1, 13))


def test_default_pencil_ships():
    assert DEFAULT_PENCIL.is_file()


def test_majorant_criterion(fig1):
    passed, detail = majorant_spot_values(Battery(P=fig1))
    assert passed is True
    assert detail == {"L=0": 1, "L=2": 1 / 25}


def test_phi0_criterion(fig1):
    passed, detail = phi0_closed_form(Battery(P=fig1))
    assert passed is True, detail


@pytest.fixture(scope="module")
def small_battery(fig1, policy):
    return Battery(P=fig1, policy=policy, asymptotic_ns=(10, 20, 30), formal_limit_ns=(20, 40), locus_res=0.05)


def test_branch_point_criterion(small_battery):
    passed, detail = branch_point_count(small_battery)
    assert passed is True, detail
    assert detail["count"] == 6


def test_eigenvalue_asymptotics_gaps_shrink(small_battery):
    _, detail = eigenvalue_asymptotics(small_battery)
    for j in (1, 2, 3):
        gaps = detail[f"j{j}"]["gaps"]
        assert len(gaps) == 3
        assert gaps[0] > gaps[1] > gaps[2]


def test_formal_limit_criterion(small_battery):
    passed, detail = formal_limit(small_battery)
    assert passed is True, detail
    assert all(len(detail[f"j{j}"]["gaps"]) == 2 for j in (1, 2, 3))


def test_branch_convergence_criterion(small_battery):
    passed, detail = branch_convergence(small_battery)
    assert passed is True, detail


def test_product_circle_criterion(small_battery):
    passed, detail = example3_circle_check(small_battery)
    assert passed is True, detail
    assert detail["radius"] == pytest.approx(2.0)
    assert abs(complex(*detail["center"])) < 1e-9


def test_run_battery_subset(fig1_path):
    doc, P = load_pencil(fig1_path)
    report = run_battery(P, pencil_sha256(doc), only=[6, 7])
    assert [c.id for c in report.criteria] == [6, 7]
    assert report.passed
    assert report.pencil_sha256 == pencil_sha256(doc)


def test_sabotaged_tolerance_fails_cleanly(fig1_path):
    """An unreachable residual target must surface as a failed criterion, not a crash."""
    doc, P = load_pencil(fig1_path)
    sabotaged = PrecisionPolicy(initial_digits=16, max_digits=16, residual_target=1e-30)
    report = run_battery(P, pencil_sha256(doc), sabotaged, only=[9])
    assert not report.passed
    result = report.criteria[0]
    assert result.passed is False
    assert result.error is not None and "PrecisionExhausted" in result.error
