#!/usr/bin/env python3
"""
Acceptance battery runner: load a pencil (the bundled reference pencil by default),
run every criterion, print a table and optionally write the JSON report.
Usage:
  python -m benchmarks.run_benchmark                   # all criteria on the reference pencil
  python -m benchmarks.run_benchmark --only 1,2,7      # a subset
  python -m benchmarks.run_benchmark --list            # list criteria only
"""
import argparse
import sys
import time
from pathlib import Path
from typing import Iterable, Optional

BENCH_ROOT = Path(__file__).resolve().parent
PROJECT_ROOT = BENCH_ROOT.parent
DEFAULT_PENCIL = BENCH_ROOT / "pencils" / "fig1.json"

if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from app.schemas import CriterionResult, VerifyReport  # noqa: E402
from benchmarks.grader import CRITERIA, Battery  # noqa: E402
from ingest.pencil_file import load_pencil, pencil_sha256  # noqa: E402
from spectral import __version__  # noqa: E402
from spectral.pencil import Pencil  # noqa: E402
from spectral.poly import DEFAULT_POLICY, PrecisionPolicy  # noqa: E402
from spectral.resilience import logger  # noqa: E402


def run_battery(
    P: Pencil,
    pencil_sha: str,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    only: Optional[Iterable[int]] = None,
) -> VerifyReport:
    """Every selected criterion runs; exceptions become failed results with the message kept."""
    wanted = set(only) if only else None
    battery = Battery(P=P, policy=policy)
    report = VerifyReport(pencil_sha256=pencil_sha, tool_version=__version__, digits=policy.initial_digits)
    for cid, name, check in CRITERIA:
        if wanted is not None and cid not in wanted:
            continue
        started = time.perf_counter()
        try:
            passed, detail = check(battery)
            result = CriterionResult(id=cid, name=name, passed=bool(passed), detail=detail)
        except Exception as e:
            logger.error(f"criterion {cid} ({name}) raised {type(e).__name__}: {e}")
            result = CriterionResult(id=cid, name=name, passed=False, error=f"{type(e).__name__}: {e}")
        result.seconds = round(time.perf_counter() - started, 3)
        logger.info(f"criterion {cid} {'PASS' if result.passed else 'FAIL'} in {result.seconds:.2f}s")
        report.criteria.append(result)
    return report


def print_report(report: VerifyReport, verbose: bool = False) -> None:
    print("\nAcceptance battery")
    print("-" * 72)
    for r in report.criteria:
        status = "PASS" if r.passed else "FAIL"
        print(f"  {status}  {r.id:>2}  {r.name:36}  {r.seconds:7.2f}s")
        if verbose and not r.passed:
            if r.error:
                print(f"         └ error: {r.error}")
            for k, v in r.detail.items():
                print(f"         └ {k}: {v}")
    print("-" * 72)
    passed = sum(1 for r in report.criteria if r.passed)
    print(f"\nOverall: {passed}/{len(report.criteria)} passed")


def _ids(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the acceptance battery")
    parser.add_argument("--pencil", type=Path, default=DEFAULT_PENCIL, help="Pencil JSON file")
    parser.add_argument("--only", type=_ids, default=None, help="Comma-separated criterion ids")
    parser.add_argument("--list", action="store_true", help="Only list criteria and exit")
    parser.add_argument("--out", type=Path, default=None, help="Write the JSON report here")
    parser.add_argument("--verbose", "-v", action="store_true", help="Print details of failures")
    args = parser.parse_args()

    if args.list:
        for cid, name, _ in CRITERIA:
            print(f"  {cid:>2}  {name}")
        return 0
    try:
        doc, P = load_pencil(args.pencil)
    except Exception as e:
        print(f"Cannot load pencil {args.pencil}: {e}", file=sys.stderr)
        return 2

    report = run_battery(P, pencil_sha256(doc), only=args.only)
    print_report(report, args.verbose)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
