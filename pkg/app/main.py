"""Command-line entry: load .env, parse flags into a RunConfig, dispatch to a command."""
import argparse
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

from dotenv import load_dotenv

# Load .env from project root: find dir that contains .env (walk up from app/)
_app_dir = Path(__file__).resolve().parent
_env_file = _app_dir.parent / ".env"
if not _env_file.exists():
    for parent in _app_dir.parents:
        if (parent / ".env").exists():
            _env_file = parent / ".env"
            break
load_dotenv(_env_file, override=False)

import mpmath  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import ValidationError  # noqa: E402

from app.config import SPECTRAL_CLEARANCE  # noqa: E402
from app.schemas import (  # noqa: E402
    COMMANDS,
    DensityOut,
    DeviationRecord,
    DeviationReport,
    EigenSummary,
    EigenSummaryRow,
    GeneralTypeOut,
    RunConfig,
)
from ingest.exporters import complex_rows, split_complex, write_csv, write_json  # noqa: E402
from ingest.pencil_file import load_pencil, pencil_sha256  # noqa: E402
from spectral.curve import branch_points, branch_series_at_infinity, curve_scale  # noqa: E402
from spectral.measures import RootMeasure, algebraic_defect, branch_deviation, cauchy_deviation  # noqa: E402
from spectral.pencil import Pencil, eigenpolynomial, spectral_eigenvalues, validate_general_type  # noqa: E402
from spectral.poly import PrecisionPolicy  # noqa: E402
from spectral.recurrence import log_derivative_series, solve_recurrence  # noqa: E402
from spectral.resilience import SpectralError, logger  # noqa: E402
from spectral.series import pad  # noqa: E402
from spectral.support import (  # noqa: E402
    SparseWindow,
    densest_cluster_seed,
    density_vs_roots,
    gamma_locus,
    infer_pair,
    mean_spacing,
    trace_level_curve,
)
from spectral.validators import validate_run  # noqa: E402
from ui.svg_figure import Panel, root_panels, write_panel  # noqa: E402

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
LEVEL_MAX_LEN = 4.0


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-lab", description="Homogenized spectral pencil lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--pencil", type=Path, default=None, help="Pencil JSON file")
    parser.add_argument("--n", type=_int_list, default=None, help="Degrees, e.g. 15,25,40,55")
    parser.add_argument("--family", type=_int_list, default=None, help="Family labels j (default: all)")
    parser.add_argument("--order", type=int, default=None, help="Series truncation order M")
    parser.add_argument("--radius", type=float, default=None, help="Test-circle radius for deviation checks")
    parser.add_argument("--rect", type=_float_tuple, default=None, help="Grid rectangle x0,y0,x1,y1")
    parser.add_argument("--res", type=float, default=None, help="Grid resolution / trace step")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--digits", type=int, default=None, help="Initial working digits")
    parser.add_argument("--max-digits", type=int, default=None, help="Escalation ceiling")
    parser.add_argument("--residual-target", type=float, default=None, help="Scale-relative residual target")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Raises ValidationError when a value breaks a precondition."""
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if v is not None}
    return RunConfig(**values)


def _policy(config: RunConfig) -> PrecisionPolicy:
    return PrecisionPolicy(initial_digits=config.digits, max_digits=config.max_digits, residual_target=config.residual_target)


def _precheck(config: RunConfig, P: Pencil) -> None:
    ok, errors = validate_run(
        P,
        command=config.command,
        ns=config.n,
        families=config.family,
        radius=config.radius,
        rect=config.rect,
        clearance=SPECTRAL_CLEARANCE * curve_scale(P.curve, _policy(config)) if config.command == "support" else 0.0,
        policy=_policy(config),
    )
    if not ok:
        raise ValueError("; ".join(errors))


# ── worker pool ──

def _solve_item(item: tuple) -> dict[str, Any]:
    """One (n, j) eigenproblem in a worker; everything returned is plain text or float."""
    rows, n, j, digits, max_digits, target = item
    P = Pencil.from_complex(rows)
    policy = PrecisionPolicy(initial_digits=digits, max_digits=max_digits, residual_target=target)
    try:
        lam = {label: value for value, label in spectral_eigenvalues(P, n, policy)}[j]
        sol = eigenpolynomial(P, n, lam, policy, j=j)
        alpha = P.alphas(policy)[j - 1]
        return {
            "n": n,
            "j": j,
            "lam": split_complex(sol.lam, digits),
            "ratio_gap": float(abs(sol.lam / n - alpha)),
            "residual": sol.residual,
            "coeffs": complex_rows(sol.p.coeffs, digits),
            "roots": [split_complex(r, digits) for r in sol.roots],
        }
    except SpectralError as e:
        logger.error(f"n={n} j={j}: {type(e).__name__}: {e}")
        return {"n": n, "j": j, "error": f"{type(e).__name__}: {e}"}


def run_items(P: Pencil, pairs: list, config: RunConfig) -> list[dict[str, Any]]:
    """Fan (n, j) items across the pool; results come back in submission order."""
    rows = [[complex(c) for c in q.coeffs] or [0j] for q in P.Q]
    items = [(rows, n, j, config.digits, config.max_digits, config.residual_target) for n, j in pairs]
    if config.jobs == 1 or len(items) == 1:
        return [_solve_item(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(config.jobs, len(items))) as pool:
        return list(pool.map(_solve_item, items))


def _families(config: RunConfig, P: Pencil) -> list[int]:
    return list(config.family or range(1, P.k + 1))


def _roots_of(result: dict[str, Any]) -> np.ndarray:
    return np.array([complex(float(re), float(im)) for re, im in result["roots"]], dtype=complex)


# ── commands ──

def cmd_check(config: RunConfig) -> int:
    doc, P = load_pencil(config.pencil)
    report = validate_general_type(P, policy=_policy(config))
    out = GeneralTypeOut(
        is_general_type=report.is_general_type,
        leading_ok=report.leading_ok,
        constant_ok=report.constant_ok,
        roots_distinct=report.roots_distinct,
        no_collinear_pair=report.no_collinear_pair,
        alphas=[(float(a.real), float(a.imag)) for a in report.alphas],
        reasons=report.reasons,
    )
    print(out.model_dump_json(indent=2))
    return EXIT_OK if report.is_general_type else EXIT_DOMAIN


def cmd_eigen(config: RunConfig) -> int:
    doc, P = load_pencil(config.pencil)
    _precheck(config, P)
    sha = pencil_sha256(doc)
    results = run_items(P, list(itertools.product(config.n, _families(config, P))), config)
    summary = EigenSummary(pencil_sha256=sha, digits=config.digits)
    failed = 0
    for r in results:
        if "error" in r:
            failed += 1
            summary.rows.append(EigenSummaryRow(n=r["n"], j=r["j"], error=r["error"]))
            continue
        n, j = r["n"], r["j"]
        weight = f"1/{n}"
        write_csv(config.out / f"roots_n{n}_j{j}.csv", ["index", "re", "im", "weight"],
                  [[str(i), re, im, weight] for i, (re, im) in enumerate(r["roots"])],
                  pencil_sha=sha, digits=config.digits, origin=f"roots n={n} j={j}")
        write_csv(config.out / f"coeffs_n{n}_j{j}.csv", ["power", "re", "im"], r["coeffs"],
                  pencil_sha=sha, digits=config.digits, origin=f"eigenpolynomial n={n} j={j}")
        summary.rows.append(EigenSummaryRow(
            n=n, j=j, lam=tuple(r["lam"]), ratio_gap=r["ratio_gap"], residual=r["residual"], root_count=len(r["roots"]),
        ))
    write_csv(config.out / "eigenvalues.csv", ["n", "j", "lam_re", "lam_im", "ratio_gap", "residual"],
              [[str(s.n), str(s.j), *(s.lam or ("", "")), repr(s.ratio_gap) if s.ratio_gap is not None else "",
                repr(s.residual) if s.residual is not None else ""] for s in summary.rows],
              pencil_sha=sha, digits=config.digits, origin="eigenvalue summary")
    write_json(config.out / "eigen_summary.json", summary)
    logger.info(f"eigen: {len(results) - failed}/{len(results)} items solved")
    return EXIT_DOMAIN if failed else EXIT_OK


def cmd_fig1(config: RunConfig) -> int:
    doc, P = load_pencil(config.pencil)
    _precheck(config, P)
    n = config.n[0]
    results = run_items(P, [(n, j) for j in range(1, P.k + 1)], config)
    failed = [r for r in results if "error" in r]
    clouds = {r["j"]: _roots_of(r) for r in results if "error" not in r}
    bps = list(branch_points(P.curve, _policy(config)))
    for panel in root_panels(clouds, bps, f"degree {n}"):
        name = panel.title.split()[-1]
        stem = "fig1_union" if name == "union" else f"fig1_family{name}"
        write_panel(config.out / f"{stem}.svg", panel)
    print(f"{len(bps)} branch points; {len(clouds)} families drawn")
    return EXIT_DOMAIN if failed else EXIT_OK


def cmd_series(config: RunConfig) -> int:
    doc, P = load_pencil(config.pencil)
    _precheck(config, P)
    sha = pencil_sha256(doc)
    policy = _policy(config)
    M = config.order
    report = DeviationReport(pencil_sha256=sha)
    with mpmath.workdps(config.digits):
        for n in config.n:
            lams = {label: value for value, label in spectral_eigenvalues(P, n, policy)}
            for j in _families(config, P):
                try:
                    sol = eigenpolynomial(P, n, lams[j], policy, j=j)
                    direct = log_derivative_series(sol.p, sol.lam, M).coeffs
                    recurred = solve_recurrence(P, sol.lam, mpmath.mpf(n) / sol.lam, M, policy).coeffs
                    branch = (0,) + branch_series_at_infinity(P.curve, j, M, policy).coeffs
                except (SpectralError, ValueError) as e:
                    report.errors.append(f"n={n} j={j}: {type(e).__name__}: {e}")
                    logger.error(report.errors[-1])
                    continue
                rows = [[str(i), *split_complex(a, config.digits), *split_complex(b, config.digits), *split_complex(c, config.digits)]
                        for i, (a, b, c) in enumerate(zip(direct, recurred, pad(branch, M + 1)))]
                write_csv(config.out / f"series_n{n}_j{j}.csv",
                          ["i", "logderiv_re", "logderiv_im", "recurrence_re", "recurrence_im", "branch_re", "branch_im"],
                          rows, pencil_sha=sha, digits=config.digits, origin=f"series n={n} j={j}")
                if config.radius is not None:
                    for kind, check in (("branch", branch_deviation), ("cauchy", cauchy_deviation), ("algebraic", algebraic_defect)):
                        value = check(P, j, n, config.radius, 64, policy, solution=sol)
                        report.records.append(DeviationRecord(kind=kind, n=n, j=j, radius=config.radius, value=value))
    write_json(config.out / "deviations.json", report)
    return EXIT_DOMAIN if report.errors else EXIT_OK


def cmd_support(config: RunConfig) -> int:
    doc, P = load_pencil(config.pencil)
    _precheck(config, P)
    sha = pencil_sha256(doc)
    policy = _policy(config)
    bps = list(branch_points(P.curve, policy))
    write_csv(config.out / "branch_points.csv", ["index", "re", "im"], complex_rows(bps, config.digits),
              pencil_sha=sha, digits=config.digits, origin="branch points")
    families = _families(config, P)
    failures = 0

    if config.rect is not None and P.k >= 3:
        for fam in families:
            for triple in itertools.combinations(range(1, P.k + 1), 3):
                locus = gamma_locus(P, fam, triple, config.rect, config.res, policy)
                tag = "".join(str(t) for t in triple)
                write_csv(config.out / f"gamma_j{fam}_{tag}.csv", ["re", "im", "residual"],
                          [[repr(z.real), repr(z.imag), repr(float(e))] for z, e in zip(locus.points, locus.residuals)],
                          pencil_sha=sha, digits=config.digits, origin=f"gamma {triple} family {fam}")

    n = max(config.n)
    for result in run_items(P, [(n, fam) for fam in families], config):
        fam = result["j"]
        if "error" in result:
            failures += 1
            continue
        mu = RootMeasure(tuple(_roots_of(result)))
        try:
            seed = densest_cluster_seed(mu)
            pair = infer_pair(P, fam, mu, seed, policy)
            level = trace_level_curve(P, fam, pair, seed, step=config.res, max_len=LEVEL_MAX_LEN, policy=policy)
        except SpectralError as e:
            logger.error(f"support family {fam}: {type(e).__name__}: {e}")
            failures += 1
            continue
        write_csv(config.out / f"level_j{fam}.csv", ["re", "im", "density", "h"],
                  [[repr(z.real), repr(z.imag), repr(float(d)), repr(float(h))]
                   for z, d, h in zip(level.points, level.densities, level.h_values)],
                  pencil_sha=sha, digits=config.digits, origin=f"level curve {pair} family {fam}")
        window = 4.0 * mean_spacing(mu)
        out = DensityOut(pair=pair, family=fam, window=window, vertices=int(level.points.size),
                         closed=level.closed, stops=list(level.stops))
        try:
            density = density_vs_roots(level, mu, window)
            out.mean_ratio, out.spread = density.mean_ratio, density.spread
            out.atoms_near, out.atom_total = density.atoms_near, density.atom_total
            out.global_mass, out.predicted_mass = density.global_mass, density.predicted_mass
        except SparseWindow as e:
            logger.warning(f"density family {fam}: {e}")
        write_json(config.out / f"density_j{fam}.json", out)
        panel = Panel(title=f"support family {fam}", annotation=f"pair {pair}, {len(bps)} branch points")
        panel.add_cloud(mu.as_array(), "#1f77b4").add_polyline(level.points, "#d62728").add_branch_points(bps)
        write_panel(config.out / f"support_j{fam}.svg", panel)
    return EXIT_DOMAIN if failures else EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    from benchmarks.run_benchmark import DEFAULT_PENCIL, print_report, run_battery

    doc, P = load_pencil(config.pencil or DEFAULT_PENCIL)
    report = run_battery(P, pencil_sha256(doc), _policy(config))
    print_report(report)
    write_json(config.out / "verify.json", report)
    return EXIT_OK if report.passed else EXIT_DOMAIN


HANDLERS = {
    "check": cmd_check,
    "eigen": cmd_eigen,
    "fig1": cmd_fig1,
    "series": cmd_series,
    "support": cmd_support,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except ValidationError as e:
        print(f"Invalid arguments: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return HANDLERS[config.command](config)
    except SpectralError as e:
        logger.error(f"{config.command}: {type(e).__name__}: {e}")
        return EXIT_DOMAIN
    except (OSError, ValueError, json.JSONDecodeError) as e:
        logger.error(f"{config.command}: {type(e).__name__}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
