"""Command-line interface: ``gme approx | mc | compare | sweep | selftest``.

Exit status is 0 on success, 1 when a selftest check is out of tolerance and
2 for invalid arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from decimal import Decimal, InvalidOperation

import numpy as np

from gme.errors import (
    AssemblyMismatch,
    DegenerateParameter,
    InvalidArgument,
    PreconditionError,
    ValidityRegionError,
)
from gme.mixture import MixtureConfig, reduce_dimension
from gme.oracle import McSettings, component_bound, run_average
from gme.series_brute import (
    MomentName,
    c1_expected,
    c2_expected,
    moment_closed_form,
    moment_mc_table,
    series_coefficients,
    entropy_series,
)
from gme.series_det import build_P, build_Q, det_closed_form, det_numeric, entropy_det
from gme.spectral import eigenbasis, identity_suite, m_matrix

CSV_COLUMNS = ("mu", "h_series0", "h_series1", "h_series2", "h_det", "h_mc", "h_mc_stderr",
               "bound_gauss_mean", "bound_component", "residual2")

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_mu_grid(text: str) -> list[float]:
    """``start:stop:step`` with ``stop`` included; a bare number is a one-point grid.

    Decimal arithmetic keeps grid points such as 0.15 exact in their shortest
    decimal form.
    """
    parts = text.split(":")
    try:
        nums = [Decimal(p) for p in parts]
    except InvalidOperation:
        raise UsageError(f"cannot parse mu grid {text!r}") from None
    if len(nums) == 1:
        grid = [nums[0]]
    elif len(nums) == 3:
        start, stop, step = nums
        if step <= 0:
            raise UsageError("mu grid step must be > 0")
        if stop < start:
            raise UsageError("mu grid stop must be >= start")
        count = int((stop - start) / step) + 1
        grid = [start + i * step for i in range(count)]
    else:
        raise UsageError(f"mu grid must be start:stop:step, got {text!r}")
    values = [float(v) for v in grid]
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise UsageError("mu values must be finite and >= 0")
    return values


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _config(args, mu: float) -> MixtureConfig:
    return MixtureConfig(args.n, args.q, args.sigma2, mu)


def _settings(args) -> McSettings:
    return McSettings(samples_per_center=args.samples, center_draws=args.center_draws,
                      seed=args.seed, estimator=args.estimator, threads=args.threads)


def _reduction_info(config: MixtureConfig) -> dict:
    reduced, offset = reduce_dimension(config)
    return {"reduced_n": reduced.n, "reduction_offset": offset}


def _det_or_nan(config: MixtureConfig) -> float:
    try:
        return entropy_det(config).value
    except ValidityRegionError:
        return math.nan


def compare_row(args, mu: float) -> dict:
    config = _config(args, mu)
    run = run_average(config, _settings(args))
    series = [entropy_series(config, k).value for k in (0, 1, 2)]
    return {
        "mu": mu,
        "h_series0": series[0],
        "h_series1": series[1],
        "h_series2": series[2],
        "h_det": _det_or_nan(config),
        "h_mc": run.value,
        "h_mc_stderr": run.stderr,
        "bound_gauss_mean": run.gauss_bound_mean,
        "bound_component": component_bound(config),
        "residual2": run.value - series[2],
    }


def _residuals(row: dict) -> dict:
    return {
        "mu": row["mu"],
        "residual0": row["h_mc"] - row["h_series0"],
        "residual1": row["h_mc"] - row["h_series1"],
        "residual2": row["residual2"],
        "residual_det": row["h_mc"] - row["h_det"],
        "stderr": row["h_mc_stderr"],
    }


def cmd_approx(args) -> tuple[list, list, int]:
    config = _config(args, args.mu)
    if args.method == "det":
        try:
            est = entropy_det(config)
        except ValidityRegionError as exc:
            raise UsageError(str(exc)) from None
    else:
        est = entropy_series(config, args.order)
    out = est.to_dict()
    out.update(_reduction_info(config))
    return [out], [], EXIT_OK


def cmd_mc(args) -> tuple[list, list, int]:
    config = _config(args, args.mu)
    out = run_average(config, _settings(args)).estimate().to_dict()
    out.update(_reduction_info(config))
    return [out], [], EXIT_OK


def cmd_compare(args) -> tuple[list, list, int]:
    row = compare_row(args, args.mu)
    return [row], [_residuals(row)], EXIT_OK


def cmd_sweep(args) -> tuple[list, list, int]:
    rows = [compare_row(args, mu) for mu in parse_mu_grid(args.mu_grid)]
    return rows, [_residuals(r) for r in rows], EXIT_OK


SPECTRAL_MUS = (1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.5)
DET_MUS = (1e-3, 1e-2, 0.1)
MOMENT_CASES = ((1, 2), (2, 3), (3, 5), (4, 8))


def spectral_residuals(q_max: int) -> dict[str, float]:
    """Worst orthogonality, diagonalization and identity residuals for q = 2..q_max."""
    ortho = diag = ident = 0.0
    for q in range(2, q_max + 1):
        for mu in SPECTRAL_MUS:
            spec = eigenbasis(q, mu)
            lam = spec.basis
            ortho = max(ortho, float(np.abs(lam.T @ lam - np.eye(q)).max()))
            want = np.diag(np.concatenate([np.ones(q - 2), [spec.m1, spec.m2]]))
            diag = max(diag, float(np.abs(lam.T @ m_matrix(q, mu) @ lam - want).max()))
            ident = max(ident, identity_suite(q, mu))
    return {"orthogonality": ortho, "diagonalization": diag, "identities": ident}


def determinant_residual(q_max: int) -> float:
    """Worst relative gap between closed-form and LU determinants for q = 3..q_max."""
    worst = 0.0
    for q in range(3, q_max + 1):
        for mu in DET_MUS:
            p = build_P(q, mu)
            qs = [build_Q(q, mu, ell) for ell in range(1, q)]
            cases = []
            for t in (1, 2, 3):
                cases.append((det_closed_form("IP", q, mu, t), ((t, p),)))
                for ell, m in enumerate(qs, 1):
                    cases.append((det_closed_form("IQ", q, mu, t, ell), ((t, m),)))
            for ell, m in enumerate(qs, 1):
                cases.append((det_closed_form("IPQ", q, mu, 1, ell), (p, m)))
                for ell2, m2 in enumerate(qs, 1):
                    if ell2 != ell:
                        cases.append((det_closed_form("IQQ", q, mu, 1, ell, ell2), (m, m2)))
            for closed, terms in cases:
                num = det_numeric(*terms, check_pd=False)
                worst = max(worst, abs(closed - num) / abs(num))
    return worst


def moment_zscore(q_max: int, samples: int, seed: int, threads=None) -> float:
    """Largest |MC mean - closed form| / stderr over the moment table."""
    worst = 0.0
    for n, q in MOMENT_CASES:
        if q > q_max:
            continue
        table = moment_mc_table(n, q, samples, seed, threads)
        for name in MomentName:
            mean, se = table[name]
            exact = moment_closed_form(name, n, q)
            if se == 0:
                z = 0.0 if mean == exact else math.inf
            else:
                z = abs(mean - exact) / se
            worst = max(worst, z)
    return worst


def assembly_residual(q_max: int) -> float:
    worst = 0.0
    for q in range(2, min(q_max, 12) + 1):
        for n in range(1, q + 1):
            try:
                c = series_coefficients(n, q)
            except AssemblyMismatch:
                return math.inf
            worst = max(worst, abs(c.c1_expect / c1_expected(n, q) - 1),
                        abs(c.c2_expect / c2_expected(n, q) - 1))
    return worst


def cmd_selftest(args) -> tuple[list, list, int]:
    if args.q_max < 2:
        raise UsageError("--q-max must be >= 2")
    checks = []
    for name, value in spectral_residuals(args.q_max).items():
        tol = {"orthogonality": 1e-12, "diagonalization": 1e-11, "identities": 1e-10}[name]
        checks.append((f"spectral_{name}", value, tol))
    if args.q_max >= 3:
        checks.append(("determinant_equivalence", determinant_residual(args.q_max), 1e-11))
    checks.append(("coefficient_assembly", assembly_residual(args.q_max), 1e-9))
    checks.append(("moment_table_zscore",
                   moment_zscore(args.q_max, args.moment_samples, args.seed, args.threads), 5.0))
    rows = [{"check": c, "max_residual": v, "tolerance": t, "pass": bool(v < t)}
            for c, v, t in checks]
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['check']}: max residual {r['max_residual']:.3e} "
              f"(tolerance {r['tolerance']:g})", file=sys.stderr)
    code = EXIT_OK if all(r["pass"] for r in rows) else EXIT_TOLERANCE
    return rows, [], code


COMMANDS = {
    "approx": cmd_approx,
    "mc": cmd_mc,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text!r}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gme", description="Entropy of Gaussian mixtures with random centers.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="output format (default: csv for sweep, json otherwise)")
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--threads", type=_pos_int, default=None,
                        help="worker threads (default: $GME_THREADS or CPU count)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--no-timing", action="store_true",
                        help="write runtime_ms as null so JSON reports are reproducible")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--n", type=_pos_int, required=True)
    model.add_argument("--q", type=int, required=True)
    model.add_argument("--sigma2", type=float, default=1.0)

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--samples", type=int, default=100_000, help="points per center draw")
    mc.add_argument("--center-draws", type=int, default=100)
    mc.add_argument("--estimator", choices=("plugin", "gaussian-cv"), default="plugin")

    p = sub.add_parser("approx", parents=[common, model], help="series approximation")
    p.add_argument("--mu", type=_nonneg_float, required=True)
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=2)
    p.add_argument("--method", choices=("brute", "det"), default="brute")

    p = sub.add_parser("mc", parents=[common, model, mc], help="Monte Carlo estimate")
    p.add_argument("--mu", type=_nonneg_float, required=True)

    p = sub.add_parser("compare", parents=[common, model, mc], help="series, MC and bounds at one mu")
    p.add_argument("--mu", type=_nonneg_float, required=True)

    p = sub.add_parser("sweep", parents=[common, model, mc], help="compare over a mu grid")
    p.add_argument("--mu-grid", required=True, help="start:stop:step, stop included")

    p = sub.add_parser("selftest", parents=[common], help="run the built-in consistency checks")
    p.add_argument("--q-max", type=int, default=16)
    p.add_argument("--moment-samples", type=int, default=200_000)
    return parser


def _spec_echo(args) -> dict:
    spec = {k: v for k, v in vars(args).items() if k not in ("out", "no_timing")}
    return spec


def render(args, rows: list, residuals: list, runtime_ms) -> str:
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    if fmt == "json":
        report = {"spec": _spec_echo(args), "results": rows, "residuals": residuals,
                  "runtime_ms": runtime_ms}
        return json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    if args.command in ("compare", "sweep"):
        columns = CSV_COLUMNS
    else:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            rows, residuals, code = COMMANDS[args.command](args)
    except (UsageError, InvalidArgument, PreconditionError, DegenerateParameter,
            ValidityRegionError) as exc:
        print(f"gme {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    runtime_ms = None if args.no_timing else round((time.perf_counter() - start) * 1000.0, 3)
    text = render(args, rows, residuals, runtime_ms)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
