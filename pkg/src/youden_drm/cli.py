"""Command-line driver.

Exit codes: 0 success, 2 input error, 3 estimation failure, 4 degenerate fit
under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

from .core import BasisSpec, DataError, FitError, all_candidate_bases, validate
from .cutoff import estimate
from .dataio import parse_dataset
from .elfit import OptimizerSettings, fit_drm
from .gof import gof_test, select_basis, write_selection_csv
from .region import RegionError, bootstrap_estimates, build_region, write_boundary_csv
from .simulation import make_scenario, run_simulation, write_report_csv

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_DEGENERATE = 0, 2, 3, 4


class DegenerateFit(Exception):
    pass


def _settings(args) -> OptimizerSettings:
    return OptimizerSettings(max_iterations=args.max_iter, gradient_tolerance=args.tol)


def _load(args):
    data = parse_dataset(args.input)
    basis = BasisSpec.parse(args.basis)
    validate(data, basis)
    return data, basis


def cmd_fit(args) -> dict:
    data, basis = _load(args)
    fit = fit_drm(data, basis, _settings(args))
    sol, est = estimate(fit)
    if args.strict and sol.degenerate:
        raise DegenerateFit("; ".join(sol.warnings))
    return {
        "basis": list(basis.terms),
        "n0": data.n0,
        "n1": data.n1,
        "theta_hat": [float(v) for v in fit.theta],
        "loglik": fit.loglik,
        "cutoff": est.cutoff,
        "roots": list(sol.roots),
        "eta_hat": est.sensitivity,
        "tau_hat": est.specificity,
        "youden": est.youden,
        "warnings": list(sol.warnings),
    }


def cmd_region(args) -> dict:
    data, basis = _load(args)
    settings = _settings(args)
    fit = fit_drm(data, basis, settings)
    sol, est = estimate(fit)
    if args.strict and sol.degenerate:
        raise DegenerateFit("; ".join(sol.warnings))
    boot = bootstrap_estimates(data, basis, args.boot, args.seed, settings, args.threads)
    region = build_region(est, boot.sigma, data.n, args.level, args.kind)
    if args.boundary:
        write_boundary_csv(region, args.boundary)
    out = region.summary()
    out.update({
        "basis": list(basis.terms),
        "cutoff": est.cutoff,
        "boot": args.boot,
        "failed_refits": boot.n_failed,
        "seed": args.seed,
        "warnings": list(sol.warnings),
    })
    return out


def cmd_gof(args) -> dict:
    data, basis = _load(args)
    res = gof_test(data, basis, args.boot, args.seed, _settings(args), threads=args.threads)
    out = res.as_dict()
    out.update({"basis": list(basis.terms), "seed": args.seed})
    return out


def _candidates(spec: str) -> list[BasisSpec]:
    if spec == "all":
        return all_candidate_bases()
    return [BasisSpec.parse(s) for s in spec.split(";") if s.strip()]


def cmd_select(args) -> str:
    data = parse_dataset(args.input)
    rows = select_basis(data, _candidates(args.candidates), settings=_settings(args))
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["basis", "aic", "bic", "rank"])
    for r in rows:
        w.writerow([r.basis.label, f"{r.aic:.2f}", f"{r.bic:.2f}", "" if r.rank is None else r.rank])
    if args.out:
        write_selection_csv(rows, args.out)
    return buf.getvalue()


def cmd_simulate(args) -> dict:
    sc = make_scenario(args.family, args.jstar, args.n0, args.n1)
    rep = run_simulation(sc, args.reps, args.boot, args.kind, args.seed, args.level, args.threads)
    if args.csv:
        write_report_csv([rep], args.csv)
    return json.loads(rep.to_json())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="youden-drm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True, basis=True):
        if data:
            p.add_argument("--input", required=True, help="CSV with columns value, group (0/1)")
        if basis:
            p.add_argument("--basis", default="log_x", help="comma list of terms: x, x2, log_x, log_x2")
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--out", help="write the result here instead of stdout")

    p = sub.add_parser("fit", help="fit the DRM, estimate cut-off, sensitivity, specificity")
    common(p)
    p.add_argument("--strict", action="store_true", help="exit 4 on a degenerate fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("region", help="joint confidence region for (sensitivity, specificity)")
    common(p)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--kind", choices=("wald", "logit"), default="logit")
    p.add_argument("--boot", type=int, default=500)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--boundary", help="CSV file for boundary points (eta, tau)")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("gof", help="bootstrap goodness-of-fit test of the DRM")
    common(p)
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("select", help="rank candidate bases by AIC/BIC")
    common(p, basis=False)
    p.add_argument("--candidates", default="all",
                   help="'all' (15 combinations of x, log_x, x2, log_x2) or ';'-separated bases")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="Monte Carlo replication of a tabulated scenario")
    common(p, data=False, basis=False)
    p.add_argument("--family", choices=("lognormal", "gamma", "beta"), required=True)
    p.add_argument("--jstar", type=float, choices=(0.3, 0.5, 0.7), required=True)
    p.add_argument("--n0", type=int, default=50)
    p.add_argument("--n1", type=int, default=50)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--boot", type=int, default=300)
    p.add_argument("--kind", choices=("wald", "logit"), default="logit")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", help="also write a table row (CSV) here")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (FitError, RegionError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DegenerateFit as exc:
        print(f"degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DataError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = result if isinstance(result, str) else json.dumps(result, indent=2)
    if args.out and args.command != "select":
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
