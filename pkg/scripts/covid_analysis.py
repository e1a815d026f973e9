"""Full data analysis of a two-group antibody file: basis selection, fit, GOF, logit region.

Expects a CSV with columns value, group (0 negative, 1 positive); see
scripts/fetch_covid_data.py for where the file should live.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from youden_drm import BasisSpec, all_candidate_bases, estimate, fit_drm, gof_test, logit_region
from youden_drm.dataio import parse_dataset
from youden_drm.gof import select_basis
from youden_drm.region import bootstrap_estimates, region_area, write_boundary_csv

DEFAULT = Path(__file__).resolve().parents[1] / "data" / "covid_antibody.csv"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", type=Path, default=DEFAULT)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--boot", type=int, default=500)
    ap.add_argument("--gof-boot", type=int, default=1000)
    ap.add_argument("--boundary", type=Path)
    args = ap.parse_args(argv)
    if not args.input.exists():
        print(f"{args.input} not found; run scripts/fetch_covid_data.py for instructions", file=sys.stderr)
        return 2

    data = parse_dataset(args.input)
    print(f"n0={data.n0} n1={data.n1} rho={data.rho:.3f}")
    print(f"{'basis':<32}{'AIC':>10}{'BIC':>10}")
    rows = select_basis(data, all_candidate_bases())
    for r in rows:
        print(f"{r.basis.label:<32}{r.aic:10.2f}{r.bic:10.2f}")

    basis = rows[0].basis if rows[0].rank == 1 else BasisSpec(("log_x",))
    fit = fit_drm(data, basis)
    sol, est = estimate(fit)
    gof = gof_test(data, basis, args.gof_boot, seed=args.seed, fit=fit)
    boot = bootstrap_estimates(data, basis, args.boot, seed=args.seed)
    region = logit_region(est, boot.sigma, data.n)
    if args.boundary:
        write_boundary_csv(region, args.boundary)
    print(json.dumps({
        "basis": basis.label,
        "theta_hat": [float(v) for v in fit.theta],
        "cutoff": sol.cutoff,
        "eta_hat": est.sensitivity,
        "tau_hat": est.specificity,
        "youden": est.youden,
        "gof_p_value": gof.p_value,
        "sigma": boot.sigma.tolist(),
        "area_x100": 100 * region_area(region),
    }, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
