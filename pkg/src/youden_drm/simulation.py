"""Monte Carlo harness: scenarios with known truth, replication loop, RB/MSE/CP/ACR."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special, stats

from .core import BasisSpec, FitError, TwoSampleData
from .cutoff import estimate
from .elfit import DEFAULT_SETTINGS, OptimizerSettings, fit_drm
from .region import RegionError, bootstrap_estimates, build_region, region_area, region_contains
from .rng import stream

FAMILIES = ("lognormal", "gamma", "beta")

# (family, J*) -> ((a0, b0, a1, b1), (eta+*, tau+*)) reference values
TABLE1 = {
    ("lognormal", 0.3): ((0.0, 1.0, 0.77, 1.0), (0.65, 0.65)),
    ("lognormal", 0.5): ((0.0, 1.0, 1.35, 1.0), (0.75, 0.75)),
    ("lognormal", 0.7): ((0.0, 1.0, 2.07, 1.0), (0.85, 0.85)),
    ("gamma", 0.3): ((1.5, 1.0, 2.47, 1.0), (0.697, 0.604)),
    ("gamma", 0.5): ((1.5, 1.0, 3.39, 1.0), (0.786, 0.714)),
    ("gamma", 0.7): ((1.5, 1.0, 4.81, 1.0), (0.874, 0.826)),
    ("beta", 0.3): ((1.5, 3.0, 2.77, 3.0), (0.727, 0.573)),
    ("beta", 0.5): ((1.5, 3.0, 4.25, 3.0), (0.814, 0.686)),
    ("beta", 0.7): ((1.5, 3.0, 7.09, 3.0), (0.896, 0.804)),
}

LOG_BASIS = BasisSpec(("log_x",))
MAX_FAIL_FRACTION = 0.02


def distribution(family: str, a: float, b: float):
    """Frozen scipy distribution. Lognormal ``b`` is the log-scale variance, gamma ``b`` the rate."""
    if family == "lognormal":
        return stats.lognorm(s=math.sqrt(b), scale=math.exp(a))
    if family == "gamma":
        return stats.gamma(a, scale=1.0 / b)
    if family == "beta":
        return stats.beta(a, b)
    raise ValueError(f"unknown family {family!r}")


def drm_parameters(family: str, params) -> Optional[tuple[float, float]]:
    """Closed-form ``(alpha, beta)`` of ``f1/f0 = exp(alpha + beta log x)``, or None.

    Exists when the two groups share their second parameter.
    """
    a0, b0, a1, b1 = params
    if b0 != b1:
        return None
    if family == "lognormal":
        return ((a0 * a0 - a1 * a1) / (2.0 * b0), (a1 - a0) / b0)
    if family == "gamma":
        return (a1 * math.log(b1) - a0 * math.log(b0) + special.gammaln(a0) - special.gammaln(a1), a1 - a0)
    if family == "beta":
        return (special.betaln(a0, b0) - special.betaln(a1, b1), a1 - a0)
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class Truth:
    cutoff: float
    sensitivity: float
    specificity: float

    @property
    def youden(self) -> float:
        return self.sensitivity + self.specificity - 1.0


def true_values(family: str, params) -> Truth:
    """Population cut-off (density crossing) and accuracy at it."""
    a0, b0, a1, b1 = params
    if (a0, b0) == (a1, b1):
        raise ValueError("identical group distributions: no density crossing, J = 0")
    d0, d1 = distribution(family, a0, b0), distribution(family, a1, b1)
    theta = drm_parameters(family, params)
    if theta is not None and theta[1] != 0:
        c = math.exp(-theta[0] / theta[1])
    else:
        c = _crossing_by_bisection(d0, d1)
    return Truth(float(c), float(d1.sf(c)), float(d0.cdf(c)))


def _crossing_by_bisection(d0, d1) -> float:
    lo = min(d0.ppf(1e-8), d1.ppf(1e-8))
    hi = max(d0.ppf(1 - 1e-8), d1.ppf(1 - 1e-8))
    grid = np.linspace(lo, hi, 4001)[1:-1]
    diff = d1.logpdf(grid) - d0.logpdf(grid)
    ok = np.isfinite(diff)
    grid, diff = grid[ok], diff[ok]
    idx = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    if idx.size == 0:
        raise ValueError("no density crossing found for these parameters")

    def f(x):
        return d1.logpdf(x) - d0.logpdf(x)

    roots = [optimize.bisect(f, grid[i], grid[i + 1], xtol=1e-10) for i in idx]
    return max(roots, key=lambda c: d0.cdf(c) - d1.cdf(c))


@dataclass(frozen=True)
class Scenario:
    family: str
    j_star: float
    params: tuple[float, float, float, float]
    truth: Truth
    n0: int
    n1: int
    basis: BasisSpec = LOG_BASIS

    def sample(self, rng: np.random.Generator) -> TwoSampleData:
        a0, b0, a1, b1 = self.params
        return TwoSampleData(_draw(self.family, a0, b0, self.n0, rng), _draw(self.family, a1, b1, self.n1, rng))

    @property
    def label(self) -> str:
        return f"{self.family} J*={self.j_star} (n0,n1)=({self.n0},{self.n1})"


def _draw(family, a, b, size, rng):
    if family == "lognormal":
        return np.exp(a + math.sqrt(b) * rng.standard_normal(size))
    if family == "gamma":
        return rng.gamma(a, 1.0 / b, size)
    if family == "beta":
        return rng.beta(a, b, size)
    raise ValueError(f"unknown family {family!r}")


def make_scenario(family: str, j_star: float, n0: int = 50, n1: int = 50) -> Scenario:
    key = (family, round(float(j_star), 2))
    if key not in TABLE1:
        raise ValueError(f"no tabulated configuration for family={family!r}, J*={j_star}")
    params, _ = TABLE1[key]
    return Scenario(family, key[1], params, true_values(family, params), int(n0), int(n1))


# --------------------------------------------------------------------------- #
# Replication
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    failed: bool = False
    eta: float = math.nan
    tau: float = math.nan
    cutoff: float = math.nan
    covered: bool = False
    area: float = math.nan
    error: str = ""


def simulate_replicate(
    scenario: Scenario,
    index: int,
    seed: int,
    B_boot: int = 300,
    kind: str = "logit",
    level: float = 0.95,
    settings: OptimizerSettings = DEFAULT_SETTINGS,
) -> ReplicateResult:
    """One replicate: draw, fit, estimate, bootstrap the covariance, build the region.

    ``B_boot = 0`` skips the region (point estimation only).
    """
    data = scenario.sample(stream(seed, index, 0))
    try:
        fit = fit_drm(data, scenario.basis, settings)
        sol, est = estimate(fit)
        if B_boot <= 0:
            return ReplicateResult(index, eta=est.sensitivity, tau=est.specificity, cutoff=sol.cutoff)
        boot = bootstrap_estimates(data, scenario.basis, B_boot, (seed, index, 1), settings)
        region = build_region(est, boot.sigma, data.n, level, kind)
    except (FitError, RegionError) as exc:
        return ReplicateResult(index, failed=True, error=f"{type(exc).__name__}: {exc}")
    truth = (scenario.truth.sensitivity, scenario.truth.specificity)
    return ReplicateResult(
        index,
        eta=est.sensitivity,
        tau=est.specificity,
        cutoff=sol.cutoff,
        covered=region_contains(region, truth),
        area=region_area(region),
    )


@dataclass(frozen=True)
class SimulationReport:
    """Aggregates over successful replicates; RB in %, MSE and ACR scaled by 100, CP in %."""

    family: str
    n0: int
    n1: int
    j_star: float
    rb_eta: float
    mse_eta_x100: float
    rb_tau: float
    mse_tau_x100: float
    cp: float
    acr_x100: float
    replicates: int
    failures: int
    seed: int
    valid: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    CSV_COLUMNS = ("distribution", "n0", "n1", "J*", "RB_eta", "MSE_eta", "RB_tau", "MSE_tau", "CP", "ACR", "failures")

    def csv_row(self) -> list:
        return [self.family, self.n0, self.n1, self.j_star,
                f"{self.rb_eta:.2f}", f"{self.mse_eta_x100:.2f}", f"{self.rb_tau:.2f}", f"{self.mse_tau_x100:.2f}",
                f"{self.cp:.1f}", f"{self.acr_x100:.2f}", self.failures]


def aggregate(scenario: Scenario, results, seed: int) -> SimulationReport:
    results = sorted(results, key=lambda r: r.index)
    good = [r for r in results if not r.failed]
    L = len(results)
    failures = L - len(good)
    eta_true, tau_true = scenario.truth.sensitivity, scenario.truth.specificity
    eta = np.array([r.eta for r in good])
    tau = np.array([r.tau for r in good])

    def rb(v, t):
        return float(np.mean(v - t) / t * 100.0) if v.size else math.nan

    def mse(v, t):
        return float(np.mean((v - t) ** 2) * 100.0) if v.size else math.nan

    areas = np.array([r.area for r in good])
    has_region = areas.size > 0 and np.all(np.isfinite(areas))
    cp = float(np.mean([r.covered for r in good]) * 100.0) if has_region else math.nan
    acr = float(areas.mean() * 100.0) if has_region else math.nan
    return SimulationReport(
        scenario.family, scenario.n0, scenario.n1, scenario.j_star,
        rb(eta, eta_true), mse(eta, eta_true), rb(tau, tau_true), mse(tau, tau_true),
        cp, acr, L, failures, int(seed), valid=failures <= MAX_FAIL_FRACTION * L,
    )


def run_simulation(
    scenario: Scenario,
    L: int,
    B_boot: int = 300,
    region_kind: str = "logit",
    seed: int = 0,
    level: float = 0.95,
    threads: int = 1,
    replicate: Callable[..., ReplicateResult] = simulate_replicate,
) -> SimulationReport:
    """Run ``L`` replicates (optionally on a thread pool) and aggregate.

    ``replicate(scenario, index, seed, B_boot, kind, level)`` is swappable for
    testing the aggregation with stub estimators.
    """
    if L < 1:
        raise ValueError("L must be >= 1")

    def one(i):
        return replicate(scenario, i, seed, B_boot, region_kind, level)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(L)))
    else:
        results = [one(i) for i in range(L)]
    return aggregate(scenario, results, seed)


def write_report_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SimulationReport.CSV_COLUMNS)
        for r in reports:
            w.writerow(r.csv_row())
