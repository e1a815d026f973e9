"""Joint covariance of (sensitivity, specificity) and confidence regions.

Covariance comes from a within-group nonparametric bootstrap of the whole
estimator. The analytic ingredients of the asymptotic covariance (``B0``,
``B1``, ``B2``, ``H``) are computed as well; the remaining middle matrix of
the sandwich is not available in closed form here, so they are exposed for
inspection rather than used to build ``Sigma``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.special import expit, logit

from .core import BasisSpec, DrmFit, FitError, TwoSampleData, WeightedCdf, YoudenEstimate
from .cutoff import estimate_batch
from .elfit import DEFAULT_SETTINGS, OptimizerSettings, fit_drm_batch, mele_cdfs
from .rng import stream

N_BOUNDARY = 2048
BOOT_DEFAULT = 500
MAX_FAIL_FRACTION = 0.05
NEAR_ZERO_DENSITY = 1e-12

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_OPEN_LO = np.finfo(float).tiny
_OPEN_HI = np.nextafter(1.0, 0.0)


class RegionError(ValueError):
    """A confidence region cannot be built from the given inputs."""


# --------------------------------------------------------------------------- #
# Kernel density at the cut-off
# --------------------------------------------------------------------------- #


def silverman_bandwidth(cdf: WeightedCdf, n: int) -> float:
    """``1.06 n^(-1/5) min(IQR, sd)`` with both spreads taken from ``cdf``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    iqr = cdf.quantile(0.75) - cdf.quantile(0.25)
    sd = math.sqrt(cdf.var())
    spread = min(iqr, sd)
    if not spread > 0:
        # IQR can vanish on lumpy support while sd does not
        spread = sd if iqr <= 0 else iqr
    if not spread > 0:
        raise ValueError("degenerate distribution: all mass at a single point")
    return 1.06 * n ** (-0.2) * spread


@dataclass(frozen=True, eq=False)
class KernelDensityEstimate:
    """Gaussian-kernel smoothing of a weighted step CDF."""

    base: WeightedCdf
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - self.base.support) / self.bandwidth
        dens = np.exp(-0.5 * u * u) @ self.base.masses * (_INV_SQRT_2PI / self.bandwidth)
        return float(dens) if dens.ndim == 0 else dens


def kde_eval(kde: KernelDensityEstimate, x):
    return kde(x)


def density_at_cutoff(fit: DrmFit, cutoff: float) -> float:
    """Average of the two smoothed MELE densities at the cut-off."""
    F0, F1 = mele_cdfs(fit)
    n = fit.data.n
    f0 = KernelDensityEstimate(F0, silverman_bandwidth(F0, n))(cutoff)
    f1 = KernelDensityEstimate(F1, silverman_bandwidth(F1, n))(cutoff)
    f_bar = 0.5 * (f0 + f1)
    if f_bar < NEAR_ZERO_DENSITY:
        warnings.warn(f"density at the cut-off is {f_bar:.3g}; the fit is near-degenerate", RuntimeWarning, stacklevel=2)
    return f_bar


# --------------------------------------------------------------------------- #
# Analytic pieces of the asymptotic covariance
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class AsymptoticPieces:
    B0: np.ndarray  # (k,)
    B1: np.ndarray  # (k,)
    B2: np.ndarray  # (k, k)
    H: np.ndarray  # (2, k + 2)
    f_bar: float


def pieces_from_weights(x, weights, theta, basis: BasisSpec, rho: float, cutoff: float, f_bar: float) -> AsymptoticPieces:
    """Summation estimates of the pieces, with baseline masses ``weights`` on ``x``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    theta = np.asarray(theta, dtype=float)
    Q = basis.Q(x)
    h1 = expit(Q @ theta + math.log(rho / (1.0 - rho)))
    below = x <= cutoff
    B0 = -((w * h1)[below] @ Q[below])
    B2 = (Q * (w * h1)[:, None]).T @ Q
    slope = float(theta[1:] @ basis.dq(cutoff))
    if slope == 0 or not np.isfinite(slope):
        raise FitError("beta' q'(c) vanishes at the cut-off; the density crossing is degenerate")
    B1 = f_bar * basis.Q(cutoff) / slope
    try:
        np.linalg.cholesky(B2)
    except np.linalg.LinAlgError as exc:
        raise FitError("B2 is not positive definite (identifiability condition fails)") from exc
    B2inv = np.linalg.inv(B2)
    k = theta.size
    H = np.zeros((2, k + 2))
    H[0, :k] = (B0 / rho + B1 / (1.0 - rho)) @ B2inv
    H[0, k:] = (0.0, -1.0)
    H[1, :k] = ((B0 - B1) / (1.0 - rho)) @ B2inv
    H[1, k:] = (1.0, 0.0)
    return AsymptoticPieces(B0, B1, B2, H, float(f_bar))


def compute_pieces(fit: DrmFit, cutoff: float, f_bar: float) -> AsymptoticPieces:
    if np.linalg.norm(fit.beta) < 1e-8:
        raise FitError("degenerate fit: beta is numerically zero")
    return pieces_from_weights(fit.data.pooled, fit.weights, fit.theta, fit.basis, fit.data.rho, cutoff, f_bar)


# --------------------------------------------------------------------------- #
# Bootstrap covariance
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    replicates: np.ndarray  # (B_ok, 2) rows of (eta, tau)
    n_failed: int
    n: int

    @property
    def sigma(self) -> np.ndarray:
        return self.n * np.cov(self.replicates, rowvar=False, ddof=1)


def bootstrap_estimates(
    data: TwoSampleData,
    basis: BasisSpec,
    B: int = BOOT_DEFAULT,
    seed: int | tuple = 0,
    settings: OptimizerSettings = DEFAULT_SETTINGS,
    threads: int = 1,
) -> BootstrapResult:
    """Within-group resampling of the full fit / cut-off / accuracy pipeline.

    Replicate ``b`` draws from its own stream ``(*seed, b)``, so results do not
    depend on how replicates are batched. ``seed`` may be an int or a tuple key.
    """
    if B < 100:
        raise ValueError("bootstrap needs B >= 100")
    n0, n1 = data.n0, data.n1
    H = np.empty((B, n0))
    D = np.empty((B, n1))
    key = tuple(seed) if isinstance(seed, tuple) else (seed,)
    for b in range(B):
        g = stream(*key, b)
        H[b] = data.healthy[g.integers(0, n0, n0)]
        D[b] = data.diseased[g.integers(0, n1, n1)]
    bf = fit_drm_batch(H, D, basis, settings, threads)
    _, eta, tau = estimate_batch(bf)
    good = np.isfinite(eta) & np.isfinite(tau)
    n_failed = int(B - good.sum())
    if n_failed > MAX_FAIL_FRACTION * B:
        raise FitError(f"{n_failed} of {B} bootstrap refits failed")
    reps = np.column_stack([eta[good], tau[good]])
    return BootstrapResult(reps, n_failed, data.n)


def bootstrap_sigma(data: TwoSampleData, basis: BasisSpec, B: int = BOOT_DEFAULT, seed: int = 0,
                    settings: OptimizerSettings = DEFAULT_SETTINGS, threads: int = 1) -> np.ndarray:
    """``n`` times the bootstrap covariance of ``(eta_hat, tau_hat)``."""
    return bootstrap_estimates(data, basis, B, seed, settings, threads).sigma


# --------------------------------------------------------------------------- #
# Regions
# --------------------------------------------------------------------------- #


def chi2_2(level: float) -> float:
    """Upper quantile of chi-square with 2 df; closed form ``-2 log(1 - level)``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return -2.0 * math.log1p(-level)


def _sqrtm_psd(S):
    vals, vecs = np.linalg.eigh(S)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T


def _check_sigma(S):
    S = np.asarray(S, dtype=float)
    if S.shape != (2, 2) or not np.all(np.isfinite(S)):
        raise RegionError("sigma must be a finite 2x2 matrix")
    S = 0.5 * (S + S.T)
    vals = np.linalg.eigvalsh(S)
    if vals[0] <= 1e-14 * max(vals[1], 1e-300):
        raise RegionError("sigma is singular or not positive definite")
    return S


def logit_jacobian(mu) -> np.ndarray:
    """Diagonal matrix ``diag(1 / (mu_i (1 - mu_i)))``."""
    mu = np.asarray(mu, dtype=float)
    return np.diag(1.0 / (mu * (1.0 - mu)))


@dataclass(frozen=True, eq=False)
class ConfidenceRegion:
    center: np.ndarray  # (eta_hat, tau_hat)
    sigma: np.ndarray  # Sigma_hat, scale of sqrt(n)(mu_hat - mu)
    n: int
    level: float
    kind: Literal["identity", "logit"]
    boundary: np.ndarray  # (N, 2) in (eta, tau) coordinates

    @property
    def chi2(self) -> float:
        return chi2_2(self.level)

    @property
    def native_sigma(self) -> np.ndarray:
        """Covariance in the coordinates where the region is an ellipse."""
        if self.kind == "identity":
            return self.sigma
        M = logit_jacobian(self.center)
        return M @ self.sigma @ M.T

    @property
    def area(self) -> float:
        return region_area(self)

    def summary(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "sigma": [[float(v) for v in row] for row in self.sigma],
            "n": int(self.n),
            "level": float(self.level),
            "kind": self.kind,
            "area": float(region_area(self)),
        }


def _ellipse(center, S, n, chi2, npts=N_BOUNDARY):
    t = np.linspace(0.0, 2.0 * np.pi, npts, endpoint=False)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    return center + math.sqrt(chi2 / n) * circle @ _sqrtm_psd(S).T


def wald_region(est: YoudenEstimate, sigma, n: int, level: float = 0.95) -> ConfidenceRegion:
    S = _check_sigma(sigma)
    mu = est.mu
    boundary = _ellipse(mu, S, n, chi2_2(level))
    return ConfidenceRegion(mu, S, int(n), float(level), "identity", boundary)


def logit_region(est: YoudenEstimate, sigma, n: int, level: float = 0.95) -> ConfidenceRegion:
    S = _check_sigma(sigma)
    mu = est.mu
    if np.any(mu <= 0) or np.any(mu >= 1):
        raise RegionError(
            f"logit region needs 0 < eta, tau < 1; got ({mu[0]:g}, {mu[1]:g}). "
            "Estimates on the boundary usually mean a degenerate or separated sample; use the Wald region or more data"
        )
    M = logit_jacobian(mu)
    S_logit = M @ S @ M.T
    boundary = expit(_ellipse(logit(mu), S_logit, n, chi2_2(level)))
    # expit rounds to exactly 0 or 1 beyond |logit| ~ 37 (or ~745); keep the image open
    boundary = np.clip(boundary, _OPEN_LO, _OPEN_HI)
    return ConfidenceRegion(mu, S, int(n), float(level), "logit", boundary)


def build_region(est, sigma, n, level=0.95, kind="logit") -> ConfidenceRegion:
    if kind in ("logit",):
        return logit_region(est, sigma, n, level)
    if kind in ("wald", "identity"):
        return wald_region(est, sigma, n, level)
    raise ValueError(f"unknown region kind {kind!r}")


def shoelace_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def region_area(region: ConfidenceRegion) -> float:
    if region.kind == "identity":
        return math.pi * region.chi2 * math.sqrt(np.linalg.det(region.sigma)) / region.n
    return shoelace_area(region.boundary)


def region_statistic(region: ConfidenceRegion, mu) -> float:
    """Quadratic form ``n d' S^-1 d`` in the region's native coordinates.

    Infinite for a logit region and ``mu`` outside the open unit square.
    """
    mu = np.asarray(mu, dtype=float)
    if region.kind == "logit":
        if np.any(mu <= 0) or np.any(mu >= 1):
            return math.inf
        d = logit(region.center) - logit(mu)
    else:
        d = region.center - mu
    return float(region.n * d @ np.linalg.solve(region.native_sigma, d))


def region_contains(region: ConfidenceRegion, mu) -> bool:
    return region_statistic(region, mu) <= region.chi2


# --------------------------------------------------------------------------- #
# Export
# --------------------------------------------------------------------------- #


def write_boundary_csv(region: ConfidenceRegion, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "tau"])
        for eta, tau in region.boundary:
            w.writerow([repr(float(eta)), repr(float(tau))])


def write_summary_json(region: ConfidenceRegion, path, extra: Optional[dict] = None) -> None:
    out = region.summary()
    if extra:
        out.update(extra)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
