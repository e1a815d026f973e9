"""Maximum empirical likelihood under the two-sample density ratio model.

With the weights profiled out, the log-likelihood becomes a concave function
of ``theta`` alone (up to the constant ``-n log n``)::

    l(theta) = sum_{diseased} theta'Q(x) - sum_{pooled} log{1 - rho + rho exp(theta'Q(x))}

which is a logistic regression of group membership on ``Q(x)`` with offset
``logit(rho)``. The maximizer gives the baseline masses in closed form,
``p = 1 / [n {1 - rho + rho exp(theta'Q(x))}]``.

The Newton solver below works on a batch of equally-sized datasets at once so
that bootstrap refits are vectorized; a single fit is a batch of one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .core import BasisSpec, DrmFit, FitError, TwoSampleData, WeightedCdf

_EPS = np.finfo(float).eps

OK, MAX_ITER, SEPARATED, STALLED = 0, 1, 2, 3
_STATUS_TEXT = {OK: "ok", MAX_ITER: "max iterations", SEPARATED: "separation", STALLED: "line search stalled"}


class ConvergenceError(FitError):
    """Newton iterations did not reach the gradient tolerance."""

    def __init__(self, msg, theta=None, grad_norm=None, iterations=None):
        super().__init__(msg)
        self.theta = theta
        self.grad_norm = grad_norm
        self.iterations = iterations


class SeparationError(ConvergenceError):
    """The groups are perfectly separated by the basis; no finite maximizer."""


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-9
    initial_theta: Optional[tuple] = None
    halving: float = 0.5
    max_halvings: int = 40
    divergence_norm: float = 1e6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be > 0")
        if not 0 < self.halving < 1:
            raise ValueError("halving factor must lie in (0, 1)")


DEFAULT_SETTINGS = OptimizerSettings()


def _softplus(z):
    # log(1 + e^z), stable for large |z|
    return np.logaddexp(0.0, z)


# --------------------------------------------------------------------------- #
# Dual objective (public, unscaled)
# --------------------------------------------------------------------------- #


def dual_log_likelihood(theta, data: TwoSampleData, basis: BasisSpec):
    """Profiled log-likelihood, gradient and Hessian at ``theta``.

    Returns ``(value, gradient, hessian)``. ``value`` excludes the constant
    ``-n log n`` so that ``value == 0`` at ``theta == 0``.
    """
    theta = np.asarray(theta, dtype=float)
    Q = basis.Q(data.pooled)
    rho = data.rho
    t = Q @ theta
    z = t + np.log(rho / (1.0 - rho))
    # log(1 - rho + rho e^t) = log(1 - rho) + log(1 + e^z)
    logden = np.log1p(-rho) + _softplus(z)
    h = expit(z)
    value = t[data.n0:].sum() - logden.sum()
    grad = Q[data.n0:].sum(axis=0) - h @ Q
    hess = -(Q * (h * (1.0 - h))[:, None]).T @ Q
    return float(value), grad, hess


# --------------------------------------------------------------------------- #
# Batched Newton engine
# --------------------------------------------------------------------------- #


def _objective(Qs, n0, offset, log1mrho, theta):
    t = np.einsum("bnk,bk->bn", Qs, theta)
    z = t + offset
    return t[:, n0:].sum(axis=1) - (log1mrho + _softplus(z)).sum(axis=1)


def _separated(Q, n0, theta):
    t = np.einsum("bnk,bk->bn", Q, theta)
    return t[:, n0:].min(axis=1) > t[:, :n0].max(axis=1)


def _newton_batch(Q, n0, settings, theta0=None):
    """Maximize the dual for each of ``B`` designs ``Q[b]`` (shape ``(B, n, k)``).

    The first ``n0`` rows of every design are healthy. Columns are rescaled by
    their largest absolute value before iterating; the gradient tolerance
    applies in that scaled parametrization.
    """
    B, n, k = Q.shape
    n1 = n - n0
    rho = n1 / n
    offset = np.log(rho / (1.0 - rho))
    log1mrho = np.log1p(-rho)

    scale = np.abs(Q).max(axis=1)
    scale[scale == 0] = 1.0
    Qs = Q / scale[:, None, :]
    q1sum = Qs[:, n0:].sum(axis=1)

    theta = np.zeros((B, k))
    if theta0 is not None:
        theta[:] = np.asarray(theta0, dtype=float) * scale
    status = np.full(B, MAX_ITER)
    iters = np.zeros(B, dtype=int)
    gnorm = np.full(B, np.inf)
    active = np.ones(B, dtype=bool)
    slack = 8 * _EPS * n

    for it in range(settings.max_iterations + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Qa, th = Qs[idx], theta[idx]
        t = np.einsum("bnk,bk->bn", Qa, th)
        z = t + offset
        h = expit(z)
        f = t[:, n0:].sum(axis=1) - (log1mrho + _softplus(z)).sum(axis=1)
        g = q1sum[idx] - np.einsum("bn,bnk->bk", h, Qa)
        gn = np.linalg.norm(g, axis=1)
        gnorm[idx] = gn
        iters[idx] = it

        done = gn <= settings.gradient_tolerance
        if done.any():
            d_idx = idx[done]
            status[d_idx] = OK
            active[d_idx] = False
        if it == settings.max_iterations:
            break
        keep = ~done
        if not keep.any():
            continue
        idx, Qa, th, h, f, g = idx[keep], Qa[keep], th[keep], h[keep], f[keep], g[keep]

        w = h * (1.0 - h)
        negH = np.einsum("bn,bnj,bnk->bjk", w, Qa, Qa)
        eig = np.linalg.eigvalsh(negH)
        singular = eig[:, 0] < 1e-12
        direction = np.empty_like(g)
        if (~singular).any():
            direction[~singular] = np.linalg.solve(negH[~singular], g[~singular][..., None])[..., 0]
        direction[singular] = g[singular]

        slope = np.einsum("bk,bk->b", g, direction)
        step = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        new_theta = th.copy()
        tol_f = slack * (np.abs(f) + 1.0)
        for _ in range(settings.max_halvings + 1):
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            cand = th[todo] + step[todo, None] * direction[todo]
            fc = _objective(Qa[todo], n0, offset, log1mrho, cand)
            ok = fc >= f[todo] + 1e-4 * step[todo] * slope[todo] - tol_f[todo]
            ok &= np.isfinite(fc)
            new_theta[todo[ok]] = cand[ok]
            accepted[todo[ok]] = True
            step[todo[~ok]] *= settings.halving
        theta[idx] = new_theta
        stalled = idx[~accepted]
        status[stalled] = STALLED
        active[stalled] = False

        big = np.linalg.norm(theta[idx] / scale[idx], axis=1) > settings.divergence_norm
        if big.any():
            status[idx[big]] = SEPARATED
            active[idx[big]] = False

    theta = theta / scale
    ok = status == OK
    if ok.any():
        sep = _separated(Q[ok], n0, theta[ok])
        status[np.flatnonzero(ok)[sep]] = SEPARATED
    return theta, status, iters, gnorm


# --------------------------------------------------------------------------- #
# Fits
# --------------------------------------------------------------------------- #


def _weights_and_tilt(Q, theta, n0, n):
    rho = (n - n0) / n
    t = Q @ theta if Q.ndim == 2 else np.einsum("bnk,bk->bn", Q, theta)
    z = t + np.log(rho / (1.0 - rho))
    logp = -np.log(n) - np.log1p(-rho) - _softplus(z)
    return np.exp(logp), np.exp(t), logp, t


def fit_from_theta(data: TwoSampleData, basis: BasisSpec, theta, iterations=0, grad_norm=0.0) -> DrmFit:
    """Build the fit (weights, log-likelihood) implied by a given ``theta``."""
    theta = np.array(theta, dtype=float)
    if theta.shape != (basis.p + 1,):
        raise ValueError(f"theta must have length {basis.p + 1}")
    Q = basis.Q(data.pooled)
    p, tilt, logp, t = _weights_and_tilt(Q, theta, data.n0, data.n)
    loglik = float(logp.sum() + t[data.n0:].sum())
    for a in (theta, p, tilt):
        a.setflags(write=False)
    return DrmFit(theta, p, tilt, loglik, data, basis, iterations, float(grad_norm))


def fit_drm(data: TwoSampleData, basis: BasisSpec, settings: OptimizerSettings = DEFAULT_SETTINGS) -> DrmFit:
    """Maximum empirical likelihood fit by Newton's method on the concave dual."""
    Q = basis.Q(data.pooled)[None]
    theta, status, iters, gnorm = _newton_batch(Q, data.n0, settings, settings.initial_theta)
    st = int(status[0])
    if st == SEPARATED:
        raise SeparationError(
            f"samples are perfectly separated under basis {basis.label}; the likelihood is unbounded",
            theta[0], float(gnorm[0]), int(iters[0]),
        )
    if st != OK:
        raise ConvergenceError(
            f"DRM fit failed ({_STATUS_TEXT[st]}) after {iters[0]} iterations, |grad|={gnorm[0]:.3g}",
            theta[0], float(gnorm[0]), int(iters[0]),
        )
    return fit_from_theta(data, basis, theta[0], int(iters[0]), float(gnorm[0]))


@dataclass(frozen=True, eq=False)
class BatchFit:
    """Fits of ``B`` datasets sharing ``(n0, n1)``; rows with ``status != 0`` failed."""

    x: np.ndarray  # (B, n) pooled values, healthy block first
    n0: int
    basis: BasisSpec
    theta: np.ndarray
    status: np.ndarray
    weights: np.ndarray
    tilt: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK


def fit_drm_batch(healthy, diseased, basis: BasisSpec, settings: OptimizerSettings = DEFAULT_SETTINGS,
                  threads: int = 1) -> BatchFit:
    """Fit ``B`` datasets at once; ``healthy`` is ``(B, n0)``, ``diseased`` ``(B, n1)``.

    Rows are solved independently, so splitting them over ``threads`` workers
    gives the same numbers as one batch.
    """
    healthy = np.atleast_2d(np.asarray(healthy, dtype=float))
    diseased = np.atleast_2d(np.asarray(diseased, dtype=float))
    x = np.concatenate([healthy, diseased], axis=1)
    n0, n = healthy.shape[1], x.shape[1]
    Q = basis.Q(x)
    if threads > 1 and Q.shape[0] > 1:
        chunks = np.array_split(np.arange(Q.shape[0]), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda ix: _newton_batch(Q[ix], n0, settings, settings.initial_theta), chunks))
        theta = np.concatenate([p[0] for p in parts])
        status = np.concatenate([p[1] for p in parts])
    else:
        theta, status, _, _ = _newton_batch(Q, n0, settings, settings.initial_theta)
    safe = np.where((status == OK)[:, None], theta, 0.0)
    w, tilt, _, _ = _weights_and_tilt(Q, safe, n0, n)
    return BatchFit(x, n0, basis, theta, status, w, tilt)


# --------------------------------------------------------------------------- #
# Distribution estimates
# --------------------------------------------------------------------------- #


def mele_cdfs(fit: DrmFit) -> tuple[WeightedCdf, WeightedCdf]:
    x = fit.data.pooled
    return WeightedCdf(x, fit.weights), WeightedCdf(x, fit.diseased_weights)


def empirical_cdfs(data: TwoSampleData) -> tuple[WeightedCdf, WeightedCdf]:
    return WeightedCdf.empirical(data.healthy), WeightedCdf.empirical(data.diseased)
