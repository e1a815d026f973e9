"""Youden-optimal cut-off from the fitted density ratio, and plug-in accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BasisSpec, DrmFit, YoudenEstimate
from .elfit import BatchFit

GRID_SIZE = 512
XTOL = 1e-10
DEGENERATE_BETA = 1e-8


@dataclass(frozen=True)
class CutoffSolution:
    cutoff: float
    roots: tuple[float, ...]
    degenerate: bool = False
    warnings: tuple[str, ...] = ()

    @property
    def multiplicity(self) -> int:
        return len(self.roots)


def _g(basis: BasisSpec, theta, x):
    # theta (m, k), x (m,) or (m, G)
    Q = basis.Q(x)
    if Q.ndim == 2:
        return np.einsum("mk,mk->m", Q, theta)
    return np.einsum("mgk,mk->mg", Q, theta)


def _bisect(basis: BasisSpec, theta, lo, hi, xtol=XTOL):
    """Vectorized bisection; each row's bracket must straddle a sign change."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    glo = _g(basis, theta, lo)
    for _ in range(200):
        live = (hi - lo) > xtol
        if not live.any():
            break
        mid = 0.5 * (lo + hi)
        live &= (mid > lo) & (mid < hi)
        if not live.any():
            break
        gm = _g(basis, theta, mid)
        same = np.sign(gm) == np.sign(glo)
        exact = gm == 0
        move_lo = live & same & ~exact
        move_hi = live & ~same & ~exact
        lo = np.where(move_lo, mid, lo)
        glo = np.where(move_lo, gm, glo)
        hi = np.where(move_hi, mid, hi)
        lo = np.where(live & exact, mid, lo)
        hi = np.where(live & exact, mid, hi)
    return 0.5 * (lo + hi)


def _youden_at(x, w, tilt, c):
    """``F0_hat(c) - F1_hat(c)`` for each candidate ``c`` (right-continuous)."""
    c = np.atleast_1d(c)
    inside = x[None, :] <= c[:, None]
    return (inside * (w * (1.0 - tilt))[None, :]).sum(axis=1)


def _grid(lo, hi, size):
    # same arithmetic for scalar and batched bounds
    u = np.linspace(0.0, 1.0, size)
    grid = lo + (hi - lo) * u
    grid[..., -1] = hi if np.ndim(hi) == 0 else hi[..., 0]
    return grid


def _roots_single(basis, theta, x_lo, x_hi, grid_size=GRID_SIZE):
    grid = _grid(x_lo, x_hi, grid_size)
    g = basis.Q(grid) @ theta
    s = np.sign(g)
    roots = list(grid[s == 0])
    i = np.flatnonzero(s[:-1] * s[1:] < 0)
    if i.size:
        th = np.broadcast_to(theta, (i.size, theta.size))
        roots.extend(_bisect(basis, th, grid[i], grid[i + 1]))
    return np.unique(np.asarray(roots, dtype=float))


def _choose(x, w, tilt, roots, x_lo, x_hi):
    if roots.size == 0:
        ends = np.array([x_lo, x_hi])
        return float(ends[np.argmax(_youden_at(x, w, tilt, ends))]), False
    if roots.size == 1:
        return float(roots[0]), True
    return float(roots[np.argmax(_youden_at(x, w, tilt, roots))]), True


def solve_cutoff(fit: DrmFit, grid_size: int = GRID_SIZE) -> CutoffSolution:
    """Root of ``theta' Q(x) = 0`` on ``[min x, max x]``.

    Several roots: the one with the largest ``F0_hat - F1_hat`` wins. No sign
    change (numerically degenerate fit): the better endpoint, with a warning.
    """
    data, basis = fit.data, fit.basis
    lo, hi = data.x_min, data.x_max
    roots = _roots_single(basis, np.asarray(fit.theta), lo, hi, grid_size)
    c, found = _choose(data.pooled, fit.weights, fit.tilt, roots, lo, hi)
    warnings = []
    degenerate = bool(np.linalg.norm(fit.beta) < DEGENERATE_BETA)
    if degenerate:
        warnings.append("fitted density ratio is flat (|beta| < 1e-8); the groups look indistinguishable, J ~ 0")
    if not found:
        warnings.append("no sign change of the estimating function on the data range; using the best endpoint")
        degenerate = True
    return CutoffSolution(c, tuple(float(r) for r in roots), degenerate, tuple(warnings))


def estimate_accuracy(fit: DrmFit, cutoff: float) -> YoudenEstimate:
    x = fit.data.pooled
    inside = x <= cutoff
    tau = float(np.clip(fit.weights[inside].sum(), 0.0, 1.0))
    f1 = float(np.clip(fit.diseased_weights[inside].sum(), 0.0, 1.0))
    return YoudenEstimate(float(cutoff), 1.0 - f1, tau)


def estimate(fit: DrmFit) -> tuple[CutoffSolution, YoudenEstimate]:
    sol = solve_cutoff(fit)
    return sol, estimate_accuracy(fit, sol.cutoff)


def estimate_batch(bf: BatchFit, grid_size: int = GRID_SIZE):
    """Cut-offs and ``(eta, tau)`` for every successful row of a batch fit.

    Returns ``(cutoff, eta, tau)`` arrays; failed rows are NaN.
    """
    B = bf.theta.shape[0]
    cut = np.full(B, np.nan)
    rows = np.flatnonzero(bf.ok)
    if rows.size == 0:
        return cut, cut.copy(), cut.copy()
    x = bf.x[rows]
    theta = bf.theta[rows]
    lo, hi = x.min(axis=1), x.max(axis=1)
    grid = _grid(lo[:, None], hi[:, None], grid_size)
    g = _g(bf.basis, theta, grid)
    s = np.sign(g)
    change = s[:, :-1] * s[:, 1:] < 0
    simple = (change.sum(axis=1) == 1) & ~(s == 0).any(axis=1)

    if simple.any():
        j = np.argmax(change[simple], axis=1)
        gs = grid[simple]
        ar = np.arange(gs.shape[0])
        cut[rows[simple]] = _bisect(bf.basis, theta[simple], gs[ar, j], gs[ar, j + 1])
    for m in np.flatnonzero(~simple):
        r = rows[m]
        roots = _roots_single(bf.basis, theta[m], lo[m], hi[m], grid_size)
        cut[r], _ = _choose(bf.x[r], bf.weights[r], bf.tilt[r], roots, lo[m], hi[m])

    inside = bf.x[rows] <= cut[rows][:, None]
    tau = np.full(B, np.nan)
    eta = np.full(B, np.nan)
    tau[rows] = np.clip((bf.weights[rows] * inside).sum(axis=1), 0.0, 1.0)
    eta[rows] = 1.0 - np.clip((bf.weights[rows] * bf.tilt[rows] * inside).sum(axis=1), 0.0, 1.0)
    return cut, eta, tau
