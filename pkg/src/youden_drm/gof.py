"""Goodness of fit of the density ratio model and basis selection by AIC/BIC."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import BasisSpec, DataError, FitError, TwoSampleData
from .elfit import DEFAULT_SETTINGS, OptimizerSettings, fit_drm, fit_drm_batch
from .rng import stream

MAX_FAIL_FRACTION = 0.05


def _sup_distance(x, fitted_mass, emp_mass):
    """Sup of |F_fit - F_emp| over all jump points (rows of ``x`` sorted or not).

    Both CDFs are step functions with jumps only at entries of ``x``, so the
    supremum is attained at the end of some tie group of sorted ``x``.
    """
    x = np.atleast_2d(x)
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    diff = np.cumsum(np.take_along_axis(np.atleast_2d(fitted_mass), order, axis=1)
                     - np.take_along_axis(np.atleast_2d(emp_mass), order, axis=1), axis=1)
    end_of_group = np.ones_like(xs, dtype=bool)
    end_of_group[:, :-1] = xs[:, 1:] != xs[:, :-1]
    return np.where(end_of_group, np.abs(diff), 0.0).max(axis=1)


def gof_statistic(fit) -> tuple[float, float]:
    """``(Delta_n0, Delta_n1)``: sup distances between MELE and group empirical CDFs."""
    data = fit.data
    x = data.pooled
    is1 = data.group == 1
    emp0 = np.where(is1, 0.0, 1.0 / data.n0)
    emp1 = np.where(is1, 1.0 / data.n1, 0.0)
    d0 = float(_sup_distance(x, fit.weights, emp0)[0])
    d1 = float(_sup_distance(x, fit.diseased_weights, emp1)[0])
    return d0, d1


@dataclass(frozen=True)
class GofResult:
    delta_n0: float
    delta_n1: float
    p_value: float
    B: int
    n_failed: int

    def as_dict(self) -> dict:
        return {"delta_n0": self.delta_n0, "delta_n1": self.delta_n1, "p_value": self.p_value,
                "boot": self.B, "failed_refits": self.n_failed}


def gof_test(data: TwoSampleData, basis: BasisSpec, B: int = 1000, seed: int | tuple = 0,
             settings: OptimizerSettings = DEFAULT_SETTINGS, fit=None, threads: int = 1) -> GofResult:
    """Bootstrap p-value for ``Delta_n0`` with resampling from the fitted MELE CDFs.

    Replicate ``b`` draws ``n0`` values from ``F0_hat`` and ``n1`` from
    ``F1_hat`` using stream ``(*seed, b)``; p is the add-one estimate.
    """
    if B < 200:
        raise ValueError("goodness-of-fit bootstrap needs B >= 200")
    if fit is None:
        fit = fit_drm(data, basis, settings)
    d0, d1 = gof_statistic(fit)
    x = data.pooled
    p0 = fit.weights / fit.weights.sum()
    p1 = fit.diseased_weights / fit.diseased_weights.sum()
    n0, n1 = data.n0, data.n1
    H = np.empty((B, n0))
    D = np.empty((B, n1))
    key = tuple(seed) if isinstance(seed, tuple) else (seed,)
    for b in range(B):
        g = stream(*key, b)
        H[b] = x[g.choice(x.size, n0, p=p0)]
        D[b] = x[g.choice(x.size, n1, p=p1)]
    bf = fit_drm_batch(H, D, basis, settings, threads)
    ok = bf.ok
    n_failed = int(B - ok.sum())
    if n_failed > MAX_FAIL_FRACTION * B:
        raise FitError(f"{n_failed} of {B} goodness-of-fit refits failed")
    emp0 = np.concatenate([np.full(n0, 1.0 / n0), np.zeros(n1)])
    star = _sup_distance(bf.x[ok], bf.weights[ok], np.broadcast_to(emp0, (int(ok.sum()), n0 + n1)))
    # replicate statistics carry rounding noise; ties with the observed value count as exceedances
    exceed = int(np.sum(star >= d0 - 1e-12))
    p = (1 + exceed) / (star.size + 1)
    return GofResult(d0, d1, float(p), B, n_failed)


def gof_bootstrap_pvalue(data, basis, B: int = 1000, seed: int = 0, settings=DEFAULT_SETTINGS) -> float:
    return gof_test(data, basis, B, seed, settings).p_value


# --------------------------------------------------------------------------- #
# Information criteria
# --------------------------------------------------------------------------- #


def information_criteria(fit) -> tuple[float, float]:
    """AIC and BIC with ``p + 1`` parameters and the full EL log-likelihood."""
    return _ic(fit.loglik, fit.basis.p + 1, fit.data.n)


def _ic(loglik: float, k: int, n: int) -> tuple[float, float]:
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n)


@dataclass(frozen=True)
class SelectionRow:
    basis: BasisSpec
    aic: float
    bic: float
    rank: Optional[int]
    loglik: float = math.nan
    p_value: Optional[float] = None
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def select_basis(
    data: TwoSampleData,
    candidates: Sequence[BasisSpec],
    gof_boot: int = 0,
    seed: int = 0,
    settings: OptimizerSettings = DEFAULT_SETTINGS,
) -> list[SelectionRow]:
    """Rank candidate bases by AIC (then BIC, then fewer terms).

    Failed candidates are kept at the bottom with ``rank=None`` and the error text.
    """
    ok, bad = [], []
    for i, basis in enumerate(candidates):
        try:
            fit = fit_drm(data, basis, settings)
        except (FitError, DataError) as exc:
            bad.append(SelectionRow(basis, math.nan, math.nan, None, error=f"{type(exc).__name__}: {exc}"))
            continue
        aic, bic = information_criteria(fit)
        pv = None
        if gof_boot:
            try:
                pv = gof_test(data, basis, gof_boot, (seed, i), settings, fit=fit).p_value
            except FitError:
                pv = math.nan
        ok.append(SelectionRow(basis, aic, bic, None, fit.loglik, pv))
    ok.sort(key=lambda r: (r.aic, r.bic, r.basis.p))
    ranked = [SelectionRow(r.basis, r.aic, r.bic, i + 1, r.loglik, r.p_value) for i, r in enumerate(ok)]
    return ranked + bad


def write_selection_csv(rows: Iterable[SelectionRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["basis", "aic", "bic", "rank"])
        for r in rows:
            w.writerow([r.basis.label, f"{r.aic:.2f}", f"{r.bic:.2f}", "" if r.rank is None else r.rank])
