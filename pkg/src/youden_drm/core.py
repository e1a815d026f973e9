"""Shared data types: two-sample data, DRM basis, weighted step CDFs, estimates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Input data rejected (size, finiteness, format)."""


class DomainError(DataError):
    """A basis term is undefined at some observation (log of x <= 0)."""


class FitError(RuntimeError):
    """Base class for estimation failures."""


# --------------------------------------------------------------------------- #
# Basis terms
# --------------------------------------------------------------------------- #

# name -> (label, needs positive x)
TERMS = {
    "x": ("x", False),
    "log_x": ("log(x)", True),
    "x2": ("x^2", False),
    "log_x2": ("log(x)^2", True),
}

_ALIASES = {
    "x": "x",
    "log_x": "log_x",
    "log(x)": "log_x",
    "logx": "log_x",
    "x2": "x2",
    "x^2": "x2",
    "x**2": "x2",
    "log_x2": "log_x2",
    "log(x)^2": "log_x2",
    "log2": "log_x2",
    "logx2": "log_x2",
}


def _term_values(name: str, x: np.ndarray) -> np.ndarray:
    if name == "x":
        return x
    if name == "x2":
        return x * x
    if name == "log_x":
        return np.log(x)
    if name == "log_x2":
        lx = np.log(x)
        return lx * lx
    raise KeyError(name)


def _term_derivative(name: str, x: np.ndarray) -> np.ndarray:
    if name == "x":
        return np.ones_like(x)
    if name == "x2":
        return 2.0 * x
    if name == "log_x":
        return 1.0 / x
    if name == "log_x2":
        return 2.0 * np.log(x) / x
    raise KeyError(name)


@dataclass(frozen=True)
class BasisSpec:
    """Basis ``q(x)`` of the density-ratio exponent.

    ``Q(x) = (1, q(x))`` has length ``p + 1``; the fitted parameter vector is
    ordered the same way (intercept first).
    """

    terms: tuple[str, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("basis needs at least one term")
        canon = []
        for t in terms:
            key = _ALIASES.get(str(t).strip())
            if key is None:
                raise ValueError(f"unknown basis term {t!r}; expected one of {sorted(TERMS)}")
            canon.append(key)
        if len(set(canon)) != len(canon):
            raise ValueError(f"duplicate basis terms in {terms}")
        object.__setattr__(self, "terms", tuple(canon))

    @classmethod
    def parse(cls, text: str | Sequence[str]) -> "BasisSpec":
        """Build from a comma list (``"x,x2"``), a JSON array, or a sequence."""
        if isinstance(text, str):
            s = text.strip()
            if s.startswith("["):
                return cls(tuple(json.loads(s)))
            return cls(tuple(t for t in (p.strip() for p in s.split(",")) if t))
        return cls(tuple(text))

    def to_json(self) -> str:
        return json.dumps(list(self.terms))

    @property
    def p(self) -> int:
        return len(self.terms)

    @property
    def needs_positive(self) -> bool:
        return any(TERMS[t][1] for t in self.terms)

    @property
    def label(self) -> str:
        return " + ".join(TERMS[t][0] for t in self.terms)

    def check_domain(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if self.needs_positive and np.any(x <= 0):
            bad = x[x <= 0]
            raise DomainError(
                f"basis {self.label} needs x > 0; got {bad.size} non-positive value(s), e.g. {bad[0]:g}"
            )

    def q(self, x) -> np.ndarray:
        """Basis terms, shape ``x.shape + (p,)``."""
        x = np.asarray(x, dtype=float)
        self.check_domain(x)
        return np.stack([_term_values(t, x) for t in self.terms], axis=-1)

    def Q(self, x) -> np.ndarray:
        """``(1, q(x))``, shape ``x.shape + (p + 1,)``."""
        x = np.asarray(x, dtype=float)
        self.check_domain(x)
        cols = [np.ones_like(x)] + [_term_values(t, x) for t in self.terms]
        return np.stack(cols, axis=-1)

    def dq(self, x) -> np.ndarray:
        """Derivative ``q'(x)``, shape ``x.shape + (p,)``."""
        x = np.asarray(x, dtype=float)
        self.check_domain(x)
        return np.stack([_term_derivative(t, x) for t in self.terms], axis=-1)

    def is_monotone_scalar(self) -> bool:
        return self.terms in (("x",), ("log_x",))


def basis_eval(basis: BasisSpec, x) -> np.ndarray:
    return basis.Q(x)


# The fifteen non-empty subsets of the four terms.
def all_candidate_bases() -> list[BasisSpec]:
    from itertools import combinations

    names = ("x", "log_x", "x2", "log_x2")
    out = []
    for r in range(1, len(names) + 1):
        out.extend(BasisSpec(c) for c in combinations(names, r))
    return out


# --------------------------------------------------------------------------- #
# Data
# --------------------------------------------------------------------------- #


def _as_sample(values, name: str) -> np.ndarray:
    a = np.array(values, dtype=float).ravel()
    if a.size < 2:
        raise DataError(f"{name} sample needs at least 2 observations, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} sample contains non-finite values")
    a.sort()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TwoSampleData:
    """Healthy (group 0) and diseased (group 1) biomarker values, each sorted.

    The pooled layout used by every weight vector is healthy block first,
    then diseased block.
    """

    healthy: np.ndarray
    diseased: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "healthy", _as_sample(self.healthy, "healthy"))
        object.__setattr__(self, "diseased", _as_sample(self.diseased, "diseased"))
        pooled = np.concatenate([self.healthy, self.diseased])
        pooled.setflags(write=False)
        object.__setattr__(self, "_pooled", pooled)

    @property
    def n0(self) -> int:
        return self.healthy.size

    @property
    def n1(self) -> int:
        return self.diseased.size

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def rho(self) -> float:
        return self.n1 / self.n

    @property
    def pooled(self) -> np.ndarray:
        return self._pooled

    @property
    def group(self) -> np.ndarray:
        return np.repeat([0, 1], [self.n0, self.n1])

    @property
    def x_min(self) -> float:
        return float(min(self.healthy[0], self.diseased[0]))

    @property
    def x_max(self) -> float:
        return float(max(self.healthy[-1], self.diseased[-1]))


@dataclass(frozen=True)
class ValidationReport:
    n0: int
    n1: int
    rho: float
    x_min: float
    x_max: float
    basis: str
    issues: tuple[str, ...] = ()


def validate(data: TwoSampleData, basis: BasisSpec) -> ValidationReport:
    """Check ``data`` against ``basis``; raises :class:`DomainError` on violations."""
    basis.check_domain(data.pooled)
    issues = []
    if min(data.n0, data.n1) < 10:
        issues.append("very small group size; asymptotic regions unreliable")
    if not 0.1 <= data.rho <= 0.9:
        issues.append(f"unbalanced groups (rho={data.rho:.3f})")
    return ValidationReport(
        n0=data.n0,
        n1=data.n1,
        rho=data.rho,
        x_min=data.x_min,
        x_max=data.x_max,
        basis=basis.label,
        issues=tuple(issues),
    )


# --------------------------------------------------------------------------- #
# Step CDFs
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class WeightedCdf:
    """Right-continuous step CDF with point masses at ``support``."""

    support: np.ndarray
    masses: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.support, dtype=float).ravel()
        m = np.asarray(self.masses, dtype=float).ravel()
        if x.shape != m.shape or x.size == 0:
            raise ValueError("support and masses must be non-empty and the same length")
        if np.any(m < 0):
            raise ValueError("negative mass")
        order = np.argsort(x, kind="stable")
        x, m = x[order], m[order]
        cum = np.cumsum(m)
        for a in (x, m, cum):
            a.setflags(write=False)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def empirical(cls, values) -> "WeightedCdf":
        v = np.asarray(values, dtype=float)
        return cls(v, np.full(v.size, 1.0 / v.size))

    @property
    def total(self) -> float:
        return float(self._cum[-1])

    def __call__(self, x):
        idx = np.searchsorted(self.support, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        out = cum[idx]
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, u):
        """Left-continuous inverse ``inf{x : F(x) >= u}``."""
        idx = np.searchsorted(self._cum, u, side="left")
        idx = np.minimum(idx, self.support.size - 1)
        out = self.support[idx]
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return float(np.dot(self.masses, self.support) / self.total)

    def var(self) -> float:
        m = self.masses / self.total
        mu = np.dot(m, self.support)
        return float(max(np.dot(m, (self.support - mu) ** 2), 0.0))


# --------------------------------------------------------------------------- #
# Estimates
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class YoudenEstimate:
    cutoff: float
    sensitivity: float
    specificity: float

    @property
    def youden(self) -> float:
        return self.sensitivity + self.specificity - 1.0

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.sensitivity, self.specificity])


@dataclass(frozen=True, eq=False)
class DrmFit:
    """Maximum empirical likelihood fit of the density ratio model.

    ``weights`` are the baseline masses on the pooled observations (healthy
    block first); ``tilt`` holds ``exp(theta' Q(x))`` at the same points, so
    the diseased-group masses are ``weights * tilt``.
    """

    theta: np.ndarray
    weights: np.ndarray
    tilt: np.ndarray
    loglik: float
    data: TwoSampleData
    basis: BasisSpec
    iterations: int = 0
    grad_norm: float = 0.0

    @property
    def alpha(self) -> float:
        return float(self.theta[0])

    @property
    def beta(self) -> np.ndarray:
        return self.theta[1:]

    @property
    def diseased_weights(self) -> np.ndarray:
        return self.weights * self.tilt

    def constraint_residuals(self) -> tuple[float, float]:
        return (float(abs(self.weights.sum() - 1.0)), float(abs(self.diseased_weights.sum() - 1.0)))
