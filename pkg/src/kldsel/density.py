"""Classical and bias-reduced kernel density estimates.

Evaluation is direct O(n * m) summation. Tied observations (the simulation
draws integers) are collapsed to ``(value, count)`` pairs first, which is
exact and makes lattice data cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, ParameterError
from .kernels import effective_kernel_value, kernel_value

__all__ = [
    "Kind",
    "DensityEstimate",
    "as_sample",
    "kde_at",
    "bkde_at",
    "bkde_loo_at",
    "density_at",
    "default_grid",
    "evaluate_on_grid",
]

Kind = Literal["classical", "bias_reduced"]
KINDS = ("classical", "bias_reduced")

_CHUNK = 1 << 20


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    kind: str


def as_sample(sample, min_size: int = 1) -> np.ndarray:
    """Validate and return the observations as a 1-d float array."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < min_size:
        raise ParameterError(f"sample needs at least {min_size} observation(s), got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("sample contains non-finite values")
    return x


def _check_h(h) -> float:
    h = float(h)
    if not (np.isfinite(h) and h > 0):
        raise ParameterError(f"bandwidth must be positive and finite, got {h}")
    return h


_C_K = 1.0 / np.sqrt(2.0 * np.pi)


def _raw_k(u):
    return _C_K * np.exp(-0.5 * u * u)


def _raw_phi(u):
    return 0.5 * _C_K * (3.0 - u * u) * np.exp(-0.5 * u * u)


def _kernel(kind: str, checked: bool = True):
    if kind == "classical":
        return kernel_value if checked else _raw_k
    if kind == "bias_reduced":
        return effective_kernel_value if checked else _raw_phi
    raise ParameterError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")


def compress(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique values with their multiplicities (as floats)."""
    values, counts = np.unique(x, return_counts=True)
    return values, counts.astype(float)


def weighted_sum(values, weights, h, points, kind) -> np.ndarray:
    """sum_j w_j k((points - v_j) / h) / h, evaluated in memory-bounded chunks."""
    k = _kernel(kind, checked=False)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    out = np.empty(points.size)
    step = max(1, _CHUNK // max(values.size, 1))
    for start in range(0, points.size, step):
        p = points[start:start + step]
        u = (p[:, None] - values[None, :]) / h
        out[start:start + step] = k(u) @ weights
    return out / h


def density_at(sample, h, x, kind: str = "bias_reduced"):
    """Estimate of the given kind at scalar or array ``x``."""
    xs = as_sample(sample)
    h = _check_h(h)
    pts = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise DomainError("evaluation points must be finite")
    values, counts = compress(xs)
    est = weighted_sum(values, counts, h, pts.ravel(), kind) / xs.size
    return float(est[0]) if pts.ndim == 0 else est.reshape(pts.shape)


def kde_at(sample, h, x):
    """Classical estimate (1/nh) sum K((x - X_i)/h)."""
    return density_at(sample, h, x, "classical")


def bkde_at(sample, h, x):
    """Bias-reduced estimate f - (h^2/2) mu2 f''; may be negative."""
    return density_at(sample, h, x, "bias_reduced")


def bkde_loo_at(sample, h, i: int, x):
    xs = as_sample(sample)
    if xs.size < 2:
        raise ParameterError("leave-one-out estimate needs n >= 2")
    i = int(i)
    if not 0 <= i < xs.size:
        raise ParameterError(f"index {i} out of range for sample of size {xs.size}")
    return density_at(np.delete(xs, i), h, x, "bias_reduced")


def default_grid(sample, h, m: int = 512) -> np.ndarray:
    """m points spanning [min(X) - 4h, max(X) + 4h]."""
    xs = as_sample(sample)
    h = _check_h(h)
    return np.linspace(xs.min() - 4.0 * h, xs.max() + 4.0 * h, int(m))


def evaluate_on_grid(sample, h, grid, kind: str = "bias_reduced") -> DensityEstimate:
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise ParameterError("grid must be nonempty")
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise ParameterError("grid must be strictly increasing")
    vals = density_at(sample, h, g, kind)
    return DensityEstimate(grid=g, values=np.asarray(vals), bandwidth=float(h), kind=kind)
