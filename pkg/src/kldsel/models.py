"""Poisson and Geometric candidate families, their MLEs and cell probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .binning import BinnedDistribution, CellPartition, floor_renormalize
from .density import _check_h, as_sample, compress
from .errors import DomainError, NumericError, ParameterError
from .kernels import effective_kernel_cdf, kernel_cdf

__all__ = [
    "FAMILIES",
    "ParametricModel",
    "model_pmf",
    "log_pmf",
    "fit_mle",
    "default_partition",
    "model_cell_probs",
    "model_cell_matrix",
    "cell_mass_matrix",
    "kde_cell_probs",
    "bkde_cell_probs",
    "empirical_cell_freqs",
]

FAMILIES = ("poisson", "geometric")


@dataclass(frozen=True)
class ParametricModel:
    """``parameter`` is lambda for poisson and theta for geometric.

    Boundary MLEs (lambda = 0, theta = 1) are representable but carry
    ``degenerate=True``.
    """

    family: str
    parameter: float
    degenerate: bool = False

    def __post_init__(self):
        _check_parameter(self.family, self.parameter, allow_boundary=self.degenerate)


def _check_parameter(family, value, allow_boundary=False):
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")
    v = float(value)
    if family == "poisson":
        ok = v > 0 or (allow_boundary and v == 0)
    else:
        ok = 0 < v < 1 or (allow_boundary and v == 1)
    if not (ok and np.isfinite(v)):
        raise ParameterError(f"invalid {family} parameter {value}")


def log_pmf(family: str, parameter, x):
    """Log-pmf, broadcasting over parameter and x arrays; -inf off support."""
    p = np.asarray(parameter, dtype=float)
    k = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "poisson":
            out = -p + k * np.log(p) - gammaln(k + 1.0)
            out = np.where((p == 0) & (k == 0), 0.0, out)
            return np.where(k >= 0, out, -np.inf)
        if family == "geometric":
            out = np.log(p) + (k - 1.0) * np.log1p(-p)
            out = np.where((p == 1) & (k == 1), 0.0, out)
            return np.where(k >= 1, out, -np.inf)
    raise ParameterError(f"unknown family {family!r}")


def model_pmf(model: ParametricModel, x):
    k = np.asarray(x, dtype=float)
    if np.any(k < 0) or np.any(k != np.floor(k)):
        raise DomainError("pmf argument must be a nonnegative integer")
    out = np.exp(log_pmf(model.family, model.parameter, k))
    return float(out) if np.ndim(x) == 0 else out


def _integer_sample(sample) -> np.ndarray:
    x = as_sample(sample)
    if np.any(x != np.floor(x)):
        raise DomainError("count models need integer-valued observations")
    if np.any(x < 0):
        raise DomainError("count models need nonnegative observations")
    return x


def fit_mle(family: str, sample, strict: bool = True) -> ParametricModel:
    """Closed-form MLE: lambda = mean(X); theta = n / (n + sum(X - 1)).

    With ``strict=False`` the geometric formula is applied even when the
    sample contains zeros (outside the geometric support); the simulation
    uses this so that mixture samples can still be scored.
    """
    x = _integer_sample(sample)
    if family == "poisson":
        lam = float(x.mean())
        return ParametricModel("poisson", lam, degenerate=lam == 0)
    if family == "geometric":
        if strict and np.any(x < 1):
            raise DomainError("geometric support starts at 1; sample contains 0")
        total = x.size + float(np.sum(x - 1.0))
        if total <= 0:
            raise DomainError("geometric MLE undefined for an all-zero sample")
        theta = min(x.size / total, 1.0)
        return ParametricModel("geometric", theta, degenerate=theta == 1)
    raise ParameterError(f"unknown family {family!r}")


def default_partition() -> CellPartition:
    """Seven unit cells [i-1, i) followed by [7, inf)."""
    return CellPartition(tuple(range(8)))


def model_cell_matrix(family: str, parameters, cells: CellPartition) -> np.ndarray:
    """Cell probabilities for an array of parameter values, shape (len(parameters), M0).

    Bounded cells sum the pmf over the integers they contain; the last cell is
    1 minus the rest.
    """
    p = np.atleast_1d(np.asarray(parameters, dtype=float))
    b = np.asarray(cells.boundaries)
    top = int(np.ceil(b[-1]))
    ks = np.arange(max(top, 1), dtype=float)
    pmf = np.exp(log_pmf(family, p[:, None], ks[None, :]))
    first_int = np.ceil(b).astype(int)
    out = np.empty((p.size, cells.size))
    for i in range(cells.size - 1):
        out[:, i] = pmf[:, first_int[i]:first_int[i + 1]].sum(axis=1)
    out[:, -1] = np.maximum(1.0 - out[:, :-1].sum(axis=1), 0.0)
    return out


def model_cell_probs(model: ParametricModel, cells: CellPartition) -> BinnedDistribution:
    masses = model_cell_matrix(model.family, [model.parameter], cells)[0]
    # tail identity already makes the sum exactly 1 unless the tail was clipped
    masses = masses / masses.sum()
    return BinnedDistribution(masses, cells)


def cell_mass_matrix(values, h, cells: CellPartition, kind: str = "bias_reduced",
                     offset: float = 0.0, upper=None) -> np.ndarray:
    """Integral of each observation's kernel bump over each cell, shape (len(values), M0).

    Row j holds int_{cell i} k((x - v_j)/h)/h dx from the kernel's closed-form
    antiderivative. Cell edges are shifted left by ``offset``; the last cell
    ends at ``upper`` (default +inf).
    """
    v = np.asarray(values, dtype=float)
    edges = np.asarray(cells.edges()) - offset
    if upper is not None:
        edges[-1] = upper
    if kind == "bias_reduced":
        cdf = effective_kernel_cdf
    elif kind == "classical":
        cdf = kernel_cdf
    else:
        raise ParameterError(f"unknown estimator kind {kind!r}")
    c = cdf((edges[None, :] - v[:, None]) / h)
    return np.diff(c, axis=1)


def _kernel_cell_probs(sample, h, cells, kind, offset):
    x = as_sample(sample)
    h = _check_h(h)
    values, counts = compress(x)
    upper = x.max() + 8.0 * h
    if upper <= cells.boundaries[-1] - offset:
        upper = None
    raw = counts @ cell_mass_matrix(values, h, cells, kind, offset, upper) / x.size
    if not np.any(raw > 0):
        raise NumericError("estimate places no positive mass in any cell")
    return BinnedDistribution(floor_renormalize(raw), cells)


def bkde_cell_probs(sample, h, cells: CellPartition, offset: float = 0.0) -> BinnedDistribution:
    """Cell masses of the bias-reduced estimate, floored at 1e-12 and renormalised."""
    return _kernel_cell_probs(sample, h, cells, "bias_reduced", offset)


def kde_cell_probs(sample, h, cells: CellPartition, offset: float = 0.0) -> BinnedDistribution:
    return _kernel_cell_probs(sample, h, cells, "classical", offset)


def empirical_cell_freqs(sample, cells: CellPartition) -> BinnedDistribution:
    x = as_sample(sample)
    counts = np.bincount(cells.index(x), minlength=cells.size).astype(float)
    return BinnedDistribution(counts / x.size, cells)
