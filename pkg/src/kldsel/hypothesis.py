"""Goodness-of-fit and model-selection tests built on binned divergences.

Sign convention for the selection statistic: KL_n < -z selects model_1,
KL_n > z selects model_2, anything in between is indecisive.

The asymptotic scales (xi for the divergence difference, Lambda_phi for a
single divergence) are estimated by a nonparametric bootstrap with the
bandwidth held fixed. A delta-method plug-in with a multinomial covariance
for the binned estimate is available as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .binning import MASS_FLOOR, CellPartition, as_masses, floor_renormalize
from .density import _check_h, compress
from .divergence import kld_rows
from .errors import NumericError, ParameterError
from .models import (
    ParametricModel,
    _integer_sample,
    bkde_cell_probs,
    cell_mass_matrix,
    default_partition,
    fit_mle,
    model_cell_matrix,
    model_cell_probs,
)

__all__ = [
    "DEGENERATE_SCALE",
    "GradientPair",
    "TestResult",
    "BootstrapScale",
    "divergence_gradients",
    "bootstrap_scale",
    "plugin_scale",
    "binned_divergence",
    "kl_n_statistic",
    "gof_statistic",
    "decide",
    "select_model",
]

DEGENERATE_SCALE = 1e-10


@dataclass(frozen=True)
class GradientPair:
    U: np.ndarray
    S: np.ndarray


@dataclass(frozen=True)
class TestResult:
    statistic: float
    scale: float
    p_value: float
    alpha: float
    decision: str
    degenerate: bool = False


@dataclass(frozen=True)
class BootstrapScale:
    xi_hat: float
    lambda_phi_hat: dict
    resamples: int
    used: int
    degenerate: bool = False
    divergences: dict = field(default_factory=dict, repr=False)


def divergence_gradients(p, q) -> GradientPair:
    """Partials of sum p ln(p/q): U_i = ln(p_i/q_i) + 1, S_i = -p_i/q_i."""
    pm, pc = as_masses(p)
    qm, qc = as_masses(q)
    if pm.shape != qm.shape or (pc is not None and qc is not None and pc != qc):
        raise ParameterError("distributions are defined on different partitions")
    qf = floor_renormalize(qm)
    U = np.log(np.maximum(pm, MASS_FLOOR) / qf) + 1.0
    S = -pm / qf
    return GradientPair(U=U, S=S)


def _critical(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.ppf(1.0 - alpha / 2.0))


def decide(statistic: float, alpha: float = 0.05) -> str:
    """Two-sided normal decision; |statistic| equal to the critical value is indecisive."""
    z = _critical(alpha)
    if statistic < -z:
        return "model_1"
    if statistic > z:
        return "model_2"
    return "indecisive"


def _fit_params(family, values, C, n):
    """MLE of ``family`` for each row of resample counts C over ``values``."""
    if family == "poisson":
        return C @ values / n
    if family == "geometric":
        return n / (n + C @ (values - 1.0))
    raise ParameterError(f"unknown family {family!r}")


def _boundary(family, params):
    if family == "poisson":
        return params <= 0
    return params >= 1


def bootstrap_scale(sample, h, families=("poisson", "geometric"), cells: CellPartition = None,
                    B: int = 500, seed=None, offset: float = 0.0) -> BootstrapScale:
    """Bootstrap sqrt(n)-scaled standard deviations of the binned divergences.

    Each resample draws n observations with replacement, rebins the
    bias-reduced estimate at the fixed bandwidth ``h``, refits every family
    and recomputes its divergence. ``xi_hat`` is sqrt(n) times the spread of
    D_1 - D_2 (first two families); ``lambda_phi_hat`` maps each family to
    sqrt(n) times the spread of its own divergence.
    """
    x = _integer_sample(sample)
    n = x.size
    if n < 2:
        raise ParameterError("bootstrap needs n >= 2")
    if B < 100:
        raise ParameterError("bootstrap needs B >= 100 resamples")
    h = _check_h(h)
    cells = cells or default_partition()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    values, counts = compress(x)
    M = cell_mass_matrix(values, h, cells, "bias_reduced", offset, upper=x.max() + 8.0 * h)
    C = rng.multinomial(n, counts / n, size=B).astype(float)
    raw = C @ M / n
    ok = np.any(raw > 0, axis=1)
    P = floor_renormalize(np.where(ok[:, None], raw, 1.0))

    divs = {}
    for fam in families:
        params = _fit_params(fam, values, C, n)
        ok &= ~_boundary(fam, params)
        divs[fam] = kld_rows(P, model_cell_matrix(fam, np.clip(params, 1e-300, None), cells))
    used = int(ok.sum())
    if used < 2:
        raise NumericError("every bootstrap resample was degenerate")

    root_n = np.sqrt(n)
    lam = {fam: float(root_n * np.std(d[ok], ddof=1)) for fam, d in divs.items()}
    xi = float("nan")
    if len(families) >= 2:
        diff = divs[families[0]][ok] - divs[families[1]][ok]
        xi = float(root_n * np.std(diff, ddof=1))
    degenerate = bool(len(families) >= 2 and not xi >= DEGENERATE_SCALE)
    return BootstrapScale(xi_hat=xi, lambda_phi_hat=lam, resamples=B, used=used,
                          degenerate=degenerate,
                          divergences={k: v[ok] for k, v in divs.items()})


def _fisher_information(model: ParametricModel) -> float:
    p = model.parameter
    if model.family == "poisson":
        return 1.0 / p
    return 1.0 / (p * p * (1.0 - p))


def _cell_jacobian(model: ParametricModel, cells, rel_step=1e-6):
    p = model.parameter
    d = rel_step * min(p, 1.0 - p) if model.family == "geometric" else rel_step * p
    hi, lo = model_cell_matrix(model.family, [p + d, p - d], cells)
    return (hi - lo) / (2.0 * d)


def plugin_scale(sample, h, model_1: ParametricModel, model_2: ParametricModel,
                 cells: CellPartition = None, offset: float = 0.0) -> dict:
    """Delta-method cross-check of the bootstrap scales.

    Lambda_11 is the multinomial covariance of the binned estimate, each
    fitted model contributes J I^-1 J^T, and all cross-covariances are set
    to zero. Returns ``{"xi_hat", "lambda_phi_hat": {family: ...}}``.
    """
    cells = cells or default_partition()
    F = bkde_cell_probs(sample, h, cells, offset=offset).masses
    L11 = np.diag(F) - np.outer(F, F)
    pieces = []
    for m in (model_1, model_2):
        g = divergence_gradients(F, model_cell_probs(m, cells).masses)
        J = _cell_jacobian(m, cells)
        pieces.append((m, g, np.outer(J, J) / _fisher_information(m)))
    (_, g1, L1), (_, g2, L2) = pieces
    dU = g1.U - g2.U
    xi2 = dU @ L11 @ dU + g1.S @ L1 @ g1.S + g2.S @ L2 @ g2.S
    lam = {m.family: float(np.sqrt(max(g.U @ L11 @ g.U + g.S @ L @ g.S, 0.0)))
           for m, g, L in pieces}
    return {"xi_hat": float(np.sqrt(max(xi2, 0.0))), "lambda_phi_hat": lam}


def binned_divergence(sample, h, cells, model: ParametricModel, offset: float = 0.0) -> float:
    F = bkde_cell_probs(sample, h, cells, offset=offset).masses
    return float(kld_rows(F, model_cell_probs(model, cells).masses))


def kl_n_statistic(sample, h, cells, model_1: ParametricModel, model_2: ParametricModel,
                   xi_hat: float, offset: float = 0.0) -> float:
    """sqrt(n) / xi_hat * (D(F_b, F_model_1) - D(F_b, F_model_2)); NaN when xi_hat <= 0."""
    n = np.asarray(sample).size
    if not xi_hat > 0:
        return float("nan")
    F = bkde_cell_probs(sample, h, cells, offset=offset).masses
    d1 = kld_rows(F, model_cell_probs(model_1, cells).masses)
    d2 = kld_rows(F, model_cell_probs(model_2, cells).masses)
    return float(np.sqrt(n) * (d1 - d2) / xi_hat)


def gof_statistic(sample, h, cells, model: ParametricModel, lambda_phi_hat: float,
                  alpha: float = 0.05, offset: float = 0.0) -> TestResult:
    """Two-sided test of zero divergence: sqrt(n) D / Lambda_phi against N(0, 1)."""
    z = _critical(alpha)
    if not lambda_phi_hat >= DEGENERATE_SCALE:
        return TestResult(float("nan"), float(max(lambda_phi_hat, 0.0)), 1.0, alpha,
                          "no_reject", degenerate=True)
    n = np.asarray(sample).size
    d = binned_divergence(sample, h, cells, model, offset)
    stat = float(np.sqrt(n) * d / lambda_phi_hat)
    p = float(min(1.0, 2.0 * norm.sf(abs(stat))))
    return TestResult(stat, float(lambda_phi_hat), p, alpha, "reject" if abs(stat) > z else "no_reject")


def select_model(sample, h, family_1="poisson", family_2="geometric", cells=None,
                 alpha: float = 0.05, B: int = 500, seed=None, offset: float = 0.0,
                 strict: bool = False):
    """Fit both families, bootstrap xi, and run the KL_n test.

    Returns ``(TestResult, details)`` where details carries the fitted models,
    both divergences and the bootstrap object.
    """
    cells = cells or default_partition()
    m1 = fit_mle(family_1, sample, strict=strict)
    m2 = fit_mle(family_2, sample, strict=strict)
    boot = bootstrap_scale(sample, h, (family_1, family_2), cells, B, seed, offset)
    d1 = binned_divergence(sample, h, cells, m1, offset)
    d2 = binned_divergence(sample, h, cells, m2, offset)
    details = {"model_1": m1, "model_2": m2, "d_1": d1, "d_2": d2, "bootstrap": boot}
    if boot.degenerate or m1.degenerate or m2.degenerate:
        return TestResult(float("nan"), max(boot.xi_hat, 0.0), 1.0, alpha, "indecisive", True), details
    stat = kl_n_statistic(sample, h, cells, m1, m2, boot.xi_hat, offset)
    p = float(min(1.0, 2.0 * norm.sf(abs(stat))))
    return TestResult(stat, boot.xi_hat, p, alpha, decide(stat, alpha)), details
