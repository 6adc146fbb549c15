"""Monte Carlo study: mixture DGP, per-replication pipeline, aggregation.

The data generating process is pi * Poisson(9) + (1 - pi) * Geometric(0.1).
Model 1 is always the Poisson family and model 2 the Geometric family, so a
negative KL_n favours Poisson.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bandwidth import select_bandwidth
from .binning import CellPartition
from .density import as_sample, density_at
from .divergence import kld_rows
from .errors import NumericError, ParameterError
from .hypothesis import bootstrap_scale, decide
from .models import (
    bkde_cell_probs,
    default_partition,
    fit_mle,
    kde_cell_probs,
    model_cell_probs,
    model_pmf,
)
from .rng import stream

__all__ = [
    "POISSON_RATE",
    "GEOMETRIC_P",
    "ExperimentConfig",
    "ReplicationRecord",
    "SelectionReport",
    "sample_poisson",
    "sample_geometric",
    "sample_mixture",
    "run_replication",
    "run_experiment",
    "mse_rate_experiment",
    "histogram_table",
    "worker_count",
]

POISSON_RATE = 9.0
GEOMETRIC_P = 0.1
MODEL_1, MODEL_2 = "poisson", "geometric"


def sample_poisson(lam: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson draws by inversion: smallest k with F(k) >= U.

    The CDF is tabulated by the pmf recursion; uniforms beyond the table's
    last entry continue the sequential search one term at a time.
    """
    u = rng.random(n)
    p = math.exp(-lam)
    cdf = [p]
    k = 0
    while 1.0 - cdf[-1] > 1e-15 and k < 10_000:
        k += 1
        p *= lam / k
        cdf.append(cdf[-1] + p)
    table = np.asarray(cdf)
    out = np.searchsorted(table, u, side="left")
    for j in np.flatnonzero(out >= table.size):
        kk, pk, c = table.size - 1, p, table[-1]
        while c < u[j]:
            kk += 1
            pk *= lam / kk
            if pk == 0.0:
                break
            c += pk
        out[j] = kk
    return out.astype(float)


def sample_geometric(theta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Geometric on {1, 2, ...} via ceil(ln U / ln(1 - theta)), U in (0, 1]."""
    u = 1.0 - rng.random(n)
    k = np.ceil(np.log(u) / math.log1p(-theta))
    return np.maximum(k, 1.0)


def sample_mixture(pi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws from pi * Poisson(9) + (1 - pi) * Geometric(0.1)."""
    if not 0.0 <= pi <= 1.0:
        raise ParameterError(f"mixture weight must lie in [0, 1], got {pi}")
    n = int(n)
    if n < 1:
        raise ParameterError("n must be at least 1")
    pick = rng.random(n) < pi
    pois = sample_poisson(POISSON_RATE, n, rng)
    geom = sample_geometric(GEOMETRIC_P, n, rng)
    return np.where(pick, pois, geom)


@dataclass(frozen=True)
class ExperimentConfig:
    pi: float
    n: int
    reps: int = 200
    alpha: float = 0.05
    seed: int = 0
    bandwidth_policy: object = "mcv"
    B: int = 500
    cells: CellPartition = field(default_factory=default_partition)
    cell_offset: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ParameterError("pi must lie in [0, 1]")
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if self.reps < 1:
            raise ParameterError("reps must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        policy = self.bandwidth_policy
        if isinstance(policy, str):
            if policy not in ("mcv", "cv"):
                raise ParameterError(f"unknown bandwidth policy {policy!r}")
        elif not (isinstance(policy, (int, float)) and policy > 0):
            raise ParameterError("a fixed bandwidth policy must be a positive number")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cells"] = list(self.cells.boundaries)
        return d


@dataclass(frozen=True)
class ReplicationRecord:
    rep_index: int
    n: int
    h: float
    h_classical: float
    lambda_hat: float
    theta_hat: float
    divergence_vs_poisson: float
    divergence_vs_geometric: float
    n_divergence_vs_poisson: float
    n_divergence_vs_geometric: float
    classical_divergence_vs_geometric: float
    mkld: float
    xi_hat: float
    kl_n: float
    decision: str
    degenerate: bool
    note: str = ""


def _bandwidths(x, policy):
    if not isinstance(policy, str):
        return float(policy), float(policy)
    if policy == "mcv":
        return select_bandwidth(x, "mcv").h_star, select_bandwidth(x, "cv").h_star
    h = select_bandwidth(x, "cv").h_star
    return h, h


def run_replication(config: ExperimentConfig, rep_index: int) -> ReplicationRecord:
    """One draw of the whole pipeline; a pure function of (config, rep_index).

    The bias-reduced estimate uses the policy bandwidth (MCV by default); the
    classical estimate used for the efficiency ratio uses ordinary CV.
    """
    x = sample_mixture(config.pi, config.n, stream(config.seed, rep_index, "sample"))
    n = x.size
    cells, off = config.cells, config.cell_offset
    notes = []
    if isinstance(config.bandwidth_policy, str) and np.ptp(x) == 0:
        return _constant_sample_record(x, rep_index)
    h_b, h_c = _bandwidths(x, config.bandwidth_policy)

    m1 = fit_mle(MODEL_1, x)
    m2 = fit_mle(MODEL_2, x, strict=False)
    if np.any(x < 1):
        notes.append("zero observed; geometric likelihood is zero")
    q1 = model_cell_probs(m1, cells).masses
    q2 = model_cell_probs(m2, cells).masses
    F_b = bkde_cell_probs(x, h_b, cells, offset=off).masses
    F_c = kde_cell_probs(x, h_c, cells, offset=off).masses
    d1, d2 = float(kld_rows(F_b, q1)), float(kld_rows(F_b, q2))
    d2_classical = float(kld_rows(F_c, q2))
    mkld = d2 / d2_classical if d2_classical > 0 else float("nan")

    degenerate = m1.degenerate or m2.degenerate
    try:
        boot = bootstrap_scale(x, h_b, (MODEL_1, MODEL_2), cells, config.B,
                               stream(config.seed, rep_index, "bootstrap"), off)
        xi = boot.xi_hat
        degenerate = degenerate or boot.degenerate
    except NumericError as exc:
        xi, degenerate = float("nan"), True
        notes.append(str(exc))
    if degenerate:
        kl_n, decision = float("nan"), "indecisive"
    else:
        kl_n = float(math.sqrt(n) * (d1 - d2) / xi)
        decision = decide(kl_n, config.alpha)

    return ReplicationRecord(
        rep_index=int(rep_index), n=n, h=float(h_b), h_classical=float(h_c),
        lambda_hat=m1.parameter, theta_hat=m2.parameter,
        divergence_vs_poisson=d1, divergence_vs_geometric=d2,
        n_divergence_vs_poisson=n * d1, n_divergence_vs_geometric=n * d2,
        classical_divergence_vs_geometric=d2_classical, mkld=mkld,
        xi_hat=float(xi), kl_n=kl_n, decision=decision, degenerate=bool(degenerate),
        note="; ".join(notes),
    )


def _constant_sample_record(x, rep_index):
    nan = float("nan")
    n = x.size
    return ReplicationRecord(
        rep_index=int(rep_index), n=n, h=nan, h_classical=nan,
        lambda_hat=float(x[0]), theta_hat=nan,
        divergence_vs_poisson=nan, divergence_vs_geometric=nan,
        n_divergence_vs_poisson=nan, n_divergence_vs_geometric=nan,
        classical_divergence_vs_geometric=nan, mkld=nan, xi_hat=nan, kl_n=nan,
        decision="indecisive", degenerate=True,
        note="constant sample; no cross-validated bandwidth",
    )


_SUMMARY_FIELDS = (
    "h", "h_classical", "lambda_hat", "theta_hat",
    "divergence_vs_poisson", "divergence_vs_geometric",
    "n_divergence_vs_poisson", "n_divergence_vs_geometric",
    "classical_divergence_vs_geometric", "mkld", "xi_hat", "kl_n",
)


@dataclass(frozen=True)
class SelectionReport:
    config: ExperimentConfig
    summary: dict
    selection: dict
    degenerate_count: int
    records: tuple = ()

    def to_dict(self, include_records: bool = False) -> dict:
        out = {
            "config": self.config.to_dict(),
            "models": {"model_1": MODEL_1, "model_2": MODEL_2},
            "summary": self.summary,
            "selection_percent": self.selection,
            "degenerate_count": self.degenerate_count,
        }
        if include_records:
            out["records"] = [asdict(r) for r in self.records]
        return out


def _aggregate(config: ExperimentConfig, records) -> SelectionReport:
    summary = {}
    for name in _SUMMARY_FIELDS:
        v = np.array([getattr(r, name) for r in records], dtype=float)
        v = v[np.isfinite(v)]
        summary[name] = {
            "mean": float(v.mean()) if v.size else float("nan"),
            "sd": float(v.std(ddof=1)) if v.size > 1 else float("nan"),
            "count": int(v.size),
        }
    decisions = [r.decision for r in records]
    total = len(records)
    selection = {k: 100.0 * decisions.count(k) / total for k in ("model_1", "model_2", "indecisive")}
    degenerate = sum(r.degenerate for r in records)
    return SelectionReport(config, summary, selection, degenerate, tuple(records))


def worker_count(threads=None) -> int:
    """Worker processes: explicit value, else KLDSEL_THREADS, else 1; 0 means all CPUs."""
    if threads is None:
        threads = int(os.environ.get("KLDSEL_THREADS", "1") or 1)
    threads = int(threads)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _replicate(args):
    config, i = args
    return run_replication(config, i)


def run_experiment(config: ExperimentConfig, threads=None) -> SelectionReport:
    """Run ``config.reps`` replications and fold them in rep_index order."""
    jobs = [(config, i) for i in range(config.reps)]
    workers = min(worker_count(threads), config.reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_replicate(j) for j in jobs]
    report = _aggregate(config, records)
    if report.degenerate_count > 0.5 * config.reps:
        raise NumericError(f"{report.degenerate_count} of {config.reps} replications were degenerate")
    return report


def mse_rate_experiment(n_list, reps: int = 400, x0: float = 0.0, seed: int = 0,
                        kind: str = "bias_reduced", h_exponent=None, details: bool = False):
    """Least-squares slope of log MSE against log n for the estimate at ``x0``.

    Data are standard normal; the bandwidth is n^(-1/9) for the bias-reduced
    estimator and n^(-1/5) for the classical one unless ``h_exponent`` is given.
    """
    sizes = sorted({int(n) for n in n_list})
    if len(sizes) < 4:
        raise ParameterError("need at least four distinct sample sizes")
    if reps < 200:
        raise ParameterError("need at least 200 replications per size")
    if h_exponent is None:
        h_exponent = -1.0 / 9.0 if kind == "bias_reduced" else -0.2
    truth = math.exp(-0.5 * x0 * x0) / math.sqrt(2.0 * math.pi)
    mse = []
    for n in sizes:
        rng = stream(seed, n, "misc")
        h = n ** h_exponent
        est = np.array([density_at(rng.standard_normal(n), h, x0, kind) for _ in range(reps)])
        mse.append(float(np.mean((est - truth) ** 2)))
    slope, intercept = np.polyfit(np.log(sizes), np.log(mse), 1)
    if details:
        return float(slope), {"n": sizes, "mse": mse, "intercept": float(intercept)}
    return float(slope)


def histogram_table(sample, cells: CellPartition = None, max_value=None) -> list[dict]:
    """Per-integer counts with fitted Poisson and Geometric expected counts overlaid."""
    x = as_sample(sample)
    n = x.size
    top = int(max(x.max(), 0) if max_value is None else max_value)
    m1 = fit_mle(MODEL_1, x)
    m2 = fit_mle(MODEL_2, x, strict=False)
    ks = np.arange(0, top + 1)
    counts = np.bincount(x.astype(int), minlength=top + 1)[: top + 1]
    p1, p2 = model_pmf(m1, ks), model_pmf(m2, ks)
    return [
        {"value": int(k), "count": int(c), "frequency": c / n,
         "poisson_pmf": float(a), "geometric_pmf": float(b),
         "poisson_expected": n * float(a), "geometric_expected": n * float(b)}
        for k, c, a, b in zip(ks, counts, p1, p2)
    ]
