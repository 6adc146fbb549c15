import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from kldsel.density import (
    bkde_at,
    bkde_loo_at,
    default_grid,
    density_at,
    evaluate_on_grid,
    kde_at,
    weighted_sum,
)
from kldsel.errors import DomainError, ParameterError
from kldsel.kernels import effective_kernel_value, kernel_value

samples = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=30)


@pytest.mark.parametrize("sample, h, x, expected", [
    ([0.0], 1.0, 0.0, 0.3989423),
    ([-1.0, 1.0], 1.0, 0.0, 0.2419707),
    ([0.0], 2.0, 0.0, 0.1994711),
])
def test_kde_examples(sample, h, x, expected):
    assert kde_at(sample, h, x) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("x, expected", [(0.0, 0.5984134), (2.0, -0.0269955), (1.0, 0.2419707)])
def test_bkde_examples(x, expected):
    assert bkde_at([0.0], 1.0, x) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("sample, i, x, expected", [
    ([0.0, 5.0], 0, 5.0, 0.5984134),
    ([0.0, 0.0], 1, 0.0, 0.5984134),
    ([0.0, 1.0, 2.0], 1, 0.0, 0.2857089),
])
def test_loo_examples(sample, i, x, expected):
    assert bkde_loo_at(sample, 1.0, i, x) == pytest.approx(expected, abs=2e-7)


def test_loo_hand_sum():
    hand = (effective_kernel_value(0.0) + effective_kernel_value(-2.0)) / 2
    assert bkde_loo_at([0.0, 1.0, 2.0], 1.0, 1, 0.0) == pytest.approx(hand, rel=1e-14)


def test_errors():
    with pytest.raises(ParameterError):
        kde_at([0.0], 0.0, 0.0)
    with pytest.raises(ParameterError):
        bkde_at([0.0], -1.0, 0.0)
    with pytest.raises(ParameterError):
        kde_at([], 1.0, 0.0)
    with pytest.raises(ParameterError):
        bkde_loo_at([0.0], 1.0, 0, 0.0)
    with pytest.raises(ParameterError):
        bkde_loo_at([0.0, 1.0], 1.0, 2, 0.0)
    with pytest.raises((ParameterError, DomainError)):
        kde_at([0.0, np.nan], 1.0, 0.0)


def test_grid_evaluation():
    est = evaluate_on_grid([0.0], 1.0, [0.0], "bias_reduced")
    assert est.values[0] == pytest.approx(0.5984134, abs=1e-7)
    est = evaluate_on_grid([0.0], 1.0, [-1.0, 0.0, 1.0], "classical")
    assert est.values[0] == est.values[2]
    assert est.kind == "classical" and est.bandwidth == 1.0
    with pytest.raises(ParameterError):
        evaluate_on_grid([0.0], 1.0, [0.0, 0.0])
    with pytest.raises(ParameterError):
        evaluate_on_grid([0.0], 1.0, [])


@given(samples, st.integers(1, 40))
@settings(max_examples=30)
def test_grid_shape(sample, m):
    grid = np.linspace(-60, 60, m)
    assert evaluate_on_grid(sample, 0.5, grid).values.shape == (m,)


def test_default_grid():
    g = default_grid([1.0, 3.0], 0.5)
    assert g.size == 512 and g[0] == -1.0 and g[-1] == 5.0


def test_brute_force_sum(rng):
    x = rng.normal(size=37)
    pts = np.linspace(-3, 3, 11)
    h = 0.4
    brute_k = [sum(kernel_value((p - xi) / h) for xi in x) / (x.size * h) for p in pts]
    brute_b = [sum(effective_kernel_value((p - xi) / h) for xi in x) / (x.size * h) for p in pts]
    assert np.allclose(kde_at(x, h, pts), brute_k, rtol=1e-13, atol=1e-15)
    assert np.allclose(bkde_at(x, h, pts), brute_b, rtol=1e-13, atol=1e-15)
    # the closed form of the bias-reduced estimate
    u = (pts[:, None] - x[None, :]) / h
    closed = ((3 - u ** 2) * np.exp(-u ** 2 / 2)).sum(axis=1) / (2 * np.sqrt(2 * np.pi) * x.size * h)
    assert np.allclose(bkde_at(x, h, pts), closed, rtol=1e-12, atol=1e-15)


def test_classical_nonnegative_bias_reduced_signed():
    x = [0.0, 0.1, 5.0]
    grid = np.linspace(-5, 10, 301)
    assert np.all(evaluate_on_grid(x, 0.5, grid, "classical").values >= 0)
    assert np.any(evaluate_on_grid(x, 0.5, grid, "bias_reduced").values < 0)


def test_normalization():
    for seed in range(20):
        x = np.random.default_rng(seed).normal(size=60) * (1 + seed % 3)
        h = 0.3 * (1 + seed % 4)
        step = h / 20
        t = np.arange(x.min() - 10 * h, x.max() + 10 * h + step, step)
        assert np.trapezoid(bkde_at(x, h, t), t) == pytest.approx(1.0, abs=1e-3)


@given(samples, st.floats(0.05, 5), st.floats(-60, 60), st.floats(-100, 100))
def test_translation_equivariance(sample, h, x, c):
    x0 = bkde_at(sample, h, x)
    x1 = bkde_at(np.asarray(sample) + c, h, x + c)
    assert x1 == pytest.approx(x0, rel=1e-9, abs=1e-12)


@given(samples, st.floats(0.05, 5), st.floats(-60, 60), st.floats(0.01, 100))
def test_scale_equivariance(sample, h, x, c):
    lhs = bkde_at(c * np.asarray(sample), c * h, c * x)
    assert lhs == pytest.approx(bkde_at(sample, h, x) / c, rel=1e-9, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=20), st.randoms())
def test_permutation_invariance(sample, r):
    shuffled = list(sample)
    r.shuffle(shuffled)
    pts = np.linspace(-6, 6, 7)
    assert np.allclose(bkde_at(sample, 0.7, pts), bkde_at(shuffled, 0.7, pts), rtol=1e-12, atol=1e-15)


def test_sup_norm_shrinks_with_n():
    grid = np.linspace(-3, 3, 61)
    truth = norm.pdf(grid)
    wins = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        errs = []
        for n in (250, 4000):
            x = r.standard_normal(n)
            errs.append(np.max(np.abs(bkde_at(x, n ** (-1 / 7), grid) - truth)))
        wins += errs[1] < errs[0]
    assert wins >= 90


def laplace(x):
    return 0.5 * np.exp(-np.abs(x))


def expected_bkde(h, grid):
    # E fbhat = int phi(u) f(x - hu) du, via a fine midpoint rule standing in for the sample
    dt = 2e-3
    t = np.arange(-30, 30, dt) + dt / 2
    return weighted_sum(t, laplace(t) * dt, h, grid, "bias_reduced")


def test_bias_sup_norm_linear_in_h():
    # the Laplace density is Lipschitz with a kink, so the bias is of exact order h
    grid = np.linspace(-3, 3, 121)
    sup = [np.max(np.abs(expected_bkde(h, grid) - laplace(grid))) for h in (0.4, 0.2, 0.1)]
    for a, b in zip(sup, sup[1:]):
        assert 0.3 <= b / a <= 0.7


def test_density_at_rejects_unknown_kind():
    with pytest.raises(ParameterError):
        density_at([0.0], 1.0, 0.0, "epanechnikov")
