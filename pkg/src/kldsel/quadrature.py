"""Step-halving trapezoid rule."""

from __future__ import annotations

import numpy as np

from .errors import NumericError

__all__ = ["adaptive_trapezoid", "trapezoid_nodes"]


def trapezoid_nodes(f, a: float, b: float, intervals: int):
    """Plain composite trapezoid on ``intervals`` equal panels; returns (integral, x, fx)."""
    x = np.linspace(a, b, intervals + 1)
    fx = np.asarray(f(x), dtype=float)
    dx = (b - a) / intervals
    return dx * (fx.sum() - 0.5 * (fx[0] + fx[-1])), x, fx


def adaptive_trapezoid(f, a: float, b: float, initial_step: float, rtol: float = 1e-6,
                       atol: float = 1e-14, min_halvings: int = 2, max_halvings: int = 20):
    """Integrate vectorised ``f`` over [a, b], halving the step until successive
    estimates agree to ``rtol`` (relative) or ``atol``.

    Previously evaluated nodes are reused, so each level costs only the new
    midpoints. Returns ``(value, step)``.
    """
    if not b > a:
        raise NumericError(f"empty integration range [{a}, {b}]")
    n = max(2, int(np.ceil((b - a) / initial_step)))
    dx = (b - a) / n
    x = np.linspace(a, b, n + 1)
    fx = np.asarray(f(x), dtype=float)
    total = fx.sum() - 0.5 * (fx[0] + fx[-1])
    est = dx * total
    if not np.isfinite(est):
        raise NumericError("integrand is not finite on the quadrature nodes")
    for level in range(1, max_halvings + 1):
        mid = a + dx * (np.arange(n) + 0.5)
        fm = np.asarray(f(mid), dtype=float)
        total += fm.sum()
        n *= 2
        dx *= 0.5
        new = dx * total
        if not np.isfinite(new):
            raise NumericError("integrand is not finite on the quadrature nodes")
        if level >= min_halvings and abs(new - est) <= max(rtol * abs(new), atol):
            return new, dx
        est = new
    raise NumericError(f"trapezoid refinement did not converge after {max_halvings} halvings")
