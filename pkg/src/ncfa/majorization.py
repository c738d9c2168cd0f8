"""Hardy-Littlewood and uniform submajorization of step functions.

Both checks are exact: the partial integrals ``F(t) = int_0^t mu`` are
piecewise linear, so inequalities between them only need testing at
breakpoints.
"""

from __future__ import annotations

import numpy as np

from .rearrangement import StepFunction

__all__ = ["hl_submajorize", "uniform_submajorize", "DEFAULT_LAMBDA_MAX"]

DEFAULT_LAMBDA_MAX = 64
RTOL = 1e-10


def _tolerance(y: StepFunction, x: StepFunction, rtol: float) -> float:
    scale = max(float(np.sum(x.values * x.lengths)), float(np.sum(y.values * y.lengths)))
    return rtol * (1.0 + scale)


def hl_submajorize(y: StepFunction, x: StepFunction, rtol: float = RTOL) -> bool:
    """True iff ``int_0^t mu(y) <= int_0^t mu(x)`` for every ``t > 0``.

    Floating-point slack is ``rtol * (1 + max(||x||_1, ||y||_1))``.
    """
    t = np.union1d(y.breakpoints(), x.breakpoints())
    gap = y.partial_integral(t) - x.partial_integral(t)
    return bool(np.all(gap <= _tolerance(y, x, rtol)))


def _uniform_holds(y: StepFunction, x: StepFunction, lam: int, tol: float) -> bool:
    # g(a, b) = [F_x(b) - F_y(b)] + [F_y(lam a) - F_x(a)] on {0 <= lam a <= b}.
    # g is linear on each cell of the grid cut by breakpoints of both terms, so
    # its minimum over the region sits at a grid vertex or where b = lam a
    # crosses a grid line.
    bx, by = x.breakpoints(), y.breakpoints()
    a_grid = np.union1d(np.union1d(bx, by / lam), np.union1d(bx, by) / lam)
    b_grid = np.union1d(np.union1d(bx, by), lam * a_grid)
    h_b = x.partial_integral(b_grid) - y.partial_integral(b_grid)
    h_a = y.partial_integral(lam * a_grid) - x.partial_integral(a_grid)
    # suffix minimum of h_b over b >= lam a
    suffix_min = np.minimum.accumulate(h_b[::-1])[::-1]
    start = np.searchsorted(b_grid, lam * a_grid * (1 - 1e-15), side="left")
    start = np.minimum(start, b_grid.size - 1)
    best = h_a + suffix_min[start]
    return bool(np.all(best >= -tol))


def uniform_submajorize(
    y: StepFunction, x: StepFunction, lambda_max: int = DEFAULT_LAMBDA_MAX, rtol: float = RTOL
) -> int | None:
    """Least natural ``lam <= lambda_max`` with ``int_{lam a}^b mu(y) <= int_a^b mu(x)``
    whenever ``lam a <= b``; ``None`` if there is none."""
    if lambda_max < 1:
        raise ValueError("lambda_max must be >= 1")
    tol = _tolerance(y, x, rtol)
    for lam in range(1, int(lambda_max) + 1):
        if _uniform_holds(y, x, lam, tol):
            return lam
    return None
