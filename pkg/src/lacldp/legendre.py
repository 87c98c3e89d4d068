"""Legendre-Fenchel transforms of convex scalar functions.

The convex conjugate sup_theta [theta*x - L(theta)] is computed by bisection
on the monotone derivative L'.  Inputs are either exact evaluators (objects
with ``value``/``derivative`` methods, optionally a ``domain``) or sampled
curves, whose derivative is reconstructed by central differences with a
Richardson refinement.

Rate functions of bounded sums are genuinely +infinity outside the closed
range of L', so the transform returns an explicit flag (plus the finite
value attained at the working-interval boundary) instead of a sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_THETA_MAX = 50.0
CONVEXITY_SLACK = 1e-9


def _readonly(a):
    arr = np.asarray(a, dtype=float).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarCurve:
    """A sampled function of one real variable on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    is_convex: bool
    derivative_range: tuple

    @staticmethod
    def from_samples(grid, values):
        grid = _readonly(grid)
        values = _readonly(values)
        if grid.size == 0:
            raise ValueError("curve grid must be nonempty")
        if grid.size != values.size:
            raise ValueError("grid and values must have equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("curve grid must be strictly increasing")
        convex = True
        if grid.size >= 3:
            second = _second_differences(grid, values)
            convex = bool(np.all(second >= -CONVEXITY_SLACK))
        if grid.size >= 2:
            d_lo = float((values[1] - values[0]) / (grid[1] - grid[0]))
            d_hi = float((values[-1] - values[-2]) / (grid[-1] - grid[-2]))
        else:
            d_lo = d_hi = math.nan
        return ScalarCurve(grid, values, convex, (d_lo, d_hi))

    def worst_convexity_triple(self):
        """Indices (i-1, i, i+1) of the most negative second difference."""
        second = _second_differences(self.grid, self.values)
        i = int(np.argmin(second)) + 1
        return i - 1, i, i + 1


def _second_differences(grid, values):
    """Slope increments scaled back to second-difference magnitude."""
    slopes = np.diff(values) / np.diff(grid)
    h = 0.5 * (grid[2:] - grid[:-2])
    return (slopes[1:] - slopes[:-1]) * h


@dataclass(frozen=True)
class RateFunctionCurve:
    """Pointwise Legendre transform values on an x grid.

    ``values`` holds +inf where the rate is flagged infinite; ``boundary``
    marks points whose supremum sat at the working-interval endpoint (and so
    may be underestimated).
    """

    x_grid: np.ndarray
    values: np.ndarray
    is_infinite: np.ndarray
    boundary: np.ndarray
    zero_location: float

    def finite_values(self):
        return self.values[~self.is_infinite]


@dataclass(frozen=True)
class TransformResult:
    value: float
    theta_star: float | None
    is_infinite: bool
    boundary: bool
    boundary_value: float | None = None


class SampledCurveEvaluator:
    """value/derivative access to a convex sampled curve.

    Node derivatives use central differences, upgraded to the Richardson
    combination (4*D_h - D_2h)/3 where two neighbours are available on each
    side; between nodes the derivative is interpolated linearly (monotone for
    convex data) and the value by a local quadratic.
    """

    def __init__(self, curve):
        if not curve.is_convex:
            i, j, k = curve.worst_convexity_triple()
            g, v = curve.grid, curve.values
            raise ValueError(
                "curve is not convex: violating triple "
                f"theta=({g[i]:.17g}, {g[j]:.17g}, {g[k]:.17g}) with "
                f"values ({v[i]:.17g}, {v[j]:.17g}, {v[k]:.17g})"
            )
        if curve.grid.size < 2:
            raise ValueError("need at least two samples")
        self.curve = curve
        self.domain = (float(curve.grid[0]), float(curve.grid[-1]))
        self._node_derivs = self._derivatives_at_nodes(curve)

    @staticmethod
    def _derivatives_at_nodes(curve):
        g, v = curve.grid, curve.values
        n = g.size
        d = np.empty(n)
        d[0] = (v[1] - v[0]) / (g[1] - g[0])
        d[-1] = (v[-1] - v[-2]) / (g[-1] - g[-2])
        for i in range(1, n - 1):
            d[i] = (v[i + 1] - v[i - 1]) / (g[i + 1] - g[i - 1])
        refined = d.copy()
        for i in range(2, n - 2):
            d_h = (v[i + 1] - v[i - 1]) / (g[i + 1] - g[i - 1])
            d_2h = (v[i + 2] - v[i - 2]) / (g[i + 2] - g[i - 2])
            refined[i] = (4.0 * d_h - d_2h) / 3.0
        # Richardson can perturb monotonicity on rough data; convexity of the
        # samples guarantees it only for the plain central differences.
        if np.all(np.diff(refined) >= -1e-12):
            d = refined
        return d

    def _bracket(self, t):
        g = self.curve.grid
        i = int(np.searchsorted(g, t)) - 1
        return min(max(i, 0), g.size - 2)

    def value(self, t):
        g, v = self.curve.grid, self.curve.values
        if g.size == 2:
            w = (t - g[0]) / (g[1] - g[0])
            return float((1 - w) * v[0] + w * v[1])
        i = min(max(self._bracket(t), 1), g.size - 2)
        x0, x1, x2 = g[i - 1], g[i], g[i + 1]
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        l0 = (t - x1) * (t - x2) / ((x0 - x1) * (x0 - x2))
        l1 = (t - x0) * (t - x2) / ((x1 - x0) * (x1 - x2))
        l2 = (t - x0) * (t - x1) / ((x2 - x0) * (x2 - x1))
        return float(y0 * l0 + y1 * l1 + y2 * l2)

    def derivative(self, t):
        g, d = self.curve.grid, self._node_derivs
        i = self._bracket(t)
        w = (t - g[i]) / (g[i + 1] - g[i])
        w = min(max(w, 0.0), 1.0)
        return float((1 - w) * d[i] + w * d[i + 1])


def _working_interval(evaluator, theta_max):
    lo, hi = -float(theta_max), float(theta_max)
    dom = getattr(evaluator, "domain", None)
    if dom is not None:
        lo, hi = max(lo, dom[0]), min(hi, dom[1])
    if not lo < hi:
        raise ValueError("empty working interval for the transform")
    return lo, hi


def legendre_transform(evaluator, x, theta_max=DEFAULT_THETA_MAX,
                       tol=1e-10, max_iter=200):
    """sup over theta in the working interval of theta*x - L(theta).

    ``evaluator`` must expose ``value``/``derivative`` of a convex function
    (an optional ``domain`` attribute narrows the working interval).  Inside
    the open derivative range the maximizer solves L'(theta*) = x by
    bisection; outside the closed range the result carries the +inf flag plus
    the finite endpoint value; exactly at the range edge the one-sided sup is
    returned and marked as a boundary value.
    """
    lo, hi = _working_interval(evaluator, theta_max)
    d_lo = evaluator.derivative(lo)
    d_hi = evaluator.derivative(hi)

    def objective(t):
        return t * x - evaluator.value(t)

    if x < d_lo or x > d_hi:
        edge = lo if x < d_lo else hi
        return TransformResult(math.inf, None, True, False, objective(edge))
    if x == d_lo or x == d_hi:
        edge = lo if x == d_lo else hi
        return TransformResult(objective(edge), edge, False, True, objective(edge))

    a, b = lo, hi
    mid = 0.5 * (a + b)
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        d = evaluator.derivative(mid)
        if abs(d - x) <= tol or (b - a) <= 1e-13 * max(1.0, abs(mid)):
            break
        if d < x:
            a = mid
        else:
            b = mid
    return TransformResult(objective(mid), mid, False, False, None)


def gartner_ellis_rate(lambda_curve, x_grid, theta_max=DEFAULT_THETA_MAX,
                       tol=1e-10):
    """Pointwise transform of a sampled CGF curve into a rate-function curve.

    The curve must be convex and pass through (0, 0); the zero of the rate
    function sits at L'(0).
    """
    evaluator = SampledCurveEvaluator(lambda_curve)
    lo, hi = evaluator.domain
    if not lo <= 0.0 <= hi:
        raise ValueError("CGF curve must bracket theta = 0")
    if abs(evaluator.value(0.0)) > 1e-9:
        raise ValueError(
            f"CGF curve must pass through (0, 0); got L(0)={evaluator.value(0.0):.3e}"
        )
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.size == 0:
        raise ValueError("x grid must be nonempty")
    values = np.empty(x_grid.size)
    infinite = np.zeros(x_grid.size, dtype=bool)
    boundary = np.zeros(x_grid.size, dtype=bool)
    for i, x in enumerate(x_grid):
        res = legendre_transform(evaluator, float(x), theta_max, tol)
        values[i] = res.value
        infinite[i] = res.is_infinite
        boundary[i] = res.boundary
    zero_location = evaluator.derivative(0.0)
    return RateFunctionCurve(
        _readonly(x_grid), _readonly(values), infinite, boundary, float(zero_location)
    )


class LegendreDualEvaluator:
    """The transform itself as a convex evaluator, enabling biconjugation.

    By the envelope theorem the conjugate's derivative at x is the maximizer
    theta*(x), which the bisection already produces.
    """

    def __init__(self, evaluator, theta_max=DEFAULT_THETA_MAX, tol=1e-10,
                 margin=1e-9):
        self.inner = evaluator
        self.theta_max = theta_max
        self.tol = tol
        lo, hi = _working_interval(evaluator, theta_max)
        d_lo, d_hi = evaluator.derivative(lo), evaluator.derivative(hi)
        span = d_hi - d_lo
        self.domain = (d_lo + margin * max(1.0, abs(span)),
                       d_hi - margin * max(1.0, abs(span)))

    def _solve(self, x):
        return legendre_transform(self.inner, x, self.theta_max, self.tol)

    def value(self, x):
        return self._solve(x).value

    def derivative(self, x):
        res = self._solve(x)
        if res.theta_star is None:
            raise ValueError(f"x={x} outside the conjugate's finite domain")
        return res.theta_star
