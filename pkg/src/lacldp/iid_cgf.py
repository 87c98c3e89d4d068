"""The i.i.d. cumulant generating function log int_0^1 e^{theta f}.

This is the rate-function input for the large-gap regime.  The tilted
integrals int e^{theta f}, int f e^{theta f} and int f^2 e^{theta f} are
computed over one shared adaptive panel set (G7/K15 pairs), so value,
derivative and tilted variance stay mutually consistent.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .legendre import ScalarCurve

# 15-point Kronrod nodes on [-1, 1] with Kronrod weights, and the weights of
# the embedded 7-point Gauss rule (zero at Kronrod-only nodes).
_KRONROD_NODES = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_KRONROD_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_GAUSS_WEIGHTS = np.array([
    0.0, 0.129484966168870, 0.0, 0.279705391489277, 0.0,
    0.381830050505119, 0.0, 0.417959183673469, 0.0,
    0.381830050505119, 0.0, 0.279705391489277, 0.0,
    0.129484966168870, 0.0,
])

QUAD_TOL = 1e-12
MAX_PANELS = 1 << 20


@dataclass(frozen=True)
class CgfSample:
    """One point of the i.i.d. CGF: value, slope, and tilted variance."""

    theta: float
    value: float
    derivative: float
    second_derivative: float


@dataclass(frozen=True)
class _Panel:
    a: float
    b: float
    integrals: tuple   # Kronrod (Z, M1, M2)
    error: float


def _panel(spec, theta, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid + half * _KRONROD_NODES
    f = np.asarray(spec.evaluate(x))
    w = np.exp(theta * f)
    rows = np.vstack([w, f * w, f * f * w])
    kron = rows @ _KRONROD_WEIGHTS * half
    gauss = rows @ _GAUSS_WEIGHTS * half
    err = float(np.max(np.abs(kron - gauss)))
    return _Panel(a, b, (float(kron[0]), float(kron[1]), float(kron[2])), err)


def tilted_integrals(spec, theta, tol=QUAD_TOL, max_panels=MAX_PANELS):
    """(Z, M1, M2, achieved error, panel count) for the three tilted integrals."""
    heap = []
    counter = 0
    total_err = 0.0
    for i in range(8):
        p = _panel(spec, theta, i / 8.0, (i + 1) / 8.0)
        heapq.heappush(heap, (-p.error, counter, p))
        total_err += p.error
        counter += 1
    while total_err > tol and len(heap) < max_panels:
        _, _, worst = heapq.heappop(heap)
        total_err -= worst.error
        mid = 0.5 * (worst.a + worst.b)
        for a, b in ((worst.a, mid), (mid, worst.b)):
            p = _panel(spec, theta, a, b)
            heapq.heappush(heap, (-p.error, counter, p))
            total_err += p.error
            counter += 1
    sums = [0.0, 0.0, 0.0]
    for _, _, p in sorted(heap, key=lambda item: item[2].a):
        for i in range(3):
            sums[i] += p.integrals[i]
    return sums[0], sums[1], sums[2], total_err, len(heap)


def cgf_iid(spec, theta):
    """The CGF sample at ``theta``: log Z, tilted mean, tilted variance."""
    z, m1, m2, _, _ = tilted_integrals(spec, float(theta))
    mean = m1 / z
    return CgfSample(float(theta), math.log(z), mean, m2 / z - mean * mean)


def cgf_curve(spec, theta_grid):
    """CGF samples on a strictly increasing grid, packaged as a ScalarCurve."""
    grid = np.asarray(theta_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("theta grid must be nonempty")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("theta grid must be strictly increasing")
    values = np.array([cgf_iid(spec, t).value for t in grid])
    return ScalarCurve.from_samples(grid, values)


class IidCgfEvaluator:
    """Convex evaluator view of the i.i.d. CGF (analytic derivative), cached."""

    def __init__(self, spec):
        self.spec = spec
        self._cache = {}

    def _sample(self, theta):
        s = self._cache.get(theta)
        if s is None:
            s = cgf_iid(self.spec, theta)
            self._cache[theta] = s
        return s

    def value(self, theta):
        return self._sample(float(theta)).value

    def derivative(self, theta):
        return self._sample(float(theta)).derivative
