"""1-periodic real-valued functions and their Fourier structure.

Functions are described declaratively: a trigonometric polynomial, a named
builtin, a scalar multiple, or a sum of integer-dilated pieces.  Every
variant evaluates to a real, 1-periodic, continuous function and carries an
analytic Lipschitz bound, which is what the transfer-operator route requires.

Coefficient conventions: a trig polynomial stores only c_0..c_m; the
negative-frequency coefficients are the implicit conjugates, so
real-valuedness is structural rather than a runtime property.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * math.pi

#: Builtins without parameters, as (evaluator, lipschitz bound, coeffs c_0..c_m or None).
_BUILTIN_POLY = {
    "cosine": (0.0, 0.5),
    "sine": (0.0, -0.5j),
    "cos_plus_cos2": (0.0, 0.5, 0.5),
    "cos_minus_cos2": (0.0, 0.5, -0.5),
}


def _ret(x, out):
    """Return a float for scalar input, an ndarray otherwise."""
    if np.ndim(x) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trig polynomial sum_{|j|<=m} c_j e^{2 pi i j x}, stored as c_0..c_m.

    c_0 must be real; c_{-j} = conj(c_j) is implicit.
    """

    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("a trig polynomial needs at least c_0")
        cs = tuple(complex(c) for c in self.coeffs)
        if abs(cs[0].imag) > 1e-14 * max(1.0, abs(cs[0])):
            raise ValueError("c_0 must be real (real-valued polynomial)")
        cs = (complex(cs[0].real, 0.0),) + cs[1:]
        object.__setattr__(self, "coeffs", cs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def coefficient(self, k):
        """Two-sided coefficient c_k (conjugate symmetry for k < 0)."""
        j = abs(int(k))
        if j > self.degree:
            return 0j
        c = self.coeffs[j]
        return c.conjugate() if k < 0 else c

    def evaluate(self, x):
        t = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.full_like(t, self.coeffs[0].real)
        for j in range(1, len(self.coeffs)):
            c = self.coeffs[j]
            ang = TWO_PI * j * t
            out = out + 2.0 * (c.real * np.cos(ang) - c.imag * np.sin(ang))
        return _ret(x, out)

    def evaluate_complex(self, x):
        """Full two-sided complex sum; used to test structural realness."""
        t = float(x) % 1.0
        z = complex(self.coeffs[0].real)
        for j in range(1, len(self.coeffs)):
            c = self.coeffs[j]
            e = cmath.exp(2j * math.pi * j * t)
            z += c * e + c.conjugate() / e
        return z

    def lipschitz_bound(self):
        """2*pi * sum over two-sided j of |j||c_j| (a bound on sup |f'|)."""
        return TWO_PI * sum(2 * j * abs(c) for j, c in enumerate(self.coeffs) if j)


class PeriodicFunctionSpec:
    """Base class of the declarative function descriptions."""

    def evaluate(self, x):
        raise NotImplementedError

    def lipschitz_bound(self):
        raise NotImplementedError

    def fourier_coefficient(self, k):
        """Exact c_k = int_0^1 f(w) e^{-2 pi i k w} dw."""
        raise NotImplementedError

    def as_trig_polynomial(self):
        """The exact TrigPolynomial form, or None if f is not one."""
        return None

    def to_json(self):
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True)
class TrigPolySpec(PeriodicFunctionSpec):
    poly: TrigPolynomial

    def evaluate(self, x):
        return self.poly.evaluate(x)

    def lipschitz_bound(self):
        return self.poly.lipschitz_bound()

    def fourier_coefficient(self, k):
        return self.poly.coefficient(k)

    def as_trig_polynomial(self):
        return self.poly

    def to_json(self):
        return {
            "type": "trigpoly",
            "coeffs": [[c.real, c.imag] for c in self.poly.coeffs],
        }


@dataclass(frozen=True)
class BuiltinSpec(PeriodicFunctionSpec):
    """Named builtin: cosine, sine, cos_plus_cos2, cos_minus_cos2, triangle,
    constant (takes parameter ``value``).

    The triangle wave t(x) = 1 - 4|x mod 1 - 1/2| is the one non-polynomial
    builtin: centered, Lipschitz with constant 4, and c_k = -4/(pi k)^2 for
    odd k -- handy for exercising coefficient-decay machinery.
    """

    name: str
    value: float = 0.0

    def __post_init__(self):
        if self.name not in _BUILTIN_POLY and self.name not in ("triangle", "constant"):
            raise ConfigurationError(f"unknown builtin function {self.name!r}")

    def evaluate(self, x):
        t = np.mod(np.asarray(x, dtype=float), 1.0)
        if self.name == "cosine":
            out = np.cos(TWO_PI * t)
        elif self.name == "sine":
            out = np.sin(TWO_PI * t)
        elif self.name == "cos_plus_cos2":
            out = np.cos(TWO_PI * t) + np.cos(2 * TWO_PI * t)
        elif self.name == "cos_minus_cos2":
            out = np.cos(TWO_PI * t) - np.cos(2 * TWO_PI * t)
        elif self.name == "triangle":
            out = 1.0 - 4.0 * np.abs(t - 0.5)
        else:  # constant
            out = np.full_like(t, self.value)
        return _ret(x, out)

    def lipschitz_bound(self):
        if self.name == "constant":
            return 0.0
        if self.name == "triangle":
            return 4.0
        return self.as_trig_polynomial().lipschitz_bound()

    def fourier_coefficient(self, k):
        k = int(k)
        if self.name == "triangle":
            if k == 0:
                return 0j
            if k % 2 == 0:
                return 0j
            return complex(-4.0 / (math.pi * k) ** 2)
        return self.as_trig_polynomial().coefficient(k)

    def as_trig_polynomial(self):
        if self.name == "constant":
            return TrigPolynomial((self.value,))
        if self.name == "triangle":
            return None
        return TrigPolynomial(_BUILTIN_POLY[self.name])

    def to_json(self):
        obj = {"type": "builtin", "name": self.name}
        if self.name == "constant":
            obj["parameters"] = {"value": self.value}
        return obj


@dataclass(frozen=True)
class ScaledSpec(PeriodicFunctionSpec):
    """c * f for a real scalar c."""

    c: float
    inner: PeriodicFunctionSpec

    def evaluate(self, x):
        return _ret(x, self.c * np.asarray(self.inner.evaluate(x)))

    def lipschitz_bound(self):
        return abs(self.c) * self.inner.lipschitz_bound()

    def fourier_coefficient(self, k):
        return self.c * self.inner.fourier_coefficient(k)

    def as_trig_polynomial(self):
        tp = self.inner.as_trig_polynomial()
        if tp is None:
            return None
        return TrigPolynomial(tuple(self.c * c for c in tp.coeffs))

    def to_json(self):
        return {"type": "scaled", "c": self.c, "inner": self.inner.to_json()}


@dataclass(frozen=True)
class SumOfDilatesSpec(PeriodicFunctionSpec):
    """sum_j g_j(d_j * x) for nonzero integer dilations d_j."""

    terms: tuple

    def __post_init__(self):
        norm = []
        for d, g in self.terms:
            d = int(d)
            if d == 0:
                raise ConfigurationError("dilation integers must be nonzero")
            if not isinstance(g, PeriodicFunctionSpec):
                raise ConfigurationError("dilated terms must be function specs")
            norm.append((d, g))
        if not norm:
            raise ConfigurationError("sum_of_dilates needs at least one term")
        object.__setattr__(self, "terms", tuple(norm))

    def evaluate(self, x):
        t = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.zeros_like(t)
        for d, g in self.terms:
            out = out + np.asarray(g.evaluate(np.mod(d * t, 1.0)))
        return _ret(x, out)

    def lipschitz_bound(self):
        return sum(abs(d) * g.lipschitz_bound() for d, g in self.terms)

    def fourier_coefficient(self, k):
        # g(d x) has coefficient g_j at frequency d*j.
        k = int(k)
        total = 0j
        for d, g in self.terms:
            if k % d == 0:
                total += g.fourier_coefficient(k // d)
        return total

    def as_trig_polynomial(self):
        acc = {}
        for d, g in self.terms:
            tp = g.as_trig_polynomial()
            if tp is None:
                return None
            for j in range(-tp.degree, tp.degree + 1):
                freq = d * j
                acc[freq] = acc.get(freq, 0j) + tp.coefficient(j)
        degree = max(abs(f) for f in acc)
        return TrigPolynomial(tuple(acc.get(j, 0j) for j in range(degree + 1)))

    def to_json(self):
        return {
            "type": "sum_of_dilates",
            "terms": [[d, g.to_json()] for d, g in self.terms],
        }


def cosine():
    return BuiltinSpec("cosine")


def constant(value):
    return BuiltinSpec("constant", float(value))


def builtin(name, **parameters):
    return BuiltinSpec(name, float(parameters.get("value", 0.0)))


@dataclass(frozen=True)
class FourierCoefficients:
    """Coefficients c_0..c_K with implicit conjugate symmetry.

    ``fitted_m`` / ``fitted_beta`` hold the envelope fit |c_k| <= M |k|^-beta
    when it was requested.
    """

    coeffs: tuple
    fitted_m: float | None = None
    fitted_beta: float | None = None

    @property
    def K(self):
        return len(self.coeffs) - 1

    def coefficient(self, k):
        j = abs(int(k))
        if j > self.K:
            return 0j
        c = complex(self.coeffs[j])
        return c.conjugate() if k < 0 else c


def _fit_decay(coeffs):
    """Least-squares beta on log|c_k| vs log k, envelope constant M.

    Returns (M, beta) or (None, None) when fewer than two usable magnitudes.
    """
    ks, mags = [], []
    for k in range(1, len(coeffs)):
        a = abs(coeffs[k])
        if a > 1e-300:
            ks.append(k)
            mags.append(a)
    if len(ks) < 2:
        return None, None
    lk = np.log(np.asarray(ks, dtype=float))
    lm = np.log(np.asarray(mags))
    slope, intercept = np.polyfit(lk, lm, 1)
    beta = -float(slope)
    m_env = float(max(mags[i] * ks[i] ** beta for i in range(len(ks))))
    return m_env, beta


def fourier_coefficients(spec, K, fit_decay=False):
    """Coefficients c_0..c_K of ``spec``.

    Trig-polynomial variants pass their coefficients through exactly; the
    remaining builtins and composites have closed-form coefficients, so this
    always beats the 1e-12 per-coefficient target.  The quadrature fallback
    (`_coefficients_by_quadrature`) is kept as an independent cross-check.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    tp = spec.as_trig_polynomial()
    if tp is not None:
        cs = tuple(tp.coefficient(k) for k in range(K + 1))
    else:
        cs = tuple(spec.fourier_coefficient(k) for k in range(K + 1))
    m_env, beta = _fit_decay(cs) if fit_decay else (None, None)
    return FourierCoefficients(cs, m_env, beta)


def _coefficients_by_quadrature(spec, K, points=1 << 14):
    """c_0..c_K by the periodic trapezoid rule (one FFT on uniform samples)."""
    xs = np.arange(points) / points
    samples = np.asarray(spec.evaluate(xs), dtype=float)
    spectrum = np.fft.fft(samples) / points
    return tuple(complex(spectrum[k]) for k in range(K + 1))


def truncate_fourier(spec, m, mode="partial_sum"):
    """Degree-m partial Fourier sum or Fejer mean of ``spec``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if mode not in ("partial_sum", "fejer"):
        raise ValueError(f"unknown truncation mode {mode!r}")
    cs = list(fourier_coefficients(spec, m).coeffs)
    if mode == "fejer":
        cs = [c * (1.0 - k / (m + 1.0)) for k, c in enumerate(cs)]
    return TrigPolynomial(tuple(cs))


def check_fourier_decay(coeffs, M, beta):
    """Whether |c_k| <= M |k|^-beta holds for every computed k != 0.

    Returns (ok, first violating index or None).
    """
    if beta <= 1:
        raise ValueError("beta must be > 1")
    if M <= 0:
        raise ValueError("M must be > 0")
    for k in range(1, coeffs.K + 1):
        if abs(coeffs.coefficient(k)) > M * k ** (-beta):
            return False, k
    return True, None


def function_range(spec, points=1 << 16):
    """(min, max) of f estimated on a dense uniform grid."""
    xs = np.arange(points) / points
    vals = np.asarray(spec.evaluate(xs))
    return float(vals.min()), float(vals.max())


def spec_from_json(obj):
    """Parse the JSON function description; unknown keys/types are rejected."""
    if not isinstance(obj, dict):
        raise ConfigurationError("function spec must be a JSON object")
    kind = obj.get("type")
    if kind == "trigpoly":
        _require_keys(obj, {"type", "coeffs"})
        coeffs = obj["coeffs"]
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigurationError("trigpoly coeffs must be a nonempty list")
        try:
            cs = tuple(complex(re, im) for re, im in coeffs)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad trigpoly coefficients: {exc}") from exc
        try:
            return TrigPolySpec(TrigPolynomial(cs))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
    if kind == "builtin":
        _require_keys(obj, {"type", "name"}, optional={"parameters"})
        params = obj.get("parameters", {})
        if not isinstance(params, dict):
            raise ConfigurationError("builtin parameters must be an object")
        known = {"value"}
        if set(params) - known:
            raise ConfigurationError(f"unknown builtin parameters {set(params) - known}")
        return BuiltinSpec(str(obj["name"]), float(params.get("value", 0.0)))
    if kind == "scaled":
        _require_keys(obj, {"type", "c", "inner"})
        return ScaledSpec(float(obj["c"]), spec_from_json(obj["inner"]))
    if kind == "sum_of_dilates":
        _require_keys(obj, {"type", "terms"})
        terms = obj["terms"]
        if not isinstance(terms, list) or not terms:
            raise ConfigurationError("sum_of_dilates terms must be a nonempty list")
        return SumOfDilatesSpec(tuple((int(d), spec_from_json(g)) for d, g in terms))
    raise ConfigurationError(f"unknown function spec type {kind!r}")


def _require_keys(obj, required, optional=frozenset()):
    keys = set(obj)
    if not required <= keys:
        raise ConfigurationError(f"missing keys {sorted(required - keys)} in function spec")
    extra = keys - required - set(optional)
    if extra:
        raise ConfigurationError(f"unknown keys {sorted(extra)} in function spec")
