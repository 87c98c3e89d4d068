"""Direct evaluation of E[e^{theta S_n}] for arbitrary lacunary sequences.

S_n(w) = sum_{k<=n} f(a_k w) oscillates at frequency a_n, so the exact route
uses composite Gauss-Legendre with panels tied to the fastest period and
reduces each argument a_k*w mod 1 in integer arithmetic before any float
rounding can bite (a_k reaches 2^19 under the quadrature budget and far
beyond it for the Monte-Carlo path).

Monte Carlo represents the uniform variate as M/2^64 for a Philox-drawn
64-bit integer M; then (a_k * M) mod 2^64 is exact uint64 arithmetic and the
reduced argument is uniform on the 2^-64 grid.  Everything is bit-reproducible
given (seed, samples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceededError

#: Default RNG seed for every Monte-Carlo entry point.
DEFAULT_SEED = 0x1AC0

PANEL_BUDGET = 1 << 22          # max total panels: 8 * a_n must fit
PANELS_PER_PERIOD = 8
GL_NODES = 10                   # nodes per panel; 8 missed the 1e-10 target
MC_CHUNK = 1 << 16

_GLX, _GLW = np.polynomial.legendre.leggauss(GL_NODES)
_GL_OFFSETS = (_GLX + 1.0) / 2.0
_TWO64 = float(2.0 ** 64)


@dataclass(frozen=True)
class GapSequence:
    """Generator of strictly increasing positive integer gap sequences.

    Variants: geometric q^k, shifted geometric q^k + s, an explicit list,
    factorial k!, and base^(k^2).  The latter two satisfy the large-gap
    condition a_{k+1}/a_k -> infinity.
    """

    kind: str
    q: int = 0
    shift: int = 0
    base: int = 0
    explicit: tuple = ()

    @staticmethod
    def geometric(q):
        q = int(q)
        if q < 2:
            raise ValueError("geometric sequences need q >= 2")
        return GapSequence("geometric", q=q)

    @staticmethod
    def shifted_geometric(q, shift):
        q, shift = int(q), int(shift)
        if q < 2:
            raise ValueError("shifted geometric sequences need q >= 2")
        if q + shift < 1:
            raise ValueError("first term q + shift must be positive")
        return GapSequence("shifted_geometric", q=q, shift=shift)

    @staticmethod
    def explicit_terms(terms):
        terms = tuple(int(t) for t in terms)
        if not terms:
            raise ValueError("explicit sequence must be nonempty")
        if terms[0] < 1 or any(b <= a for a, b in zip(terms, terms[1:])):
            raise ValueError("sequence must be strictly increasing positive integers")
        return GapSequence("explicit", explicit=terms)

    @staticmethod
    def factorial():
        return GapSequence("factorial")

    @staticmethod
    def superexp(base):
        base = int(base)
        if base < 2:
            raise ValueError("superexp sequences need base >= 2")
        return GapSequence("superexp", base=base)

    def terms(self, n):
        """a_1..a_n as exact integers."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "geometric":
            return [self.q ** k for k in range(1, n + 1)]
        if self.kind == "shifted_geometric":
            return [self.q ** k + self.shift for k in range(1, n + 1)]
        if self.kind == "explicit":
            if n > len(self.explicit):
                raise ValueError(
                    f"explicit sequence has only {len(self.explicit)} terms"
                )
            return list(self.explicit[:n])
        if self.kind == "factorial":
            return [math.factorial(k) for k in range(1, n + 1)]
        return [self.base ** (k * k) for k in range(1, n + 1)]

    def hadamard_ratio(self, n):
        """min over k < n of a_{k+1}/a_k."""
        a = self.terms(n)
        if len(a) < 2:
            return math.inf
        return min(b / c for c, b in zip(a, a[1:]))

    @property
    def is_large_gap(self):
        return self.kind in ("factorial", "superexp")

    def describe(self):
        if self.kind == "geometric":
            return f"geometric(q={self.q})"
        if self.kind == "shifted_geometric":
            return f"shifted_geometric(q={self.q}, shift={self.shift})"
        if self.kind == "explicit":
            return f"explicit({list(self.explicit)})"
        if self.kind == "factorial":
            return "factorial"
        return f"superexp(base={self.base})"

    def to_json(self):
        if self.kind == "geometric":
            return {"type": "geometric", "q": self.q}
        if self.kind == "shifted_geometric":
            return {"type": "shifted_geometric", "q": self.q, "shift": self.shift}
        if self.kind == "explicit":
            return {"type": "explicit", "terms": list(self.explicit)}
        if self.kind == "factorial":
            return {"type": "factorial"}
        return {"type": "superexp", "base": self.base}


def sequence_from_json(obj):
    from .errors import ConfigurationError

    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigurationError("sequence descriptor must be an object with 'type'")
    kind = obj["type"]
    allowed = {
        "geometric": {"type", "q"},
        "shifted_geometric": {"type", "q", "shift"},
        "explicit": {"type", "terms"},
        "factorial": {"type"},
        "superexp": {"type", "base"},
    }
    if kind not in allowed:
        raise ConfigurationError(f"unknown sequence type {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise ConfigurationError(f"unknown keys {sorted(extra)} in sequence descriptor")
    try:
        if kind == "geometric":
            return GapSequence.geometric(obj["q"])
        if kind == "shifted_geometric":
            return GapSequence.shifted_geometric(obj["q"], obj["shift"])
        if kind == "explicit":
            return GapSequence.explicit_terms(obj["terms"])
        if kind == "factorial":
            return GapSequence.factorial()
        return GapSequence.superexp(obj["base"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad sequence descriptor: {exc}") from exc


@dataclass(frozen=True)
class MgfRecord:
    n: int
    theta: float
    value: float
    method: str
    error_estimate: float


def lacunary_sum(spec, seq, n, omega):
    """S_n(omega) with exact rational argument reduction per term.

    A float omega is a dyadic rational, so a_k * omega mod 1 is computed in
    exact integer arithmetic (naive float reduction loses ~6 digits already
    at a_k ~ 2^19).
    """
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    om = Fraction(omega)
    total = 0.0
    for a in seq.terms(n):
        x = float((a * om) % 1)
        total += spec.evaluate(x)
    return total


def max_feasible_exact_n(seq, budget=PANEL_BUDGET):
    """Largest n whose fastest term fits the panel budget."""
    n = 0
    while True:
        try:
            a = seq.terms(n + 1)[-1]
        except ValueError:
            return n
        if PANELS_PER_PERIOD * a > budget:
            return n
        n += 1
        if n >= 64:
            return n


def _composite_mgf(spec, terms, theta, panels):
    """int_0^1 exp(theta S_n) via composite GL, panels tied to a_n's period."""
    total = 0.0
    ak = np.asarray(terms, dtype=np.int64)
    d = panels
    for start in range(0, d, MC_CHUNK):
        j = np.arange(start, min(start + MC_CHUNK, d), dtype=np.int64)
        s = np.zeros((j.size, GL_NODES))
        for a in ak:
            m = (a * j) % d
            x = (m[:, None] + a * _GL_OFFSETS[None, :]) / d
            x -= np.floor(x)
            s += spec.evaluate(x)
        total += float(np.sum(np.exp(theta * s) @ _GLW))
    return total / (2.0 * d)


def exact_mgf(spec, seq, n, theta):
    """E[e^{theta S_n}] by quadrature, with a coarse-run error estimate."""
    terms = seq.terms(n)
    a_n = terms[-1]
    if PANELS_PER_PERIOD * a_n > PANEL_BUDGET:
        feasible = max_feasible_exact_n(seq)
        raise BudgetExceededError(
            f"quadrature budget exceeded: {PANELS_PER_PERIOD}*a_n = "
            f"{PANELS_PER_PERIOD * a_n} > {PANEL_BUDGET}; "
            f"max feasible n for this sequence is {feasible}",
            max_feasible_n=feasible,
        )
    fine = _composite_mgf(spec, terms, theta, PANELS_PER_PERIOD * a_n)
    coarse = _composite_mgf(spec, terms, theta, (PANELS_PER_PERIOD // 2) * a_n)
    return MgfRecord(int(n), float(theta), fine, "exact_quadrature",
                     abs(fine - coarse))


def _mc_reduce_eval(spec, ak64, m_vec, theta):
    """exp(theta S_n) on one chunk of uint64 uniforms."""
    s = np.zeros(m_vec.size)
    for a in ak64:
        x = (a * m_vec).astype(np.float64) / _TWO64
        s += spec.evaluate(x)
    return np.exp(theta * s)


def mc_mgf(spec, seq, n, theta, samples, rng_seed=DEFAULT_SEED):
    """Monte-Carlo E[e^{theta S_n}] with standard-error estimate.

    Deterministic given (rng_seed, samples): Philox draws and a fixed chunked
    pairwise reduction order.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    terms = seq.terms(n)
    ak64 = np.asarray([a % (1 << 64) for a in terms], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        count = min(MC_CHUNK, samples - done)
        m_vec = rng.integers(0, 1 << 64, size=count, dtype=np.uint64)
        vals = _mc_reduce_eval(spec, ak64, m_vec, theta)
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += count
    mean = total / samples
    if samples > 1:
        var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
        stderr = math.sqrt(var / samples)
    else:
        stderr = math.inf
    return MgfRecord(int(n), float(theta), mean, "monte_carlo", stderr)


@dataclass(frozen=True)
class ScaledCgfSequence:
    """(1/n) log E[e^{theta S_n}] along n, with a c0 + c1/n extrapolation.

    The 1/n model matches the moment-ratio limit: E[e^{theta S_n}] ~
    C * lambda^n makes the correction to log lambda exactly (log C)/n.
    """

    theta: float
    entries: tuple                     # (n, value) pairs
    extrapolated: float | None
    fit_residual: float | None

    @property
    def values(self):
        return tuple(v for _, v in self.entries)


def scaled_cgf_sequence(spec, seq, theta, n_list, method="exact",
                        samples=1 << 20, rng_seed=DEFAULT_SEED):
    entries = []
    for n in n_list:
        if method == "exact":
            rec = exact_mgf(spec, seq, n, theta)
        elif method == "mc":
            rec = mc_mgf(spec, seq, n, theta, samples, rng_seed)
        else:
            raise ValueError(f"unknown method {method!r}")
        entries.append((int(n), math.log(rec.value) / n))
    extrapolated = residual = None
    if len(entries) >= 3:
        ns = np.asarray([n for n, _ in entries[-3:]], dtype=float)
        ys = np.asarray([y for _, y in entries[-3:]])
        design = np.vstack([np.ones_like(ns), 1.0 / ns]).T
        coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
        extrapolated = float(coef[0])
        residual = float(np.max(np.abs(design @ coef - ys)))
    return ScaledCgfSequence(float(theta), tuple(entries), extrapolated, residual)


@dataclass(frozen=True)
class TailEstimate:
    """P[S_n/n >= t] by Monte Carlo with a Wilson interval.

    Zero hits switch to a one-sided bound: ``probability`` is None and
    ``wilson_high`` is the 95% upper limit.
    """

    n: int
    t: float
    samples: int
    hits: int
    probability: float | None
    wilson_low: float
    wilson_high: float
    rate_estimate: float | None
    one_sided: bool


def _wilson(hits, samples, z=1.959963984540054):
    p = hits / samples
    denom = 1.0 + z * z / samples
    center = (p + z * z / (2 * samples)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / samples
                                   + z * z / (4 * samples * samples))
    return max(center - half, 0.0), min(center + half, 1.0)


def tail_probability(spec, seq, n, t, samples, rng_seed=DEFAULT_SEED):
    if samples < 1:
        raise ValueError("samples must be >= 1")
    terms = seq.terms(n)
    ak64 = np.asarray([a % (1 << 64) for a in terms], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    hits = 0
    done = 0
    threshold = t * n
    while done < samples:
        count = min(MC_CHUNK, samples - done)
        m_vec = rng.integers(0, 1 << 64, size=count, dtype=np.uint64)
        s = np.zeros(count)
        for a in ak64:
            x = (a * m_vec).astype(np.float64) / _TWO64
            s += spec.evaluate(x)
        hits += int(np.count_nonzero(s >= threshold))
        done += count
    low, high = _wilson(hits, samples)
    if hits == 0:
        return TailEstimate(int(n), float(t), int(samples), 0, None,
                            0.0, high, None, True)
    p = hits / samples
    return TailEstimate(int(n), float(t), int(samples), hits, p,
                        low, high, -math.log(p) / n, False)
