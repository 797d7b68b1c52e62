"""Special functions and characteristic-function inversion.

Only the parameter families needed by the delay analysis are supported:
the Gauss function 2F1(n, b; b+1; x) for integer n >= 1 and x <= 0, and
CDF recovery from the characteristic function of a real random variable.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    pass


class SeriesConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Numerical control for the Gil-Pelaez integral.

    The integral is evaluated adaptively on [omega_lo, omega_max]. With
    ``tail`` set, the range [omega_max, tail_factor * omega_max] is
    integrated as well with a Fourier-weighted rule. Vector targets have
    no such rule and stop at vector_tail_factor * omega_max instead, which
    is far cheaper when many rows oscillate at different rates. Whatever
    is left beyond the last integrated frequency is not added; an estimate
    of it is returned as ``tail_bound``.
    """

    omega_max: float = 200.0
    abs_tol: float = 1e-4
    rel_tol: float = 1e-8
    max_subdiv: int = 2000
    omega_lo: float = 1e-6
    tail: bool = True
    tail_factor: float = 50.0
    vector_tail_factor: float = 5.0

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ValueError("omega_max must be > 0")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be > 0")
        if self.max_subdiv < 1:
            raise ValueError("max_subdiv must be >= 1")
        if not 0 < self.omega_lo < self.omega_max:
            raise ValueError("need 0 < omega_lo < omega_max")
        if not (self.tail_factor > 1 and self.vector_tail_factor > 1):
            raise ValueError("tail factors must be > 1")

    def omega_end(self, vector: bool = False) -> float:
        if not self.tail:
            return self.omega_max
        return self.omega_max * (self.vector_tail_factor if vector else self.tail_factor)


@dataclass(frozen=True)
class SeriesSpec:
    n_max: int = 20000
    tail_tol: float = 1e-15

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be > 0")


def double_factorial(n: int) -> int:
    """n!! for odd n >= 1, with the convention (-1)!! = 1."""
    if n != int(n):
        raise ValueError(f"double_factorial needs an integer, got {n!r}")
    n = int(n)
    if n == -1:
        return 1
    if n < 1 or n % 2 == 0:
        raise ValueError(f"double_factorial is defined here for odd n >= -1, got {n}")
    out = 1
    for m in range(n, 0, -2):
        out *= m
    return out


def complex_binomial(s: complex, n: int) -> complex:
    """Generalized binomial coefficient C(s, n) = prod_{m<n} (s - m) / (m + 1)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = 1 + 0j
    for m in range(n):
        out *= (s - m) / (m + 1)
    return out


def complex_pow(base: float, exponent: complex) -> complex:
    if not base > 0:
        raise ValueError(f"complex_pow needs a positive real base, got {base}")
    return cmath.exp(exponent * math.log(base))


def _hyp2f1_pfaff_series(a: int, b: float, c: float, z: float, series: SeriesSpec) -> float:
    """sum_m (a)_m (c-b)_m / ((c)_m m!) z^m for 0 <= z < 1."""
    cb = c - b
    term = 1.0
    total = 1.0
    for m in range(series.n_max):
        term *= (a + m) * (cb + m) / ((c + m) * (m + 1)) * z
        total += term
        if abs(term) < series.tail_tol * abs(total):
            return total
    raise SeriesConvergenceError(
        f"2F1({a}, {b}; {c}; ...) did not converge within n_max={series.n_max} terms")


def hyp2f1_scaled(n: int, b: float, c: float, x: float, series: SeriesSpec = SeriesSpec()) -> float:
    """(1 - x)^n * 2F1(n, b; c; x), the Pfaff-transformed series without its prefactor.

    Keeping the prefactor separate lets callers combine it with x^n-sized
    factors without overflow.
    """
    if x > 0:
        raise ValueError(f"hyp2f1 is only implemented for x <= 0, got {x}")
    if n < 1 or n != int(n):
        raise ValueError(f"first parameter must be a positive integer, got {n}")
    if abs(c - b - 1.0) > 1e-12:
        raise ValueError("only the c = b + 1 family is supported")
    return _hyp2f1_pfaff_series(int(n), b, c, x / (x - 1.0), series)


def hyp2f1(n: int, b: float, c: float, x: float, series: SeriesSpec = SeriesSpec()) -> float:
    """Gauss hypergeometric 2F1(n, b; b+1; x) for integer n >= 1 and x <= 0.

    Uses 2F1(a,b;c;x) = (1-x)^{-a} 2F1(a, c-b; c; x/(x-1)), which maps
    x in (-inf, 0] onto [0, 1) where the series converges.
    """
    return hyp2f1_scaled(n, b, c, x, series) * (1.0 - x) ** (-n)


class InversionResult(NamedTuple):
    value: "float | np.ndarray"  # clamped to [0, 1]
    raw: "float | np.ndarray"  # before clamping
    abs_err: float  # quadrature error estimate on the CDF scale
    tail_bound: float  # estimate of the contribution beyond omega_max


def _tail_estimate(charfn, y, omega_max: float) -> float:
    """Bound-style estimate of |(1/pi) int_{omega_max}^inf Im{e^{-jwy} M}/w dw|."""
    m1 = np.max(np.abs(charfn(omega_max)))
    m2 = np.max(np.abs(charfn(2.0 * omega_max)))
    bounds = []
    if m1 > 0 and m2 < m1:
        decay = math.log(m1 / max(m2, 1e-300)) / math.log(2.0)
        bounds.append(m1 / decay)  # int_W^inf c w^{-1-s} dw
    ymin = np.min(np.abs(y))
    if ymin > 0:
        bounds.append(2.0 * max(m1, m2) / (omega_max * ymin))  # Dirichlet-type bound
    if not bounds:
        return float("inf")
    return float(min(bounds) / math.pi)


def gil_pelaez(charfn: Callable, y, spec: QuadratureSpec = QuadratureSpec()) -> InversionResult:
    """CDF of a real random variable from its characteristic function.

    ``charfn(w)`` returns M(jw) = E[exp(jwY)] for real w > 0. ``y`` may be a
    scalar or an array; ``charfn`` may itself return an array (one
    characteristic function per target), in which case it is broadcast
    against ``y``.

    F(y) = 1/2 - (1/pi) int_0^inf Im{exp(-jwy) M(jw)} / w dw
    """
    y_arr = np.asarray(y, dtype=float)
    probe = np.asarray(charfn(spec.omega_lo))
    vector = y_arr.ndim > 0 or probe.ndim > 0
    if vector:
        return _gil_pelaez_vec(charfn, y_arr, spec)
    return _gil_pelaez_scalar(charfn, float(y_arr), spec)


def gil_pelaez_cdf(charfn: Callable, y, spec: QuadratureSpec = QuadratureSpec()):
    return gil_pelaez(charfn, y, spec).value


def _gil_pelaez_scalar(charfn, y: float, spec: QuadratureSpec) -> InversionResult:
    def g(w):
        return (complex(cmath.exp(-1j * w * y) * charfn(w))).imag / w

    lo = spec.omega_lo
    budget = spec.abs_tol * math.pi
    # below omega_lo the integrand is replaced by its (finite) value at omega_lo
    head = lo * g(lo)
    body, err = _quad_err(g, lo, spec.omega_max, 0.25 * budget, spec.rel_tol,
                          spec.max_subdiv, "Gil-Pelaez body")
    total = head + body
    tail_bound = _tail_estimate(charfn, np.asarray(y), spec.omega_end())
    if spec.tail:
        t, terr = _scalar_tail(charfn, y, spec, 0.25 * budget)
        total += t
        err += terr
    raw = 0.5 - total / math.pi
    if err / math.pi > spec.abs_tol:
        raise QuadratureError(
            f"Gil-Pelaez inversion at y={y:.6g}: error estimate {err / math.pi:.3g} "
            f"exceeds abs_tol={spec.abs_tol:.3g}")
    return InversionResult(min(1.0, max(0.0, raw)), raw, err / math.pi, tail_bound)


def _quad_err(f, a, b, epsabs, epsrel, limit, what, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit,
                             full_output=1, **kw)
    val, err = res[0], res[1]
    if not math.isfinite(val) or not math.isfinite(err):
        raise QuadratureError(f"{what}: non-finite result")
    return val, err


def _scalar_tail(charfn, y: float, spec: QuadratureSpec, epsabs: float):
    lo, hi = spec.omega_max, spec.omega_end()
    if y == 0.0:
        return _quad_err(lambda w: complex(charfn(w)).imag / w, lo, hi, epsabs,
                         spec.rel_tol, spec.max_subdiv, "Gil-Pelaez tail")
    # Im{e^{-jwy} M} = cos(w|y|) Im M - sign(y) sin(w|y|) Re M
    s = 1.0 if y > 0 else -1.0
    a, ea = _quad_err(lambda w: complex(charfn(w)).imag / w, lo, hi, 0.5 * epsabs, spec.rel_tol,
                      spec.max_subdiv, "Gil-Pelaez tail (cos)", weight="cos", wvar=abs(y))
    b, eb = _quad_err(lambda w: complex(charfn(w)).real / w, lo, hi, 0.5 * epsabs, spec.rel_tol,
                      spec.max_subdiv, "Gil-Pelaez tail (sin)", weight="sin", wvar=abs(y))
    if ea + eb <= epsabs:
        return a - s * b, ea + eb
    # M itself oscillates (no decay), which defeats the weighted rule
    v, ev = _quad_err(lambda w: (complex(cmath.exp(-1j * w * y) * charfn(w))).imag / w, lo, hi,
                      epsabs, spec.rel_tol, 10 * spec.max_subdiv, "Gil-Pelaez tail")
    return (v, ev) if ev < ea + eb else (a - s * b, ea + eb)


def _gil_pelaez_vec(charfn, y: np.ndarray, spec: QuadratureSpec) -> InversionResult:
    def g(w):
        return np.imag(np.exp(-1j * w * y) * charfn(w)) / w

    lo = spec.omega_lo
    budget = spec.abs_tol * math.pi
    head = lo * g(lo)
    body, err, info = _quad_vec(g, lo, spec.omega_max, 0.25 * budget, spec)
    total = head + body
    end = spec.omega_end(vector=True)
    tail_bound = _tail_estimate(charfn, y, end)
    if spec.tail:
        t, terr, _ = _quad_vec(g, spec.omega_max, end, 0.25 * budget, spec)
        total = total + t
        err += terr
    raw = 0.5 - total / math.pi
    if err / math.pi > spec.abs_tol:
        raise QuadratureError(
            f"Gil-Pelaez inversion: error estimate {err / math.pi:.3g} exceeds "
            f"abs_tol={spec.abs_tol:.3g} ({info})")
    return InversionResult(np.clip(raw, 0.0, 1.0), raw, err / math.pi, tail_bound)


def _quad_vec(g, a, b, epsabs, spec):
    res, err, info = integrate.quad_vec(g, a, b, epsabs=epsabs, epsrel=spec.rel_tol,
                                        norm="max", limit=spec.max_subdiv, full_output=True)
    if not np.all(np.isfinite(res)):
        raise QuadratureError("Gil-Pelaez inversion: non-finite integrand")
    return res, float(err), getattr(info, "message", "")
