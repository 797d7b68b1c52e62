"""Distribution of the per-user success probability over the network."""

from __future__ import annotations

import dataclasses
import math

import mpmath
import numpy as np

from ..model import NetworkParams
from ..specfun import InversionResult, QuadratureSpec, gil_pelaez
from .kappa import KappaEvaluator
from .traffic import association_probabilities


def _as_u(u) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise ValueError("u must be finite and non-negative")
    return np.atleast_1d(arr), arr.ndim == 0


def _invert(charfn, u: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    """P(P_succ <= u) from the characteristic function of ln P_succ.

    Points with u >= 1 or u <= 0 are resolved without quadrature.
    """
    out = np.where(u >= 1.0, 1.0, 0.0)
    inner = (u > 0) & (u < 1)
    if np.any(inner):
        # one scalar inversion per point: the Fourier-weighted tail rule
        # copes with small |ln u| far better than a shared vector rule
        out[inner] = [gil_pelaez(lambda w: complex(charfn(w)), float(y), spec).value
                      for y in np.log(u[inner])]
    return out


def tier_success_cdf(params: NetworkParams, u, k: int, q: float,
                     quad: QuadratureSpec = QuadratureSpec()):
    """P(P_succ <= u | user served by tier ``k``)."""
    uu, scalar = _as_u(u)
    if q == 0:
        out = np.where(uu >= 1.0, 1.0, 0.0)  # no interference: success is certain
    else:
        out = _invert(KappaEvaluator(params, k, q).charfn, uu, quad)
    return float(out[0]) if scalar else out


def success_cdf(params: NetworkParams, u, q: float, quad: QuadratureSpec = QuadratureSpec()):
    """Fraction of users whose success probability is at most ``u`` when interferers are active w.p. ``q``."""
    uu, scalar = _as_u(u)
    weights = association_probabilities(params)
    out = sum(w * tier_success_cdf(params, uu, k, q, quad) for k, w in enumerate(weights))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def single_tier_success_cdf(params: NetworkParams, u: float, q: float,
                            quad: QuadratureSpec = QuadratureSpec(), dps: int | None = None) -> InversionResult:
    """Single-tier success CDF using the hypergeometric series denominator.

    The binomial series cancels catastrophically for large omega, so it is
    summed with mpmath at a working precision sized to omega_max. Intended
    as an independent check of the general evaluator; use a modest
    omega_max (the default 200 needs a few hundred digits). The series is
    only trusted up to omega_max, so no tail rule is applied beyond it and
    the truncation shows up in ``tail_bound``.
    """
    if params.K != 1:
        raise ValueError("single_tier_success_cdf needs a one-tier network")
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    if q == 0:
        return InversionResult(0.0, 0.0, 0.0, 0.0)
    d = params.delta
    theta = params.theta
    # |C(j w, n)| peaks near exp(pi w / 2); keep that many digits plus margin
    digits = dps or int(quad.omega_max * math.pi / 2 / math.log(10)) + 30
    with mpmath.workdps(digits):
        x = mpmath.mpf(q) * theta / (1 + theta)
        coeffs = []
        xn = mpmath.mpf(1)
        n = 0
        tol = mpmath.mpf("1e-20")
        big = mpmath.exp(mpmath.pi * quad.omega_max / 2)
        one_theta = 1 + mpmath.mpf(theta)
        while True:
            n += 1
            xn *= -x
            b = n - mpmath.mpf(d)
            c = d * xn * one_theta ** n * mpmath.hyp2f1(n, b, b + 1, -theta) / b
            coeffs.append(c)
            if abs(xn) * one_theta * big < tol:
                break

        def charfn(w: float) -> complex:
            with mpmath.workdps(digits):
                s = 1j * mpmath.mpf(w)
                binom = mpmath.mpc(1)
                total = mpmath.mpc(0)
                for m, c in enumerate(coeffs, start=1):
                    binom *= (s - (m - 1)) / m
                    total += binom * c
                # kappa = (sum) - 1 with P_1 = 1
                return complex(-1 / (total - 1))

        return gil_pelaez(charfn, math.log(u), dataclasses.replace(quad, tail=False))
