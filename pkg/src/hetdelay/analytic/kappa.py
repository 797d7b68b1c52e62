"""The interference exponent kappa(omega, k, q).

For a user served by tier k, the log of its conditional success
probability has characteristic function -1 / (P_k kappa(omega, k, q)),
where

    kappa = -2 sum_i (lam_i/lam_k) (P_i B_i / (P_k B_k))^delta I_i(omega) - 1/P_k
    I_i   = int_0^1 (1 - z(y)^{j omega}) y^{-3} dy
    z(y)  = q / (1 + theta y^alpha B_k/B_i) + 1 - q.

Two evaluations are provided. The integral form substitutes y = t^m with
m = 1/(alpha-2), which turns the y^{alpha-3} singularity into a smooth
integrand, and applies composite Gauss-Legendre on panels that are
geometric near t = 0 and resolve the oscillation of z^{j omega}. The
series form expands 1 - z^{j omega} binomially and integrates term by term
into hypergeometric functions. The series cancels badly for large omega
and is kept as a cross-check.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache

import numpy as np

from ..model import NetworkParams
from ..specfun import SeriesConvergenceError, SeriesSpec, hyp2f1_scaled
from .traffic import association_probabilities


class KappaMode(enum.Enum):
    INTEGRAL = "integral"
    SERIES = "series"
    CHECKED = "checked"


class KappaInconsistencyError(RuntimeError):
    pass


_GL_ORDER = 24
_GEOM_PANELS = 44
_CHUNK_ELEMS = 1 << 20
_MAX_PANELS = 1 << 17


@lru_cache(maxsize=64)
def _panel_nodes(n_osc: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [0, 1] in the t variable."""
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    geom = 0.5 ** np.arange(1, _GEOM_PANELS + 1)
    edges = np.unique(np.concatenate([[0.0], geom, np.linspace(0.0, 1.0, n_osc + 1)]))
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (x + 1.0)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


class _TierTerm:
    """One interfering tier's contribution: coeff * I(omega)."""

    def __init__(self, params: NetworkParams, k: int, i: int, q: float):
        tk, ti = params.tiers[k], params.tiers[i]
        self.coeff = (ti.density / tk.density) * (ti.power * ti.bias / (tk.power * tk.bias)) ** params.delta
        self.rb = tk.bias / ti.bias
        self.alpha = params.alpha
        self.delta = params.delta
        self.theta = params.theta
        self.q = q
        # z ranges over [1 - q theta rb / (1 + theta rb), 1]
        x = q * self.theta * self.rb / (1.0 + self.theta * self.rb)
        self.x = x
        self.log_zmin = math.log1p(-x) if x < 1 else -math.inf

    def _logz(self, nodes: np.ndarray) -> np.ndarray:
        m = 1.0 / (self.alpha - 2.0)
        ya = nodes ** (m * self.alpha)  # y^alpha
        s = self.theta * self.rb * ya
        return np.log1p(-self.q * s / (1.0 + s))

    def integral(self, omega: np.ndarray) -> np.ndarray:
        out = np.zeros(omega.shape, dtype=complex)
        if self.q == 0 or omega.size == 0:
            return out
        wmax = float(np.max(np.abs(omega)))
        n_osc = int(math.ceil(wmax * abs(self.log_zmin) / math.pi)) + 2
        n_osc = 1 << max(1, (n_osc - 1).bit_length())  # bucket for the node cache
        if n_osc > _MAX_PANELS:
            raise ValueError(f"omega={wmax:.3g} is too large for the panel rule")
        t, wt = _panel_nodes(n_osc)
        m = 1.0 / (self.alpha - 2.0)
        lz = self._logz(t)
        # dy y^{-3} = m t^{-2m-1} dt
        jac = wt * m * t ** (-2.0 * m - 1.0)
        chunk = max(1, _CHUNK_ELEMS // t.size)
        for s in range(0, omega.size, chunk):
            w = omega[s:s + chunk]
            out[s:s + chunk] = (-np.expm1(1j * np.outer(w, lz))) @ jac
        return out

    def series(self, omega: float, spec: SeriesSpec) -> complex:
        if self.q == 0 or omega == 0:
            return 0j
        d = self.delta
        s = 1j * omega
        # I = -(delta/2) sum_n C(s,n) (-x)^n S_n / (n - delta), where S_n is the Pfaff
        # series without its (1 + theta rb)^n prefactor, which x = q theta rb / (1 + theta rb) absorbs
        total = 0j
        binom = 1 + 0j
        xn = 1.0
        biggest = 0.0
        for n in range(1, spec.n_max + 1):
            binom *= (s - (n - 1)) / n
            xn *= -self.x
            b = n - d
            term = binom * xn * hyp2f1_scaled(n, b, b + 1.0, -self.theta * self.rb) / b
            total += term
            biggest = max(biggest, abs(term))
            if abs(term) < spec.tail_tol * abs(total):
                # alternating terms far larger than the sum leave only roundoff
                if biggest * 1e-16 * math.sqrt(n) > 1e-8 * abs(total):
                    raise SeriesConvergenceError(
                        f"kappa series lost precision to cancellation at omega={omega} "
                        f"(largest term {biggest:.3g}, sum {abs(total):.3g})")
                return -0.5 * d * total
        raise SeriesConvergenceError(
            f"kappa series did not converge within n_max={spec.n_max} terms (omega={omega})")


class KappaEvaluator:
    """Vectorized kappa(omega, k, q) for a fixed (params, k, q)."""

    def __init__(self, params: NetworkParams, k: int, q: float):
        if not 0 <= q <= 1:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        self.params = params
        self.k = k
        self.q = q
        self.assoc = float(association_probabilities(params)[k])
        self.terms = [_TierTerm(params, k, i, q) for i in range(params.K)]

    def __call__(self, omega) -> np.ndarray:
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        acc = np.zeros(w.shape, dtype=complex)
        for term in self.terms:
            acc += term.coeff * term.integral(w)
        out = -2.0 * acc - 1.0 / self.assoc
        return out if np.ndim(omega) else out[0]

    def series(self, omega: float, spec: SeriesSpec = SeriesSpec()) -> complex:
        acc = sum(t.coeff * t.series(float(omega), spec) for t in self.terms)
        return -2.0 * acc - 1.0 / self.assoc

    def charfn(self, omega) -> np.ndarray:
        """E[exp(j omega ln P_succ) | tier k]."""
        return -1.0 / (self.assoc * self(omega))


def kappa(params: NetworkParams, omega: float, k: int, q: float,
          mode: "KappaMode | str" = KappaMode.INTEGRAL, series: SeriesSpec = SeriesSpec(),
          rel_tol: float = 1e-6) -> complex:
    """kappa(omega, k, q) for tier ``k`` (0-based)."""
    mode = KappaMode(mode)
    if omega < 0:
        raise ValueError("omega must be >= 0")
    ev = KappaEvaluator(params, k, q)
    if mode is KappaMode.INTEGRAL:
        return complex(ev(float(omega)))
    s = ev.series(omega, series)
    if mode is KappaMode.SERIES:
        return s
    i = complex(ev(float(omega)))
    if abs(i - s) > rel_tol * abs(i):
        raise KappaInconsistencyError(
            f"kappa integral {i} and series {s} differ by {abs(i - s) / abs(i):.3g} relative "
            f"(omega={omega}, k={k}, q={q})")
    return i
