"""Mean-delay distribution under random, FIFO and round-robin scheduling.

Each policy gives the conditional mean delay as a function of the service
rate mu = p * P_succ (divided by N for random scheduling), so D <= T is
the event P_succ >= thr for a threshold thr(T, N, xi) that does not depend
on the interference. Writing Y = ln P_succ and L = ln thr,

    P(D <= T | tier k) = P(Y >= L) = P(L - Y <= 0),

and L - Y has characteristic function E[exp(j w L)] * conj(M_Y(w)). This
is inverted at zero once per tier, vectorized over T. Threshold values
thr >= 1 can never be met and drop out of the expectation exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np

from ..model import NetworkParams, SchedulingPolicy
from ..specfun import QuadratureError, QuadratureSpec, gil_pelaez
from .kappa import KappaEvaluator
from .traffic import CellLaw, association_probabilities, mean_users_per_cell, user_count_distribution

IRWIN_HALL_EXACT_MAX = 12
FIFO_MC_DRAWS = 100_000
FIFO_MC_BINS = 96
FIFO_MC_SEED = 20160913
N_TAIL_MASS = 1e-8


def conditional_mean_delay(policy: "SchedulingPolicy | str", mu: float, xi: float, n: int = 1) -> float:
    """Mean delay (slots) of a Geo/G/1 queue fed at ``xi`` and served at ``mu``.

    For round-robin, ``n`` users share the cycle and ``mu`` is the per-turn
    success rate. For FIFO, ``xi`` is the aggregate arrival rate of the
    cell. Returns inf when the queue is unstable.
    """
    policy = SchedulingPolicy.parse(policy)
    if mu <= xi:
        return math.inf
    d = (1.0 - xi) / (mu - xi)
    if policy is SchedulingPolicy.ROUND_ROBIN:
        return n * (d - 1.0) + n / 2.0
    return d


@lru_cache(maxsize=256)
def _irwin_hall_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for the sum of ``n`` U(0,1) variables.

    The density is a degree n-1 polynomial on each unit segment, so
    Gauss-Legendre with enough nodes per segment integrates polynomials
    against it exactly.
    """
    if n == 0:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(max(8, n // 2 + 2))
    nodes, weights = [], []
    for seg in range(n):
        s = seg + 0.5 * (x + 1.0)
        dens = sum((-1) ** j * comb(n, j) * (s - j) ** (n - 1)
                   for j in range(seg + 1)) / factorial(n - 1)
        nodes.append(s)
        weights.append(0.5 * w * dens)
    return np.concatenate(nodes), np.concatenate(weights)


@lru_cache(maxsize=1024)
def _uniform_sum_mc(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of a seeded Monte Carlo sample of the sum of ``n`` U(0,1)."""
    rng = np.random.default_rng([FIFO_MC_SEED, n])
    s = rng.random((FIFO_MC_DRAWS, n)).sum(axis=1)
    counts, edges = np.histogram(s, bins=FIFO_MC_BINS)
    keep = counts > 0
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers[keep], counts[keep] / FIFO_MC_DRAWS


def uniform_sum_rule(params: NetworkParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for the aggregate rate of ``n`` users with U(xi_min, xi_max) rates."""
    span = params.xi_max - params.xi_min
    if span == 0 or n == 0:
        return np.array([n * params.xi_min]), np.array([1.0])
    x, w = _irwin_hall_rule(n) if n <= IRWIN_HALL_EXACT_MAX else _uniform_sum_mc(n)
    return n * params.xi_min + span * x, w


@dataclass(frozen=True)
class _Components:
    """thr(xi0) = a + b xi0 restricted to the xi0 range where thr < 1.

    Arrays are (n_T, n_components); ``weight`` already includes the
    fraction of the xi0 range that is active.
    """

    log_lo: np.ndarray  # ln thr at one end of the active xi0 range
    ell: np.ndarray  # ln(thr_hi / thr_lo)
    weight: np.ndarray

    def log_moment(self, omega: float) -> np.ndarray:
        """E[thr^{j omega}; active] per T row, unnormalized."""
        s = 1j * omega + 1.0
        flat = self.ell == 0
        ell = np.where(flat, 1.0, self.ell)
        ratio = np.where(flat, 1.0, np.expm1(s * ell) / (s * np.expm1(ell)))
        return (self.weight * np.exp(1j * omega * self.log_lo) * ratio).sum(axis=1)


def _affine_thresholds(params: NetworkParams, policy: SchedulingPolicy, k: int,
                       T: np.ndarray, cell_law: CellLaw = CellLaw.OCCUPIED
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a, b, w) with D <= T  iff  P_succ >= a + b xi0, before restricting to thr < 1."""
    counts = user_count_distribution(params, k, tail_mass=N_TAIL_MASS)
    n_vals, n_w = counts.cell_weights(cell_law)
    p = params.p
    Tc = T[:, None]
    if policy is SchedulingPolicy.FIFO:
        # xi0 stays explicit; the other N-1 users enter through their sum
        parts = [uniform_sum_rule(params, int(n) - 1) for n in n_vals]
        others = np.concatenate([x for x, _ in parts])[None, :]
        w = np.concatenate([wn * ws for wn, (_, ws) in zip(n_w, parts)])
        a = (1.0 / Tc + (Tc - 1.0) / Tc * others)
        b = (Tc - 1.0) / Tc + 0.0 * others
    elif policy is SchedulingPolicy.RANDOM:
        n = n_vals[None, :].astype(float)
        a, b, w = n / Tc, n * (Tc - 1.0) / Tc, n_w
    else:
        c = 1.0 / (0.5 + Tc / n_vals[None, :])
        a, b, w = c, 1.0 - c, n_w
    with np.errstate(divide="ignore"):
        scale = 1.0 / p if p > 0 else np.inf
    return a * scale, b * scale, w


def _components(params: NetworkParams, policy: SchedulingPolicy, k: int, T: np.ndarray,
                cell_law: CellLaw = CellLaw.OCCUPIED) -> _Components:
    a, b, w = _affine_thresholds(params, policy, k, T, cell_law)
    a, b = np.broadcast_arrays(a, b)
    lo_x, hi_x = params.xi_min, params.xi_max
    span = hi_x - lo_x
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = a + b * lo_x
        t_hi = a + b * hi_x
        if span == 0:
            frac = (t_lo < 1.0).astype(float)
            end = t_lo
        else:
            # thr is monotone in xi0, so {thr < 1} is an interval touching one end
            root = np.where(b != 0, (1.0 - a) / b, np.nan)
            inc = b > 0
            x0 = np.where(inc, lo_x, np.clip(root, lo_x, hi_x))
            x1 = np.where(inc, np.clip(root, lo_x, hi_x), hi_x)
            flat = b == 0
            x0 = np.where(flat, lo_x, x0)
            x1 = np.where(flat, np.where(a < 1.0, hi_x, lo_x), x1)
            frac = np.clip((x1 - x0) / span, 0.0, 1.0)
            t_lo = a + b * x0
            end = a + b * x1
    weight = np.where(frac > 0, frac * w, 0.0)
    live = weight > 0
    log_lo = np.where(live, np.log(np.where(live, t_lo, 1.0)), 0.0)
    ell = np.where(live, np.log(np.where(live, end, 1.0)) - log_lo, 0.0)
    return _Components(log_lo, ell, weight)


def _tier_delay_cdf(params, policy, k, T, q, quad, cell_law=CellLaw.OCCUPIED) -> np.ndarray:
    comp = _components(params, policy, k, T, cell_law)
    W = comp.weight.sum(axis=1)
    if q == 0:
        return W  # success is certain, so every feasible threshold is met
    rows = np.nonzero(W > 0)[0]
    out = np.zeros(T.size)
    if rows.size == 0:
        return out
    cols = np.nonzero((comp.weight[rows] > 0).any(axis=0))[0]
    sub = _Components(comp.log_lo[np.ix_(rows, cols)], comp.ell[np.ix_(rows, cols)],
                      comp.weight[np.ix_(rows, cols)] / W[rows, None])
    ev = KappaEvaluator(params, k, q)

    def charfn(omega):
        return sub.log_moment(omega) * np.conj(ev.charfn(omega))

    try:
        res = gil_pelaez(charfn, np.zeros(rows.size), quad)
    except QuadratureError as exc:
        raise QuadratureError(f"{exc} [delay cdf: policy={policy.value}, tier={k + 1}, "
                              f"T={T[rows].tolist()}, q={q}]") from exc
    out[rows] = W[rows] * res.value
    return out


def delay_cdf(params: NetworkParams, policy: "SchedulingPolicy | str", T, q: float,
              quad: QuadratureSpec = QuadratureSpec(), cell_law: "CellLaw | str" = CellLaw.OCCUPIED):
    """Fraction of users whose conditional mean delay is at most ``T`` slots.

    Interferers are active independently with probability ``q``.
    """
    policy = SchedulingPolicy.parse(policy)
    cell_law = CellLaw(cell_law)
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    Ta = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(Ta < 1):
        raise ValueError("T must be >= 1 slot")
    if params.p == 0:
        # the BS never transmits, so no finite delay is reached
        out = np.zeros(Ta.shape)
        return float(out[0]) if np.ndim(T) == 0 else out
    weights = association_probabilities(params)
    out = sum(wk * _tier_delay_cdf(params, policy, k, Ta, q, quad, cell_law) for k, wk in enumerate(weights))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(T) == 0 else out


def modified_activity(params: NetworkParams, policy: "SchedulingPolicy | str") -> float:
    """Interferer activity probability of the modified (optimistic) system."""
    policy = SchedulingPolicy.parse(policy)
    if policy is SchedulingPolicy.FIFO:
        nmin = min(mean_users_per_cell(params, k) for k in range(params.K))
        return min(1.0, params.p * params.xi_mean * nmin)
    return params.p * params.xi_mean


@dataclass(frozen=True)
class BoundPair:
    """Dominant-system and modified-system evaluations, plus their pointwise order."""

    dominant: "float | np.ndarray"
    modified: "float | np.ndarray"
    q_dominant: float
    q_modified: float

    @property
    def lower(self):
        return np.minimum(self.dominant, self.modified)

    @property
    def upper(self):
        return np.maximum(self.dominant, self.modified)


def delay_bounds(params: NetworkParams, policy: "SchedulingPolicy | str", T,
                 quad: QuadratureSpec = QuadratureSpec(),
                 cell_law: "CellLaw | str" = CellLaw.OCCUPIED) -> BoundPair:
    policy = SchedulingPolicy.parse(policy)
    qd, qm = params.p, modified_activity(params, policy)
    dom = delay_cdf(params, policy, T, qd, quad, cell_law)
    mod = dom if qm == qd else delay_cdf(params, policy, T, qm, quad, cell_law)
    return BoundPair(dom, mod, qd, qm)


def success_bounds(params: NetworkParams, policy: "SchedulingPolicy | str", u,
                   quad: QuadratureSpec = QuadratureSpec()) -> BoundPair:
    from .success import success_cdf

    qd, qm = params.p, modified_activity(params, policy)
    dom = success_cdf(params, u, qd, quad)
    mod = dom if qm == qd else success_cdf(params, u, qm, quad)
    return BoundPair(dom, mod, qd, qm)


@dataclass(frozen=True)
class OutageBounds:
    dominant: float
    modified: float

    @property
    def lower(self) -> float:
        return min(self.dominant, self.modified)

    @property
    def upper(self) -> float:
        return max(self.dominant, self.modified)


def outage_from_cdf(H, beta_min: float, beta_max: float, nodes: int = 8) -> float:
    """1 - mean of H(beta) for beta uniform on [beta_min, beta_max]."""
    if beta_max == beta_min:
        return 1.0 - float(np.asarray(H(np.array([beta_min])))[0])
    x, w = np.polynomial.legendre.leggauss(nodes)
    b = beta_min + 0.5 * (beta_max - beta_min) * (x + 1.0)
    return float(1.0 - 0.5 * np.dot(w, np.asarray(H(b))))


def delay_outage(params: NetworkParams, policy: "SchedulingPolicy | str",
                 quad: QuadratureSpec = QuadratureSpec(), nodes: int = 8,
                 cell_law: "CellLaw | str" = CellLaw.OCCUPIED) -> OutageBounds:
    """Fraction of users whose mean delay exceeds their own requirement."""
    policy = SchedulingPolicy.parse(policy)
    etas = []
    for q in (params.p, modified_activity(params, policy)):
        etas.append(outage_from_cdf(lambda b: delay_cdf(params, policy, b, q, quad, cell_law),
                                    params.beta_min, params.beta_max, nodes))
    return OutageBounds(*etas)
