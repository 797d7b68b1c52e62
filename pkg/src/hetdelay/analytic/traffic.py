"""Traffic statistics: association, cell areas, users per cell, link distance."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..model import NetworkParams

# shape of the gamma-type approximation to the Poisson-Voronoi cell area
AREA_SHAPE = 3.5
# relative error allowed in the mean of the truncated user-count PMF
MEAN_REL_TOL = 1e-7


def association_probability(params: NetworkParams, k: int) -> float:
    """Probability that the typical user is served by tier ``k`` (0-based)."""
    return float(association_probabilities(params)[k])


def association_probabilities(params: NetworkParams) -> np.ndarray:
    d = params.delta
    lam = np.array([t.density for t in params.tiers])
    pb = np.array([t.power * t.bias for t in params.tiers])
    # normalize by the largest biased power so large mW values stay well scaled
    w = lam * (pb / pb.max()) ** d
    return w / w.sum()


def cell_area_pdf(params: NetworkParams, k: int, x):
    """Approximate density of the coverage area of a tier-``k`` cell (m^2)."""
    rate = params.tiers[k].density / association_probability(params, k)
    x = np.asarray(x, dtype=float)
    s = np.clip(x, 0.0, None) * rate
    with np.errstate(divide="ignore"):
        logf = (math.log(343.0 / 15.0) + 0.5 * math.log(AREA_SHAPE / math.pi)
                + 2.5 * np.log(s) - AREA_SHAPE * s + math.log(rate))
    out = np.where(x > 0, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def link_distance_pdf(params: NetworkParams, k: int, r):
    """Density of the serving-link length given association with tier ``k``."""
    rate = params.tiers[k].density / association_probability(params, k)
    r = np.asarray(r, dtype=float)
    out = np.where(r >= 0, 2 * math.pi * r * rate * np.exp(-math.pi * r * r * rate), 0.0)
    return out if out.ndim else float(out)


def mean_users_per_cell(params: NetworkParams, k: int) -> float:
    return association_probability(params, k) * params.lambda_u / params.tiers[k].density


def mean_total_arrival_rate(params: NetworkParams, k: int) -> float:
    """Mean aggregate packet arrival rate at a tier-``k`` BS (packets/slot)."""
    return params.xi_mean * mean_users_per_cell(params, k)


def _mark_fraction(params: NetworkParams, xi: float, beta: float) -> float:
    if not params.xi_min <= xi <= params.xi_max:
        raise ValueError(f"xi={xi} outside [{params.xi_min}, {params.xi_max}]")
    if not params.beta_min <= beta <= params.beta_max:
        raise ValueError(f"beta={beta} outside [{params.beta_min}, {params.beta_max}]")
    fx = 1.0 if params.xi_max == params.xi_min else (xi - params.xi_min) / (params.xi_max - params.xi_min)
    fb = (1.0 if params.beta_max == params.beta_min
          else (beta - params.beta_min) / (params.beta_max - params.beta_min))
    return fx * fb


def user_count_log_pmf(c0: float, n) -> np.ndarray:
    """log P(N = n) for P(N=n) = (2n+5)!!/(15 n!) (c0/2)^n (1+c0)^{-n-7/2}.

    (2n+5)!! / (15 * 2^n) = Gamma(n + 7/2) / Gamma(7/2), so this is a
    negative binomial with shape 7/2.
    """
    n = np.asarray(n, dtype=float)
    if c0 == 0:
        return np.where(n == 0, 0.0, -np.inf)
    return (gammaln(n + AREA_SHAPE) - gammaln(AREA_SHAPE) - gammaln(n + 1)
            + n * math.log(c0) - (n + AREA_SHAPE) * math.log1p(c0))


class CellLaw(str, enum.Enum):
    """How the user count of the typical user's own cell is weighted.

    ``occupied`` takes the per-BS count conditioned on N >= 1. ``size_biased``
    weights each count by n, which is the law seen from a uniformly chosen
    user (busier cells hold more users).
    """

    OCCUPIED = "occupied"
    SIZE_BIASED = "size_biased"


@dataclass(frozen=True)
class UserCountDistribution:
    c0: float
    pmf: np.ndarray  # P(N = n) for n = 0..n_cap
    mean: float  # closed-form mean
    mean_total_rate: float  # mean aggregate arrival rate at the BS

    @property
    def n_cap(self) -> int:
        return len(self.pmf) - 1

    def conditioned_on_occupied(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, weights) for n >= 1, renormalized."""
        n = np.arange(1, len(self.pmf))
        w = self.pmf[1:]
        total = w.sum()
        if total <= 0:
            # the typical user alone
            return np.array([1]), np.array([1.0])
        return n, w / total

    def cell_weights(self, law: "CellLaw | str" = CellLaw.OCCUPIED) -> tuple[np.ndarray, np.ndarray]:
        if CellLaw(law) is CellLaw.OCCUPIED:
            return self.conditioned_on_occupied()
        n = np.arange(1, len(self.pmf))
        w = n * self.pmf[1:]
        total = w.sum()
        if total <= 0:
            return np.array([1]), np.array([1.0])
        return n, w / total


def user_count_distribution(params: NetworkParams, k: int, xi: float | None = None,
                            beta: float | None = None, tail_mass: float = 1e-8) -> UserCountDistribution:
    """Distribution of the number of tier-``k`` cell users with rate < xi and requirement < beta.

    Defaults (xi_max, beta_max) give the total user count of the cell.
    """
    xi = params.xi_max if xi is None else xi
    beta = params.beta_max if beta is None else beta
    nbar = mean_users_per_cell(params, k) * _mark_fraction(params, xi, beta)
    c0 = nbar / AREA_SHAPE
    if c0 == 0:
        pmf = np.array([1.0])
    else:
        # grow the support until both the mass and the mean are captured
        n_cap = max(16, int(4 * nbar) + 16)
        while True:
            n = np.arange(n_cap + 1)
            pmf = np.exp(user_count_log_pmf(c0, n))
            if 1.0 - pmf.sum() < tail_mass and 1.0 - (n * pmf).sum() / nbar < MEAN_REL_TOL:
                break
            n_cap *= 2
        # shortest prefix that still meets both targets
        cut = max(np.searchsorted(np.cumsum(pmf), 1.0 - tail_mass),
                  np.searchsorted(np.cumsum(n * pmf) / nbar, 1.0 - MEAN_REL_TOL))
        pmf = pmf[: min(int(cut), n_cap) + 1]
    return UserCountDistribution(c0=c0, pmf=pmf, mean=nbar,
                                 mean_total_rate=params.xi_mean * mean_users_per_cell(params, k))
