"""Poisson deployments on a torus and biased max-power association."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .model import MarkedUser, NetworkParams

# expected BS count of the sparsest tier in the default window
DEFAULT_MIN_BS = 50


class SparseWindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Deployment:
    """One realization of all BS point sets and the marked users.

    Coordinates live on the torus [0, window_side)^2.
    """

    window_side: float
    bs_per_tier: tuple[np.ndarray, ...]  # each (n_k, 2)
    user_pos: np.ndarray  # (n_u, 2)
    user_xi: np.ndarray
    user_beta: np.ndarray
    seed: Optional[int] = None

    @property
    def n_users(self) -> int:
        return len(self.user_pos)

    @property
    def bs_counts(self) -> list[int]:
        return [len(b) for b in self.bs_per_tier]

    def users(self) -> list[MarkedUser]:
        return [MarkedUser((float(x), float(y)), float(a), float(b))
                for (x, y), a, b in zip(self.user_pos, self.user_xi, self.user_beta)]


@dataclass(frozen=True)
class AssociationMap:
    tier: np.ndarray  # serving tier per user (0-based)
    bs: np.ndarray  # index of the serving BS within its tier
    distance: np.ndarray  # torus link length


def default_window_side(params: NetworkParams, min_bs: float = DEFAULT_MIN_BS) -> float:
    lam = min(t.density for t in params.tiers)
    return math.sqrt(min_bs / lam)


def sample_ppp(density: float, side: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP of the given intensity on [0, side)^2."""
    n = rng.poisson(density * side * side) if density > 0 else 0
    return rng.random((n, 2)) * side


def sample_deployment(params: NetworkParams, window_side: Optional[float] = None,
                      seed: Optional[int] = None) -> Deployment:
    side = default_window_side(params) if window_side is None else float(window_side)
    if not side > 0:
        raise ValueError("window_side must be > 0")
    for k, t in enumerate(params.tiers):
        if t.density * side * side < 1:
            warnings.warn(f"tier {k + 1} expects {t.density * side * side:.3g} BSs in the window; "
                          "edge statistics will be unreliable", SparseWindowWarning, stacklevel=2)
    bs_seq, user_seq = np.random.SeedSequence(seed).spawn(2)
    bs_rngs = [np.random.default_rng(s) for s in bs_seq.spawn(params.K)]
    bs = tuple(sample_ppp(t.density, side, r) for t, r in zip(params.tiers, bs_rngs))
    rng = np.random.default_rng(user_seq)
    pos = sample_ppp(params.lambda_u, side, rng)
    xi = rng.uniform(params.xi_min, params.xi_max, len(pos))
    beta = rng.uniform(params.beta_min, params.beta_max, len(pos))
    return Deployment(side, bs, pos, xi, beta, seed)


def torus_distance(a, b, side: float) -> np.ndarray:
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % side
    d = np.minimum(d, side - d)
    return np.hypot(d[..., 0], d[..., 1])


def _nearest(points: np.ndarray, sites: np.ndarray, side: float) -> tuple[np.ndarray, np.ndarray]:
    """Nearest site (lowest index on exact ties) for every point, torus metric."""
    tree = cKDTree(sites % side, boxsize=side)
    kk = min(2, len(sites))
    dist, idx = tree.query(points % side, k=kk)
    if kk == 1:
        return dist, idx
    tie = dist[:, 1] == dist[:, 0]
    best = np.where(tie, np.minimum(idx[:, 0], idx[:, 1]), idx[:, 0])
    return dist[:, 0], best


def associate_all(dep: Deployment, params: NetworkParams) -> AssociationMap:
    """Serve every user from the BS maximizing B_k P_k d^-alpha."""
    if params.K != len(dep.bs_per_tier):
        raise ValueError("deployment and params disagree on the number of tiers")
    if sum(dep.bs_counts) == 0:
        raise ValueError("cannot associate users: the deployment has no BSs")
    n = dep.n_users
    best_score = np.full(n, -np.inf)
    tier = np.zeros(n, dtype=int)
    bs = np.zeros(n, dtype=int)
    dist = np.full(n, np.inf)
    if n == 0:
        return AssociationMap(tier, bs, dist)
    for k, (t, sites) in enumerate(zip(params.tiers, dep.bs_per_tier)):
        if len(sites) == 0:
            continue
        d, i = _nearest(dep.user_pos, sites, dep.window_side)
        with np.errstate(divide="ignore"):
            score = math.log(t.power * t.bias) - params.alpha * np.log(d)
        better = score > best_score  # strict: earlier tiers win ties
        best_score = np.where(better, score, best_score)
        tier[better], bs[better], dist[better] = k, i[better], d[better]
    return AssociationMap(tier, bs, dist)


@dataclass(frozen=True)
class CellStatistics:
    tier: int
    histogram: np.ndarray  # fraction of tier-k cells holding n users, n = 0, 1, ...
    n_cells: int
    mean_users: float
    association_fraction: np.ndarray  # share of users served by each tier


def empirical_cell_statistics(realizations: Iterable[tuple[Deployment, AssociationMap]],
                              k: int) -> CellStatistics:
    counts = []
    per_tier = None
    for dep, amap in realizations:
        served = np.bincount(amap.bs[amap.tier == k], minlength=len(dep.bs_per_tier[k]))
        counts.append(served)
        tally = np.bincount(amap.tier, minlength=len(dep.bs_per_tier))
        per_tier = tally if per_tier is None else per_tier + tally
    if per_tier is None:
        raise ValueError("need at least one deployment")
    counts = np.concatenate(counts) if counts else np.zeros(0, dtype=int)
    hist = np.bincount(counts).astype(float) if counts.size else np.zeros(1)
    if counts.size:
        hist /= counts.size
    total = per_tier.sum()
    frac = per_tier / total if total else np.zeros(len(per_tier))
    return CellStatistics(k, hist, int(counts.size), float(counts.mean()) if counts.size else 0.0, frac)


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    n = max(len(p), len(q))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())


DEPLOYMENT_HEADER = ["kind", "tier", "x", "y", "xi", "beta"]


def dump_deployment(dep: Deployment, path: "str | Path") -> None:
    """One row per point; BS rows leave xi/beta empty, user rows leave tier empty."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# window_side={dep.window_side!r} seed={dep.seed!r}\n")
        w = csv.writer(fh)
        w.writerow(DEPLOYMENT_HEADER)
        for k, sites in enumerate(dep.bs_per_tier):
            for x, y in sites:
                w.writerow(["bs", k + 1, repr(float(x)), repr(float(y)), "", ""])
        for (x, y), a, b in zip(dep.user_pos, dep.user_xi, dep.user_beta):
            w.writerow(["user", "", repr(float(x)), repr(float(y)), repr(float(a)), repr(float(b))])


def load_deployment(path: "str | Path", n_tiers: int) -> Deployment:
    with open(path, newline="") as fh:
        meta = fh.readline()
        if not meta.startswith("# window_side="):
            raise ValueError(f"{path}: missing deployment header line")
        fields = dict(part.split("=", 1) for part in meta[2:].split())
        side = float(fields["window_side"])
        seed = None if fields.get("seed", "None") == "None" else int(fields["seed"])
        rows = list(csv.DictReader(fh))
    bs = [[] for _ in range(n_tiers)]
    users = []
    for r in rows:
        if r["kind"] == "bs":
            bs[int(r["tier"]) - 1].append((float(r["x"]), float(r["y"])))
        elif r["kind"] == "user":
            users.append((float(r["x"]), float(r["y"]), float(r["xi"]), float(r["beta"])))
        else:
            raise ValueError(f"{path}: unknown row kind {r['kind']!r}")
    u = np.array(users, dtype=float).reshape(-1, 4)
    return Deployment(side, tuple(np.array(b, dtype=float).reshape(-1, 2) for b in bs),
                      u[:, :2].copy(), u[:, 2].copy(), u[:, 3].copy(), seed)
