"""Slot-stepped Monte Carlo of the interacting-queues network.

Slot t proceeds as: packets that arrived in slot t-1 become eligible, each
BS is muted w.p. 1-p, unmuted BSs with a scheduled packet attempt it over a
Rayleigh-faded link, and a packet leaves iff SIR > theta. Failed packets
stay at the head of their queue. A packet arriving in slot a and leaving
in slot t has delay t - a >= 1.

The interferer set depends on the model:

* original  - unmuted BSs that are actually sending a packet
* dominant  - every unmuted BS (dummy packets when idle)
* modified  - unmuted BSs whose scheduled user got a packet in the
              previous slot (for FIFO: any user of the cell did); a
              failed packet is never re-sent as interference.

The arrival, muting, scheduling and fading draws come from separate
streams seeded identically for every model, so the three variants see the
same randomness slot by slot.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .curves import CdfCurve, CurveKind, write_atomic
from .model import InterfererModel, NetworkParams, SchedulingPolicy, SimConfig
from .spatial import AssociationMap, Deployment, associate_all, sample_deployment

WORKERS_ENV = "HETDELAY_WORKERS"
_ARRIVAL_CHUNK = 4096


@dataclass(frozen=True)
class UserDelayStat:
    realization: int
    user: int
    tier: int  # 0-based
    xi: float
    beta: float
    arrivals: int  # post-warmup arrivals
    delivered: int  # post-warmup arrivals delivered before the horizon
    mean_delay: float  # slots; inf when unstable, nan without post-warmup traffic
    attempts: int
    successes: int
    final_queue: int
    stable: bool
    little_delay: float = math.nan  # horizon estimate before the stability censoring

    @property
    def success_ratio(self) -> float:
        return self.successes / self.attempts if self.attempts else math.nan


@dataclass
class RealizationTrace:
    """Optional per-slot diagnostics for small instances."""

    transmitting: list = field(default_factory=list)  # bool mask over BSs per slot
    scheduled: list = field(default_factory=list)  # user picked by each BS per slot, -1 if none
    departures: list = field(default_factory=list)  # (slot, bs, user, arrival_slot)
    total_arrivals: Optional[np.ndarray] = None
    total_departures: Optional[np.ndarray] = None


def default_queue_cap(xi: np.ndarray, measured_slots: int) -> np.ndarray:
    """Queue length above which a user counts as unstable.

    A stable queue hovers around a level that does not grow with the
    horizon; an unstable one grows linearly. One tenth of the expected
    post-warmup arrivals separates the two, with a floor of 10 packets.
    """
    return np.maximum(10.0, 0.1 * xi * measured_slots)


class _Cells:
    """Flattened BS geometry: global BS ids, gains and per-cell user lists."""

    def __init__(self, dep: Deployment, amap: AssociationMap, params: NetworkParams):
        tiers = [np.full(len(b), k) for k, b in enumerate(dep.bs_per_tier)]
        self.bs_tier = np.concatenate(tiers) if tiers else np.zeros(0, dtype=int)
        offsets = np.concatenate([[0], np.cumsum([len(b) for b in dep.bs_per_tier])])
        pos = [b for b in dep.bs_per_tier if len(b)]
        self.bs_pos = np.concatenate(pos) if pos else np.zeros((0, 2))
        self.n_bs = len(self.bs_pos)
        self.serving = offsets[amap.tier] + amap.bs
        power = np.array([params.tiers[k].power for k in self.bs_tier])
        d = np.abs(dep.user_pos[:, None, :] - self.bs_pos[None, :, :]) % dep.window_side
        d = np.minimum(d, dep.window_side - d)
        dist = np.hypot(d[..., 0], d[..., 1])
        with np.errstate(divide="ignore"):
            self.gain = power[None, :] * dist ** (-params.alpha)  # users x BSs
        self.n_users_bs = np.bincount(self.serving, minlength=self.n_bs)
        self.order = np.argsort(self.serving, kind="stable")  # users grouped by cell, index order
        self.first = np.concatenate([[0], np.cumsum(self.n_users_bs)[:-1]])


def _arrival_blocks(rng: np.random.Generator, xi: np.ndarray, slots: int):
    for s in range(0, slots, _ARRIVAL_CHUNK):
        n = min(_ARRIVAL_CHUNK, slots - s)
        yield s, rng.random((n, xi.size)) < xi[None, :]


def run_realization(dep: Deployment, params: NetworkParams, policy: "SchedulingPolicy | str",
                    model: "InterfererModel | str", sim: SimConfig, seed=None,
                    amap: Optional[AssociationMap] = None, realization: int = 0,
                    trace: Optional[RealizationTrace] = None) -> list[UserDelayStat]:
    policy = SchedulingPolicy.parse(policy)
    model = InterfererModel(model)
    amap = associate_all(dep, params) if amap is None else amap
    cells = _Cells(dep, amap, params)
    n_u, n_b = dep.n_users, cells.n_bs
    xi = dep.user_xi
    slots, warm = sim.slots, sim.warmup
    root = (seed if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(sim.seed if seed is None else seed))
    streams = root.spawn(4)
    rng_arr, rng_mute, rng_sched, rng_fade = (np.random.default_rng(s) for s in streams)

    # arrival slots per user, flattened in user order
    per_user = [[] for _ in range(n_u)]
    fresh_all = np.zeros((slots, n_u), dtype=bool) if n_u else np.zeros((slots, 0), dtype=bool)
    for s0, block in _arrival_blocks(rng_arr, xi, slots):
        fresh_all[s0:s0 + len(block)] = block
    for u in range(n_u):
        per_user[u] = np.nonzero(fresh_all[:, u])[0]
    arr_count = np.array([len(a) for a in per_user], dtype=int)
    arr_start = np.concatenate([[0], np.cumsum(arr_count)[:-1]]).astype(int)
    arr_flat = np.concatenate(per_user) if n_u else np.zeros(0, dtype=int)

    # FIFO: merged per-cell arrival order, ties broken by user index
    if policy is SchedulingPolicy.FIFO:
        owner = np.repeat(np.arange(n_u), arr_count)
        cell = cells.serving[owner] if n_u else np.zeros(0, dtype=int)
        m_order = np.lexsort((owner, arr_flat, cell))
        m_time, m_user = arr_flat[m_order], owner[m_order]
        m_count = np.bincount(cell, minlength=n_b)
        m_start = np.concatenate([[0], np.cumsum(m_count)[:-1]]).astype(int)
        m_ptr = np.zeros(n_b, dtype=int)

    head = np.zeros(n_u, dtype=int)  # next undelivered packet per user
    eligible = np.zeros(n_u, dtype=int)  # arrivals in slots < t
    attempts = np.zeros(n_u, dtype=int)
    successes = np.zeros(n_u, dtype=int)
    delay_sum = np.zeros(n_u)
    delivered = np.zeros(n_u, dtype=int)
    has_users = cells.n_users_bs > 0
    bs_ids = np.arange(n_b)

    for t in range(slots):
        if t > 0:
            eligible += fresh_all[t - 1]
        unmuted = rng_mute.random(n_b) < params.p
        pick = rng_sched.random(n_b)
        # scheduled user per BS (-1: nobody)
        if policy is SchedulingPolicy.FIFO:
            ptr_abs = m_start + m_ptr
            busy = (m_ptr < m_count)
            busy[busy] = m_time[ptr_abs[busy]] < t
            sched = np.full(n_b, -1)
            sched[busy] = m_user[ptr_abs[busy]]
            ready = busy
        else:
            sched = np.full(n_b, -1)
            if policy is SchedulingPolicy.RANDOM:
                idx = (pick * cells.n_users_bs).astype(int)
            else:
                idx = t % np.maximum(cells.n_users_bs, 1)
            sched[has_users] = cells.order[cells.first[has_users] + idx[has_users]]
            ready = np.zeros(n_b, dtype=bool)
            ready[has_users] = head[sched[has_users]] < eligible[sched[has_users]]
        attempt = unmuted & ready

        if model is InterfererModel.ORIGINAL:
            tx = attempt
        elif model is InterfererModel.DOMINANT:
            tx = unmuted
        else:
            fresh = np.zeros(n_b, dtype=bool)
            if t > 0 and n_u:
                if policy is SchedulingPolicy.FIFO:
                    got = np.bincount(cells.serving[fresh_all[t - 1]], minlength=n_b) > 0
                    fresh = got
                else:
                    fresh[has_users] = fresh_all[t - 1, sched[has_users]]
            tx = unmuted & fresh
        if trace is not None:
            trace.transmitting.append(tx.copy())
            trace.scheduled.append(sched.copy())

        att_bs = bs_ids[attempt]
        if att_bs.size == 0:
            continue
        users = sched[att_bs]
        tx_bs = bs_ids[tx]
        g = cells.gain[users][:, tx_bs]
        g[tx_bs[None, :] == att_bs[:, None]] = 0.0  # own BS is never an interferer
        interference = (g * rng_fade.standard_exponential(g.shape)).sum(axis=1)
        signal = cells.gain[users, att_bs] * rng_fade.standard_exponential(att_bs.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = signal > params.theta * interference
        measured = t >= warm
        if measured:
            np.add.at(attempts, users, 1)
        win_bs, win_users = att_bs[ok], users[ok]
        if win_users.size == 0:
            continue
        if policy is SchedulingPolicy.FIFO:
            arrival = m_time[m_start[win_bs] + m_ptr[win_bs]]
            m_ptr[win_bs] += 1
        else:
            arrival = arr_flat[arr_start[win_users] + head[win_users]]
        head[win_users] += 1  # FIFO pops the cell head, which belongs to win_users
        if measured:
            successes[win_users] += 1
        post = arrival >= warm
        delay_sum[win_users[post]] += t - arrival[post]
        delivered[win_users[post]] += 1
        if trace is not None:
            trace.departures.extend(zip([t] * win_users.size, win_bs.tolist(),
                                        win_users.tolist(), arrival.tolist()))

    final_queue = arr_count - head
    if trace is not None:
        trace.total_arrivals = arr_count.copy()
        trace.total_departures = head.copy()
    cap = (np.full(n_u, float(sim.stability_queue_cap)) if sim.stability_queue_cap
           else default_queue_cap(xi, slots - warm))
    stats = []
    for u in range(n_u):
        times = per_user[u]
        post = times[times >= warm]
        n_post = post.size
        # post-warmup packets still queued contribute their age so far
        waiting = times[head[u]:]
        waiting = waiting[waiting >= warm]
        stable = bool(final_queue[u] <= cap[u])
        little = (delay_sum[u] + (slots - waiting).sum()) / n_post if n_post else math.nan
        mean = little if stable else math.inf
        stats.append(UserDelayStat(realization, u, int(amap.tier[u]), float(xi[u]),
                                   float(dep.user_beta[u]), int(n_post), int(delivered[u]),
                                   float(mean), int(attempts[u]), int(successes[u]),
                                   int(final_queue[u]), stable, float(little)))
    return stats


def _realization_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def _one(args):
    params, policy, model, sim, r, ss = args
    dep_seed, run_seed = ss.spawn(2)
    dep = sample_deployment(params, sim.window_side, int(dep_seed.generate_state(1)[0]))
    if sum(dep.bs_counts) == 0:
        return []
    return run_realization(dep, params, policy, model, sim, run_seed, realization=r)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def simulate(params: NetworkParams, policy: "SchedulingPolicy | str",
             model: "InterfererModel | str" = InterfererModel.ORIGINAL,
             sim: SimConfig = SimConfig(), workers: Optional[int] = None) -> list[UserDelayStat]:
    """Run ``sim.realizations`` independent deployments; results in realization order."""
    jobs = [(params, SchedulingPolicy.parse(policy), InterfererModel(model), sim, r, ss)
            for r, ss in enumerate(_realization_seeds(sim.seed, sim.realizations))]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        results = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs))
    return [s for chunk in results for s in chunk]


@dataclass(frozen=True)
class EmpiricalSummary:
    delay_grid: np.ndarray
    delay_cdf: np.ndarray
    delay_se: np.ndarray  # binomial standard error per grid point
    success_grid: np.ndarray
    success_cdf: np.ndarray
    outage: float
    n_users: int

    def delay_curve(self, policy: str = "") -> CdfCurve:
        """Empirical mean-delay CDF; lower/upper hold the +/- one standard error band."""
        return CdfCurve(self.delay_grid, self.delay_cdf, CurveKind.DELAY,
                        self.delay_cdf - self.delay_se, self.delay_cdf + self.delay_se, policy)

    def success_curve(self, policy: str = "") -> CdfCurve:
        return CdfCurve(self.success_grid, self.success_cdf, CurveKind.SUCCESS, policy=policy)


def _ecdf(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    s = np.sort(samples)
    return np.searchsorted(s, grid, side="right") / max(len(s), 1)


def aggregate(stats: Sequence[UserDelayStat], delay_grid=None, success_grid=None) -> EmpiricalSummary:
    """Pool per-user outcomes; unstable users count as infinite delay."""
    delay_grid = np.arange(1.0, 41.0) if delay_grid is None else np.asarray(delay_grid, float)
    success_grid = np.linspace(0.025, 1.0, 40) if success_grid is None else np.asarray(success_grid, float)
    d = np.array([s.mean_delay for s in stats], dtype=float)
    beta = np.array([s.beta for s in stats], dtype=float)
    keep = ~np.isnan(d)
    d, beta = d[keep], beta[keep]
    n = d.size
    cdf = _ecdf(d, delay_grid) if n else np.zeros(delay_grid.size)
    se = np.sqrt(cdf * (1 - cdf) / max(n, 1))
    sr = np.array([s.success_ratio for s in stats], dtype=float)
    sr = sr[~np.isnan(sr)]
    scdf = _ecdf(sr, success_grid) if sr.size else np.zeros(success_grid.size)
    outage = float(np.mean(d > beta)) if n else math.nan
    return EmpiricalSummary(delay_grid, cdf, se, success_grid, scdf, outage, n)


def cap_sensitivity(stats: Sequence[UserDelayStat], sim: SimConfig, T: float,
                    factors=(0.5, 1.0, 2.0)) -> dict[float, float]:
    """Empirical P(D <= T) when the default stability cap is scaled by each factor.

    Users declared stable under a scaled cap are judged by their horizon
    estimate of the mean delay.
    """
    measured = sim.slots - sim.warmup
    out = {}
    for f in factors:
        hits = n = 0
        for s in stats:
            if s.arrivals == 0:
                continue
            n += 1
            cap = f * float(default_queue_cap(np.array([s.xi]), measured)[0])
            if s.final_queue <= cap and s.little_delay <= T:
                hits += 1
        out[f] = hits / n if n else math.nan
    return out


STATS_HEADER = ["realization", "user", "tier", "xi", "beta", "mean_delay", "success_ratio", "stable"]


def write_user_stats(stats: Sequence[UserDelayStat], path: "str | Path") -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for s in stats:
        w.writerow([s.realization, s.user, s.tier + 1, repr(s.xi), repr(s.beta),
                    repr(s.mean_delay), repr(s.success_ratio), int(s.stable)])
    write_atomic(path, buf.getvalue())
