import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetdelay.analytic import association_probability, user_count_distribution
from hetdelay.model import TierSpec
from hetdelay.spatial import (Deployment, SparseWindowWarning, associate_all, default_window_side,
                              dump_deployment, empirical_cell_statistics, load_deployment,
                              sample_deployment, sample_ppp, torus_distance, total_variation)

from conftest import one_tier, two_tier

coord = st.floats(0.0, 100.0, exclude_max=True)
point = st.tuples(coord, coord)


@given(point, point)
def test_torus_distance_symmetric_and_bounded(a, b):
    d = torus_distance(a, b, 100.0)
    assert d == torus_distance(b, a, 100.0)
    assert 0 <= d <= 100.0 * math.sqrt(2) / 2 + 1e-12


def test_torus_wraps():
    assert torus_distance((1.0, 1.0), (99.0, 99.0), 100.0) == pytest.approx(2 * math.sqrt(2))


def test_sample_ppp_void(rng):
    assert sample_ppp(0.0, 50.0, rng).shape == (0, 2)


def test_void_tiers():
    params = two_tier()
    params = params.evolve(tiers=(TierSpec(1.0, 1e-30), TierSpec(1.0, 1e-30)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SparseWindowWarning)
        dep = sample_deployment(params, 10.0, seed=1)
    assert dep.bs_counts == [0, 0]
    with pytest.raises(ValueError):
        associate_all(dep, params)


def test_sparse_window_warns():
    with pytest.warns(SparseWindowWarning):
        sample_deployment(two_tier(), 10.0, seed=0)


def test_poisson_mean(rng):
    # expected count 50 over 10^4 windows: within 3 sigma of the sample mean
    counts = [len(sample_ppp(0.5, 10.0, rng)) for _ in range(10_000)]
    assert abs(np.mean(counts) - 50) <= 3 * math.sqrt(50) / 100


def test_coordinates_in_window():
    dep = sample_deployment(two_tier(), seed=3)
    L = dep.window_side
    for pts in (*dep.bs_per_tier, dep.user_pos):
        assert np.all((pts >= 0) & (pts < L))


def test_degenerate_marks():
    dep = sample_deployment(two_tier(xi=(0.4, 0.4), beta=(19.0, 19.0)), seed=2)
    assert dep.n_users > 0
    assert np.all(dep.user_xi == 0.4) and np.all(dep.user_beta == 19.0)


def test_marks_in_range():
    params = two_tier()
    dep = sample_deployment(params, seed=4)
    assert np.all((dep.user_xi >= 0.2) & (dep.user_xi <= 0.3))
    assert np.all((dep.user_beta >= 18) & (dep.user_beta <= 20))


def test_determinism():
    params = two_tier()
    a, b = sample_deployment(params, seed=11), sample_deployment(params, seed=11)
    for x, y in zip(a.bs_per_tier, b.bs_per_tier):
        assert x.tobytes() == y.tobytes()
    assert a.user_pos.tobytes() == b.user_pos.tobytes()
    assert a.user_xi.tobytes() == b.user_xi.tobytes()
    assert a.user_beta.tobytes() == b.user_beta.tobytes()
    assert sample_deployment(params, seed=12).user_pos.tobytes() != a.user_pos.tobytes()


def tiny(bs, users, side=100.0, tiers=1):
    per = [np.zeros((0, 2))] * tiers
    per[0] = np.array(bs, dtype=float).reshape(-1, 2)
    u = np.array(users, dtype=float).reshape(-1, 2)
    return Deployment(side, tuple(per), u, np.full(len(u), 0.25), np.full(len(u), 19.0))


def test_single_bs_serves_everyone():
    dep = tiny([[10.0, 10.0]], [[1, 2], [50, 50], [99, 0]])
    amap = associate_all(dep, one_tier())
    assert list(amap.bs) == [0, 0, 0]
    assert list(amap.tier) == [0, 0, 0]


def test_midway_tie_goes_to_lower_index():
    dep = tiny([[60.0, 50.0], [40.0, 50.0]], [[50.0, 50.0]])
    amap = associate_all(dep, one_tier())
    assert amap.bs[0] == 0
    dep = tiny([[40.0, 50.0], [60.0, 50.0]], [[50.0, 50.0]])
    assert associate_all(dep, one_tier()).bs[0] == 0


def test_tier_tie_goes_to_lower_tier():
    params = one_tier().evolve(tiers=(TierSpec(1.0, 1e-4), TierSpec(1.0, 1e-4)))
    dep = Deployment(100.0, (np.array([[40.0, 50.0]]), np.array([[60.0, 50.0]])),
                     np.array([[50.0, 50.0]]), np.array([0.25]), np.array([19.0]))
    assert associate_all(dep, params).tier[0] == 0


def test_argmax_rule_brute_force():
    params = two_tier(alpha=3.0, bias2=5.0)
    dep = sample_deployment(params, seed=5)
    amap = associate_all(dep, params)
    for u in range(0, dep.n_users, max(1, dep.n_users // 60)):
        best, arg = -np.inf, None
        for k, (t, sites) in enumerate(zip(params.tiers, dep.bs_per_tier)):
            d = torus_distance(dep.user_pos[u], sites, dep.window_side)
            s = t.power * t.bias * d ** -params.alpha
            i = int(np.argmax(s))
            if s[i] > best:
                best, arg = s[i], (k, i)
        assert (amap.tier[u], amap.bs[u]) == arg
        assert amap.distance[u] == pytest.approx(
            torus_distance(dep.user_pos[u], dep.bs_per_tier[arg[0]][arg[1]], dep.window_side))


@given(st.floats(0.01, 1000.0))
def test_association_scale_invariant(c):
    params = two_tier(bias2=6.0)
    scaled = params.evolve(tiers=tuple(TierSpec(t.power, t.density, t.bias * c) for t in params.tiers))
    dep = sample_deployment(params, seed=9)
    a, b = associate_all(dep, params), associate_all(dep, scaled)
    assert np.array_equal(a.tier, b.tier) and np.array_equal(a.bs, b.bs)


def test_no_users():
    params = two_tier(lambda_u=0.0)
    dep = sample_deployment(params, seed=1)
    amap = associate_all(dep, params)
    stats = empirical_cell_statistics([(dep, amap)], 0)
    assert list(stats.histogram) == [1.0]


def fig2(bias2=1.0):
    return two_tier(alpha=2.5, p=1.0, lambda_u=1e-4, xi=(0.2, 0.6), bias2=bias2)


def realizations(params, n, side=None):
    for s in range(n):
        dep = sample_deployment(params, side, seed=s)
        yield dep, associate_all(dep, params)


def test_fig2_association_fraction():
    params = fig2()
    stats = empirical_cell_statistics(realizations(params, 4, side=math.sqrt(200 / 1e-5)), 0)
    # 4 windows of 2e7 m^2 at 1e-4 users/m^2: about 8e3 users per window
    assert stats.association_fraction[0] == pytest.approx(association_probability(params, 0), abs=0.02)


def test_user_count_histogram():
    params = one_tier(density=1e-4, lambda_u=1e-3)
    stats = empirical_cell_statistics(realizations(params, 4, side=math.sqrt(500 / 1e-4)), 0)
    assert stats.n_cells >= 2000
    pmf = user_count_distribution(params, 0).pmf
    assert total_variation(stats.histogram, pmf) <= 0.05
    assert stats.mean_users == pytest.approx(10.0, rel=0.05)


def test_bias_offloads_macro_users():
    lo = empirical_cell_statistics(realizations(fig2(1.0), 2), 0).mean_users
    hi = empirical_cell_statistics(realizations(fig2(10.0), 2), 0).mean_users
    assert hi < lo


def test_total_variation():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0
    assert total_variation([1.0], [0.0, 1.0]) == 1.0


def test_dump_load_round_trip(tmp_path):
    dep = sample_deployment(two_tier(), seed=21)
    path = tmp_path / "dep.csv"
    dump_deployment(dep, path)
    back = load_deployment(path, 2)
    assert back.window_side == dep.window_side and back.seed == 21
    for x, y in zip(dep.bs_per_tier, back.bs_per_tier):
        assert np.array_equal(x, y)
    assert np.array_equal(dep.user_pos, back.user_pos)
    assert np.array_equal(dep.user_xi, back.user_xi)
    assert np.array_equal(dep.user_beta, back.user_beta)


def test_default_window():
    params = two_tier()
    L = default_window_side(params)
    assert min(t.density for t in params.tiers) * L * L == pytest.approx(50.0)
