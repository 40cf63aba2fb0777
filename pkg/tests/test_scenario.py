import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from cogsat_ra import rng
from cogsat_ra.errors import InvalidConfigError
from cogsat_ra.scenario import (Region, Scenario, cochannel_sets, distance, generate_scenario,
                                nearest_pu_distance, nearest_pu_distances, nearest_su_distance,
                                scaling_from)


def brute_nearest_pu(sc, k):
    best, arg = math.inf, -1
    x, y = sc.su_flat[k]
    for j, (px, py) in enumerate(sc.pu_positions):
        d = math.sqrt((x - px) ** 2 + (y - py) ** 2)
        if d < best:
            best, arg = d, j
    return best, arg


def test_region_rejects_nonpositive_size():
    with pytest.raises(InvalidConfigError):
        Region.disk(0.0)
    with pytest.raises(InvalidConfigError):
        Region.square(-1.0)


def test_region_contains_boundary():
    assert Region.disk(1.0).contains((1.0, 0.0))
    assert not Region.disk(1.0).contains((1.0, 1e-6))
    sq = Region.square(1.0)
    assert sq.contains((0.5, -0.5))
    assert not sq.contains((0.5 + 1e-12, 0.0))


def test_region_describe_roundtrip():
    r = Region.square(2.5, (0.1, -3.0))
    assert Region.parse(r.describe()) == r


def test_generate_counts():
    sc = generate_scenario((2, 2, 3), 5, Region.square(), seed=7)
    assert sc.K == 12 and sc.L == 5
    assert sc.su_positions.shape == (2, 2, 3, 2)
    assert sc.scaling.K_bar == 4


def test_generate_deterministic():
    a = generate_scenario((2, 2, 3), 5, Region.square(), seed=7)
    b = generate_scenario((2, 2, 3), 5, Region.square(), seed=7)
    assert a == b
    assert a.to_csv() == b.to_csv()
    assert a != generate_scenario((2, 2, 3), 5, Region.square(), seed=8)


@pytest.mark.parametrize("dims,L", [((0, 1, 1), 3), ((1, 1, 1), 0), ((1, -2, 1), 3)])
def test_generate_rejects_bad_dims(dims, L):
    with pytest.raises(InvalidConfigError):
        generate_scenario(dims, L, Region.disk(), 0)


def test_su_positions_do_not_depend_on_L():
    a = generate_scenario((2, 1, 3), 10, Region.disk(), 3)
    b = generate_scenario((2, 1, 3), 500, Region.disk(), 3)
    np.testing.assert_array_equal(a.su_positions, b.su_positions)


def test_positions_inside_region():
    for region in (Region.disk(2.0, (1, 1)), Region.square(0.5, (-2, 0))):
        sc = generate_scenario((3, 2, 4), 200, region, 11)
        assert np.all(region.contains(sc.pu_positions))
        assert np.all(region.contains(sc.su_flat))


def test_disk_mean_distance_from_center():
    pts = Region.disk().sample(rng.stream(2024, rng.SU_STREAM), 10_000)
    empirical = np.mean(np.hypot(pts[:, 0], pts[:, 1]))
    # density of the radius in a unit disk is 2r on [0, 1]
    analytic, _ = integrate.quad(lambda r: r * 2 * r, 0, 1)
    assert analytic == pytest.approx(2 / 3, rel=1e-12)
    assert empirical == pytest.approx(analytic, rel=0.01)


def test_square_uniformity_chi_square():
    pts = Region.square().sample(rng.stream(99, rng.PU_STREAM), 100_000)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=4, range=[[-0.5, 0.5], [-0.5, 0.5]])
    assert stats.chisquare(counts.ravel()).pvalue > 0.001


def test_disk_uniformity_chi_square():
    # 4 equal-area rings times 4 sectors
    pts = Region.disk().sample(rng.stream(99, rng.PU_STREAM), 100_000)
    ring = np.minimum((np.hypot(pts[:, 0], pts[:, 1]) ** 2 * 4).astype(int), 3)
    sector = ((np.arctan2(pts[:, 1], pts[:, 0]) + np.pi) / (np.pi / 2)).astype(int) % 4
    counts = np.bincount(ring * 4 + sector, minlength=16)
    assert stats.chisquare(counts).pvalue > 0.001


# scaling ----------------------------------------------------------------------

def test_scaling_L100_beta_half():
    s = scaling_from(100, 0.5)
    assert (s.K, s.lambda_) == (10, 10)


@pytest.mark.parametrize("beta", [0.01, 0.3, 0.99])
def test_scaling_L1(beta):
    s = scaling_from(1, beta)
    assert (s.K, s.lambda_) == (1, 1)


def test_scaling_high_precision():
    with mpmath.workdps(80):
        expected = int(mpmath.floor(mpmath.mpf(10_000) ** mpmath.mpf("0.75")))
    s = scaling_from(10_000, 0.75)
    assert s.K == expected == 1000
    assert s.lambda_ == 10


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1, 1.5])
def test_scaling_rejects_beta(beta):
    with pytest.raises(InvalidConfigError):
        scaling_from(100, beta)


def test_theorem_regime_flag():
    assert scaling_from(10_000, 0.5, K_bar=10).theorem_regime
    assert not scaling_from(10_000, 0.5, K_bar=11).theorem_regime


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.floats(0.01, 0.99))
def test_scaling_monotone(L1, L2, beta):
    lo, hi = sorted((L1, L2))
    a, b = scaling_from(lo, beta), scaling_from(hi, beta)
    assert a.K <= b.K
    assert a.K >= 1


@given(st.integers(1, 10**5), st.floats(0.05, 0.95))
def test_scaling_lambda_nondecreasing_in_L(L, beta):
    # floor makes L/K step down only where K jumps; compare on the K = L**beta lattice
    a, b = scaling_from(L, beta), scaling_from(L + 1, beta)
    if a.K == b.K:
        assert b.lambda_ >= a.lambda_


# distances ---------------------------------------------------------------------

def test_distance_345():
    assert distance((0, 0), (3, 4)) == 5


def test_distance_identity():
    assert distance((1.5, -2.0), (1.5, -2.0)) == 0


@given(st.tuples(*[st.floats(-1e3, 1e3)] * 4))
def test_distance_recomputation(c):
    p, q = c[:2], c[2:]
    d = distance(p, q)
    assert d == distance(q, p) >= 0
    with mpmath.workdps(50):
        exact = mpmath.sqrt((mpmath.mpf(p[0]) - q[0]) ** 2 + (mpmath.mpf(p[1]) - q[1]) ** 2)
    assert d == pytest.approx(float(exact), rel=1e-15)


def _manual(pus, sus):
    return Scenario(Region.square(10.0), np.asarray(pus, float), np.asarray(sus, float).reshape(1, 1, -1, 2))


def test_nearest_pu_coincident():
    sc = _manual([(0.2, 0.3)], [(0.2, 0.3)])
    assert nearest_pu_distance(sc, 0) == (0.0, 0)


def test_nearest_pu_direct():
    sc = _manual([(0, 0), (1, 0)], [(0.1, 0)])
    d, j = nearest_pu_distance(sc, 0)
    assert d == pytest.approx(0.1)
    assert j == 0


def test_nearest_pu_empty():
    sc = _manual(np.empty((0, 2)), [(0, 0)])
    with pytest.raises(InvalidConfigError):
        nearest_pu_distance(sc, 0)


@pytest.mark.parametrize("L", [1, 37, 10_000])
def test_nearest_pu_matches_scan(L):
    sc = generate_scenario((2, 2, 3), L, Region.disk(), L)
    d, idx = nearest_pu_distances(sc)
    for k in range(sc.K):
        bd, bj = brute_nearest_pu(sc, k)
        assert d[k] == pytest.approx(bd, rel=1e-14)
        assert nearest_pu_distance(sc, k) == (pytest.approx(bd, rel=1e-15), bj)
        assert idx[k] == bj


def test_nearest_su_coincident():
    sc = _manual([(0.4, 0.4)], [(0.4, 0.4), (1, 1)])
    assert nearest_su_distance(sc, 0, [0, 1]) == 0


def test_nearest_su_empty_set():
    sc = _manual([(0, 0)], [(1, 1)])
    with pytest.raises(InvalidConfigError):
        nearest_su_distance(sc, 0, [])


@pytest.mark.parametrize("seed", range(5))
def test_nearest_su_subset_and_scan(seed):
    sc = generate_scenario((3, 2, 4), 50, Region.disk(), seed)
    full = list(range(sc.K))
    for l in range(sc.L):
        d_all = nearest_su_distance(sc, l, full)
        scan = min(distance(sc.pu_positions[l], s) for s in sc.su_flat)
        assert d_all == pytest.approx(scan, rel=1e-15)
        for group in cochannel_sets(sc.dims):
            sub = nearest_su_distance(sc, l, group)
            assert sub >= d_all
            assert sub == pytest.approx(min(distance(sc.pu_positions[l], sc.su_flat[k]) for k in group),
                                        rel=1e-15)


def test_cochannel_sets_identity():
    sets = cochannel_sets((2, 2, 3))
    assert [list(s) for s in sets] == [[0, 3, 6, 9], [1, 4, 7, 10], [2, 5, 8, 11]]


def test_scenario_csv_roundtrip(tmp_path):
    sc = generate_scenario((2, 3, 2), 7, Region.disk(1.5, (0.5, 0)), 21)
    path = tmp_path / "sc.csv"
    text = sc.to_csv(path)
    assert text.splitlines()[2] == "kind,operator,beam,slot,x,y"
    back = Scenario.from_csv(path)
    assert back.region == sc.region
    np.testing.assert_array_equal(back.pu_positions, sc.pu_positions)
    np.testing.assert_array_equal(back.su_positions, sc.su_positions)
