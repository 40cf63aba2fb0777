import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogsat_ra import rng
from cogsat_ra.channel import (BeamGainModel, ChannelParams, expected_gain_su_to_pu, gain_su_to_beam,
                               sample_channels, sample_gain_su_to_pu)
from cogsat_ra.errors import CoincidentNodesError, InvalidConfigError
from cogsat_ra.scenario import Region, Scenario, generate_scenario


def test_expected_gain_values():
    p = ChannelParams(C=1, alpha=2)
    assert expected_gain_su_to_pu(p, 0.5) == 4
    assert expected_gain_su_to_pu(p, 1.0) == 1


def test_expected_gain_high_precision():
    p = ChannelParams(C=3.2, alpha=2.7)
    with mpmath.workdps(50):
        exact = mpmath.mpf(3.2) / mpmath.mpf(0.31) ** mpmath.mpf(2.7)
    assert abs(expected_gain_su_to_pu(p, 0.31) - float(exact)) / float(exact) < 1e-12


def test_expected_gain_zero_distance():
    with pytest.raises(CoincidentNodesError):
        expected_gain_su_to_pu(ChannelParams(), 0.0)


@pytest.mark.parametrize("kw", [dict(C=0), dict(alpha=-1), dict(sigma_s=-0.1), dict(min_gain=0)])
def test_params_validation(kw):
    with pytest.raises(InvalidConfigError):
        ChannelParams(**kw)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.5, 6))
def test_expected_gain_strictly_decreasing(r1, r2, alpha):
    if r1 == r2:
        return
    lo, hi = sorted((r1, r2))
    p = ChannelParams(alpha=alpha)
    assert expected_gain_su_to_pu(p, lo) > expected_gain_su_to_pu(p, hi)


def test_sample_gain_values():
    p = ChannelParams(C=1, alpha=2)
    assert sample_gain_su_to_pu(p, 1.0, 0.1) == pytest.approx(1.1, rel=1e-15)
    clamp = ChannelParams(min_gain=1e-9)
    assert sample_gain_su_to_pu(clamp, 1.0, -10.0) == 1e-9


@given(st.floats(1e-3, 10), st.floats(-100, 100))
def test_sample_gain_never_below_floor(r, shadow):
    p = ChannelParams()
    g = sample_gain_su_to_pu(p, r, shadow)
    assert g >= p.min_gain
    assert sample_gain_su_to_pu(p, r, 0.0) == expected_gain_su_to_pu(p, r)


def test_sample_gain_mean_lln():
    p = ChannelParams(sigma_s=0.2)
    s = rng.stream(5, rng.SHADOW_STREAM).normal(0, 0.2, 100_000)
    g = sample_gain_su_to_pu(p, np.ones_like(s), s)
    stderr = 0.2 / math.sqrt(len(s))
    assert abs(g.mean() - 1.0) < 3 * stderr


def _beam_params(center=(0.0, 0.0), g0=2.0, theta=0.3):
    model = BeamGainModel(g0, theta, np.array([[center]], dtype=float))
    return ChannelParams(beam_model=model)


def test_beam_gain_boresight_and_width():
    p = _beam_params()
    assert gain_su_to_beam(p, (0, 0), 0, 0) == 2.0
    assert gain_su_to_beam(p, (0.3, 0.0), 0, 0) == pytest.approx(2.0 * math.exp(-1), rel=1e-15)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_beam_gain_symmetry(dx, dy):
    p = _beam_params(center=(0.2, -0.1))
    a = gain_su_to_beam(p, (0.2 + dx, -0.1 + dy), 0, 0)
    b = gain_su_to_beam(p, (0.2 - dx, -0.1 - dy), 0, 0)
    assert a == pytest.approx(b, rel=1e-14)


def test_beam_gain_unknown_beam():
    with pytest.raises(InvalidConfigError):
        gain_su_to_beam(_beam_params(), (0, 0), 0, 1)


def test_beam_grid_fills_region():
    m = BeamGainModel.grid(Region.square(), 3, 4)
    assert m.beam_centers.shape == (3, 4, 2)
    np.testing.assert_allclose(m.beam_centers[0], [[-0.25, -0.25], [0.25, -0.25], [-0.25, 0.25], [0.25, 0.25]])
    np.testing.assert_array_equal(m.beam_centers[0], m.beam_centers[2])


def test_channels_no_shadowing_broadcast():
    sc = generate_scenario((2, 2, 3), 6, Region.square(), 1)
    ch = sample_channels(sc, ChannelParams(), 1)
    for m in range(3):
        np.testing.assert_array_equal(ch.F[..., m], ch.F_det)
    # cross-check one entry against the scalar model
    d = math.dist(sc.su_flat[4], sc.pu_positions[2])
    assert ch.F_det[0, 4, 2] == pytest.approx(1 / d**2, rel=1e-13)


def test_channels_deterministic_and_geometry_only_fdet():
    sc = generate_scenario((2, 1, 2), 5, Region.disk(), 4)
    p = ChannelParams(sigma_s=0.3)
    a, b = sample_channels(sc, p, 9), sample_channels(sc, p, 9)
    assert a == b
    c = sample_channels(sc, p, 10)
    np.testing.assert_array_equal(a.F_det, c.F_det)
    assert not np.array_equal(a.F, c.F)


def test_channels_gain_floor():
    sc = generate_scenario((2, 2, 2), 20, Region.disk(), 3)
    ch = sample_channels(sc, ChannelParams(sigma_s=5.0, shadow_beams=True), 3)
    assert ch.F.min() >= 1e-12 and ch.G.min() >= 1e-12 and ch.F_det.min() >= 1e-12


def test_channels_shadow_variance():
    # far-apart nodes keep F_det ~ 1 so clamping at zero is negligible
    sc = Scenario(Region.square(10), np.array([[0.0, 0.0]] * 100), np.full((1, 1, 25, 2), 1.0))
    ch = [sample_channels(sc, ChannelParams(sigma_s=0.1), s) for s in (1, 2)]
    big = np.concatenate([(c.F - c.F_det[..., None]).ravel() for c in ch])
    assert big.size >= 10**5
    assert np.var(big, ddof=1) == pytest.approx(0.01, rel=0.05)


def test_channels_coincident_nodes():
    sc = Scenario(Region.square(), np.array([[0.1, 0.1]]), np.array([[[[0.1, 0.1]]]]))
    with pytest.raises(CoincidentNodesError):
        sample_channels(sc, ChannelParams(), 0)


def test_channel_csv_columns():
    sc = generate_scenario((1, 1, 2), 2, Region.square(), 0)
    text = sample_channels(sc, ChannelParams(), 0).to_csv()
    lines = text.splitlines()
    assert lines[0] == "n,q,l_or_b,m,kind,value"
    assert len(lines) == 1 + 1 * 2 * 2 * 2 + 1 * 2 * 1 * 2
