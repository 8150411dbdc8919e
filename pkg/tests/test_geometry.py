import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fresnelloc.geometry import (
    LinkGeometry,
    Point2D,
    SPEED_OF_LIGHT,
    SubcarrierSet,
    catch_up_zone,
    fresnel_phase,
    reflected_path_length,
    theoretical_phase_diff,
    zone_crossing_point,
    zone_index,
)

C = SPEED_OF_LIGHT


def test_point_rejects_non_finite():
    with pytest.raises(ValueError):
        Point2D(math.nan, 0.0)
    with pytest.raises(ValueError):
        Point2D(0.0, math.inf)


def test_link_rejects_coincident_foci():
    with pytest.raises(ValueError):
        LinkGeometry(Point2D(1.0, 2.0), Point2D(1.0, 2.0))


def test_subcarrier_set_layout():
    s = SubcarrierSet(5.745e9, 1.25e6, 30)
    assert len(s.freqs) == 30
    assert np.all(np.diff(s.freqs) > 0)
    assert np.all(np.diff(s.wavelengths) < 0)
    assert s.freqs[0] == pytest.approx(5.745e9 - 14.5 * 1.25e6)
    assert s.freqs[-1] - s.freqs[0] == pytest.approx(36.25e6)
    assert s.max_gap == pytest.approx(36.25e6)
    with pytest.raises(ValueError):
        SubcarrierSet(5.745e9, 1.25e6, 1)
    with pytest.raises(ValueError):
        SubcarrierSet(5.745e9, -1.0, 30)


class TestReflectedPathLength:
    def test_midpoint_on_los_equals_d0(self):
        link = LinkGeometry(Point2D(0, 0), Point2D(4, 0))
        assert reflected_path_length(Point2D(2, 0), link) == pytest.approx(4.0)

    def test_catch_up_point_anchor(self):
        # The point 5.196 m off a 6 m LoS reflects over 12 m in total.
        link = LinkGeometry(Point2D(0, 0), Point2D(6, 0))
        assert reflected_path_length(Point2D(3, 5.196), link) == pytest.approx(12.0, abs=2e-3)

    def test_euclidean_oracle(self):
        link = LinkGeometry(Point2D(0, 0), Point2D(4, 0))
        assert reflected_path_length(Point2D(2, 1), link) == pytest.approx(2 * math.sqrt(5))


class TestFresnelPhase:
    def test_zero_excess(self, link6):
        assert fresnel_phase(6.0, link6, 0.05) == 0.0

    def test_half_wavelength_is_pi(self, link6):
        lam = C / 5.745e9
        assert fresnel_phase(6.0 + lam / 2, link6, lam) == pytest.approx(math.pi)

    def test_direct_evaluation_oracle(self, link6):
        lam = C / 5.770e9
        expected = 2 * math.pi * 6.0 / lam
        assert fresnel_phase(12.0, link6, lam) == pytest.approx(expected, rel=1e-12)

    def test_rejects_below_los(self, link6):
        with pytest.raises(ValueError):
            fresnel_phase(5.9, link6, 0.05)


class TestTheoreticalPhaseDiff:
    def test_zero_excess_for_every_pair(self, link6):
        assert theoretical_phase_diff(6.0, link6, 5.745e9, 5.770e9) == 0.0

    def test_catch_up_excess_gives_pi(self, link6):
        _, _, excess = catch_up_zone(5.745e9, 5.770e9)
        val = theoretical_phase_diff(6.0 + excess, link6, 5.745e9, 5.770e9)
        assert val == pytest.approx(math.pi, abs=0.01)

    def test_doubling_gap_doubles_output(self, link6):
        base = theoretical_phase_diff(8.0, link6, 5.745e9, 5.745e9 + 10e6)
        double = theoretical_phase_diff(8.0, link6, 5.745e9, 5.745e9 + 20e6)
        assert double == pytest.approx(2 * base, rel=1e-12)

    def test_rejects_unordered_frequencies(self, link6):
        with pytest.raises(ValueError):
            theoretical_phase_diff(8.0, link6, 5.770e9, 5.745e9)


class TestZoneIndex:
    def test_innermost_zone(self, link6):
        assert zone_index(6.0, link6, 0.05) == 1

    def test_three_quarter_wavelength_is_zone_two(self, link6):
        lam = 0.052
        assert zone_index(6.0 + 0.75 * lam, link6, lam) == 2

    def test_catch_up_zones(self, link6):
        # Just inside the shared boundary the target sits in zone 230 of
        # the lower frequency and zone 231 of the higher one.
        _, _, excess = catch_up_zone(5.745e9, 5.770e9)
        d_hat = 6.0 + excess * (1 - 1e-12)
        assert zone_index(d_hat, link6, C / 5.745e9) == 230
        assert zone_index(d_hat, link6, C / 5.770e9) == 231

    def test_boundary_belongs_to_outer_zone(self, link6):
        lam = 0.05
        assert zone_index(6.0 + lam / 2, link6, lam) == 2

    def test_rejects_below_los(self, link6):
        with pytest.raises(ValueError):
            zone_index(5.0, link6, 0.05)


class TestCatchUpZone:
    def test_paper_pair(self):
        lo, hi, excess = catch_up_zone(5.745e9, 5.770e9)
        assert (lo, hi) == (230, 231)
        assert excess == pytest.approx(6.0017, abs=5e-3)

    def test_octave_pair(self):
        f = 1e9
        lo, hi, excess = catch_up_zone(f, 2 * f)
        assert (lo, hi) == (1, 2)
        assert excess == pytest.approx(C / f / 2)

    def test_adjacent_subcarriers(self):
        lo, hi, _ = catch_up_zone(5.745e9, 5.745e9 + 1.25e6)
        assert lo == round(5.745e9 / 1.25e6) == 4596
        assert hi == 4597

    def test_rejects_unordered(self):
        with pytest.raises(ValueError):
            catch_up_zone(5.770e9, 5.745e9)


class TestZoneCrossingPoint:
    def test_round_trip_is_definitional(self, link6):
        lam = C / 5.770e9
        for n in (1, 17, 231):
            p = zone_crossing_point(link6, n, lam)
            assert reflected_path_length(p, link6) == pytest.approx(
                link6.d0 + n * lam / 2, abs=1e-9
            )

    def test_paper_catch_up_height(self, link6):
        p = zone_crossing_point(link6, 231, C / 5.770e9)
        assert p.y == pytest.approx(5.196, abs=5e-3)
        assert p.x == pytest.approx(3.0)

    def test_hand_algebra_oracle(self, link6):
        # n = 1 with wavelength 2*d0 puts the boundary at d0*sqrt(3)/2.
        p = zone_crossing_point(link6, 1, 2 * link6.d0)
        assert p.y == pytest.approx(link6.d0 * math.sqrt(3) / 2)

    def test_oblique_link_stays_on_bisector(self):
        link = LinkGeometry(Point2D(1, 2), Point2D(4, 6))
        p = zone_crossing_point(link, 40, 0.052)
        assert p.distance_to(link.tx) == pytest.approx(p.distance_to(link.rx), abs=1e-9)


# --- property suites -------------------------------------------------------

links = st.builds(
    LinkGeometry,
    st.builds(Point2D, st.floats(-5, 5), st.floats(-5, 5)),
    st.builds(Point2D, st.floats(6, 15), st.floats(6, 15)),
)
wavelengths = st.floats(0.01, 0.2)
excesses = st.floats(0.0, 30.0)


@settings(max_examples=150, deadline=None)
@given(links, wavelengths, excesses, st.floats(0.001, 5.0))
def test_phase_strictly_increases_with_path(link, lam, excess, step):
    lo = fresnel_phase(link.d0 + excess, link, lam)
    hi = fresnel_phase(link.d0 + excess + step, link, lam)
    assert hi > lo
    assert zone_index(link.d0 + excess + step, link, lam) >= zone_index(
        link.d0 + excess, link, lam
    )


@settings(max_examples=150, deadline=None)
@given(links, excesses, st.floats(5.7e9, 5.75e9), st.floats(1e6, 2e7), st.floats(1e6, 2e7))
def test_phase_diff_telescopes(link, excess, f_a, gap1, gap2):
    d = link.d0 + excess
    f_b = f_a + gap1
    f_c = f_b + gap2
    lhs = theoretical_phase_diff(d, link, f_a, f_b) + theoretical_phase_diff(d, link, f_b, f_c)
    assert lhs == pytest.approx(theoretical_phase_diff(d, link, f_a, f_c), abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(links, wavelengths, excesses)
def test_zone_tracks_phase_in_half_turns(link, lam, excess):
    d = link.d0 + excess
    phase = fresnel_phase(d, link, lam)
    assert zone_index(d, link, lam) == int(phase // math.pi) + 1


@settings(max_examples=150, deadline=None)
@given(st.floats(5.7e9, 5.8e9), st.floats(0.625e6, 10e6))
def test_catch_up_boundaries_coincide(f_a, gap):
    # In-band gaps up to 10 MHz keep the rounding error of the crossing
    # index below the stated tolerance.
    f_b = f_a + gap
    lo, hi, excess = catch_up_zone(f_a, f_b)
    lam_a = C / f_a
    lam_b = C / f_b
    assert hi == lo + 1
    assert abs(lo * lam_a - hi * lam_b) <= lam_a * 1e-3
    assert excess == pytest.approx(lo * lam_a / 2)
