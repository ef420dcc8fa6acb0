import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamwander.aperture import ApertureBeam
from beamwander.channel import coherent_moments, displaced_squeezed_moments
from beamwander.errors import DomainError, InfeasiblePostSelectionError
from beamwander.pdtc import ConstantChannel, Pdtc, WanderStats
from beamwander.squeezing import (
    PostSelectedPdtc,
    SqueezingInput,
    canonical_input,
    postselect,
    propagate_squeezing,
    squeezing_db,
    squeezing_vs_exceedance_scan,
    tmin_of_exceedance,
    value_from_db,
)


@pytest.fixture(scope="module")
def canonical():
    return canonical_input(6.0, 10.0, 400)


@pytest.fixture(scope="module")
def channel():
    return Pdtc.reference_channel()


class TestDecibels:
    def test_conventions(self):
        assert squeezing_db(0.0) == 0.0
        assert squeezing_db(10 ** (-0.6) - 1) == pytest.approx(6.0, rel=1e-14)
        assert squeezing_db(1.0) == pytest.approx(-10 * math.log10(2), rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-0.999, 50.0))
    def test_round_trip(self, v):
        assert value_from_db(squeezing_db(v)) == pytest.approx(v, rel=1e-12, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            squeezing_db(-1.0)

    def test_vectorised(self):
        out = squeezing_db(np.array([0.0, -0.5]))
        assert out.shape == (2,)


class TestInput:
    def test_canonical_matches_closed_form(self, canonical):
        closed = SqueezingInput.from_moments(displaced_squeezed_moments(10.0, 6.0, 2))
        assert canonical.mandel_q == pytest.approx(closed.mandel_q, rel=1e-9)
        assert canonical.mean_n == pytest.approx(closed.mean_n, rel=1e-12)
        assert canonical.quad_var == pytest.approx(closed.quad_var, rel=1e-9)
        assert canonical.mean_x == pytest.approx(20.0, rel=1e-12)
        assert canonical.quad_db == pytest.approx(6.0, rel=1e-9)

    def test_vacuum(self):
        inp = SqueezingInput.from_moments(coherent_moments(0.0, 2))
        assert (inp.mandel_q, inp.mean_n, inp.quad_var, inp.mean_x) == (0.0, 0.0, 0.0, 0.0)

    def test_validation(self):
        with pytest.raises(DomainError):
            SqueezingInput(-1.5, 1.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            SqueezingInput(0.0, -1.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            SqueezingInput(0.0, 1.0, -1.1, 0.0)
        with pytest.raises(DomainError):
            SqueezingInput.from_moments(coherent_moments(1.0, 1))


class TestPropagation:
    def test_point_mass(self, canonical):
        t = 0.6
        out = propagate_squeezing(canonical, ConstantChannel(t))
        assert out.mandel_q == pytest.approx(t**2 * canonical.mandel_q, rel=1e-14)
        assert out.quad_var == pytest.approx(t**2 * canonical.quad_var, rel=1e-14)
        assert out.mean_n == pytest.approx(t**2 * canonical.mean_n, rel=1e-14)
        assert out.mean_x == pytest.approx(t * canonical.mean_x, rel=1e-14)

    def test_blocked_channel(self, canonical):
        out = propagate_squeezing(canonical, ConstantChannel(0.0))
        assert (out.mandel_q, out.quad_var, out.mean_n) == (0.0, 0.0, 0.0)

    def test_coherent_light_unsqueezed_by_constant_loss(self):
        inp = SqueezingInput.from_moments(coherent_moments(3.0, 2))
        out = propagate_squeezing(inp, ConstantChannel(0.3))
        assert out.quad_db == pytest.approx(0.0, abs=1e-12)
        assert out.photon_db == pytest.approx(0.0, abs=1e-12)

    def test_fluctuation_penalty(self, canonical, channel):
        # fluctuations add excess noise compared with the same mean loss
        flat = propagate_squeezing(canonical, ConstantChannel(math.sqrt(channel.moment(2))))
        fluct = propagate_squeezing(canonical, channel)
        assert fluct.quad_var > flat.quad_var
        assert fluct.mandel_q > flat.mandel_q
        assert fluct.quad_db < 0 < flat.quad_db

    def test_constant_loss_reference(self, canonical, channel):
        # about 32 dB loss leaves roughly a thousandth of a dB
        flat = propagate_squeezing(canonical, ConstantChannel(math.sqrt(channel.moment(2))))
        assert flat.quad_db == pytest.approx(2.0419e-3, rel=1e-3)
        assert flat.photon_db == pytest.approx(1.9985e-3, rel=1e-3)
        assert 8.8e-4 / 3 < flat.quad_db < 8.8e-4 * 3
        assert 8.6e-4 / 3 < flat.photon_db < 8.6e-4 * 3

    def test_matches_moment_propagation(self, canonical):
        # the closed-form update agrees with propagating the full moment table
        from beamwander.channel import propagate_moments

        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.7, 0.2))
        table = propagate_moments(displaced_squeezed_moments(10.0, 6.0, 2), p)
        direct = SqueezingInput.from_moments(table)
        out = propagate_squeezing(SqueezingInput.from_moments(displaced_squeezed_moments(10.0, 6.0, 2)), p)
        assert out.mandel_q == pytest.approx(direct.mandel_q, rel=1e-8)
        assert out.quad_var == pytest.approx(direct.quad_var, rel=1e-8, abs=1e-10)


class TestPostSelection:
    def test_zero_threshold_is_identity(self, channel):
        ps = postselect(channel, 0.0)
        assert ps.exceedance_at_tmin == 1.0
        assert ps.moment(2) == pytest.approx(channel.moment(2), rel=1e-12)
        assert ps.variance_t() == pytest.approx(channel.variance_t(), rel=1e-10)

    def test_near_t0_concentrates(self, channel):
        t_min = channel.t0 * (1 - 1e-6)
        ps = postselect(channel, t_min)
        assert t_min <= ps.moment(1) <= channel.t0
        assert ps.variance_t() < (channel.t0 - t_min) ** 2

    def test_infeasible(self, channel):
        with pytest.raises(InfeasiblePostSelectionError):
            postselect(channel, channel.t0)
        # a narrow wander around a distant offset leaves nothing above T0/2
        far = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.01, 20.0))
        with pytest.raises(InfeasiblePostSelectionError):
            postselect(far, 0.5 * far.t0)

    def test_domain(self, channel):
        with pytest.raises(DomainError):
            postselect(channel, -0.1)
        with pytest.raises(DomainError):
            postselect(channel, math.nan)

    def test_mean_efficiency_increases_with_threshold(self, channel):
        grid = np.linspace(0, 0.99, 50) * channel.t0
        m2 = [postselect(channel, t).moment(2) for t in grid]
        assert np.all(np.diff(m2) > 0)

    def test_conditional_moment_by_direct_integration(self):
        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.8, 0.3))
        t_min = 0.4 * p.t0
        ps = postselect(p, t_min)
        num = p.expect(lambda t: np.where(t > t_min, t**2, 0.0))
        assert ps.moment(2) == pytest.approx(num / p.exceedance(t_min), rel=1e-8)

    def test_variances(self):
        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.8, 0.3))
        ps = postselect(p, 0.3 * p.t0)
        assert ps.variance_t() == pytest.approx(ps.moment(2) - ps.moment(1) ** 2, rel=1e-8)
        assert ps.variance_eta() == pytest.approx(ps.moment(4) - ps.moment(2) ** 2, rel=1e-8)

    def test_deterministic_base(self):
        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.0, 0.5))
        t = float(p.t_of_r(0.5))
        ps = postselect(p, 0.5 * t)
        assert isinstance(ps, PostSelectedPdtc)
        assert ps.moment(2) == pytest.approx(t**2, rel=1e-14)
        assert ps.variance_t() == 0.0


class TestThreshold:
    def test_full_acceptance(self, channel):
        assert tmin_of_exceedance(1.0, channel) == 0.0

    def test_domain(self, channel):
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(DomainError):
                tmin_of_exceedance(bad, channel)
        with pytest.raises(DomainError):
            tmin_of_exceedance(0.1, Pdtc.reference_channel(d=1.0))

    def test_random_round_trips(self, channel):
        # for this channel T_min underflows to 0 once fbar exceeds about 0.1
        rng = np.random.default_rng(4)
        for fbar in 10 ** rng.uniform(-8, -1.5, 100):
            t = tmin_of_exceedance(fbar, channel)
            assert t > 0
            assert channel.exceedance(t, "exact") == pytest.approx(fbar, rel=1e-10)

    def test_round_trips_over_full_range(self):
        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(0.8))
        for fbar in np.linspace(0.01, 0.99, 50):
            t = tmin_of_exceedance(fbar, p)
            assert p.exceedance(t, "exact") == pytest.approx(fbar, rel=1e-10)

    def test_underflowing_threshold(self, channel):
        assert tmin_of_exceedance(0.9, channel) == 0.0

    @pytest.mark.parametrize("d", [0.5, 3.0, 20.0])
    def test_offset_numeric_inversion(self, d):
        p = Pdtc.from_geometry(ApertureBeam(1.0, 1.1), WanderStats(2.0, d))
        for fbar in (0.9, 0.3, 1e-3):
            t = tmin_of_exceedance(fbar, p, numeric=True)
            assert p.exceedance(t, "exact") == pytest.approx(fbar, rel=1e-10)

    def test_numeric_agrees_with_closed_form(self, channel):
        for fbar in (0.5, 1e-2, 1e-5):
            assert tmin_of_exceedance(fbar, channel, numeric=True) == pytest.approx(
                tmin_of_exceedance(fbar, channel), rel=1e-10
            )

    def test_postselected_mass_consistent(self, channel):
        fbar = 1e-4
        ps = postselect(channel, tmin_of_exceedance(fbar, channel))
        assert ps.exceedance_at_tmin == pytest.approx(fbar, rel=1e-10)


class TestScan:
    def test_rows(self, canonical, channel):
        grid = [1.0, 1e-2, 1e-4]
        rows = squeezing_vs_exceedance_scan(canonical, channel, grid)
        assert [r.fbar for r in rows] == grid
        assert all(r.feasible for r in rows)
        uncond = propagate_squeezing(canonical, channel)
        assert rows[0].t_min == 0.0
        assert rows[0].quad_db == pytest.approx(uncond.quad_db, rel=1e-10)
        assert rows[0].photon_db == pytest.approx(uncond.photon_db, rel=1e-10)

    def test_deep_tail_recovers_squeezing(self, canonical, channel):
        row = squeezing_vs_exceedance_scan(canonical, channel, [1e-4])[0]
        assert row.quad_db == pytest.approx(3.1168, abs=1e-3)
        assert row.photon_db == pytest.approx(3.0107, abs=1e-3)
        assert abs(row.quad_db - row.photon_db) < 0.1 * row.quad_db

    def test_monotone_in_deep_tail(self, canonical, channel):
        grid = np.geomspace(1e-3, 1e-6, 7)
        rows = squeezing_vs_exceedance_scan(canonical, channel, grid)
        assert np.all(np.diff([r.quad_db for r in rows]) > 0)
        assert np.all(np.diff([r.photon_db for r in rows]) > 0)

    def test_photon_monotone_everywhere(self, canonical, channel):
        rows = squeezing_vs_exceedance_scan(canonical, channel, np.geomspace(1, 1e-6, 13))
        assert np.all(np.diff([r.photon_db for r in rows]) > 0)

    def test_brightness_helps_quadrature_less(self, channel):
        # Var(T) <X>^2 grows with the displacement, so brighter input keeps less quadrature squeezing
        t_min = tmin_of_exceedance(1e-3, channel)
        ps = postselect(channel, t_min)
        dbs = [propagate_squeezing(canonical_input(6.0, a, 400), ps).quad_db for a in (2.0, 5.0, 10.0)]
        assert dbs[0] > dbs[1] > dbs[2]

    def test_infeasible_rows_kept(self, canonical):
        far = Pdtc.from_geometry(ApertureBeam(1.0, 1.0), WanderStats(1.0, 3.0))
        rows = squeezing_vs_exceedance_scan(canonical, far, [0.5, 1e-300])
        assert rows[0].feasible
        assert not rows[1].feasible and math.isnan(rows[1].quad_db)

    def test_grid_validation(self, canonical, channel):
        with pytest.raises(DomainError):
            squeezing_vs_exceedance_scan(canonical, channel, [])
        with pytest.raises(DomainError):
            squeezing_vs_exceedance_scan(canonical, channel, [0.5, 0.0])
