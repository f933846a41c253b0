import numpy as np
import pytest

from bihj import gaussian
from bihj.errors import ExtrapolationError
from bihj.fields import derive_fields, stationary_points
from bihj.reconstruct import (
    bihj_wavefunction_at,
    polar_wavefunction_at,
    probability_from_actions,
)
from bihj.reference import SpatialGrid, WaveSnapshot

SIGMA0 = np.sqrt(0.5)


class TestPairReconstruction:
    def test_center_value(self, bi_pair, g):
        psi = bihj_wavefunction_at(bi_pair, 0.0, 1.0)
        # closed form: (2 pi)^(-1/4) e^{-i arctan(1)/2}
        target = complex(gaussian.psi(g, 0.0, 1.0))
        assert abs(psi - target) < 1e-4
        assert psi.real == pytest.approx(0.58354, abs=2e-5)
        assert psi.imag == pytest.approx(-0.24171, abs=2e-5)

    def test_identity_at_t0(self, bi_pair, g):
        xs = np.linspace(-3.0, 3.0, 13)
        got = np.atleast_1d(bihj_wavefunction_at(bi_pair, xs, 0.0))
        expect = gaussian.psi(g, xs, 0.0)
        assert np.abs(got - expect).max() < 1e-12

    def test_central_action_increment(self, plus_congruence):
        i0 = plus_congruence.label_index(0.0)
        inc = plus_congruence.chi[-1, i0] - plus_congruence.chi[0, i0]
        # time integral of the central Lagrangian rate: -(pi/4 + ln(2)/2)/2
        assert inc == pytest.approx(-(np.pi / 4.0 + 0.5 * np.log(2.0)) / 2.0, abs=1e-4)

    def test_probability_from_action_difference(self, bi_pair, g):
        got = probability_from_actions(bi_pair, 0.0, 1.0)
        assert got == pytest.approx(float(gaussian.rho(g, 0.0, 1.0)), rel=1e-4)
        xs = np.linspace(-1.5, 1.5, 7)
        got = np.atleast_1d(probability_from_actions(bi_pair, xs, 0.0))
        assert np.abs(got / gaussian.rho(g, xs, 0.0) - 1.0).max() < 1e-10

    def test_outside_hull_rejected(self, bi_pair):
        with pytest.raises(ExtrapolationError):
            bihj_wavefunction_at(bi_pair, 50.0, 1.0)


class TestPolarReconstruction:
    def test_modulus_follows_carried_density(self, dbb_congruence, g, params):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        psi = polar_wavefunction_at(dbb_congruence, rho0, np.sqrt(2.0), 1.0, params)
        expected = np.sqrt(float(gaussian.rho(g, 1.0, 0.0)) / np.sqrt(2.0))
        assert abs(psi) == pytest.approx(expected, rel=1e-6)

    def test_phase_at_center(self, dbb_congruence, g, params):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        psi = polar_wavefunction_at(dbb_congruence, rho0, 0.0, 1.0, params)
        assert np.angle(psi) == pytest.approx(-np.arctan(1.0) / 2.0, abs=1e-4)

    def test_identity_at_t0(self, dbb_congruence, g, params):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        xs = np.linspace(-2.0, 2.0, 9)
        got = np.atleast_1d(polar_wavefunction_at(dbb_congruence, rho0, xs, 0.0, params))
        assert np.abs(got - gaussian.psi(g, xs, 0.0)).max() < 1e-12


class TestCrossPicture:
    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_three_way_agreement(self, bi_pair, dbb_congruence, g, params, t):
        sig = g.sigma(t)
        xs = np.linspace(-2.0 * sig, 2.0 * sig, 21)
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        pair = np.atleast_1d(bihj_wavefunction_at(bi_pair, xs, t))
        polar = np.atleast_1d(polar_wavefunction_at(dbb_congruence, rho0, xs, t, params))
        ref = gaussian.psi(g, xs, t)
        scale = np.abs(ref).max()
        assert np.abs(pair - ref).max() <= 1e-4 * scale
        assert np.abs(polar - ref).max() <= 1e-4 * scale
        assert np.abs(pair - polar).max() <= 1e-4 * scale

    def test_actions_at_inverted_labels_equal_field_values(self, bi_pair, g):
        """Accumulated actions read at the labels through (x, t) reproduce the
        Eulerian action pair there."""
        from bihj.congruence import invert_labels
        from scipy.interpolate import CubicSpline
        t = 1.0
        k = bi_pair.plus.time_index(t)
        xs = np.linspace(-1.5, 1.5, 11)
        for c, field in ((bi_pair.plus, gaussian.action_plus),
                         (bi_pair.minus, gaussian.action_minus)):
            labs = invert_labels(c, xs, t)
            chi = CubicSpline(c.labels.values, c.chi[k])(labs)
            assert np.abs(chi - field(g, xs, t)).max() <= 1e-4

    def test_mean_action_is_phase_and_difference_is_log_density(self, bi_pair, g):
        from bihj.congruence import invert_labels
        from scipy.interpolate import CubicSpline
        t, xs = 0.5, np.linspace(-1.0, 1.0, 9)
        k = bi_pair.plus.time_index(t)
        chi_p = CubicSpline(bi_pair.plus.labels.values, bi_pair.plus.chi[k])(
            invert_labels(bi_pair.plus, xs, t))
        chi_m = CubicSpline(bi_pair.minus.labels.values, bi_pair.minus.chi[k])(
            invert_labels(bi_pair.minus, xs, t))
        assert np.abs(0.5 * (chi_p + chi_m) - gaussian.phase_action(g, xs, t)).max() < 1e-6
        half_log = 0.5 * np.log(gaussian.rho(g, xs, t))
        assert np.abs(0.5 * (chi_p - chi_m) - half_log).max() < 1e-6

    def test_density_peak_sits_at_stationary_point(self, bi_pair, params, g):
        # probe-grid argmax of the action-difference density vs the
        # relative-velocity zero of the field picture
        grid = SpatialGrid(-10.0, 10.0, 1024)
        t = 1.0
        xs = np.linspace(-2.0, 2.0, 161)
        dens = np.atleast_1d(probability_from_actions(bi_pair, xs, t))
        peak = xs[np.argmax(dens)]
        snap = WaveSnapshot(grid, t, gaussian.psi(g, grid.x, t))
        found = stationary_points(derive_fields(snap, params))
        assert np.abs(found.points - peak).min() <= grid.dx + (xs[1] - xs[0])
