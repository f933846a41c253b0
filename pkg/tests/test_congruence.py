import numpy as np
import pytest

from bihj import gaussian
from bihj.congruence import (
    CallableSource,
    FieldSource,
    LabelSet,
    integrate_congruence,
    invert_labels,
    trajectory_density,
)
from bihj.errors import (
    CongruenceCrossingError,
    ExtrapolationError,
    FocalPointError,
    PreconditionError,
    TrajectoryExitError,
)
from bihj.fields import derive_series
from bihj.reference import InitialStateSpec, SpatialGrid, analytic_series

SIGMA0 = np.sqrt(0.5)


class TestLabelSet:
    def test_validation(self):
        with pytest.raises(PreconditionError):
            LabelSet(np.array([0.0, 0.0, 1.0]))
        with pytest.raises(PreconditionError):
            LabelSet(np.array([1.0]))

    def test_from_density_covers_floor_region(self, g):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        labels = LabelSet.from_density(rho0, -10.0, 10.0, count=101, floor=1e-6)
        # the floor region of the gaussian reaches +-sigma0 sqrt(2 ln 1e6)
        edge = SIGMA0 * np.sqrt(2.0 * np.log(1e6))
        assert labels.values[0] == pytest.approx(-edge, abs=0.02)
        assert labels.values[-1] == pytest.approx(edge, abs=0.02)


class TestIntegration:
    def test_closed_form_paths(self, plus_congruence, minus_congruence, dbb_congruence):
        # targets from the closed-form path families
        i = plus_congruence.label_index(1.0)
        assert plus_congruence.q[-1, i] == pytest.approx(
            np.sqrt(2.0) * np.exp(-np.pi / 4.0), rel=1e-6)
        assert minus_congruence.q[-1, i] == pytest.approx(
            np.sqrt(2.0) * np.exp(np.pi / 4.0), rel=1e-6)
        assert dbb_congruence.q[-1, i] == pytest.approx(np.sqrt(2.0), rel=1e-6)

    def test_zero_velocity_field_is_static(self, labels, times):
        zero = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
        src = CallableSource(zero, zero)
        c = integrate_congruence(src, labels, times,
                                 action_rate=lambda x, t: 2.0 + 0.0 * np.asarray(x),
                                 initial_actions=lambda q: 0.5 * q)
        assert np.abs(c.q - labels.values[None, :]).max() == 0.0
        assert np.abs(c.J - 1.0).max() == 0.0
        expected = 0.5 * labels.values[None, :] + 2.0 * times[:, None]
        assert np.abs(c.chi - expected).max() < 1e-12

    def test_rk4_convergence_order(self, g):
        labels = LabelSet.uniform(-2.0, 2.0, 5)
        src = CallableSource(*gaussian.velocity_field(g, "minus"))

        def err(dt):
            times = np.arange(0.0, 1.0 + dt / 2, dt)
            c = integrate_congruence(src, labels, times)
            exact = labels.values * gaussian.path_scale(g, "minus", 1.0)
            return np.abs(c.q[-1] - exact).max()

        ratio = err(8e-3) / err(4e-3)
        assert 12.0 < ratio < 20.0

    def test_jacobian_consistency_invariant(self, plus_congruence):
        assert plus_congruence.jacobian_fd_mismatch() <= 1e-4

    def test_action_gradient_identity(self, g, plus_congruence):
        """Label gradient of the accumulated action is the momentum flux."""
        c = plus_congruence
        h = c.labels.values[1] - c.labels.values[0]
        from bihj.kernels import fd_derivative
        k = len(c.times) // 2
        lhs = fd_derivative(c.chi[k], h)[2:-2]
        rhs = (c.qdot[k] * fd_derivative(c.q[k], h))[2:-2]
        assert np.max(np.abs(lhs - rhs)) <= 1e-3 * np.max(np.abs(rhs))

    def test_carried_density_is_conserved_on_mean_flow(self, g, dbb_congruence):
        c = dbb_congruence
        rho_along = gaussian.rho(g, c.q, c.times[:, None])
        carried = rho_along * c.J
        drift = np.abs(carried / carried[0] - 1.0)
        assert drift.max() <= 1e-4

    def test_exit_error_names_label_and_time(self, g):
        src = CallableSource(*gaussian.velocity_field(g, "minus"), x_span=(-5.0, 5.0))
        labels = LabelSet.uniform(-4.0, 4.0, 9)
        with pytest.raises(TrajectoryExitError) as err:
            integrate_congruence(src, labels, np.linspace(0.0, 1.0, 201))
        assert abs(err.value.label) == pytest.approx(4.0, abs=0.5)
        assert 0.0 < err.value.time <= 1.0

    def test_crossing_and_focal_point_rejected_by_container(self, labels, times):
        from bihj.congruence import Congruence
        nt, nl = 3, 5
        lab = LabelSet.uniform(-1.0, 1.0, nl)
        t3 = np.array([0.0, 0.1, 0.2])
        q = np.tile(lab.values, (nt, 1))
        ones = np.ones((nt, nl))
        crossed = q.copy()
        crossed[2, 2] = crossed[2, 3] + 0.1
        with pytest.raises(CongruenceCrossingError):
            Congruence(lab, t3, crossed, ones * 0.0, ones, ones * 0.0)
        bad_j = ones.copy()
        bad_j[1, 0] = -0.5
        with pytest.raises(FocalPointError):
            Congruence(lab, t3, q, ones * 0.0, bad_j, ones * 0.0)

    def test_focal_squeeze_detected_during_integration(self):
        # a cubic squeeze drives the expansion factor through zero
        v = lambda x, t: -np.asarray(x, dtype=float) ** 3 * 8.0
        g_ = lambda x, t: -24.0 * np.asarray(x, dtype=float) ** 2
        labels = LabelSet.uniform(-1.0, 1.0, 11)
        from bihj.errors import InstabilityError
        with pytest.raises((CongruenceCrossingError, FocalPointError, InstabilityError)):
            integrate_congruence(CallableSource(v, g_), labels, np.linspace(0.0, 2.0, 9))


class TestInversion:
    def test_identity_at_t0(self, plus_congruence):
        xs = np.linspace(-3.5, 3.5, 11)
        labs = invert_labels(plus_congruence, xs, 0.0)
        assert np.abs(labs - xs).max() < 1e-10

    def test_inverts_closed_form_position(self, plus_congruence):
        x = np.sqrt(2.0) * np.exp(-np.pi / 4.0)
        assert invert_labels(plus_congruence, x, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_stored_label_round_trip(self, minus_congruence):
        c = minus_congruence
        k = len(c.times) - 1
        for i in (3, 50, 97):
            assert invert_labels(c, c.q[k, i], c.times[k]) == pytest.approx(
                c.labels.values[i], abs=1e-9)

    def test_outside_hull_rejected(self, plus_congruence):
        with pytest.raises(ExtrapolationError):
            invert_labels(plus_congruence, 10.0, 1.0)

    def test_unknown_time_rejected(self, plus_congruence):
        with pytest.raises(PreconditionError):
            invert_labels(plus_congruence, 0.0, 0.12345678)


class TestTrajectoryDensity:
    def test_plus_flow_overcounts_by_expansion_deficit(self, g, plus_congruence):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        ratio = trajectory_density(plus_congruence, rho0, 0.0, 1.0) / gaussian.rho(g, 0.0, 1.0)
        assert ratio == pytest.approx(np.exp(np.pi / 4.0), rel=1e-4)

    def test_mean_flow_matches_density(self, g, dbb_congruence):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        for x in (-1.0, 0.3, 1.7):
            got = trajectory_density(dbb_congruence, rho0, x, 1.0)
            assert got == pytest.approx(float(gaussian.rho(g, x, 1.0)), rel=1e-4)

    def test_initial_time_returns_rho0(self, g, dbb_congruence):
        rho0 = lambda q: gaussian.rho(g, q, 0.0)
        assert trajectory_density(dbb_congruence, rho0, 0.7, 0.0) == pytest.approx(
            float(gaussian.rho(g, 0.7, 0.0)), rel=1e-10)


class TestFieldSource:
    def test_sampled_fields_drive_accurate_trajectories(self, params, g):
        grid = SpatialGrid(-10.0, 10.0, 2048)
        wave = analytic_series(InitialStateSpec.gaussian(SIGMA0), grid, params,
                               np.arange(0.0, 1.0 + 1e-9, 0.01))
        fs = derive_series(wave)
        labels = LabelSet.uniform(-3.0, 3.0, 61)
        times = np.linspace(0.0, 1.0, 1001)
        c = integrate_congruence(FieldSource(fs, "v_plus"), labels, times)
        exact = labels.values * gaussian.path_scale(g, "plus", 1.0)
        assert np.abs(c.q[-1] - exact).max() < 1e-4

    def test_queries_outside_span_raise(self, params):
        grid = SpatialGrid(-10.0, 10.0, 512)
        wave = analytic_series(InitialStateSpec.gaussian(SIGMA0), grid, params,
                               np.arange(3) * 1e-2)
        fs = derive_series(wave)
        src = FieldSource(fs, "v")
        from bihj.errors import DomainError
        with pytest.raises(DomainError):
            src.velocity(np.array([25.0]), 0.0)
        with pytest.raises(DomainError):
            src.velocity(np.array([0.0]), 5.0)
