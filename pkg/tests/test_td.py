"""Tests for trajectories and localized TD(0)."""

import numpy as np
import pytest

from conftest import single_state_mdp
from lpi_marl.config import ScheduleKind
from lpi_marl.exceptions import ConfigurationError, ModelError
from lpi_marl.lpi.td import (
    StepSchedule,
    integrated_autocorrelation,
    localized_td0,
    make_schedule,
    mixing_estimate,
    visitation_frequencies,
)
from lpi_marl.lpi.trajectory import collect_trajectory, estimate_regularized_return, return_horizon
from lpi_marl.policy import uniform_policy
from lpi_marl.solver import local_q, objective


class TestTrajectory:
    """Tests for trajectory collection."""

    def test_shapes(self, tiny_mdp, rng):
        traj = collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 50, rng, beta=1)
        assert traj.states.shape == (50, 2)
        assert traj.actions.shape == (50, 2)
        assert traj.rewards.shape == (50, 2)
        assert len(traj) == 50
        assert traj.members == [(0, 1), (0, 1)]

    def test_seeded(self, tiny_mdp):
        zeta = uniform_policy(tiny_mdp, 0)
        a = collect_trajectory(tiny_mdp, zeta, 100, np.random.default_rng(3))
        b = collect_trajectory(tiny_mdp, zeta, 100, np.random.default_rng(3))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.actions, b.actions)

    def test_rewards_are_local(self, tiny_mdp, rng):
        traj = collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 200, rng)
        for i in range(2):
            expected = tiny_mdp.rewards[i][traj.states[:, i], traj.actions[:, i]]
            assert np.array_equal(traj.rewards[:, i], expected)

    def test_transition_frequencies(self, tiny_mdp, rng):
        traj = collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 20_000, rng)
        mask = (traj.actions[:-1, 0] == 1) & (traj.states[:-1, 1] == 1)
        assert traj.states[1:, 0][mask].mean() == pytest.approx(0.8, abs=0.03)

    def test_views(self, compliant_line3, rng):
        traj = collect_trajectory(compliant_line3, uniform_policy(compliant_line3, 0), 20, rng, beta=1)
        assert traj.neighborhood(0) == (0, 1)
        assert traj.neighborhood(1, 0) == (1,)
        with pytest.raises(ModelError):
            traj.neighborhood(1, 2)
        states, actions, rewards = traj.view(1)
        assert states.shape == (20, 3)
        assert rewards.shape == (20,)

    def test_length_checked(self, tiny_mdp, rng):
        with pytest.raises(ModelError):
            collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 0, rng)


class TestRegularizedReturn:
    """Tests for the Monte Carlo return estimate."""

    def test_horizon(self):
        assert return_horizon(0.5) == 14

    def test_single_state(self, rng):
        m = single_state_mdp(gamma=0.5, reward=1.0)
        assert estimate_regularized_return(m, uniform_policy(m, 0), 8, rng) == pytest.approx(
            2.0, abs=1e-3
        )

    def test_matches_objective(self, tiny_mdp, rng):
        zeta = uniform_policy(tiny_mdp, 0)
        estimate = estimate_regularized_return(tiny_mdp, zeta, 4000, rng)
        assert estimate == pytest.approx(objective(tiny_mdp, zeta), abs=0.05)


class TestSchedules:
    """Tests for TD(0) step schedules."""

    def test_constant(self):
        assert StepSchedule(alpha=0.2).rates(3).tolist() == [0.2, 0.2, 0.2]

    def test_annealed(self):
        schedule = make_schedule("annealed", {"alpha": 0.2, "factor": 0.5, "period": 2}, 0.9)
        assert schedule.rates(5) == pytest.approx([0.2, 0.2, 0.1, 0.1, 0.05])
        assert schedule.rate(4) == pytest.approx(0.05)

    def test_polynomial_from_xi(self):
        schedule = make_schedule("polynomial", {"t0_floor": 10}, 0.5, xi_estimate=0.1)
        assert schedule.H == pytest.approx(40.0)
        assert schedule.t0 == pytest.approx(160.0)
        assert schedule.rate(0) == pytest.approx(0.25)

    def test_polynomial_floor(self):
        schedule = make_schedule(ScheduleKind.POLYNOMIAL, {"H": 2.0, "t0_floor": 100}, 0.5)
        assert schedule.t0 == 100.0
        assert schedule.describe() == {"kind": "polynomial", "H": 2.0, "t0": 100.0}

    def test_polynomial_needs_h_or_xi(self):
        with pytest.raises(ConfigurationError):
            make_schedule("polynomial", {}, 0.5)
        with pytest.raises(ConfigurationError):
            make_schedule("polynomial", {}, 0.5, xi_estimate=0.0)

    def test_unknown_parameters(self):
        with pytest.raises(ConfigurationError, match="Unknown constant schedule parameters"):
            make_schedule("constant", {"alpha": 0.1, "period": 3}, 0.5)

    def test_bad_values(self):
        with pytest.raises(ConfigurationError):
            StepSchedule(alpha=0.0)
        with pytest.raises(ConfigurationError):
            StepSchedule(kind="annealed", factor=1.5)


class TestLocalizedTD0:
    """Tests for the TD(0) learner."""

    def test_single_state_recursion(self, rng):
        # Q <- Q + alpha (1 + gamma Q - Q) with alpha = gamma = 0.5
        m = single_state_mdp(gamma=0.5, reward=1.0)
        zeta = uniform_policy(m, 0)
        traj = collect_trajectory(m, zeta, 60, rng)
        table = localized_td0(traj, zeta[0], 0, 0.5, m.tau, 1, StepSchedule(alpha=0.5))
        expected = 0.0
        for _ in range(59):
            expected = 0.75 * expected + 0.5
        assert table.table[0, 0] == pytest.approx(expected, abs=1e-12)
        assert table.table[0, 0] == pytest.approx(2.0, abs=1e-6)

    def test_radius_checked(self, tiny_mdp, rng):
        zeta = uniform_policy(tiny_mdp, 0)
        traj = collect_trajectory(tiny_mdp, zeta, 10, rng, beta=0)
        with pytest.raises(ConfigurationError):
            localized_td0(traj, zeta[0], 1, 0.5, 0.5, 2, StepSchedule())

    def test_table_shape(self, compliant_line3, rng):
        m = compliant_line3
        zeta = uniform_policy(m, 1)
        traj = collect_trajectory(m, zeta, 100, rng, beta=1)
        table = localized_td0(traj, zeta[1], 1, m.gamma, m.tau, m.n, StepSchedule(), m.default_state)
        assert table.members == (0, 1, 2)
        assert table.table.shape == (8, 8)

    @pytest.mark.slow
    def test_converges_to_exact_local_q(self, tiny_mdp):
        zeta = uniform_policy(tiny_mdp, 1)
        traj = collect_trajectory(tiny_mdp, zeta, 1_000_000, np.random.default_rng(7), beta=1)
        schedule = make_schedule(
            "annealed", {"alpha": 0.1, "factor": 0.5, "period": 100_000}, tiny_mdp.gamma
        )
        for i in range(2):
            learned = localized_td0(
                traj, zeta[i], 1, tiny_mdp.gamma, tiny_mdp.tau, 2, schedule
            ).expand(tiny_mdp)
            exact = local_q(tiny_mdp, zeta, i).values
            assert np.max(np.abs(learned - exact)) <= 5e-3


class TestVisitation:
    """Tests for visitation and mixing diagnostics."""

    def test_frequencies_sum_to_one(self, tiny_mdp, rng):
        traj = collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 500, rng, beta=1)
        freqs = visitation_frequencies(traj, 0)
        assert freqs.shape == (16,)
        assert freqs.sum() == pytest.approx(1.0)

    def test_autocorrelation_of_constant(self):
        assert integrated_autocorrelation(np.ones(100)) == 1.0

    def test_autocorrelation_of_ar1(self):
        rng = np.random.default_rng(0)
        x = np.zeros(100_000)
        for t in range(1, x.size):
            x[t] = 0.9 * x[t - 1] + rng.normal()
        # (1 + phi) / (1 - phi) = 19
        assert 12.0 < integrated_autocorrelation(x) < 26.0

    def test_autocorrelation_of_noise(self):
        x = np.random.default_rng(1).normal(size=50_000)
        assert integrated_autocorrelation(x) < 1.1

    def test_mixing_estimate(self, tiny_mdp, rng):
        traj = collect_trajectory(tiny_mdp, uniform_policy(tiny_mdp, 0), 2000, rng)
        assert mixing_estimate(traj, 0) >= 1.0
