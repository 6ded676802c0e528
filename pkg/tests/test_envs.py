"""Tests for the benchmark environments."""

import numpy as np
import pytest

from lpi_marl.analysis import c_matrix
from lpi_marl.envs import (
    RandomMDPParams,
    SingleSourceInitial,
    SpreadingParams,
    build_environment,
    random_factored_mdp,
    spreading_env,
)
from lpi_marl.envs.spreading import flags, local_index, spreading_kernel, spreading_rewards
from lpi_marl.exceptions import ConfigurationError
from lpi_marl.graph import graph_from_spec
from lpi_marl.mdp import UniformInitial, dump_mdp


class TestSpreadingDynamics:
    """Tests for the spreading process kernels and rewards."""

    def test_index_packing(self):
        assert local_index(1, 0) == 2
        assert flags(3) == (1, 1)
        assert [flags(local_index(a, b)) for a in (0, 1) for b in (0, 1)] == [
            (0, 0),
            (0, 1),
            (1, 0),
            (1, 1),
        ]

    def test_unreached_neighborhood_stays_unreached(self, small_spreading):
        kernel = small_spreading.kernels[1]
        # every member of agent 1's neighborhood has s1 = 0: indices 0 or 1
        codec = small_spreading.subset_codec((0, 1, 2))
        for row, tup in enumerate(codec.all_tuples()):
            if all(s // 2 == 0 for s in tup):
                assert kernel[row, :, 2:].sum() == pytest.approx(0.0)

    def test_reached_agent_persists(self):
        p = SpreadingParams(n=2)
        kernel = spreading_kernel(p, (0, 1), 0)
        # agent 0 reached and unprotected, agent 1 untouched
        row = 4 * local_index(1, 0) + local_index(0, 0)
        assert kernel[row, 0, 2:].sum() == pytest.approx(1 - p.p1)

    def test_reach_ignores_action(self, small_spreading):
        for kernel in small_spreading.kernels:
            reached = kernel[:, :, 2:].sum(axis=2)
            assert np.allclose(reached[:, 0], reached[:, 1])

    def test_protection(self):
        p = SpreadingParams(n=2)
        kernel = spreading_kernel(p, (0, 1), 0)
        unprotected = 4 * local_index(0, 0) + local_index(0, 0)
        protected = 4 * local_index(0, 1) + local_index(0, 0)
        assert kernel[unprotected, 0, local_index(0, 1)] == pytest.approx(0.0)
        assert kernel[unprotected, 1, local_index(0, 1)] == pytest.approx(p.p_eff * (1 - p.p2))
        assert kernel[protected, 0, local_index(0, 1)] == pytest.approx(1 - p.p2)

    def test_rewards(self):
        rewards = spreading_rewards(SpreadingParams(c=0.3))
        assert rewards[local_index(1, 0)].tolist() == pytest.approx([1.0, 0.7])
        assert rewards[local_index(1, 1)].tolist() == pytest.approx([2.0, 1.7])
        assert rewards.max() <= 2.0

    def test_model(self, small_spreading):
        assert small_spreading.n == 3
        assert small_spreading.r_bar == 2.0
        assert small_spreading.state_dims == (4, 4, 4)
        assert small_spreading.name == "spreading-n3"

    def test_params_validated(self):
        with pytest.raises(ConfigurationError):
            SpreadingParams(p1=1.0)
        with pytest.raises(ConfigurationError):
            SpreadingParams(c=2.0)
        with pytest.raises(ConfigurationError):
            SpreadingParams(n=0)

    def test_graph_size_checked(self):
        with pytest.raises(ConfigurationError):
            spreading_env(SpreadingParams(n=3), 0.9, 0.1, graph=graph_from_spec("line", 4))


class TestSingleSourceInitial:
    """Tests for the default initial distribution."""

    def test_probabilities(self):
        rho = SingleSourceInitial(3)
        probs = rho.probabilities((4, 4, 4))
        assert probs.sum() == pytest.approx(1.0)
        assert np.count_nonzero(probs) == 3 * 8

    def test_sample_has_one_source(self, rng):
        rho = SingleSourceInitial(5)
        for _ in range(20):
            state = rho.sample(rng)
            assert sum(flags(s)[0] for s in state) == 1

    def test_describe(self):
        assert SingleSourceInitial(4).describe() == {"kind": "single-source", "n": 4}


class TestRandomMDP:
    """Tests for the random generator."""

    def test_seeded(self):
        a = random_factored_mdp(RandomMDPParams(n=3, seed=5))
        b = random_factored_mdp(RandomMDPParams(n=3, seed=5))
        for ka, kb in zip(a.kernels, b.kernels):
            assert np.array_equal(ka, kb)

    def test_budget_met(self):
        m = random_factored_mdp(RandomMDPParams(n=4, graph="cycle", epsilon_c=0.05, seed=2))
        assert c_matrix(m).row_sums.max() <= 0.05

    def test_zero_budget_decouples(self):
        m = random_factored_mdp(RandomMDPParams(n=3, epsilon_c=0.0, seed=1))
        assert np.allclose(c_matrix(m).entries, 0.0)

    def test_loose_budget_keeps_full_kernel(self):
        m = random_factored_mdp(RandomMDPParams(n=2, epsilon_c=10.0, seed=1))
        assert c_matrix(m).row_sums.max() > 0.0

    def test_rewards_bounded(self):
        m = random_factored_mdp(RandomMDPParams(n=3, r_bar=0.5, seed=4))
        assert all(r.max() <= 0.5 for r in m.rewards)
        assert isinstance(m.rho, UniformInitial)

    def test_params_validated(self):
        with pytest.raises(ConfigurationError):
            RandomMDPParams(n=0)
        with pytest.raises(ConfigurationError):
            RandomMDPParams(epsilon_c=-1.0)


class TestBuildEnvironment:
    """Tests for name-based construction."""

    def test_spreading(self):
        m = build_environment("spreading", {"n": 4}, 0.9, 0.1)
        assert m.n == 4
        assert isinstance(m.rho, SingleSourceInitial)

    def test_spreading_with_uniform_start(self):
        m = build_environment("spreading", {"n": 2}, 0.9, 0.1, rho={"kind": "uniform"})
        assert isinstance(m.rho, UniformInitial)

    def test_random_uses_gamma_and_tau(self):
        m = build_environment("random", {"n": 2, "seed": 3}, 0.4, 2.0)
        assert m.gamma == 0.4
        assert m.tau == 2.0

    def test_file(self, tiny_mdp, tmp_path):
        path = tmp_path / "tiny.yaml"
        dump_mdp(tiny_mdp, path)
        m = build_environment("file", {"path": str(path)}, 0.7, 0.2)
        assert m.gamma == 0.7
        assert m.tau == 0.2
        assert m.name == "tiny"

    def test_file_needs_path(self):
        with pytest.raises(ConfigurationError, match="path"):
            build_environment("file", {}, 0.7, 0.2)

    def test_unknown(self):
        with pytest.raises(ConfigurationError, match="Unknown environment"):
            build_environment("gridworld", {}, 0.9, 0.1)

    def test_bad_params(self):
        with pytest.raises(ConfigurationError, match="Bad parameters"):
            build_environment("spreading", {"speed": 2}, 0.9, 0.1)
