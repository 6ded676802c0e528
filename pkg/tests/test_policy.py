"""Tests for kappa-hop policies."""

import math

import numpy as np
import pytest

from lpi_marl.exceptions import ModelError, RegularityError, SchemaError
from lpi_marl.graph import graph_from_spec
from lpi_marl.mdp import AgentSpace, FactoredMDP, UniformInitial
from lpi_marl.policy import (
    JointPolicy,
    KHopPolicy,
    centralized_policy,
    policy_entropy,
    policy_from_tables,
    read_policy,
    row_regularity,
    sample_action,
    sigma_regularity,
    truncate_policy,
    tv_distance,
    uniform_policy,
    write_policy,
)


def _line_mdp(n: int = 3, states: int = 2) -> FactoredMDP:
    g = graph_from_spec("line", n)
    kernels = tuple(
        np.full((states ** len(g.neighbors(i)), 2, states), 1.0 / states) for i in range(n)
    )
    return FactoredMDP(
        graph=g,
        spaces=tuple(AgentSpace(states, 2) for _ in range(n)),
        kernels=kernels,
        rewards=tuple(np.zeros((states, 2)) for _ in range(n)),
        gamma=0.9,
        tau=0.1,
        rho=UniformInitial((states,) * n),
    )


class TestKHopPolicy:
    """Tests for single-agent tables."""

    def test_uniform_shapes(self):
        m = _line_mdp()
        zeta = uniform_policy(m, 1)
        assert zeta[0].members == (0, 1)
        assert zeta[1].table.shape == (8, 2)
        assert np.allclose(zeta[2].table, 0.5)

    def test_row_lookup_uses_members(self):
        table = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.25, 0.75]])
        part = KHopPolicy(0, 1, (0, 1), (2, 2), table)
        # agent 2's coordinate is ignored
        assert np.array_equal(part.row((1, 1, 0)), part.row((1, 1, 1)))
        assert np.array_equal(part.row((1, 0, 1)), [0.5, 0.5])
        assert part.row_indices(np.array([[0, 1, 1], [1, 1, 0]])).tolist() == [1, 3]

    def test_must_observe_itself(self):
        with pytest.raises(ModelError, match="observe"):
            KHopPolicy(0, 1, (1,), (2,), np.full((2, 2), 0.5))

    def test_rows_must_sum_to_one(self):
        with pytest.raises(ModelError, match="sum to 1"):
            KHopPolicy(0, 0, (0,), (2,), np.array([[0.6, 0.6], [0.5, 0.5]]))

    def test_negative_entries(self):
        with pytest.raises(ModelError):
            KHopPolicy(0, 0, (0,), (2,), np.array([[1.5, -0.5], [0.5, 0.5]]))

    def test_parts_ordered(self):
        m = _line_mdp()
        zeta = uniform_policy(m, 0)
        with pytest.raises(ModelError):
            JointPolicy((zeta[1], zeta[0], zeta[2]))


class TestJointPolicy:
    """Tests for product policies."""

    def test_prob_is_product(self):
        m = _line_mdp(n=2)
        tables = [np.array([[0.2, 0.8], [0.6, 0.4]]), np.array([[0.3, 0.7], [0.9, 0.1]])]
        zeta = policy_from_tables(m, 0, tables)
        assert zeta.prob((1, 0), (0, 1)) == pytest.approx(0.6 * 0.7)
        assert zeta.log_prob((1, 0), (0, 1)) == pytest.approx(math.log(0.42))

    def test_sample_action_frequencies(self):
        m = _line_mdp(n=2)
        tables = [np.array([[0.2, 0.8], [0.6, 0.4]]), np.array([[0.3, 0.7], [0.9, 0.1]])]
        zeta = policy_from_tables(m, 0, tables)
        rng = np.random.default_rng(1)
        draws = np.array([sample_action(zeta, (0, 1), rng) for _ in range(20_000)])
        assert draws[:, 0].mean() == pytest.approx(0.8, abs=0.02)
        assert draws[:, 1].mean() == pytest.approx(0.1, abs=0.02)

    def test_centralized_radius(self):
        m = _line_mdp()
        tables = [np.full((8, 2), 0.5) for _ in range(3)]
        zeta = centralized_policy(m, tables)
        assert zeta.radii == (2, 2, 2)
        assert all(p.members == (0, 1, 2) for p in zeta)


class TestTruncatePolicy:
    """Tests for neighborhood truncation."""

    def test_evaluates_at_default_state(self):
        m = _line_mdp()
        rows = np.zeros((8, 2))
        for index in range(8):
            # probability of action 1 encodes the global state index
            rows[index] = [1 - index / 8, index / 8]
        zeta = centralized_policy(m, [rows] * 3)
        local = truncate_policy(zeta, 0, m)
        assert local[0].members == (0,)
        # agent 0 at state 1, others at default 0: global index 4
        assert local[0].table[1, 1] == pytest.approx(4 / 8)
        # agent 2 at state 1: global index 1
        assert local[2].table[1, 1] == pytest.approx(1 / 8)

    def test_full_radius_is_identity(self):
        m = _line_mdp()
        rng = np.random.default_rng(0)
        rows = rng.dirichlet([1, 1], size=8)
        zeta = centralized_policy(m, [rows] * 3)
        same = truncate_policy(zeta, m.graph.diameter, m)
        for a, b in zip(zeta, same):
            assert np.allclose(a.table, b.table)


class TestPolicyMeasures:
    """Tests for entropy, TV and regularity."""

    def test_entropy(self):
        assert policy_entropy([0.5, 0.5]) == pytest.approx(math.log(2))
        assert policy_entropy([1.0, 0.0]) == 0.0

    def test_tv(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert tv_distance([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.25)

    def test_row_regularity(self):
        assert row_regularity(np.array([[0.5, 0.5]])) == 0.0
        assert row_regularity(np.array([[0.25, 0.75]])) == pytest.approx(math.log(3))

    def test_zero_entry_not_regular(self):
        with pytest.raises(RegularityError):
            row_regularity(np.array([[1.0, 0.0]]))

    def test_sigma_of_uniform(self):
        assert sigma_regularity(uniform_policy(_line_mdp(), 1)) == 0.0


class TestPolicyFiles:
    """Tests for flat text checkpoints."""

    def test_write_and_read(self, tmp_path):
        m = _line_mdp()
        rng = np.random.default_rng(2)
        tables = [rng.dirichlet([1, 1], size=len(p.table)) for p in uniform_policy(m, 1)]
        zeta = policy_from_tables(m, 1, tables)
        path = tmp_path / "policy.txt"
        write_policy(zeta, path)
        loaded = read_policy(path)
        assert loaded.radii == zeta.radii
        for a, b in zip(zeta, loaded):
            assert a.members == b.members
            assert np.array_equal(a.table, b.table)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "policy.txt"
        path.write_text("not a policy\n")
        with pytest.raises(SchemaError):
            read_policy(path)

    def test_missing_rows(self, tmp_path):
        path = tmp_path / "policy.txt"
        path.write_text(
            "# lpi-policy v1\n"
            "# agent 0 radius 0 members 0 sizes 2 actions 2\n"
            "0 0 0.5 0.5\n"
        )
        with pytest.raises(SchemaError, match="rows"):
            read_policy(path)
