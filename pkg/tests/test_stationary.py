"""Tests for induced chains and stationary distributions."""

import itertools

import numpy as np
import pytest

from lpi_marl.envs import SpreadingParams, spreading_env
from lpi_marl.exceptions import CapExceededError, ChainStructureError
from lpi_marl.graph import build_graph
from lpi_marl.mdp import AgentSpace, FactoredMDP, UniformInitial, global_transition_prob
from lpi_marl.policy import uniform_policy
from lpi_marl.solver import induced_chain_check, stationary_distribution


def _single_agent(kernel: np.ndarray) -> FactoredMDP:
    return FactoredMDP(
        graph=build_graph(1, []),
        spaces=(AgentSpace(2, 2),),
        kernels=(kernel,),
        rewards=(np.zeros((2, 2)),),
        gamma=0.5,
        tau=0.1,
        rho=UniformInitial((2,)),
    )


def _swap() -> FactoredMDP:
    kernel = np.zeros((2, 2, 2))
    kernel[0, :, 1] = 1.0
    kernel[1, :, 0] = 1.0
    return _single_agent(kernel)


def _stay() -> FactoredMDP:
    kernel = np.zeros((2, 2, 2))
    kernel[0, :, 0] = 1.0
    kernel[1, :, 1] = 1.0
    return _single_agent(kernel)


class TestInducedChain:
    """Tests for chain structure checks."""

    def test_ergodic(self, tiny_mdp):
        report = induced_chain_check(tiny_mdp, uniform_policy(tiny_mdp, 0))
        assert report.irreducible
        assert report.ergodic
        assert report.transient == []

    def test_periodic(self):
        m = _swap()
        report = induced_chain_check(m, uniform_policy(m, 0))
        assert report.irreducible
        assert not report.aperiodic
        with pytest.raises(ChainStructureError, match="periodic"):
            stationary_distribution(m, uniform_policy(m, 0))

    def test_two_closed_classes(self):
        m = _stay()
        report = induced_chain_check(m, uniform_policy(m, 0))
        assert report.closed_classes == [[0], [1]]
        with pytest.raises(ChainStructureError, match="reducible"):
            stationary_distribution(m, uniform_policy(m, 0))

    def test_spreading_absorbs(self):
        m = spreading_env(SpreadingParams(n=2), gamma=0.9, tau=0.1)
        zeta = uniform_policy(m, 0)
        report = induced_chain_check(m, zeta)
        # the closed class is every state with nobody reached
        assert len(report.closed_classes) == 1
        assert all(
            all(s // 2 == 0 for s in m.state_codec.decode(x)) for x in report.closed_classes[0]
        )
        assert len(report.transient) == 12
        with pytest.raises(ChainStructureError, match="transient"):
            stationary_distribution(m, zeta)
        result = stationary_distribution(m, zeta, allow_transient=True)
        assert result.state[report.transient].sum() == pytest.approx(0.0, abs=1e-8)


class TestStationaryDistribution:
    """Tests for the power-iteration solve."""

    def test_is_invariant(self, tiny_mdp):
        zeta = uniform_policy(tiny_mdp, 0)
        result = stationary_distribution(tiny_mdp, zeta, tol=1e-13)
        states = list(itertools.product(range(2), repeat=2))
        actions = list(itertools.product(range(2), repeat=2))
        P = np.array(
            [
                [
                    sum(0.25 * global_transition_prob(tiny_mdp, s, a, s2) for a in actions)
                    for s2 in states
                ]
                for s in states
            ]
        )
        assert result.state.sum() == pytest.approx(1.0)
        assert result.state @ P == pytest.approx(result.state, abs=1e-10)

    def test_two_state_chain(self):
        # pi_0 = pi_0 / 2 + pi_1 and pi_1 = pi_0 / 2
        kernel = np.zeros((2, 2, 2))
        kernel[0, :] = [0.5, 0.5]
        kernel[1, :] = [1.0, 0.0]
        m = _single_agent(kernel)
        result = stationary_distribution(m, uniform_policy(m, 0), tol=1e-12)
        assert result.state == pytest.approx([2 / 3, 1 / 3], abs=1e-9)
        assert result.state_action == pytest.approx(np.outer(result.state, [0.5, 0.5]), abs=1e-9)
        assert result.xi == pytest.approx(1 / 6, abs=1e-9)

    def test_state_action_law(self, tiny_mdp):
        result = stationary_distribution(tiny_mdp, uniform_policy(tiny_mdp, 0))
        assert result.state_action.shape == (4, 4)
        assert result.state_action.sum(axis=1) == pytest.approx(result.state)

    def test_cell_marginals_and_xi(self, tiny_mdp):
        result = stationary_distribution(tiny_mdp, uniform_policy(tiny_mdp, 0), beta=0)
        assert len(result.cell_marginals) == 2
        for marginal in result.cell_marginals:
            assert marginal.shape == (2, 2)
            assert marginal.sum() == pytest.approx(1.0)
        assert result.xi == pytest.approx(min(float(mg.min()) for mg in result.cell_marginals))
        assert 0.0 < result.xi <= 0.25

    def test_wider_cells(self, tiny_mdp):
        result = stationary_distribution(tiny_mdp, uniform_policy(tiny_mdp, 0), beta=1)
        assert result.cell_marginals[0].shape == (4, 4)
        assert result.beta == 1

    def test_cap(self, tiny_mdp):
        with pytest.raises(CapExceededError):
            stationary_distribution(tiny_mdp, uniform_policy(tiny_mdp, 0), cap=10)
