"""Shared tiny instances."""

from __future__ import annotations

import numpy as np
import pytest

from lpi_marl.envs import RandomMDPParams, SpreadingParams, random_factored_mdp, spreading_env
from lpi_marl.graph import NetworkGraph, build_graph
from lpi_marl.mdp import AgentSpace, FactoredMDP, UniformInitial

# Entropy weight four times the closure threshold for gamma=0.5, r_bar=1, A=2.
COMPLIANT_TAU = 435.0


@pytest.fixture
def line3() -> NetworkGraph:
    return build_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def pair_graph() -> NetworkGraph:
    return build_graph(2, [(0, 1)])


def two_agent_mdp(gamma: float = 0.5, tau: float = 0.5) -> FactoredMDP:
    """Two coupled agents with two states and two actions each.

    Agent 0 moves to state 1 with probability 0.8 when it acts and agent 1 is
    in state 1, and with probability 0.3 otherwise. Agent 1 copies agent 0's
    state with probability 0.9 when it acts and stays put otherwise.
    """
    graph = build_graph(2, [(0, 1)])
    k0 = np.zeros((4, 2, 2))
    k1 = np.zeros((4, 2, 2))
    for s0 in range(2):
        for s1 in range(2):
            row = 2 * s0 + s1
            for a in range(2):
                up = 0.8 if (a == 1 and s1 == 1) else 0.3
                k0[row, a] = [1.0 - up, up]
                if a == 1:
                    k1[row, a, s0] += 0.9
                    k1[row, a, 1 - s0] += 0.1
                else:
                    k1[row, a, s1] += 0.85
                    k1[row, a, 1 - s1] += 0.15
    rewards = (
        np.array([[0.0, 0.2], [1.0, 0.7]]),
        np.array([[0.5, 0.1], [0.9, 1.0]]),
    )
    return FactoredMDP(
        graph=graph,
        spaces=(AgentSpace(2, 2), AgentSpace(2, 2)),
        kernels=(k0, k1),
        rewards=rewards,
        gamma=gamma,
        tau=tau,
        rho=UniformInitial((2, 2)),
        r_bar=1.0,
        name="two-agent",
    )


def single_state_mdp(gamma: float = 0.5, reward: float = 1.0) -> FactoredMDP:
    """One agent, one state, one action."""
    return FactoredMDP(
        graph=build_graph(1, []),
        spaces=(AgentSpace(1, 1),),
        kernels=(np.ones((1, 1, 1)),),
        rewards=(np.array([[reward]]),),
        gamma=gamma,
        tau=0.1,
        rho=UniformInitial((1,)),
        r_bar=max(reward, 1.0),
        name="single-state",
    )


@pytest.fixture
def tiny_mdp() -> FactoredMDP:
    return two_agent_mdp()


@pytest.fixture
def random_pair() -> FactoredMDP:
    """Random instance with n=2 and binary local spaces."""
    return random_factored_mdp(RandomMDPParams(n=2, gamma=0.5, tau=1.0, seed=3))


@pytest.fixture
def compliant_line3() -> FactoredMDP:
    """Random line of three agents meeting the decay hypotheses with exponent 2."""
    return random_factored_mdp(
        RandomMDPParams(n=3, gamma=0.5, tau=COMPLIANT_TAU, epsilon_c=0.125, r_bar=1.0, seed=7)
    )


@pytest.fixture
def small_spreading() -> FactoredMDP:
    return spreading_env(SpreadingParams(n=3), gamma=0.9, tau=0.05)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
