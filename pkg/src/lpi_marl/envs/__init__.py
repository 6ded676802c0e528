"""Benchmark environments addressable by name."""

from __future__ import annotations

import dataclasses
from collections.abc import Callable, Mapping
from typing import Any

from lpi_marl.envs.random_mdp import RandomMDPParams, random_factored_mdp
from lpi_marl.envs.spreading import SingleSourceInitial, SpreadingParams, spreading_env
from lpi_marl.exceptions import ConfigurationError
from lpi_marl.graph import NetworkGraph
from lpi_marl.mdp import FactoredMDP, load_mdp

EnvironmentBuilder = Callable[..., FactoredMDP]


def _spreading(
    params: Mapping[str, Any],
    gamma: float,
    tau: float,
    graph: NetworkGraph | None,
    rho: Mapping[str, Any] | None,
) -> FactoredMDP:
    return spreading_env(SpreadingParams(**params), gamma, tau, rho, graph)


def _random(
    params: Mapping[str, Any],
    gamma: float,
    tau: float,
    graph: NetworkGraph | None,
    rho: Mapping[str, Any] | None,
) -> FactoredMDP:
    return random_factored_mdp(RandomMDPParams(**{**params, "gamma": gamma, "tau": tau}), graph)


def _file(
    params: Mapping[str, Any],
    gamma: float,
    tau: float,
    graph: NetworkGraph | None,
    rho: Mapping[str, Any] | None,
) -> FactoredMDP:
    if "path" not in params:
        raise ConfigurationError("The file environment needs a path", field="environment.params.path")
    m = load_mdp(params["path"])
    return dataclasses.replace(m, gamma=gamma, tau=tau)


ENVIRONMENTS: dict[str, EnvironmentBuilder] = {
    "spreading": _spreading,
    "random": _random,
    "file": _file,
}


def build_environment(
    name: str,
    params: Mapping[str, Any] | None,
    gamma: float,
    tau: float,
    graph: NetworkGraph | None = None,
    rho: Mapping[str, Any] | None = None,
) -> FactoredMDP:
    """Build a named environment.

    Args:
        name: ``spreading``, ``random`` or ``file``
        params: Environment parameters
        gamma: Discount factor
        tau: Entropy weight
        graph: Interaction graph (environment default when omitted)
        rho: Initial distribution description (environment default when omitted)

    Raises:
        ConfigurationError: On an unknown name or rejected parameters
    """
    builder = ENVIRONMENTS.get(name)
    if builder is None:
        raise ConfigurationError(
            f"Unknown environment '{name}'. Valid values: {sorted(ENVIRONMENTS)}",
            field="environment.name",
        )
    try:
        return builder(dict(params or {}), gamma, tau, graph, rho)
    except TypeError as e:
        raise ConfigurationError(
            f"Bad parameters for environment '{name}': {e}", field="environment.params"
        ) from e


__all__ = [
    "ENVIRONMENTS",
    "RandomMDPParams",
    "SingleSourceInitial",
    "SpreadingParams",
    "build_environment",
    "random_factored_mdp",
    "spreading_env",
]
