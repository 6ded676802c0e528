"""LPI-MARL - Localized policy iteration for networked multi-agent RL."""

__version__ = "0.1.0"

from lpi_marl.config import (
    EvaluatorKind,
    ExactSettings,
    DiagnosticSettings,
    LPIConfig,
    ScheduleKind,
    TruncationWeights,
)
from lpi_marl.exceptions import (
    LPIError,
    ConfigurationError,
    ModelError,
    CapExceededError,
    ConvergenceError,
    ChainStructureError,
    RegularityError,
    CertificationError,
    SchemaError,
)
from lpi_marl.graph import GraphKind, NetworkGraph, build_graph, graph_from_spec
from lpi_marl.mdp import FactoredMDP, load_mdp, dump_mdp
from lpi_marl.policy import JointPolicy, KHopPolicy, uniform_policy
from lpi_marl.lpi import lpi_run
from lpi_marl.envs import build_environment, spreading_env, random_factored_mdp

__all__ = [
    "LPIConfig",
    "ExactSettings",
    "DiagnosticSettings",
    "EvaluatorKind",
    "ScheduleKind",
    "TruncationWeights",
    "GraphKind",
    "NetworkGraph",
    "build_graph",
    "graph_from_spec",
    "FactoredMDP",
    "load_mdp",
    "dump_mdp",
    "JointPolicy",
    "KHopPolicy",
    "uniform_policy",
    "lpi_run",
    "build_environment",
    "spreading_env",
    "random_factored_mdp",
    "LPIError",
    "ConfigurationError",
    "ModelError",
    "CapExceededError",
    "ConvergenceError",
    "ChainStructureError",
    "RegularityError",
    "CertificationError",
    "SchemaError",
]
