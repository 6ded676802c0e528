"""Tests for interaction graphs."""

import networkx as nx
import numpy as np
import pytest

from lpi_marl.exceptions import ConfigurationError, ModelError
from lpi_marl.graph import (
    GraphKind,
    build_graph,
    diameter,
    f_kappa,
    graph_from_spec,
    neighborhood,
)


class TestBuildGraph:
    """Tests for build_graph."""

    def test_line_distances(self):
        g = build_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        assert g.dist[0, 4] == 4
        assert g.dist[2, 0] == 2
        assert np.all(np.diag(g.dist) == 0)
        assert np.array_equal(g.dist, g.dist.T)

    def test_edges_are_normalized(self):
        g = build_graph(3, [(1, 0), (2, 1)])
        assert g.edges == frozenset({(0, 1), (1, 2)})

    def test_single_agent(self):
        g = build_graph(1, [])
        assert g.diameter == 0
        assert neighborhood(g, 0, 3).members == (0,)

    def test_disconnected_rejected(self):
        with pytest.raises(ModelError, match="disconnected"):
            build_graph(4, [(0, 1), (2, 3)])

    def test_self_loop_rejected(self):
        with pytest.raises(ModelError, match="Self-loop"):
            build_graph(2, [(0, 0), (0, 1)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ModelError, match="Duplicate"):
            build_graph(2, [(0, 1), (1, 0)])

    def test_out_of_range_rejected(self):
        with pytest.raises(ModelError):
            build_graph(2, [(0, 2)])

    def test_empty_graph_rejected(self):
        with pytest.raises(ModelError):
            build_graph(0, [])

    def test_matches_networkx(self):
        g = graph_from_spec("cycle", 7)
        lengths = dict(nx.all_pairs_shortest_path_length(g.to_networkx()))
        for i in range(7):
            for j in range(7):
                assert g.dist[i, j] == lengths[i][j]


class TestNeighborhoods:
    """Tests for hop neighborhoods."""

    def test_line_neighborhoods(self, line3):
        assert neighborhood(line3, 0, 0).members == (0,)
        assert neighborhood(line3, 0, 1).members == (0, 1)
        assert neighborhood(line3, 1, 1).members == (0, 1, 2)
        assert line3.neighbors(2) == (1, 2)

    def test_radius_beyond_diameter(self, line3):
        nb = neighborhood(line3, 0, 10)
        assert nb.members == (0, 1, 2)
        assert nb.radius == 10

    def test_nested(self):
        g = graph_from_spec("line", 6)
        for i in range(6):
            for r in range(5):
                assert set(neighborhood(g, i, r).members) <= set(neighborhood(g, i, r + 1).members)

    def test_contains_center(self):
        g = graph_from_spec("star", 5)
        for i in range(5):
            nb = neighborhood(g, i, 0)
            assert i in nb
            assert nb.position(i) == 0

    def test_complement(self, line3):
        assert neighborhood(line3, 0, 1).complement(3) == (2,)

    def test_negative_radius_rejected(self, line3):
        with pytest.raises(ModelError):
            neighborhood(line3, 0, -1)

    def test_agent_out_of_range(self, line3):
        with pytest.raises(ModelError):
            neighborhood(line3, 3, 1)


class TestGraphMetrics:
    """Tests for f_kappa and diameter."""

    def test_f_kappa_line(self):
        g = graph_from_spec("line", 8)
        assert f_kappa(g, 0) == 1
        assert f_kappa(g, 1) == 3
        assert f_kappa(g, 2) == 5
        assert f_kappa(g, 7) == 8

    def test_f_kappa_star(self):
        g = graph_from_spec("star", 6)
        assert f_kappa(g, 1) == 6

    def test_diameters(self):
        assert diameter(graph_from_spec("line", 8)) == 7
        assert diameter(graph_from_spec("cycle", 8)) == 4
        assert diameter(graph_from_spec("star", 8)) == 2


class TestGraphFromSpec:
    """Tests for config-driven graph construction."""

    def test_kind_parsing(self):
        assert GraphKind.from_string(" Line ") is GraphKind.LINE

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="Invalid graph kind"):
            graph_from_spec("grid", 4)

    def test_edges_kind_requires_edges(self):
        with pytest.raises(ConfigurationError):
            graph_from_spec("edges", 3)

    def test_edges_kind(self):
        g = graph_from_spec("edges", 3, [(0, 2), (2, 1)])
        assert g.dist[0, 1] == 2

    def test_describe(self, line3):
        assert line3.describe() == {"n": 3, "edges": [[0, 1], [1, 2]]}
