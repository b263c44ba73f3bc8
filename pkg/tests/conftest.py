import pytest

from fixroute.graph import AsGraph
from fixroute.policy import ExportAll, PolicyProfile, ShortestPathRanking


def sp_export_all(graph, seed=0):
    prof = PolicyProfile("shortest-path")
    for n in graph.honest:
        prof.rankings[n] = ShortestPathRanking(n, seed)
        prof.exports[n] = ExportAll(n)
    return prof


@pytest.fixture
def chain():
    """d=0 - 1 - 2."""
    return AsGraph([0, 1, 2], [(0, 1, "plain"), (1, 2, "plain")], 0)


@pytest.fixture
def gr_tree():
    """d=0 with customers 1 and 2; 3 is a customer of 1."""
    return AsGraph([0, 1, 2, 3], [(1, 0, "p2c"), (2, 0, "p2c"), (3, 1, "p2c")], 0)
