import pytest
from hypothesis import given, settings, strategies as st

from fixroute.errors import PreconditionError, StructuralError
from fixroute.graph import (AsGraph, Mode, Relationship, Role, find_customer_provider_cycle,
                            hierarchy_depth, neighbors, validate)
from fixroute.harness.generators import random_commercial_instance


def kahn_has_cycle(graph):
    """Independent cycle check over customer->provider edges."""
    succ = {n: set() for n in graph.nodes}
    indeg = dict.fromkeys(graph.nodes, 0)
    for e in graph.edges:
        if e.kind is Relationship.CUSTOMER_TO_PROVIDER:
            succ[e.u].add(e.v)
            indeg[e.v] += 1
    ready = [n for n, k in indeg.items() if k == 0]
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return seen != len(graph.nodes)


class TestConstruction:
    def test_unknown_endpoint(self):
        with pytest.raises(StructuralError):
            AsGraph([0, 1], [(1, 2, "plain")], 0)

    def test_self_loop(self):
        with pytest.raises(StructuralError):
            AsGraph([0, 1], [(1, 1, "plain")], 0)

    def test_two_cycle_needs_a_duplicate_edge(self):
        # a customer of b and b customer of a would be two edges on one pair
        with pytest.raises(StructuralError):
            AsGraph([0, 1, 2], [(0, 1, "p2c"), (1, 0, "p2c")], 2)

    def test_destination_must_exist(self):
        with pytest.raises(StructuralError):
            AsGraph([0, 1], [], 5)

    def test_sources_and_honest(self):
        g = AsGraph([0, 1, 2, 3], [(1, 0, "plain"), (2, 1, "plain"), (3, 2, "plain")], 0, [2])
        assert g.sources == {1, 2, 3}
        assert g.honest == {1, 3}
        assert g.with_attackers([]).honest == {1, 2, 3}


class TestValidate:
    def test_three_cycle_reported(self):
        g = AsGraph([0, 1, 2, 3], [(1, 2, "p2c"), (2, 3, "p2c"), (3, 1, "p2c"), (1, 0, "p2c")], 0)
        rep = validate(g, Mode.COMMERCIAL)
        kinds = [v.kind for v in rep.violations]
        assert kinds == ["customer-provider-cycle"]
        assert set(rep.violations[0].nodes) == {1, 2, 3}
        assert not rep.ok

    def test_star_under_d(self):
        g = AsGraph([0, 1, 2, 3], [(c, 0, "p2c") for c in (1, 2, 3)], 0)
        assert validate(g, Mode.COMMERCIAL).violations == ()

    def test_generated_fifty_node_hierarchy(self):
        for seed in range(5):
            sc = random_commercial_instance(5, 20, seed=seed, max_sources=None)
            g = sc.graph
            assert len(g.nodes) > 20
            assert not kahn_has_cycle(g)
            assert validate(g, Mode.COMMERCIAL).ok

    def test_unlabeled_edges_rejected_in_commercial_only(self):
        g = AsGraph([0, 1], [(0, 1, "plain")], 0)
        assert validate(g, Mode.SHORTEST_PATH).ok
        assert [v.kind for v in validate(g, "commercial").violations] == ["unlabeled-edge"]

    def test_destination_attacker(self):
        g = AsGraph([0, 1], [(0, 1, "plain")], 0, [0])
        assert [v.kind for v in validate(g, Mode.SHORTEST_PATH).violations] == ["destination-attacker"]

    def test_idempotent(self):
        g = AsGraph([0, 1, 2, 3], [(1, 2, "p2c"), (2, 3, "p2c"), (3, 1, "p2c"), (1, 0, "plain")], 0)
        assert validate(g, Mode.COMMERCIAL) == validate(g, Mode.COMMERCIAL)


class TestDepth:
    def test_all_peers(self):
        g = AsGraph([0, 1, 2, 3], [(1, 2, "peer"), (2, 3, "peer"), (1, 0, "peer")], 0)
        assert hierarchy_depth(g) == 0

    def test_chain(self):
        g = AsGraph([0, 1, 2, 3], [(1, 2, "p2c"), (2, 3, "p2c"), (3, 0, "peer")], 0)
        assert hierarchy_depth(g) == 2

    def test_five_levels(self):
        for seed in range(10):
            sc = random_commercial_instance(5, 3, seed=seed, dest_attach="peer")
            assert hierarchy_depth(sc.graph) == 4

    def test_cycle_has_no_depth(self):
        g = AsGraph([0, 1, 2, 3], [(1, 2, "p2c"), (2, 3, "p2c"), (3, 1, "p2c")], 0)
        with pytest.raises(PreconditionError):
            hierarchy_depth(g)


class TestNeighbors:
    def test_destination_role(self):
        g = AsGraph([0, 1, 2], [(1, 0, "plain"), (2, 0, "p2c")], 0)
        assert neighbors(g, 1) == {(0, Role.DESTINATION)}
        assert neighbors(g, 2) == {(0, Role.PROVIDER)}

    def test_peer_symmetry(self):
        g = AsGraph([0, 1, 2], [(1, 2, "peer")], 0)
        assert neighbors(g, 1) == {(2, Role.PEER)}
        assert neighbors(g, 2) == {(1, Role.PEER)}

    def test_orientation(self):
        g = AsGraph([0, 1, 2], [(1, 2, "p2c")], 0)
        assert neighbors(g, 1) == {(2, Role.PROVIDER)}
        assert neighbors(g, 2) == {(1, Role.CUSTOMER)}

    def test_unknown_node(self):
        g = AsGraph([0, 1], [], 0)
        with pytest.raises(KeyError):
            neighbors(g, 7)


@st.composite
def labeled_graphs(draw, max_nodes=8):
    n = draw(st.integers(2, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    edges = []
    for u, v in chosen:
        # larger id is always the customer, so the hierarchy stays acyclic
        edges.append((u, v, "peer") if draw(st.booleans()) else (v, u, "p2c"))
    return AsGraph(range(n), edges, 0)


@settings(max_examples=80, deadline=None)
@given(labeled_graphs())
def test_depth_zero_iff_no_p2c(g):
    has_p2c = any(e.kind is Relationship.CUSTOMER_TO_PROVIDER for e in g.edges)
    assert (hierarchy_depth(g) == 0) == (not has_p2c)


@settings(max_examples=80, deadline=None)
@given(labeled_graphs())
def test_role_orientation_round_trip(g):
    for e in g.edges:
        if e.kind is Relationship.CUSTOMER_TO_PROVIDER:
            assert g.role(e.u, e.v) is Role.PROVIDER
            assert g.role(e.v, e.u) is Role.CUSTOMER


@settings(max_examples=80, deadline=None)
@given(labeled_graphs(), st.data())
def test_adding_p2c_never_decreases_depth(g, data):
    free = [(u, v) for u in sorted(g.nodes) for v in sorted(g.nodes) if u > v and not g.has_edge(u, v)]
    if not free:
        return
    u, v = data.draw(st.sampled_from(free))
    bigger = g.with_edges([(u, v, "p2c")])  # larger id is the customer: still acyclic
    assert find_customer_provider_cycle(bigger) is None
    assert hierarchy_depth(bigger) >= hierarchy_depth(g)
