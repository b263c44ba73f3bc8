import itertools
import random

import pytest

from fixroute.attack import SILENCE, FixedRouteAttack, prefix_hijack
from fixroute.errors import ConfigurationError, InvariantViolation, PreconditionError
from fixroute.graph import AsGraph, hierarchy_depth
from fixroute.harness.generators import random_commercial_instance, random_shortest_path_instance
from fixroute.harness.scenarios import gadget_graph
from fixroute.oracle import (OracleState, PerceivableRouteSet, all_perceivable, best_perceivable,
                             brute_force_perceivable, existence_witness_customer, existence_witness_provider, fr,
                             fsr, perceivable_routes)
from fixroute.policy import (CustomRanking, ExportAll, RouteClass, RuleExport, ShortestPathRanking,
                             classify_route, make_commercial_profile, make_shortest_path_profile)
from fixroute.route import EMPTY, is_simple, length

from conftest import sp_export_all


def stable_states(graph, profile, attacks, cap=200_000):
    """Every selection vector that is stable under the dynamics, by exhaustive search.

    A stable vector picks, at each honest node, the best route it can form
    from what its neighbours announce given their own picks.  Any stable
    route is perceivable, so perceivable sets bound the search.
    """
    honest = sorted(graph.honest)
    d = graph.destination
    pr = all_perceivable(graph, profile, attacks)
    domains = [sorted(pr[i] | {EMPTY}) for i in honest]
    size = 1
    for dom in domains:
        size *= len(dom)
    if size > cap:
        return None
    found = []
    for combo in itertools.product(*domains):
        sel = dict(zip(honest, combo))
        ok = True
        for i in honest:
            cands = []
            for j in graph.adjacent(i):
                if j == d:
                    c = (d,)
                elif j in graph.attackers:
                    c = attacks[j].announcements.get(i, SILENCE) if j in attacks else SILENCE
                    if c is SILENCE:
                        continue
                else:
                    c = sel[j] if (sel[j] and profile.exports[j].permit(i, sel[j])) else EMPTY
                if c:
                    r = (i,) + c
                    if is_simple(r):
                        cands.append(r)
            if profile.rankings[i].best(cands) != sel[i]:
                ok = False
                break
        if ok:
            found.append(sel)
    return found


class TestPerceivable:
    def test_chain(self, chain):
        prs = perceivable_routes(chain, sp_export_all(chain), None, 2)
        assert prs.routes == {(2, 1, 0)}
        assert prs.with_empty() == {(2, 1, 0), EMPTY}

    def test_attacker_route(self):
        g = AsGraph(range(4), [(1, 0, "plain"), (1, 2, "plain"), (2, 3, "plain")], 0, [2])
        att = {2: FixedRouteAttack(2, {1: (2, 0)})}
        assert (1, 2, 0) in perceivable_routes(g, sp_export_all(g), att, 1).routes
        # 3 is cut off: the attacker relays nothing
        assert perceivable_routes(g, sp_export_all(g), att, 3).routes == set()

    def test_export_deny_on_middle_hop(self):
        g = AsGraph(range(4), [(1, 0, "plain"), (2, 1, "plain"), (3, 2, "plain"), (3, 0, "plain")], 0)
        prof = sp_export_all(g)
        assert (3, 2, 1, 0) in perceivable_routes(g, prof, None, 3).routes
        prof.exports[2] = RuleExport(2, [(3, False, (2, 1, 0))], ExportAll(2))
        got = perceivable_routes(g, prof, None, 3).routes
        assert (3, 2, 1, 0) not in got
        assert got == brute_force_perceivable(g, prof, None, 3)

    def test_owner_must_be_honest(self):
        g = gadget_graph(attacked=True)
        with pytest.raises(PreconditionError):
            perceivable_routes(g, sp_export_all(g), {0: prefix_hijack(0, g)}, 0)

    def test_malformed_attacks_rejected(self):
        g = AsGraph(range(3), [(1, 0, "plain"), (1, 2, "plain")], 0, [2])
        for ann in ((1, 0), (2, 2, 0), (2, 1)):
            with pytest.raises(ConfigurationError):
                all_perceivable(g, sp_export_all(g), {2: FixedRouteAttack(2, {1: ann})})

    def test_route_limit(self):
        g = AsGraph(range(6), [(u, v, "plain") for u in range(6) for v in range(u + 1, 6)], 0)
        with pytest.raises(ConfigurationError):
            all_perceivable(g, sp_export_all(g), limit=10)


class TestBestPerceivable:
    def test_single(self):
        bp = best_perceivable(PerceivableRouteSet(1, {(1, 0)}), ShortestPathRanking(1))
        assert bp.best == (1, 0) and bp.next_hop == 0

    def test_distinct_next_hops_never_tie(self):
        for seed in range(20):
            bp = best_perceivable(PerceivableRouteSet(1, {(1, 2, 0), (1, 3, 0)}), ShortestPathRanking(1, seed))
            assert len(bp.routes) == 1

    def test_commercial_customer(self):
        g = AsGraph(range(5), [(2, 1, "p2c"), (3, 2, "p2c"), (1, 4, "peer"), (4, 0, "p2c"), (0, 3, "p2c")], 0)
        rk = make_commercial_profile(g).rankings[1]
        bp = best_perceivable(PerceivableRouteSet(1, {(1, 2, 3, 0), (1, 4, 0)}), rk)
        assert bp.best == (1, 2, 3, 0)

    def test_empty_set(self):
        bp = best_perceivable(PerceivableRouteSet(1, set()), ShortestPathRanking(1))
        assert bp.best == EMPTY and bp.next_hop is None

    def test_custom_ranking_can_prefer_empty(self):
        bp = best_perceivable(PerceivableRouteSet(1, {(1, 2, 0)}), CustomRanking(1, [(1, 0)]))
        assert bp.best == EMPTY

    def test_ties_across_next_hops_detected(self):
        class Flat(ShortestPathRanking):
            def primary(self, route):
                return (1,)
        with pytest.raises(InvariantViolation):
            best_perceivable(PerceivableRouteSet(1, {(1, 2, 0), (1, 3, 0)}), Flat(1))


class TestFSR:
    def test_chain(self, chain):
        asg = fsr(chain, sp_export_all(chain))
        assert asg.routes == {1: (1, 0), 2: (2, 1, 0)}
        assert asg.bound == {1: 1, 2: 2}

    def test_gadget_with_shortest_path_rankings(self):
        g = gadget_graph(attacked=True)
        asg = fsr(g, sp_export_all(g), {0: prefix_hijack(0, g)})
        assert {n: asg.routes[n] for n in (1, 2, 3)} == {1: (1, 6), 2: (2, 6), 3: (3, 6)}
        assert asg.routes[4] in ((4, 0, 6), (4, 5, 6))

    def test_unreachable_node_gets_empty(self):
        g = AsGraph(range(4), [(1, 0, "plain"), (2, 3, "plain")], 0, [3])
        asg = fsr(g, sp_export_all(g))  # 3 is silent
        assert asg.routes[2] == EMPTY and asg.bound[2] == 3

    @pytest.mark.parametrize("seed", range(15))
    def test_order_non_decreasing_and_seed_free(self, seed):
        sc = random_shortest_path_instance(8, seed % 3, seed=seed)
        runs = [fsr(sc.graph, sc.profile, sc.attacks, seed=s) for s in range(4)]
        for asg in runs[1:]:
            assert asg.routes == runs[0].routes
        a = runs[0]
        order = sorted((n for n in a.routes if a.routes[n]), key=a.order.get)
        lens = [length(a.routes[n]) for n in order]
        assert lens == sorted(lens)
        for n in order:
            nh = a.routes[n][1]
            if nh in a.order:
                assert a.order[nh] < a.order[n]

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_exhaustive_stable_state(self, seed):
        sc = random_shortest_path_instance(5, seed % 3, seed=seed)
        states = stable_states(sc.graph, sc.profile, sc.attacks)
        if states is None:
            pytest.skip("search space too large")
        asg = fsr(sc.graph, sc.profile, sc.attacks)
        assert states == [asg.routes]


class TestFR:
    def test_customer_tree(self):
        # d is a customer of 1 and 2; 1 is a customer of 3
        g = AsGraph(range(4), [(0, 1, "p2c"), (0, 2, "p2c"), (1, 3, "p2c")], 0)
        asg = fr(g, make_commercial_profile(g))
        assert asg.routes == {1: (1, 0), 2: (2, 0), 3: (3, 1, 0)}
        assert set(asg.phase.values()) == {"FCR"}

    def test_peer_stubs_do_not_transit(self):
        # d is a customer of P=1; stubs 2 and 3 are customers of 1 and peer with each other
        g = AsGraph(range(4), [(0, 1, "p2c"), (2, 1, "p2c"), (3, 1, "p2c"), (2, 3, "peer")], 0)
        prof = make_commercial_profile(g)
        asg = fr(g, prof)
        assert asg.routes == {1: (1, 0), 2: (2, 1, 0), 3: (3, 1, 0)}
        assert asg.phase[2] == asg.phase[3] == "FPrvR"
        assert stable_states(g, prof, {}) == [asg.routes]

    def test_hijack_in_customer_cone(self):
        # victim 1 has provider 3 (which reaches d) and customer 2, an attacker claiming d
        g = AsGraph(range(6), [(2, 1, "p2c"), (1, 3, "p2c"), (0, 3, "p2c"), (4, 1, "p2c"), (5, 4, "p2c")], 0, [2])
        prof = make_commercial_profile(g)
        att = {2: prefix_hijack(2, g)}
        asg = fr(g, prof, att)
        assert asg.routes[1] == (1, 2, 0)
        assert classify_route(g, asg.routes[1]) is RouteClass.CUSTOMER
        assert stable_states(g, prof, att) == [asg.routes]

    @pytest.mark.parametrize("seed", range(30))
    def test_phase_classes_and_seed_free(self, seed):
        sc = random_commercial_instance(3, 3, seed % 3, seed)
        g = sc.graph
        runs = [fr(g, sc.profile, sc.attacks, seed=s) for s in range(3)]
        for asg in runs[1:]:
            assert asg.routes == runs[0].routes
        want = {"FCR": RouteClass.CUSTOMER, "FPeeR": RouteClass.PEER, "FPrvR": RouteClass.PROVIDER}
        x = hierarchy_depth(g)
        for n, r in runs[0].routes.items():
            if r:
                assert classify_route(g, r) is want[runs[0].phase[n]]
                assert runs[0].bound[n] == {"FCR": x, "FPeeR": x + 1, "FPrvR": 2 * x + 1}[runs[0].phase[n]]
            else:
                assert runs[0].bound[n] == 2 * x + 1

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_exhaustive_stable_state(self, seed):
        sc = random_commercial_instance(2, 3, seed % 3, seed)
        states = stable_states(sc.graph, sc.profile, sc.attacks)
        if states is None:
            pytest.skip("search space too large")
        asg = fr(sc.graph, sc.profile, sc.attacks)
        assert states == [asg.routes]


class TestWitnesses:
    def test_single_provider_of_d(self):
        g = AsGraph(range(2), [(0, 1, "p2c")], 0)
        st = OracleState(g, make_commercial_profile(g))
        assert existence_witness_customer(st) == 1

    def test_customer_chain(self):
        # d is a customer of 1, 1 of 2, 2 of 3
        g = AsGraph(range(4), [(0, 1, "p2c"), (1, 2, "p2c"), (2, 3, "p2c")], 0)
        st = OracleState(g, make_commercial_profile(g))
        assert existence_witness_customer(st, start=3) == 1
        assert existence_witness_customer(st) == 1

    def test_stub_under_fixed_provider(self):
        # d is a customer of 1; stub 2 has sole provider 1
        g = AsGraph(range(3), [(0, 1, "p2c"), (2, 1, "p2c")], 0)
        st = OracleState(g, make_commercial_profile(g))
        st.fix(1, st.best(1), "FCR", 0)
        st.prune(1, st.best(1), "fcr")
        assert existence_witness_provider(st, start=2) == 2

    def test_no_provider_routes(self):
        g = AsGraph(range(3), [(0, 1, "p2c"), (1, 2, "p2c")], 0)
        st = OracleState(g, make_commercial_profile(g))
        with pytest.raises(PreconditionError):
            existence_witness_provider(st)

    def test_walk_rejects_fixed_start(self):
        g = AsGraph(range(2), [(0, 1, "p2c")], 0)
        st = OracleState(g, make_commercial_profile(g))
        st.fix(1, (1, 0), "FCR", 0)
        with pytest.raises(PreconditionError):
            existence_witness_customer(st, start=1)


def small_corpus():
    """50 graphs with at most 7 nodes: hand-built plus seeded random ones."""
    out = []
    g = gadget_graph(attacked=True)
    out.append((g, sp_export_all(g), {0: prefix_hijack(0, g)}))
    g = AsGraph(range(4), [(1, 0, "plain"), (2, 1, "plain"), (3, 2, "plain"), (3, 0, "plain")], 0)
    prof = sp_export_all(g)
    prof.exports[2] = RuleExport(2, [(3, False, (2, 1, 0))], ExportAll(2))
    out.append((g, prof, {}))
    g = AsGraph(range(4), [(0, 1, "p2c"), (2, 1, "p2c"), (3, 1, "p2c"), (2, 3, "peer")], 0)
    out.append((g, make_commercial_profile(g), {}))
    seed = 0
    while len(out) < 50:
        seed += 1
        if seed % 2:
            sc = random_shortest_path_instance(random.Random(seed).randint(3, 6), seed % 3, seed=seed)
        else:
            sc = random_commercial_instance(2, 3, seed % 3, seed)
        if len(sc.graph.nodes) <= 7:
            out.append((sc.graph, sc.profile, sc.attacks))
    return out


def test_perceivable_matches_brute_force_on_corpus():
    corpus = small_corpus()
    assert len(corpus) == 50
    for g, prof, att in corpus:
        allp = all_perceivable(g, prof, att)
        for i in sorted(g.honest):
            assert allp[i] == brute_force_perceivable(g, prof, att, i), (g, i)
