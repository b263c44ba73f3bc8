"""Fixed-point oracles predicting where the dynamics settle.

Perceivable routes of a node are the simple routes that can reach it hop by
hop, each honest relay exporting to the next, starting either from d or from
an attacker's constant announcement.  The oracles repeatedly fix a node whose
best perceivable route leaves through an already-fixed node, then prune every
other node's perceivable set of routes that disagree with the newly fixed one.

The oracles materialise perceivable sets explicitly and are meant for
desk-scale graphs (a dozen or so nodes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .attack import SILENCE, complete_attacks, is_well_formed
from .errors import ConfigurationError, InvariantViolation, ModelViolation, PreconditionError
from .graph import AsGraph, hierarchy_depth
from .policy import PolicyProfile, RankingFunction, RouteClass, classify_route
from .route import EMPTY, length

MAX_ROUTES = 2_000_000


@dataclass
class PerceivableRouteSet:
    owner: int
    routes: set  # non-empty routes; the empty route is always implicitly perceivable

    def with_empty(self) -> set:
        return set(self.routes) | {EMPTY}

    def __len__(self):
        return len(self.routes)


@dataclass(frozen=True)
class BestPerceivable:
    owner: int
    routes: frozenset
    next_hop: int | None
    best: tuple


@dataclass
class FixedAssignment:
    routes: dict = field(default_factory=dict)
    order: dict = field(default_factory=dict)
    phase: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def report(self, destination=None):
        from .route import format_route
        rows = []
        for n in sorted(self.routes, key=lambda n: self.order[n]):
            rows.append({"node": n, "route": format_route(self.routes[n], destination),
                         "phase": self.phase[n], "index": self.order[n], "bound": self.bound[n]})
        return rows


def _relay_end(route, attackers) -> int:
    """Index one past the last honest relay (the attacker's index, or d's)."""
    for k in range(1, len(route)):
        if route[k] in attackers:
            return k
    return len(route) - 1


def _check_oracle_inputs(graph, attacks):
    attacks = complete_attacks(graph, attacks)
    for a, att in attacks.items():
        if not is_well_formed(att, graph):
            raise ConfigurationError(
                f"attacker {a}: oracles cover announcements that start at the attacker, end at d, "
                "are simple and name no other attacker")
    return attacks


def all_perceivable(graph: AsGraph, profile: PolicyProfile, attacks: dict | None = None,
                    limit: int = MAX_ROUTES) -> dict:
    """Perceivable routes of every honest node, by reverse propagation."""
    attacks = _check_oracle_inputs(graph, attacks)
    honest = graph.honest
    d = graph.destination
    out = {i: set() for i in honest}
    stack = []
    for p in graph.adjacent(d):
        if p in honest:
            stack.append((p, d))
    for a in sorted(graph.attackers):
        ann = attacks[a].announcements
        for p in graph.adjacent(a):
            c = ann.get(p, SILENCE)
            if p in honest and c is not SILENCE:
                r = (p,) + c
                if len(set(r)) == len(r):
                    stack.append(r)
    total = 0
    while stack:
        r = stack.pop()
        u = r[0]
        if r in out[u]:
            continue
        out[u].add(r)
        total += 1
        if total > limit:
            raise ConfigurationError(f"more than {limit} perceivable routes; graph too large for the oracle")
        permit = profile.exports[u].permit
        for w in graph.adjacent(u):
            if w in honest and w not in r and permit(w, r):
                stack.append((w,) + r)
    return out


def perceivable_routes(graph: AsGraph, profile: PolicyProfile, attacks: dict | None, owner: int
                       ) -> PerceivableRouteSet:
    if owner not in graph.honest:
        raise PreconditionError(f"node {owner} is not an honest source node")
    return PerceivableRouteSet(owner, all_perceivable(graph, profile, attacks)[owner])


def best_perceivable(prs: PerceivableRouteSet, ranking: RankingFunction) -> BestPerceivable:
    if not prs.routes:
        return BestPerceivable(prs.owner, frozenset({EMPTY}), None, EMPTY)
    top = max(ranking.key(r)[0] for r in prs.routes)
    maxima = frozenset(r for r in prs.routes if ranking.key(r)[0] == top)
    if ranking.key(EMPTY)[0] > top:
        return BestPerceivable(prs.owner, frozenset({EMPTY}), None, EMPTY)
    hops = {r[1] for r in maxima}
    if len(hops) != 1:
        raise InvariantViolation(f"node {prs.owner}: best perceivable routes leave through {sorted(hops)}")
    best = max(maxima, key=ranking.key)
    return BestPerceivable(prs.owner, maxima, next(iter(hops)), best)


class OracleState:
    """Mutable working state shared by FSR and FR."""

    def __init__(self, graph: AsGraph, profile: PolicyProfile, attacks=None, seed: int = 0):
        self.graph = graph
        self.profile = profile
        self.attacks = _check_oracle_inputs(graph, attacks)
        self.seed = seed
        self.pr = all_perceivable(graph, profile, self.attacks)
        self.fixed_nodes = set(graph.attackers) | {graph.destination}
        self.assignment = FixedAssignment(meta={"seed": seed})
        self._best: dict = {}
        self._index: dict = {}
        att = graph.attackers
        for i, routes in self.pr.items():
            for r in routes:
                for m in r[1:_relay_end(r, att)]:
                    self._index.setdefault(m, set()).add(r)
        order = sorted(graph.honest)
        random.Random(seed).shuffle(order)
        self.order_rank = {n: k for k, n in enumerate(order)}
        self.selection_order = order

    # -- views ---------------------------------------------------------

    def unfixed(self):
        return [n for n in self.selection_order if n not in self.fixed_nodes]

    def best(self, i) -> tuple:
        b = self._best.get(i)
        if b is None:
            rk = self.profile.rankings[i]
            b = rk.best(self.pr[i])
            self._best[i] = b
        return b

    def nxt(self, i):
        b = self.best(i)
        return b[1] if b else None

    def best_class(self, i):
        b = self.best(i)
        if not b:
            return None
        return classify_route(self.graph, b, lenient=True)

    def route_class(self, r):
        return classify_route(self.graph, r, lenient=True)

    # -- mutation ----------------------------------------------------------

    def fix(self, i, route, phase, bound):
        if i in self.fixed_nodes:
            raise InvariantViolation(f"node {i} fixed twice")
        if route and route[1] not in self.fixed_nodes:
            raise InvariantViolation(f"node {i} fixed to {route} before its next hop")
        self.fixed_nodes.add(i)
        a = self.assignment
        a.routes[i] = route
        a.order[i] = len(a.order)
        a.phase[i] = phase
        a.bound[i] = bound

    def _remove(self, owner, r):
        self.pr[owner].discard(r)
        self._best.pop(owner, None)

    def prune(self, m, fixed_route, rule):
        """Drop routes relaying through ``m`` that disagree with its fixed route.

        ``rule`` is ``"fsr"`` (also drop routes ``m`` would not export),
        ``"fcr"``, or ``"fpee"``/``"fprv"`` (also drop every peer or customer
        route through ``m``).
        """
        permit = self.profile.exports[m].permit
        for r in list(self._index.get(m, ())):
            owner = r[0]
            if r not in self.pr[owner]:
                continue
            pos = r.index(m)
            suffix = r[pos:]
            drop = suffix != fixed_route
            if rule == "fsr" and not drop:
                drop = not permit(r[pos - 1], suffix)
            elif rule in ("fpee", "fprv") and not drop:
                drop = self.route_class(r) in (RouteClass.PEER, RouteClass.CUSTOMER)
            if drop:
                self._remove(owner, r)

    def absorb_empty(self, phase, bound):
        for i in self.unfixed():
            if not self.pr[i]:
                self.fix(i, EMPTY, phase, bound)

    # -- witness walks -------------------------------------------------------

    def _walk(self, start, wanted: RouteClass):
        if start in self.fixed_nodes:
            raise PreconditionError(f"walk starts at fixed node {start}")
        cur = start
        route = self.best(cur)
        if not route or self.route_class(route) is not wanted:
            raise PreconditionError(f"node {start} has no {wanted.name.lower()} route in its best set")
        limit = len(self.graph.nodes)
        for _ in range(limit + 1):
            jump = None
            for pos in range(1, len(route)):
                v = route[pos]
                if v in self.fixed_nodes:
                    return route[pos - 1]
                bv = self.best(v)
                if bv != route[pos:]:
                    jump = v
                    break
            if jump is None:
                raise ModelViolation(f"walk from {start} ran off route {route}")
            cur, route = jump, self.best(jump)
            if not route or self.route_class(route) is not wanted:
                raise ModelViolation(
                    f"walk from {start} reached {cur} whose best route {route} is not a "
                    f"{wanted.name.lower()} route")
        raise ModelViolation(f"walk from {start} exceeded {limit} steps; customer-provider cycle?")

    def witness_customer(self, start=None) -> int:
        if start is None:
            cands = [i for i in self.unfixed() if self.best_class(i) is RouteClass.CUSTOMER]
            if not cands:
                raise PreconditionError("no unfixed node has a customer route among its best perceivable routes")
            start = cands[0]
        return self._walk(start, RouteClass.CUSTOMER)

    def witness_provider(self, start=None) -> int:
        if start is None:
            cands = [i for i in self.unfixed() if self.best_class(i) is RouteClass.PROVIDER]
            if not cands:
                raise PreconditionError("no unfixed node has a provider route among its best perceivable routes")
            start = cands[0]
        return self._walk(start, RouteClass.PROVIDER)


def existence_witness_customer(state: OracleState, start=None) -> int:
    """A node whose best route is a customer route leaving through a fixed node."""
    return state.witness_customer(start)


def existence_witness_provider(state: OracleState, start=None) -> int:
    return state.witness_provider(start)


def fsr(graph: AsGraph, profile: PolicyProfile, attacks=None, seed: int = 0, on_fix=None) -> FixedAssignment:
    """Fix shortest routes, shortest first."""
    st = OracleState(graph, profile, attacks, seed)
    n = len(graph.sources)
    st.assignment.meta.update(algorithm="FSR", n=n)
    st.absorb_empty("FSR", n)
    while True:
        live = [i for i in st.unfixed() if st.pr[i]]
        if not live:
            break
        cands = [i for i in live if st.nxt(i) in st.fixed_nodes]
        if not cands:
            raise ModelViolation(f"no fixable node among {live}")
        i = min(cands, key=lambda c: (length(st.best(c)), st.order_rank[c]))
        route = st.best(i)
        if on_fix is not None:
            on_fix("FSR", st, i)
        st.fix(i, route, "FSR", length(route))
        st.prune(i, route, "fsr")
        st.absorb_empty("FSR", n)
    return st.assignment


def fr(graph: AsGraph, profile: PolicyProfile, attacks=None, seed: int = 0, on_fix=None) -> FixedAssignment:
    """Fix customer routes, then peer routes, then provider routes."""
    st = OracleState(graph, profile, attacks, seed)
    x = hierarchy_depth(graph)
    bounds = {"FCR": x, "FPeeR": x + 1, "FPrvR": 2 * x + 1}
    st.assignment.meta.update(algorithm="FR", depth=x)
    st.absorb_empty("FCR", 2 * x + 1)

    def run_phase(phase, wanted, rule, walk):
        while True:
            if wanted is RouteClass.PEER:
                starts = [i for i in st.unfixed()
                          if st.best_class(i) is RouteClass.PEER and st.nxt(i) in st.fixed_nodes]
            else:
                starts = [i for i in st.unfixed() if st.best_class(i) is wanted]
            if not starts:
                return
            j = walk(starts[0]) if walk else starts[0]
            route = st.best(j)
            if on_fix is not None:
                on_fix(phase, st, j)
            st.fix(j, route, phase, bounds[phase])
            st.prune(j, route, rule)
            st.absorb_empty(phase, 2 * x + 1)

    run_phase("FCR", RouteClass.CUSTOMER, "fcr", st.witness_customer)
    run_phase("FPeeR", RouteClass.PEER, "fpee", None)
    run_phase("FPrvR", RouteClass.PROVIDER, "fprv", st.witness_provider)
    left = [i for i in st.unfixed()]
    if left:
        raise ModelViolation(f"nodes {left} left unfixed by FR: {[st.best(i) for i in left]}")
    return st.assignment


def brute_force_perceivable(graph: AsGraph, profile: PolicyProfile, attacks, owner: int) -> set:
    """Perceivable routes at ``owner`` by enumerating every simple node sequence
    from ``owner`` to d and testing the definition directly.  Exponential;
    test use only."""
    from itertools import permutations

    attacks = complete_attacks(graph, attacks)
    d = graph.destination
    others = [n for n in sorted(graph.nodes) if n not in (owner, d)]
    out = set()

    def exported(route, upto):
        # every honest edge (j, k) with k at index <= upto: R|k is in E^{k, j}
        for t in range(1, upto + 1):
            j, k = route[t - 1], route[t]
            if not graph.has_edge(j, k):
                return False
            if k == d:
                continue
            if not profile.exports[k].permit(j, route[t:]):
                return False
        return True

    for size in range(len(others) + 1):
        for mid in permutations(others, size):
            r = (owner,) + mid + (d,)
            att = [k for k, n in enumerate(r) if n in graph.attackers]
            if not att:
                if exported(r, len(r) - 1):
                    out.add(r)
            elif len(att) == 1:
                a = att[0]
                A = r[a]
                p = r[a - 1]
                if not graph.has_edge(p, A):
                    continue
                if attacks[A].announcements.get(p, SILENCE) != r[a:]:
                    continue
                if exported(r, a - 1):
                    out.add(r)
    return out
