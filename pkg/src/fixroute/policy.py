"""Route rankings and export policies.

Rankings are comparators over arbitrary node sequences, not over routes that
exist in the graph: attackers can hand a node any sequence at all.  Every
ranking exposes a *primary* key (a total preorder whose ties only ever join
routes with the same next hop) and a *tie-break* key that makes the order
strict.  Selection uses both; :func:`rank_compare` reports the preorder.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

from .errors import ConfigurationError, DomainError, MalformedRouteError
from .graph import AsGraph, Mode, Relationship, Role
from .route import EMPTY, length

EMPTY_PRIMARY = (0,)


def mix(*parts) -> int:
    """Stable 64-bit hash of a tuple of ints/strings/tuples."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


_UNIT = float(1 << 64)


def unit(*parts) -> float:
    return mix(*parts) / _UNIT


class RouteClass(enum.IntEnum):
    PROVIDER = 0
    PEER = 1
    CUSTOMER = 2
    SELF_DESTINATION = 3


class Comparison(enum.Enum):
    A_BETTER = "a_better"
    B_BETTER = "b_better"
    TIED = "tied"


def classify_route(graph: AsGraph, route: tuple, lenient: bool = False) -> RouteClass:
    """Business class of ``route`` from the role of its second hop.

    A second hop that is not adjacent to the owner raises
    :class:`MalformedRouteError`; with ``lenient=True`` such a route is
    classed as a provider route, the least preferred and least exported class.
    Unlabeled edges count as customer edges.
    """
    if not route:
        raise DomainError("the empty route has no class")
    if len(route) == 1:
        if route[0] != graph.destination:
            raise MalformedRouteError(f"one-node route {route} is not the destination")
        return RouteClass.SELF_DESTINATION
    i, j = route[0], route[1]
    if not graph.has_edge(i, j):
        if lenient and i in graph.nodes:
            return RouteClass.PROVIDER
        raise MalformedRouteError(f"second hop {j} of {route} is not adjacent to {i}")
    r = graph.role(i, j)
    if r is Role.PEER:
        return RouteClass.PEER
    if r is Role.PROVIDER:
        return RouteClass.PROVIDER
    return RouteClass.CUSTOMER


# -- rankings ----------------------------------------------------------------


class RankingFunction:
    """Base ranking; subclasses implement :meth:`primary` and :meth:`tiebreak`."""

    def __init__(self, owner: int):
        self.owner = owner
        self._cache: dict = {}

    def primary(self, route: tuple) -> tuple:
        raise NotImplementedError

    def tiebreak(self, route: tuple):
        raise NotImplementedError

    def check_owned(self, route):
        if route and route[0] != self.owner:
            raise DomainError(f"route {route} does not start at node {self.owner}")

    def key(self, route: tuple) -> tuple:
        """Strict sort key; larger is better."""
        k = self._cache.get(route)
        if k is None:
            if not route:
                k = (EMPTY_PRIMARY, 0)
            else:
                self.check_owned(route)
                k = (self.primary(route), self.tiebreak(route))
            self._cache[route] = k
        return k

    def best(self, routes):
        """Highest-ranked route of an iterable (EMPTY if it has none)."""
        top, top_key = EMPTY, self.key(EMPTY)
        for r in routes:
            k = self.key(r)
            if k > top_key:
                top, top_key = r, k
        return top


class ShortestPathRanking(RankingFunction):
    """Shorter is better; equal lengths ordered by a seeded next-hop order."""

    def __init__(self, owner: int, seed: int = 0):
        super().__init__(owner)
        self.seed = seed

    def primary(self, route):
        nh = route[1] if len(route) > 1 else -1
        return (1, -length(route), mix(self.seed, "nh", self.owner, nh), nh)

    def tiebreak(self, route):
        return mix(self.seed, "tb", route)


class CommercialRanking(RankingFunction):
    """Customer routes above peer and provider routes.

    ``intra_class_order`` is ``"prefer_shorter"`` or ``"seeded_arbitrary"``.
    ``peer_provider`` is ``"peer_first"`` (peer above provider),
    ``"provider_first"``, or ``"merged"`` (one class, seeded next-hop order).
    """

    def __init__(self, owner: int, graph: AsGraph, seed: int = 0,
                 intra_class_order: str = "prefer_shorter", peer_provider: str = "peer_first"):
        super().__init__(owner)
        if intra_class_order not in ("prefer_shorter", "seeded_arbitrary"):
            raise ConfigurationError(f"unknown intra-class order {intra_class_order!r}")
        if peer_provider not in ("peer_first", "provider_first", "merged"):
            raise ConfigurationError(f"unknown peer/provider order {peer_provider!r}")
        self.graph = graph
        self.seed = seed
        self.intra_class_order = intra_class_order
        self.peer_provider = peer_provider

    def class_rank(self, cls: RouteClass) -> int:
        if cls is RouteClass.CUSTOMER or cls is RouteClass.SELF_DESTINATION:
            return 2
        if self.peer_provider == "merged":
            return 0
        if self.peer_provider == "peer_first":
            return 1 if cls is RouteClass.PEER else 0
        return 0 if cls is RouteClass.PEER else 1

    def primary(self, route):
        cls = classify_route(self.graph, route, lenient=True)
        nh = route[1]
        intra = -length(route) if self.intra_class_order == "prefer_shorter" else 0
        return (1, self.class_rank(cls), intra, mix(self.seed, "nh", self.owner, nh), nh)

    def tiebreak(self, route):
        return mix(self.seed, "tb", route)


class CustomRanking(RankingFunction):
    """Explicit preference list; unlisted routes rank below the empty route
    (or, with ``unlisted_acceptable=True``, between the list and the empty route)."""

    def __init__(self, owner: int, preferred, unlisted_acceptable: bool = False):
        super().__init__(owner)
        self.preferred = tuple(tuple(r) for r in preferred)
        for r in self.preferred:
            self.check_owned(r)
            if not r:
                raise ConfigurationError("the empty route cannot appear in a preference list")
        if len(set(self.preferred)) != len(self.preferred):
            raise ConfigurationError(f"duplicate route in preference list of node {owner}")
        self._pos = {r: k for k, r in enumerate(self.preferred)}
        self.unlisted_acceptable = unlisted_acceptable

    def primary(self, route):
        pos = self._pos.get(route)
        if pos is not None:
            return (2, -pos)
        tier = 1 if self.unlisted_acceptable else -1
        nh = route[1] if len(route) > 1 else -1
        return (tier, -length(route), nh)

    def tiebreak(self, route):
        return route


def rank_compare(ranking: RankingFunction, a: tuple, b: tuple) -> Comparison:
    ranking.check_owned(a)
    ranking.check_owned(b)
    ka = ranking.key(a)[0]
    kb = ranking.key(b)[0]
    if ka > kb:
        return Comparison.A_BETTER
    if kb > ka:
        return Comparison.B_BETTER
    return Comparison.TIED


# -- export policies -----------------------------------------------------------


class ExportPolicy:
    def __init__(self, owner: int):
        self.owner = owner

    def permit(self, neighbor: int, route: tuple) -> bool:
        raise NotImplementedError


class ExportAll(ExportPolicy):
    def permit(self, neighbor, route):
        return True


class SeededExport(ExportPolicy):
    """Pseudo-random but fixed subset of routes per neighbor."""

    def __init__(self, owner: int, seed: int, keep: float = 0.75):
        super().__init__(owner)
        self.seed = seed
        self.keep = keep
        self._cache: dict = {}

    def permit(self, neighbor, route):
        if not route:
            return True
        k = (neighbor, route)
        v = self._cache.get(k)
        if v is None:
            v = self._cache[k] = unit(self.seed, "exp", self.owner, neighbor, route) < self.keep
        return v


class CommercialExport(ExportPolicy):
    """Everything to customers; only customer routes to peers and providers."""

    def __init__(self, owner: int, graph: AsGraph):
        super().__init__(owner)
        self.graph = graph

    def permit(self, neighbor, route):
        if not route:
            return True
        r = self.graph.role(self.owner, neighbor)
        if r is Role.CUSTOMER or r is Role.UNLABELED:
            return True
        return classify_route(self.graph, route, lenient=True) >= RouteClass.CUSTOMER


class RuleExport(ExportPolicy):
    """Ordered allow/deny rules over a base policy; the last matching rule wins.

    Each rule is ``(neighbor, allow, route_or_None)``; ``None`` matches any
    non-empty route.
    """

    def __init__(self, owner: int, rules, base: ExportPolicy | None = None):
        super().__init__(owner)
        self.rules = list(rules)
        self.base = base or ExportAll(owner)

    def permit(self, neighbor, route):
        if not route:
            return True
        verdict = None
        for nb, allow, r in self.rules:
            if nb == neighbor and (r is None or r == route):
                verdict = allow
        return self.base.permit(neighbor, route) if verdict is None else verdict


# -- profiles ---------------------------------------------------------------------


@dataclass
class PolicyProfile:
    mode: str  # "shortest-path", "commercial" or "custom"
    rankings: dict = field(default_factory=dict)
    exports: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def key(self, node: int, route: tuple):
        return self.rankings[node].key(route)

    def permit(self, node: int, neighbor: int, route: tuple) -> bool:
        return self.exports[node].permit(neighbor, route)

    def check_complete(self, graph: AsGraph):
        for n in graph.honest:
            if n not in self.rankings or n not in self.exports:
                raise ConfigurationError(f"node {n} has no ranking or export policy")


def make_shortest_path_profile(graph: AsGraph, tie_seed: int = 0, export: str = "seeded",
                               keep: float = 0.75) -> PolicyProfile:
    """Shortest-path rankings for every honest node.

    ``export="seeded"`` draws a fixed pseudo-random export subset per
    (node, neighbor); ``export="all"`` exports everything.
    """
    if export not in ("seeded", "all"):
        raise ConfigurationError(f"unknown export variant {export!r}")
    prof = PolicyProfile(Mode.SHORTEST_PATH.value, meta={"tie_seed": tie_seed, "export": export, "keep": keep})
    for n in sorted(graph.honest):
        prof.rankings[n] = ShortestPathRanking(n, tie_seed)
        prof.exports[n] = SeededExport(n, tie_seed, keep) if export == "seeded" else ExportAll(n)
    return prof


def make_commercial_profile(graph: AsGraph, tie_seed: int = 0, intra_class_order: str = "prefer_shorter",
                            peer_provider: str = "peer_first") -> PolicyProfile:
    for e in graph.edges:
        if e.kind is Relationship.UNLABELED:
            raise ConfigurationError(f"edge {e.u}-{e.v} is unlabeled; commercial policies need relationships")
    prof = PolicyProfile(Mode.COMMERCIAL.value, meta={"tie_seed": tie_seed, "intra_class_order": intra_class_order,
                                                      "peer_provider": peer_provider})
    for n in sorted(graph.honest):
        prof.rankings[n] = CommercialRanking(n, graph, tie_seed, intra_class_order, peer_provider)
        prof.exports[n] = CommercialExport(n, graph)
    return prof
