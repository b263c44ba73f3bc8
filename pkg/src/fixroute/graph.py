"""AS-level topology: nodes, business relationships, destination and attackers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .errors import PreconditionError, StructuralError


class Relationship(enum.Enum):
    CUSTOMER_TO_PROVIDER = "p2c"
    PEER = "peer"
    UNLABELED = "plain"


class Role(enum.Enum):
    """What a neighbor is to the node looking at it."""

    CUSTOMER = "customer"
    PROVIDER = "provider"
    PEER = "peer"
    UNLABELED = "unlabeled"
    DESTINATION = "destination"


class Mode(enum.Enum):
    SHORTEST_PATH = "shortest-path"
    COMMERCIAL = "commercial"


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    kind: Relationship
    # For CUSTOMER_TO_PROVIDER edges, u is the customer and v the provider.

    @property
    def key(self) -> frozenset:
        return frozenset((self.u, self.v))


@dataclass(frozen=True)
class Violation:
    kind: str
    nodes: tuple
    message: str


@dataclass(frozen=True)
class ValidationReport:
    mode: Mode
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


class AsGraph:
    """Immutable undirected AS graph.

    ``edges`` items are ``(u, v, kind)`` where kind is a :class:`Relationship`
    or its file spelling (``"p2c"``, ``"peer"``, ``"plain"``).  A ``p2c`` edge
    makes ``u`` a customer of ``v``.
    """

    def __init__(self, nodes: Iterable[int], edges: Iterable, destination: int,
                 attackers: Iterable[int] = ()):
        self.nodes = frozenset(int(n) for n in nodes)
        self.destination = int(destination)
        self.attackers = frozenset(int(a) for a in attackers)
        if self.destination not in self.nodes:
            raise StructuralError(f"destination {self.destination} is not a node")
        for a in self.attackers:
            if a not in self.nodes:
                raise StructuralError(f"attacker {a} is not a node")

        self._edges: dict[frozenset, Edge] = {}
        self._adj: dict[int, dict[int, Role]] = {n: {} for n in self.nodes}
        for item in edges:
            e = item if isinstance(item, Edge) else Edge(int(item[0]), int(item[1]), Relationship(item[2]))
            for end in (e.u, e.v):
                if end not in self.nodes:
                    raise StructuralError(f"edge {e.u}-{e.v} references unknown node {end}")
            if e.u == e.v:
                raise StructuralError(f"self-loop on node {e.u}")
            if e.key in self._edges:
                raise StructuralError(f"duplicate edge {e.u}-{e.v}")
            self._edges[e.key] = e
            if e.kind is Relationship.CUSTOMER_TO_PROVIDER:
                self._adj[e.u][e.v] = Role.PROVIDER
                self._adj[e.v][e.u] = Role.CUSTOMER
            elif e.kind is Relationship.PEER:
                self._adj[e.u][e.v] = Role.PEER
                self._adj[e.v][e.u] = Role.PEER
            else:
                self._adj[e.u][e.v] = Role.UNLABELED
                self._adj[e.v][e.u] = Role.UNLABELED

    # -- queries -----------------------------------------------------------

    @property
    def edges(self) -> tuple:
        return tuple(sorted(self._edges.values(), key=lambda e: (min(e.u, e.v), max(e.u, e.v))))

    @property
    def sources(self) -> frozenset:
        return self.nodes - {self.destination}

    @property
    def honest(self) -> frozenset:
        """Source nodes that run the protocol (not attackers, not d)."""
        return self.nodes - self.attackers - {self.destination}

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def edge(self, u: int, v: int) -> Edge:
        try:
            return self._edges[frozenset((u, v))]
        except KeyError:
            raise KeyError(f"no edge {u}-{v}") from None

    def adjacent(self, node: int) -> tuple:
        """Sorted neighbor ids."""
        try:
            return tuple(sorted(self._adj[node]))
        except KeyError:
            raise KeyError(f"unknown node {node}") from None

    def role(self, node: int, neighbor: int) -> Role:
        """Edge-label role of ``neighbor`` as seen from ``node``."""
        try:
            return self._adj[node][neighbor]
        except KeyError:
            raise KeyError(f"{neighbor} is not a neighbor of {node}") from None

    def customers(self, node: int) -> tuple:
        return tuple(sorted(v for v, r in self._adj[node].items() if r is Role.CUSTOMER))

    def providers(self, node: int) -> tuple:
        return tuple(sorted(v for v, r in self._adj[node].items() if r is Role.PROVIDER))

    def peers(self, node: int) -> tuple:
        return tuple(sorted(v for v, r in self._adj[node].items() if r is Role.PEER))

    def with_attackers(self, attackers: Iterable[int]) -> "AsGraph":
        return AsGraph(self.nodes, self._edges.values(), self.destination, attackers)

    def with_edges(self, extra: Iterable) -> "AsGraph":
        return AsGraph(self.nodes, list(self._edges.values()) + list(extra), self.destination, self.attackers)

    def __repr__(self):
        return (f"AsGraph(nodes={len(self.nodes)}, edges={len(self._edges)}, "
                f"destination={self.destination}, attackers={sorted(self.attackers)})")

    def __eq__(self, other):
        if not isinstance(other, AsGraph):
            return NotImplemented
        return (self.nodes == other.nodes and self._edges == other._edges
                and self.destination == other.destination and self.attackers == other.attackers)

    def __hash__(self):
        return hash((self.nodes, frozenset(self._edges.values()), self.destination, self.attackers))


def neighbors(graph: AsGraph, node: int) -> frozenset:
    """Set of ``(neighbor, Role)`` pairs seen from ``node``.

    An unlabeled edge to the destination is reported as ``Role.DESTINATION``;
    a labeled one keeps its business role.
    """
    if node not in graph.nodes:
        raise KeyError(f"unknown node {node}")
    out = set()
    for v in graph.adjacent(node):
        r = graph.role(node, v)
        if v == graph.destination and r is Role.UNLABELED:
            r = Role.DESTINATION
        out.add((v, r))
    return frozenset(out)


def _provider_dag(graph: AsGraph) -> dict:
    succ = {n: [] for n in sorted(graph.nodes)}
    for e in graph.edges:
        if e.kind is Relationship.CUSTOMER_TO_PROVIDER:
            succ[e.u].append(e.v)
    for n in succ:
        succ[n].sort()
    return succ


def find_customer_provider_cycle(graph: AsGraph):
    """Return one customer-provider cycle as a node list, or None."""
    succ = _provider_dag(graph)
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(succ, WHITE)
    for root in succ:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = BLACK
            elif color[nxt] == GREY:
                return path[path.index(nxt):]
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(succ[nxt])))
                path.append(nxt)
    return None


def validate(graph: AsGraph, mode: Mode) -> ValidationReport:
    mode = Mode(mode)
    found = []
    if graph.destination in graph.attackers:
        found.append(Violation("destination-attacker", (graph.destination,),
                               "the destination cannot be an attacker"))
    if mode is Mode.COMMERCIAL:
        for e in graph.edges:
            if e.kind is Relationship.UNLABELED:
                found.append(Violation("unlabeled-edge", (e.u, e.v),
                                       f"edge {e.u}-{e.v} has no business relationship"))
        cycle = find_customer_provider_cycle(graph)
        if cycle is not None:
            found.append(Violation("customer-provider-cycle", tuple(cycle),
                                   "customer-provider cycle " + " -> ".join(map(str, cycle + [cycle[0]]))))
    return ValidationReport(mode, tuple(found))


def hierarchy_depth(graph: AsGraph) -> int:
    """Edge count of the longest customer-to-provider chain."""
    cycle = find_customer_provider_cycle(graph)
    if cycle is not None:
        raise PreconditionError(f"customer-provider cycle {cycle}; depth undefined")
    succ = _provider_dag(graph)
    depth: dict[int, int] = {}

    def longest(n):
        # iterative post-order to stay clear of recursion limits
        stack = [(n, False)]
        while stack:
            node, done = stack.pop()
            if node in depth:
                continue
            if done:
                depth[node] = max((depth[p] + 1 for p in succ[node]), default=0)
            else:
                stack.append((node, True))
                stack.extend((p, False) for p in succ[node] if p not in depth)
        return depth[n]

    return max((longest(n) for n in succ), default=0)
