"""Hand-built scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..attack import prefix_hijack
from ..engine import Activate, Deliver, InitialConfig
from ..graph import AsGraph
from ..policy import CustomRanking, ExportAll, PolicyProfile, ShortestPathRanking


@dataclass
class Scenario:
    """Everything needed to run and judge one family of simulations.

    ``expect`` is one of ``("converges_within", bound)``, ``("oscillates",)``
    or ``("oracle_match",)``; several may be combined in ``expectations``.
    ``oracle`` names the fixed-point oracle that applies (``"fsr"``, ``"fr"``
    or None).  ``schedules`` holds explicit event lists; when empty, seeded
    fair schedules are used.
    """

    name: str
    graph: AsGraph
    profile: PolicyProfile
    attacks: dict = field(default_factory=dict)
    configs: list = field(default_factory=lambda: [InitialConfig.empty()])
    schedules: list = field(default_factory=list)
    expectations: list = field(default_factory=list)
    oracle: str | None = None
    bound: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.graph.sources)


# Nodes 1, 2 and 3 each rank the route through their clockwise neighbour and
# then 0 above the route through 0 alone, and that above the direct link to d.
# 0 has no link to d; its real path runs through 4 and 5.  Nodes 0, 4 and 5
# prefer shorter routes, which plays no part in the oscillation.  Every node
# exports everything.  The same instance ships as data/bad_gadget.*.
GADGET_DEST = 6
GADGET_EDGES = [(1, 6), (2, 6), (3, 6), (0, 1), (0, 2), (0, 3),
                (1, 3), (2, 1), (3, 2), (0, 4), (4, 5), (5, 6)]
GADGET_RANKINGS = {
    1: [(1, 3, 0, 6), (1, 0, 6), (1, 6)],
    2: [(2, 1, 0, 6), (2, 0, 6), (2, 6)],
    3: [(3, 2, 0, 6), (3, 0, 6), (3, 6)],
}


def _gadget_profile(graph: AsGraph, tie_seed: int = 0) -> PolicyProfile:
    prof = PolicyProfile("custom", meta={"scenario": "bad-gadget"})
    for n in sorted(graph.honest):
        if n in GADGET_RANKINGS:
            prof.rankings[n] = CustomRanking(n, GADGET_RANKINGS[n])
        else:
            prof.rankings[n] = ShortestPathRanking(n, tie_seed)
        prof.exports[n] = ExportAll(n)
    return prof


def gadget_graph(attacked: bool = True) -> AsGraph:
    return AsGraph(range(7), [(u, v, "plain") for u, v in GADGET_EDGES], GADGET_DEST,
                   [0] if attacked else [])


def crafted_gadget_schedule(graph: AsGraph) -> list:
    """One synchronous step: flush every channel, then activate everyone."""
    return [Deliver(None, "all"), Activate(sorted(graph.nodes))]


def bad_gadget_scenario(attacked: bool = True) -> Scenario:
    """Node 0 hijacking d turns the triangle 1-2-3 into a Bad Gadget.

    Without the attack the network settles with 1, 2 and 3 on their direct
    routes.  With it, a synchronous schedule cycles forever.  (The routes the
    victims believe in run through 0, which has no link to d; their traffic
    would really travel 0-4-5-d.  Only the control plane is simulated.)
    """
    g = gadget_graph(attacked)
    prof = _gadget_profile(g)
    if attacked:
        attacks = {0: prefix_hijack(0, g)}
        d = GADGET_DEST
        poisoned = InitialConfig(selected={1: (1, 0, d), 2: (2, 1, 0, d), 3: (3, 0, d)}, name="poisoned")
        return Scenario("bad-gadget-attacked", g, prof, attacks,
                        configs=[InitialConfig.empty(), poisoned],
                        schedules=[crafted_gadget_schedule(g)],
                        expectations=[("oscillates",)],
                        meta={"oscillating": frozenset({1, 2, 3})})
    return Scenario("bad-gadget-clean", g, prof, {},
                    expectations=[("converges_within", None)],
                    meta={"expected_final": {1: (1, 6), 2: (2, 6), 3: (3, 6)}})
