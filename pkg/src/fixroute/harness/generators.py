"""Seeded random instances and initial configurations."""

from __future__ import annotations

import random

from ..attack import SILENCE, FixedRouteAttack
from ..engine import InitialConfig
from ..errors import ConfigurationError
from ..graph import AsGraph, hierarchy_depth
from ..policy import make_commercial_profile, make_shortest_path_profile
from .scenarios import Scenario

ORACLE_SCALE = 16  # largest source count the oracles are run on


def random_attacks(graph: AsGraph, rng: random.Random, styles=("hijack", "fabricate", "silence")) -> dict:
    """One fixed-route attack per attacker.

    Each attacker is either a plain hijacker (``(A, d)`` to everyone) or mixes,
    per neighbor, hijack claims, fabricated paths through honest nodes, and
    silence.  Announcements always start at the attacker and end at d.
    """
    d = graph.destination
    honest = sorted(graph.honest)
    out = {}
    for a in sorted(graph.attackers):
        mixed = rng.random() < 0.6
        ann = {}
        for nb in graph.adjacent(a):
            style = rng.choice(styles) if mixed else "hijack"
            if style == "silence":
                ann[nb] = SILENCE
            elif style == "fabricate" and honest:
                k = rng.randint(1, min(3, len(honest)))
                ann[nb] = (a,) + tuple(rng.sample(honest, k)) + (d,)
            else:
                ann[nb] = (a, d)
        out[a] = FixedRouteAttack(a, ann)
    return out


def _connected_graph(n: int, density: float, rng: random.Random):
    """Random spanning tree over sources plus d, then extra edges with probability ``density``."""
    nodes = list(range(n + 1))
    order = nodes[:]
    rng.shuffle(order)
    edges = set()
    for k in range(1, len(order)):
        u, v = order[k], order[rng.randrange(k)]
        edges.add((min(u, v), max(u, v)))
    for u in nodes:
        for v in nodes:
            if u < v and (u, v) not in edges and rng.random() < density:
                edges.add((u, v))
    return sorted(edges)


def random_shortest_path_instance(n: int, attacker_count: int = 0, density: float | None = None, seed: int = 0,
                                  export: str = "seeded", max_n: int = ORACLE_SCALE) -> Scenario:
    """``n`` source nodes (ids ``0..n-1``) and destination ``n``.

    Without an explicit ``density`` each seed draws one from [0.05, 0.4], so
    a sweep mixes near-trees (long chains) with dense meshes.
    """
    if n < 1:
        raise ConfigurationError("need at least one source node")
    if n > max_n:
        raise ConfigurationError(f"n={n} exceeds the oracle scale ({max_n})")
    if not 0 <= attacker_count <= n:
        raise ConfigurationError(f"cannot place {attacker_count} attackers among {n} sources")
    rng = random.Random(f"sp-{n}-{attacker_count}-{density}-{seed}")
    if density is None:
        density = rng.uniform(0.05, 0.4)
    edges = _connected_graph(n, density, rng)
    attackers = rng.sample(range(n), attacker_count)
    g = AsGraph(range(n + 1), [(u, v, "plain") for u, v in edges], n, attackers)
    prof = make_shortest_path_profile(g, tie_seed=seed, export=export)
    attacks = random_attacks(g, rng)
    return Scenario(f"sp-n{n}-a{attacker_count}-s{seed}", g, prof, attacks,
                    configs=initial_configs(g, attacks, seed),
                    expectations=[("converges_within", n), ("oracle_match",)],
                    oracle="fsr", bound=n,
                    meta={"n": n, "attackers": attacker_count, "seed": seed, "export": export,
                          "density": round(density, 3)})


def random_commercial_instance(levels: int, width: int = 3, attacker_count: int = 0, seed: int = 0,
                               peer_prob: float = 0.3, dest_attach: str | None = None,
                               intra_class_order: str | None = None,
                               max_sources: int | None = ORACLE_SCALE) -> Scenario:
    """Layered hierarchy: level 0 on top, customer-to-provider edges between
    adjacent levels, peers within a level.

    ``max_sources=None`` lifts the size cap for instances that will not be
    handed to the oracle.  d hangs below level 0 as a customer (``dest_attach="customer"``) or peers
    with it (``"peer"``); it may also be a customer of nodes further down as
    long as that does not deepen the hierarchy.
    """
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    rng = random.Random(f"gr-{levels}-{width}-{attacker_count}-{seed}-{dest_attach}")
    if dest_attach is None:
        dest_attach = rng.choice(("customer", "peer"))
    if dest_attach not in ("customer", "peer"):
        raise ConfigurationError(f"unknown dest_attach {dest_attach!r}")
    sizes = [rng.randint(1, width) for _ in range(levels)]
    while sum(sizes) <= attacker_count:  # keep at least one honest node
        sizes[rng.randrange(levels)] += 1
    layer = []
    nxt = 0
    for size in sizes:
        layer.append(list(range(nxt, nxt + size)))
        nxt += size
    d = nxt
    edges = []
    for lvl in range(1, levels):
        for c in layer[lvl]:
            for p in rng.sample(layer[lvl - 1], rng.randint(1, min(2, len(layer[lvl - 1])))):
                edges.append((c, p, "p2c"))
    for row in layer:
        for a in range(len(row)):
            for b in range(a + 1, len(row)):
                if rng.random() < peer_prob:
                    edges.append((row[a], row[b], "peer"))
    top = set(rng.sample(layer[0], rng.randint(1, len(layer[0]))))
    linked = {e[0] for e in edges} | {e[1] for e in edges}
    top |= {v for v in layer[0] if v not in linked}
    top = sorted(top)
    for t in top:
        edges.append((d, t, "p2c") if dest_attach == "customer" else (d, t, "peer"))
    if dest_attach == "customer":
        for lvl in range(1, levels - 1):
            for v in layer[lvl]:
                if rng.random() < 0.25:
                    edges.append((d, v, "p2c"))
    sources = [v for row in layer for v in row]
    if attacker_count > len(sources):
        raise ConfigurationError(f"cannot place {attacker_count} attackers among {len(sources)} sources")
    if max_sources is not None and len(sources) > max_sources:
        raise ConfigurationError(f"{len(sources)} sources exceed the oracle scale ({max_sources})")
    attackers = rng.sample(sources, attacker_count)
    g = AsGraph(range(d + 1), edges, d, attackers)
    if intra_class_order is None:
        intra_class_order = rng.choice(("prefer_shorter", "seeded_arbitrary"))
    prof = make_commercial_profile(g, tie_seed=seed, intra_class_order=intra_class_order)
    attacks = random_attacks(g, rng)
    x = hierarchy_depth(g)
    return Scenario(f"gr-l{levels}-a{attacker_count}-s{seed}", g, prof, attacks,
                    configs=initial_configs(g, attacks, seed),
                    expectations=[("converges_within", 2 * x + 1), ("oracle_match",)],
                    oracle="fr", bound=2 * x + 1,
                    meta={"levels": levels, "depth": x, "attackers": attacker_count, "seed": seed,
                          "dest_attach": dest_attach, "intra_class_order": intra_class_order})


def commercial_instance_for_depth(depth: int, attacker_count: int = 0, seed: int = 0, width: int = 3) -> Scenario:
    """Commercial instance whose hierarchy depth is exactly ``depth``."""
    if depth == 0:
        sc = random_commercial_instance(1, width, attacker_count, seed, dest_attach="peer")
    else:
        sc = random_commercial_instance(depth + 1, width, attacker_count, seed)
    if sc.meta["depth"] != depth:
        raise AssertionError(f"generator produced depth {sc.meta['depth']} for target {depth}")
    return sc


def _bogus_route(owner, first, graph, rng, max_extra=3):
    """A simple sequence owner, first, ..., d through random ids."""
    d = graph.destination
    if first == d:
        return (owner, d)
    pool = [v for v in graph.sources if v not in (owner, first)]
    k = rng.randint(0, min(max_extra, len(pool)))
    return (owner, first) + tuple(rng.sample(sorted(pool), k)) + (d,)


def initial_configs(graph: AsGraph, attacks: dict, seed: int) -> list:
    """Three starting points: all-empty, random beliefs, and short bogus claims.

    rib_in entries from attackers that are silent toward the node stay empty:
    a silent attacker never sends anything that could overwrite them.
    """
    rng = random.Random(f"cfg-{seed}")
    d = graph.destination

    def silent(j, i):
        return j in graph.attackers and attacks.get(j) is not None and \
            attacks[j].announcements.get(i, SILENCE) is SILENCE

    rand = InitialConfig(name="random")
    short = InitialConfig(name="short-claims")
    for i in sorted(graph.honest):
        nbrs = graph.adjacent(i)
        rand.rib_in[i] = {}
        short.rib_in[i] = {}
        if not nbrs:
            continue
        rand.selected[i] = _bogus_route(i, rng.choice(nbrs), graph, rng) if rng.random() < 0.8 else ()
        short.selected[i] = (i, d) if d in nbrs or rng.random() < 0.5 else (i, rng.choice(nbrs), d)
        if short.selected[i][1] == d:
            short.selected[i] = (i, d)
        for j in nbrs:
            if silent(j, i) or j == d:
                continue
            rand.rib_in[i][j] = _bogus_route(j, rng.choice(graph.adjacent(j)), graph, rng)[0:] \
                if rng.random() < 0.8 else ()
            short.rib_in[i][j] = (j, d)
    return [InitialConfig.empty(), rand, short]
