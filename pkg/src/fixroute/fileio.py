"""Line-based text formats: topology, attacks, profile overrides, schedules.

All formats are UTF-8, one directive per line, ``#`` starts a comment.
Routes are comma-separated node ids; ``d`` may stand for the destination and
``-`` for the empty route.
"""

from __future__ import annotations

from pathlib import Path

from .attack import SILENCE, FixedRouteAttack
from .engine import Activate, Deliver, Drop
from .errors import ParseError, StructuralError
from .graph import AsGraph, Relationship
from .policy import CustomRanking, PolicyProfile, RuleExport
from .route import format_route, parse_route


def _lines(text):
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def _int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected a node id, got {tok!r}", lineno) from None


def _read(source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    return source


# -- topology ----------------------------------------------------------------------


def parse_topology(text: str) -> AsGraph:
    dest = None
    nodes: dict[int, bool] = {}
    edges = []
    seen = set()
    for n, tok in _lines(text):
        kw = tok[0]
        if kw == "dest":
            if len(tok) != 2:
                raise ParseError("usage: dest <id>", n)
            if dest is not None:
                raise ParseError("more than one dest line", n)
            dest = _int(tok[1], n)
            nodes.setdefault(dest, False)
        elif kw == "node":
            if len(tok) not in (2, 3) or (len(tok) == 3 and tok[2] != "attacker"):
                raise ParseError("usage: node <id> [attacker]", n)
            nid = _int(tok[1], n)
            nodes[nid] = nodes.get(nid, False) or len(tok) == 3
        elif kw == "edge":
            if len(tok) != 4 or tok[3] not in ("peer", "plain", "p2c"):
                raise ParseError("usage: edge <u> <v> peer|plain|p2c", n)
            u, v = _int(tok[1], n), _int(tok[2], n)
            key = frozenset((u, v))
            if key in seen:
                raise ParseError(f"duplicate edge {u}-{v}", n)
            seen.add(key)
            edges.append((u, v, Relationship(tok[3]), n))
        else:
            raise ParseError(f"unknown directive {kw!r}", n)
    if dest is None:
        raise ParseError("missing dest line")
    for u, v, _, n in edges:
        for end in (u, v):
            if end not in nodes:
                raise ParseError(f"edge {u}-{v} references undeclared node {end}", n)
    try:
        return AsGraph(nodes, [(u, v, k) for u, v, k, _ in edges], dest,
                       [k for k, att in nodes.items() if att])
    except StructuralError as exc:
        raise ParseError(str(exc)) from None


def load_topology(path) -> AsGraph:
    try:
        return parse_topology(Path(path).read_text(encoding="utf-8"))
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


def dump_topology(graph: AsGraph) -> str:
    out = [f"dest {graph.destination}"]
    for n in sorted(graph.nodes):
        if n == graph.destination:
            continue
        out.append(f"node {n} attacker" if n in graph.attackers else f"node {n}")
    for e in graph.edges:
        out.append(f"edge {e.u} {e.v} {e.kind.value}")
    return "\n".join(out) + "\n"


# -- attacks -----------------------------------------------------------------------------


def parse_attacks(text: str, graph: AsGraph) -> dict:
    per: dict[int, dict] = {}
    for n, tok in _lines(text):
        if tok[0] != "attack" or len(tok) != 4:
            raise ParseError("usage: attack <attacker> <neighbor> <route>|silence", n)
        a, nb = _int(tok[1], n), _int(tok[2], n)
        if a not in graph.attackers:
            raise ParseError(f"node {a} is not declared as an attacker", n)
        if not graph.has_edge(a, nb):
            raise ParseError(f"{nb} is not a neighbor of attacker {a}", n)
        ann = per.setdefault(a, {})
        if nb in ann:
            raise ParseError(f"second announcement from {a} to {nb}", n)
        if tok[3] == "silence":
            ann[nb] = SILENCE
        else:
            seq = parse_route(tok[3], graph.destination, n)
            if not seq:
                raise ParseError("use 'silence' rather than an empty announcement", n)
            ann[nb] = seq
    return {a: FixedRouteAttack(a, ann) for a, ann in per.items()}


def dump_attacks(attacks: dict, graph: AsGraph) -> str:
    out = []
    for a in sorted(attacks):
        for nb, seq in sorted(attacks[a].announcements.items()):
            val = "silence" if seq is SILENCE else format_route(seq, graph.destination)
            out.append(f"attack {a} {nb} {val}")
    return "\n".join(out) + ("\n" if out else "")


# -- profile overrides -----------------------------------------------------------------------


def apply_profile_overrides(text: str, graph: AsGraph, base: PolicyProfile) -> PolicyProfile:
    """Layer ``rank`` and ``export`` directives over ``base``.

    ``rank <node> <route> > <route> > ...`` replaces the node's ranking with
    the explicit list (unlisted routes fall below the empty route).
    ``export <node> <neighbor> allow|deny <route>|all`` adds an export rule;
    the last matching rule wins.
    """
    prof = PolicyProfile("custom", dict(base.rankings), dict(base.exports), dict(base.meta))
    rules: dict[int, list] = {}
    for n, tok in _lines(text):
        kw = tok[0]
        if kw == "rank":
            if len(tok) < 3:
                raise ParseError("usage: rank <node> <route> > <route> ...", n)
            node = _int(tok[1], n)
            if node not in graph.honest:
                raise ParseError(f"node {node} does not select routes", n)
            body = " ".join(tok[2:])
            routes = [parse_route(part, graph.destination, n) for part in body.split(">")]
            for r in routes:
                if not r or r[0] != node or r[-1] != graph.destination:
                    raise ParseError(f"route {format_route(r)} is not a route from {node} to d", n)
            prof.rankings[node] = CustomRanking(node, routes)
        elif kw == "export":
            if len(tok) != 5 or tok[3] not in ("allow", "deny"):
                raise ParseError("usage: export <node> <neighbor> allow|deny <route>|all", n)
            node, nb = _int(tok[1], n), _int(tok[2], n)
            if node not in graph.honest:
                raise ParseError(f"node {node} does not export routes", n)
            if not graph.has_edge(node, nb):
                raise ParseError(f"{nb} is not a neighbor of {node}", n)
            r = None if tok[4] == "all" else parse_route(tok[4], graph.destination, n)
            rules.setdefault(node, []).append((nb, tok[3] == "allow", r))
        else:
            raise ParseError(f"unknown directive {kw!r}", n)
    for node, rs in rules.items():
        prof.exports[node] = RuleExport(node, rs, base.exports[node])
    return prof


# -- schedules ---------------------------------------------------------------------------------


def _edge(tok, n):
    if "->" not in tok:
        raise ParseError(f"expected <u>-><v>, got {tok!r}", n)
    u, v = tok.split("->", 1)
    return (_int(u, n), _int(v, n))


def _pick(tok, n):
    if tok in ("oldest", "newest", "all"):
        return tok
    return _int(tok, n)


def parse_schedule(text: str) -> list:
    """``act <id,id,...>`` / ``dlv <u>-><v> <send_index>`` / ``drop <u>-><v> <send_index>``.

    As conveniences the index may be ``oldest``, ``newest`` or ``all``, and
    ``dlv all`` flushes every channel.
    """
    events = []
    for n, tok in _lines(text):
        kw = tok[0]
        if kw == "act" and len(tok) == 2:
            events.append(Activate(_int(x, n) for x in tok[1].split(",") if x))
        elif kw == "dlv" and len(tok) == 2 and tok[1] == "all":
            events.append(Deliver(None, "all"))
        elif kw == "dlv" and len(tok) == 3:
            events.append(Deliver(_edge(tok[1], n), _pick(tok[2], n)))
        elif kw == "drop" and len(tok) == 3:
            p = _pick(tok[2], n)
            if p == "all":
                raise ParseError("drop takes a single message", n)
            events.append(Drop(_edge(tok[1], n), p))
        else:
            raise ParseError(f"bad schedule line: {' '.join(tok)}", n)
    return events


def dump_schedule(events) -> str:
    out = []
    for ev in events:
        if isinstance(ev, Activate):
            out.append("act " + ",".join(map(str, sorted(ev.nodes))))
        elif isinstance(ev, Deliver):
            out.append("dlv all" if ev.edge is None else f"dlv {ev.edge[0]}->{ev.edge[1]} {ev.pick}")
        else:
            out.append(f"drop {ev.edge[0]}->{ev.edge[1]} {ev.pick}")
    return "\n".join(out) + "\n"
