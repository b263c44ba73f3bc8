"""Fixed-route attackers: one constant announcement (or silence) per neighbor."""

from __future__ import annotations

import hashlib
from types import MappingProxyType

from .errors import ConfigurationError
from .graph import AsGraph


class _Silence:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "SILENCE"

    def __reduce__(self):
        return (_Silence, ())


SILENCE = _Silence()


class FixedRouteAttack:
    """Announcements of one attacker, keyed by neighbor.

    Sequences are stored verbatim: they need not be simple, need not exist in
    the graph and need not start with the attacker.  Neighbors missing from
    the map are silent.
    """

    __slots__ = ("attacker", "_ann", "_digest")

    def __init__(self, attacker: int, announcements: dict):
        self.attacker = attacker
        ann = {}
        for nb, seq in announcements.items():
            ann[int(nb)] = SILENCE if seq is SILENCE else tuple(int(x) for x in seq)
        self._ann = MappingProxyType(ann)
        self._digest = self._compute_digest()

    @property
    def announcements(self):
        return self._ann

    def _compute_digest(self) -> str:
        h = hashlib.sha256(repr((self.attacker, sorted(self._ann.items(), key=lambda kv: kv[0]))).encode())
        return h.hexdigest()

    def digest(self) -> str:
        return self._digest

    def __eq__(self, other):
        return isinstance(other, FixedRouteAttack) and self.attacker == other.attacker and \
            dict(self._ann) == dict(other._ann)

    def __hash__(self):
        return hash(self._digest)

    def __repr__(self):
        return f"FixedRouteAttack({self.attacker}, {dict(self._ann)!r})"

    def __reduce__(self):
        return (FixedRouteAttack, (self.attacker, dict(self._ann)))


def prefix_hijack(attacker: int, graph: AsGraph) -> FixedRouteAttack:
    """Every neighbor hears ``(attacker, d)``."""
    if attacker not in graph.attackers:
        raise ConfigurationError(f"node {attacker} is not in the attacker set")
    claim = (attacker, graph.destination)
    return FixedRouteAttack(attacker, {nb: claim for nb in graph.adjacent(attacker)})


def announcement_for(attack: FixedRouteAttack, neighbor: int, graph: AsGraph | None = None):
    """The constant sent to ``neighbor``: a node tuple or :data:`SILENCE`.

    With ``graph`` given, querying a non-neighbor raises ``KeyError``.
    """
    if graph is not None and not graph.has_edge(attack.attacker, neighbor):
        raise KeyError(f"{neighbor} is not a neighbor of attacker {attack.attacker}")
    return attack.announcements.get(neighbor, SILENCE)


def silent_attack(attacker: int) -> FixedRouteAttack:
    return FixedRouteAttack(attacker, {})


def check_attacks(graph: AsGraph, attacks: dict):
    """``attacks`` maps attacker id to FixedRouteAttack; every attacker needs one."""
    for a, att in attacks.items():
        if a not in graph.attackers:
            raise ConfigurationError(f"attack given for non-attacker {a}")
        if att.attacker != a:
            raise ConfigurationError(f"attack keyed {a} belongs to {att.attacker}")
        for nb in att.announcements:
            if not graph.has_edge(a, nb):
                raise ConfigurationError(f"attacker {a} announces to non-neighbor {nb}")


def complete_attacks(graph: AsGraph, attacks: dict | None) -> dict:
    """Attackers without an explicit attack stay silent."""
    out = dict(attacks or {})
    for a in graph.attackers:
        out.setdefault(a, silent_attack(a))
    check_attacks(graph, out)
    return out


def is_well_formed(attack: FixedRouteAttack, graph: AsGraph) -> bool:
    """True when each announcement starts at the attacker, ends at d, is simple
    and names no other attacker: the shape the perceivable-route definition covers."""
    for seq in attack.announcements.values():
        if seq is SILENCE:
            continue
        if not seq or seq[0] != attack.attacker or seq[-1] != graph.destination:
            return False
        if len(set(seq)) != len(seq):
            return False
        if any(x in graph.attackers for x in seq[1:]):
            return False
    return True
