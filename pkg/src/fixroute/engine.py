"""Asynchronous path-vector dynamics.

One run is strictly sequential: a schedule hands the engine one event at a
time (activate a set of nodes, deliver or drop one in-flight message) and the
engine applies it.  Channels are per directed edge and hold numbered
messages; delivery may pick any of them, so there is no FIFO assumption.

Round accounting follows the greedy reading of an asynchronous round: a round
closes at the earliest event by which every route-selecting node has received,
on each incoming channel that had messages in flight when the round opened, a
message at least as recent as the newest one in flight then, and has activated
afterwards; attackers only need to activate.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable

from .attack import SILENCE, complete_attacks
from .errors import ConfigurationError
from .graph import AsGraph
from .policy import PolicyProfile
from .route import EMPTY, format_route, is_simple

DEFAULT_CAPACITY = 8
_MISSING = object()


# -- messages and events ---------------------------------------------------------


@dataclass(frozen=True)
class UpdateMessage:
    sender: int
    receiver: int
    content: tuple
    send_index: int


@dataclass(frozen=True)
class Activate:
    nodes: frozenset

    def __init__(self, nodes: Iterable[int]):
        object.__setattr__(self, "nodes", frozenset(nodes))


@dataclass(frozen=True)
class Deliver:
    """Deliver from ``edge`` (``(u, v)``): a send index, ``"oldest"``,
    ``"newest"`` or ``"all"``.  ``edge=None`` with ``"all"`` flushes every channel."""

    edge: tuple | None
    pick: object = "newest"


@dataclass(frozen=True)
class Drop:
    edge: tuple
    pick: object = "oldest"


ScheduleEvent = (Activate, Deliver, Drop)


@dataclass
class InitialConfig:
    """Arbitrary starting beliefs: per-node selection and per-neighbor rib_in content."""

    selected: dict = field(default_factory=dict)
    rib_in: dict = field(default_factory=dict)
    name: str = "empty"

    @classmethod
    def empty(cls):
        return cls()


# -- trace -----------------------------------------------------------------------


@dataclass
class OscillationWitness:
    start_clock: int
    end_clock: int
    configurations: list  # selection vectors over the cycle, as {node: route}
    oscillating: frozenset

    @property
    def cycle_length(self) -> int:
        return len(self.configurations)


@dataclass
class Trace:
    honest: tuple
    destination: int
    initial: dict
    events: list = field(default_factory=list)
    changes: list = field(default_factory=list)  # (clock, node, route, round)
    boundaries: list = field(default_factory=list)
    status: str = "running"
    final: dict = field(default_factory=dict)
    clock: int = 0
    dropped: int = 0
    witness: OscillationWitness | None = None
    state_keys: list | None = None

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.events, self.changes, self.boundaries, sorted(self.final.items()),
                       self.status)).encode())
        return h.hexdigest()

    @property
    def quiescent(self) -> bool:
        return self.status == "quiescent"

    def stabilization_rounds(self) -> dict:
        """Round index of each node's last selection change (0 if it never changed)."""
        out = dict.fromkeys(self.honest, 0)
        for _, node, _, rnd in self.changes:
            out[node] = rnd
        return out

    def convergence_round(self) -> int:
        return max(self.stabilization_rounds().values(), default=0)

    def lines(self):
        """Line-delimited text records, one per event, then a summary."""
        fmt = lambda r: format_route(r, self.destination)
        by_clock: dict = {}
        for clk, node, route, rnd in self.changes:
            by_clock.setdefault(clk, []).append((node, route, rnd))
        bset = set(self.boundaries)
        rnd = 1
        for clk, kind, payload in self.events:
            if kind == "act":
                ch = {n: (r, rr) for n, r, rr in by_clock.get(clk, [])}
                for n in payload:
                    if n in ch:
                        yield f"t={clk} ev=act node={n} sel={fmt(ch[n][0])} round={rnd}"
                    else:
                        yield f"t={clk} ev=act node={n} sel== round={rnd}"
            else:
                u, v, idx = payload
                yield f"t={clk} ev={kind} node={v} from={u} idx={idx} round={rnd}"
            if clk in bset:
                rnd += 1
                yield f"t={clk} ev=round-end round={rnd - 1}"
        final = " ".join(f"{n}:{fmt(r)}" for n, r in sorted(self.final.items()))
        yield (f"summary quiescent={str(self.quiescent).lower()} status={self.status} "
               f"rounds={len(self.boundaries)} convergence_round={self.convergence_round()} final={final}")

    def records(self):
        """ndjson-ready dicts mirroring :meth:`lines`."""
        fmt = lambda r: format_route(r, self.destination)
        for clk, node, route, rnd in self.changes:
            yield {"t": clk, "ev": "sel", "node": node, "sel": fmt(route), "round": rnd}
        for k, clk in enumerate(self.boundaries, 1):
            yield {"t": clk, "ev": "round-end", "round": k}
        yield {"ev": "summary", "quiescent": self.quiescent, "status": self.status,
               "rounds": len(self.boundaries), "convergence_round": self.convergence_round(),
               "final": {str(n): fmt(r) for n, r in sorted(self.final.items())},
               "events": self.clock, "dropped": self.dropped}


# -- round ledger -------------------------------------------------------------------


class RoundLedger:
    def __init__(self, receivers, required):
        self.receivers = tuple(receivers)
        self.required = frozenset(required)
        self.boundaries: list = []
        self.targets: dict = {}
        self.waiting: dict = {}
        self.remaining: set = set()

    @property
    def current_round(self) -> int:
        return len(self.boundaries) + 1

    def open(self, channels):
        self.targets = {}
        self.waiting = dict.fromkeys(self.receivers, 0)
        for edge, ch in channels.items():
            if ch:
                self.targets[edge] = ch[-1][0]
                self.waiting[edge[1]] += 1
        self.remaining = set(self.required)

    def delivered(self, edge, idx):
        t = self.targets.get(edge)
        if t is not None and idx >= t:
            del self.targets[edge]
            self.waiting[edge[1]] -= 1

    def dropped(self, edge, channel):
        t = self.targets.get(edge)
        if t is not None and not any(m[0] >= t for m in channel):
            # the awaited message is gone and nothing newer is in flight
            del self.targets[edge]
            self.waiting[edge[1]] -= 1

    def activated(self, nodes, clock, channels) -> bool:
        rem = self.remaining
        if not rem:
            return False
        for n in nodes:
            if n in rem and not self.waiting.get(n, 0):
                rem.discard(n)
        if not rem:
            self.boundaries.append(clock)
            self.open(channels)
            return True
        return False

    def copy(self):
        c = RoundLedger(self.receivers, self.required)
        c.boundaries = list(self.boundaries)
        c.targets = dict(self.targets)
        c.waiting = dict(self.waiting)
        c.remaining = set(self.remaining)
        return c


class _IndexedSet:
    """Insertion-deterministic set with O(1) add/remove/choice."""

    __slots__ = ("items", "pos")

    def __init__(self):
        self.items = []
        self.pos = {}

    def add(self, x):
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def discard(self, x):
        i = self.pos.pop(x, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def __len__(self):
        return len(self.items)

    def __contains__(self, x):
        return x in self.pos

    def copy(self):
        c = _IndexedSet()
        c.items = list(self.items)
        c.pos = dict(self.pos)
        return c


# -- state ---------------------------------------------------------------------------


class SimulationState:
    """Global configuration of one run.  Mutated in place by :func:`step`."""

    def __init__(self, graph: AsGraph, profile: PolicyProfile, attacks: dict | None = None,
                 capacity: int = DEFAULT_CAPACITY):
        profile.check_complete(graph)
        self.graph = graph
        self.profile = profile
        self.attacks = complete_attacks(graph, attacks)
        self.capacity = capacity
        self.d = graph.destination
        self.honest = tuple(sorted(graph.honest))
        self.attackers = tuple(sorted(graph.attackers))
        self.actors = tuple(sorted(graph.nodes))
        honest = set(self.honest)
        # channels only run into nodes that process messages
        self.out_edges = {n: tuple(v for v in graph.adjacent(n) if v in honest) for n in graph.nodes}
        self.in_nbrs = {i: graph.adjacent(i) for i in self.honest}
        self.selected = {i: EMPTY for i in self.honest}
        self.rib_in = {i: {j: (-1, EMPTY) for j in self.in_nbrs[i]} for i in self.honest}
        self.inbox = {i: {} for i in self.honest}
        self.channels = {(j, i): [] for i in self.honest for j in self.in_nbrs[i]}
        self.next_idx = dict.fromkeys(self.channels, 0)
        self.last_sent = {}
        self.busy = _IndexedSet()
        self.busy_since = {}
        self.clock = 0
        self.dropped = 0
        self.ledger = RoundLedger(self.honest, set(self.honest) | set(self.attackers))
        self.trace: Trace | None = None
        self._cand = {}
        self._keys = {i: profile.rankings[i].key for i in self.honest}
        self._permit = {i: profile.exports[i].permit for i in self.honest}
        self._ann = {a: self.attacks[a].announcements for a in self.attackers}

    # -- helpers ------------------------------------------------------------

    def candidate(self, i, content):
        """Route ``i`` would form from a neighbor's announcement, or None if unusable."""
        k = (i, content)
        r = self._cand.get(k, _MISSING)
        if r is _MISSING:
            if not content:
                r = None
            else:
                r = (i,) + content
                if not is_simple(r):
                    r = None
            self._cand[k] = r
        return r

    def best_route(self, i, contents):
        key = self._keys[i]
        best, bk = EMPTY, key(EMPTY)
        for c in contents:
            r = self.candidate(i, c)
            if r is not None:
                k = key(r)
                if k > bk:
                    best, bk = r, k
        return best

    def export_value(self, i, j, route):
        if route and not self._permit[i](j, route):
            return EMPTY
        return route

    def _send(self, u, v, content):
        e = (u, v)
        idx = self.next_idx[e]
        self.next_idx[e] = idx + 1
        ch = self.channels[e]
        ch.append((idx, content))
        if len(ch) > self.capacity:
            ch.pop(0)
            self.dropped += 1
        if e not in self.busy:
            self.busy.add(e)
            self.busy_since[e] = self.clock
        self.last_sent[e] = content

    def _take(self, e, pick):
        ch = self.channels.get(e)
        if not ch:
            return None
        if pick == "newest":
            msg = ch.pop()
        elif pick == "oldest":
            msg = ch.pop(0)
        else:
            for k, m in enumerate(ch):
                if m[0] == pick:
                    msg = ch.pop(k)
                    break
            else:
                return None
        if not ch:
            self.busy.discard(e)
            self.busy_since.pop(e, None)
        return msg

    # -- event handlers ------------------------------------------------------------

    def _deliver_one(self, e, pick):
        msg = self._take(e, pick)
        if msg is None:
            return None
        if e in self.busy_since:
            self.busy_since[e] = self.clock
        i = e[1]
        box = self.inbox[i]
        cur = box.get(e[0])
        if cur is None or msg[0] > cur[0]:
            box[e[0]] = msg
        self.ledger.delivered(e, msg[0])
        if self.trace is not None:
            self.trace.events.append((self.clock, "dlv", (e[0], e[1], msg[0])))
        return msg

    def deliver(self, edge, pick="newest"):
        if edge is None:
            if pick != "all":
                raise ConfigurationError("deliver without an edge needs pick='all'")
            for e in sorted(self.channels):
                while self.channels[e]:
                    self._deliver_one(e, "oldest")
            return
        if edge not in self.channels:
            raise ConfigurationError(f"no channel {edge[0]}->{edge[1]}")
        if pick == "all":
            while self.channels[edge]:
                self._deliver_one(edge, "oldest")
        else:
            self._deliver_one(edge, pick)

    def drop(self, edge, pick="oldest"):
        if edge not in self.channels:
            raise ConfigurationError(f"no channel {edge[0]}->{edge[1]}")
        msg = self._take(edge, pick)
        if msg is None:
            return
        self.dropped += 1
        self.ledger.dropped(edge, self.channels[edge])
        if self.trace is not None:
            self.trace.events.append((self.clock, "drop", (edge[0], edge[1], msg[0])))

    def _activate_honest(self, i):
        box = self.inbox[i]
        rib = self.rib_in[i]
        if box:
            for j, msg in box.items():
                if msg[0] > rib[j][0]:
                    rib[j] = msg
            box.clear()
        key = self._keys[i]
        cand = self.candidate
        best, bk = EMPTY, key(EMPTY)
        for _, c in rib.values():
            if c:
                r = cand(i, c)
                if r is not None:
                    k = key(r)
                    if k > bk:
                        best, bk = r, k
        if best != self.selected[i]:
            self.selected[i] = best
            if self.trace is not None:
                self.trace.changes.append((self.clock, i, best, self.ledger.current_round))
        permit = self._permit[i]
        last = self.last_sent
        for j in self.out_edges[i]:
            val = best if (not best or permit(j, best)) else EMPTY
            if last.get((i, j), _MISSING) != val:
                self._send(i, j, val)

    def _activate_attacker(self, a):
        ann = self._ann[a]
        for j in self.out_edges[a]:
            c = ann.get(j, SILENCE)
            if c is not SILENCE:
                self._send(a, j, c)

    def _activate_destination(self):
        own = (self.d,)
        for j in self.out_edges[self.d]:
            if self.last_sent.get((self.d, j), _MISSING) != own:
                self._send(self.d, j, own)

    def activate(self, nodes):
        nodes = sorted(nodes)
        for n in nodes:
            if n not in self.graph.nodes:
                raise ConfigurationError(f"cannot activate unknown node {n}")
        if self.trace is not None:
            self.trace.events.append((self.clock, "act", tuple(nodes)))
        for n in nodes:
            if n == self.d:
                self._activate_destination()
            elif n in self.graph.attackers:
                self._activate_attacker(n)
            else:
                self._activate_honest(n)
        self.ledger.activated(nodes, self.clock, self.channels)

    # -- views ---------------------------------------------------------------------

    def config_key(self):
        """Hashable snapshot of everything that determines future behaviour,
        with send indices reduced to what matters: order, and staleness
        against what the receiver already holds."""
        parts = []
        for i in self.honest:
            rib = self.rib_in[i]
            box = self.inbox[i]
            row = [self.selected[i]]
            for j in self.in_nbrs[i]:
                held = rib[j]
                b = box.get(j)
                hi = held[0] if b is None else max(held[0], b[0])
                ch = tuple((m[1], m[0] <= hi) for m in self.channels[(j, i)])
                row.append((held[1], None if b is None else (b[1], b[0] <= held[0]), ch,
                            self.last_sent.get((j, i), _MISSING) is _MISSING,
                            self.last_sent.get((j, i))))
            parts.append(tuple(row))
        return tuple(parts)

    def selections(self) -> dict:
        return dict(self.selected)

    def copy(self) -> "SimulationState":
        c = object.__new__(SimulationState)
        c.__dict__.update(self.__dict__)
        c.selected = dict(self.selected)
        c.rib_in = {i: dict(r) for i, r in self.rib_in.items()}
        c.inbox = {i: dict(b) for i, b in self.inbox.items()}
        c.channels = {e: list(ch) for e, ch in self.channels.items()}
        c.next_idx = dict(self.next_idx)
        c.last_sent = dict(self.last_sent)
        c.busy = self.busy.copy()
        c.busy_since = dict(self.busy_since)
        c.ledger = self.ledger.copy()
        c.trace = None
        return c


# -- public operations -------------------------------------------------------------------


def initialize(graph: AsGraph, profile: PolicyProfile, attacks: dict | None = None,
               initial_config: InitialConfig | None = None, capacity: int = DEFAULT_CAPACITY,
               announce_initial: bool = True) -> SimulationState:
    """Build the starting state.

    d's self-announcement is put in flight.  With ``announce_initial`` (the
    default) every honest node's export of its initial selection and every
    attacker's constant announcement are in flight as well, so the starting
    configuration is one where everyone has already spoken once.
    """
    st = SimulationState(graph, profile, attacks, capacity)
    cfg = initial_config or InitialConfig.empty()
    for i, r in cfg.selected.items():
        r = tuple(r)
        if i not in st.selected:
            raise ConfigurationError(f"initial route given for non-selecting node {i}")
        if r and (r[0] != i or r[-1] != graph.destination):
            raise ConfigurationError(f"initial route {r} is not owned by node {i}")
        st.selected[i] = r
    for i, entries in cfg.rib_in.items():
        if i not in st.rib_in:
            raise ConfigurationError(f"rib_in given for non-selecting node {i}")
        for j, c in entries.items():
            if j not in st.rib_in[i]:
                raise ConfigurationError(f"rib_in of {i} names non-neighbor {j}")
            st.rib_in[i][j] = (-1, tuple(c))
    st._activate_destination()
    if announce_initial:
        for a in st.attackers:
            st._activate_attacker(a)
        for i in st.honest:
            sel = st.selected[i]
            for j in st.out_edges[i]:
                st._send(i, j, st.export_value(i, j, sel))
    st.ledger.open(st.channels)
    return st


def step(state: SimulationState, event) -> SimulationState:
    """Apply one schedule event; malformed events raise and leave the state untouched."""
    if isinstance(event, Activate):
        bad = [n for n in event.nodes if n not in state.graph.nodes]
        if bad:
            raise ConfigurationError(f"cannot activate unknown nodes {bad}")
        state.clock += 1
        state.activate(event.nodes)
    elif isinstance(event, Deliver):
        if event.edge is not None and event.edge not in state.channels:
            raise ConfigurationError(f"no channel {event.edge}")
        if event.edge is None and event.pick != "all":
            raise ConfigurationError("deliver without an edge needs pick='all'")
        state.clock += 1
        state.deliver(event.edge, event.pick)
    elif isinstance(event, Drop):
        if event.edge not in state.channels:
            raise ConfigurationError(f"no channel {event.edge}")
        state.clock += 1
        state.drop(event.edge, event.pick)
    else:
        raise ConfigurationError(f"not a schedule event: {event!r}")
    return state


def _future_content(state, j, i, held):
    """Content ``i`` will end up holding from ``j`` if nothing else changes."""
    if j == state.d:
        return held if (j, i) in state.last_sent else (state.d,)
    if j in state.graph.attackers:
        c = state._ann[j].get(i, SILENCE)
        return held if c is SILENCE else c
    want = state.export_value(j, i, state.selected[j])
    if state.last_sent.get((j, i), _MISSING) != want:
        return want
    return held


def detect_quiescence(state: SimulationState) -> bool:
    """True when no fair continuation can change anything that matters:
    every in-flight announcement newer than what its receiver holds, and
    every future one, matches what is held, and every selection is best
    over its rib_in.  An export not yet sent is a future announcement, so
    the receiver-side check covers it."""
    for i in state.honest:
        rib = state.rib_in[i]
        box = state.inbox[i]
        for j in state.in_nbrs[i]:
            idx, content = rib[j]
            # any message newer than what is held could be the next one applied,
            # so all of them must agree with it, not just the newest
            b = box.get(j)
            if b is not None and b[0] > idx and b[1] != content:
                return False
            for m in state.channels[(j, i)]:
                if m[0] > idx and m[1] != content:
                    return False
            if _future_content(state, j, i, content) != content:
                return False
        if state.best_route(i, [c for _, c in rib.values()]) != state.selected[i]:
            return False
    return True


@dataclass
class StopCondition:
    quiescence: bool = True
    max_events: int = 200_000
    max_rounds: int | None = None
    check_every: int | None = None  # quiescence check period; default 2|V|
    detect_cycles: bool = False
    record_events: bool = True


def run(state: SimulationState, schedule, stop: StopCondition | None = None) -> Trace:
    """Drive ``state`` with ``schedule`` until the stop condition triggers.

    ``schedule`` needs ``next_event(state)``; when ``stop.detect_cycles`` is
    set it must also offer ``state_key()`` (a deterministic generator), and a
    recurring (configuration, generator state) pair ends the run with an
    oscillation witness.
    """
    stop = stop or StopCondition()
    trace = Trace(state.honest, state.d, dict(state.selected))
    if stop.record_events:
        state.trace = trace
    else:
        state.trace = _ChangesOnly(trace)
    check_every = stop.check_every or max(2, 2 * len(state.actors))
    seen: dict = {}
    snaps: list = []
    start_clock = state.clock
    status = "budget"
    try:
        if stop.detect_cycles:
            key = (state.config_key(), schedule.state_key())
            seen[key] = 0
            snaps.append(dict(state.selected))
        while state.clock - start_clock < stop.max_events:
            if stop.quiescence and (state.clock - start_clock) % check_every == 0 and detect_quiescence(state):
                status = "quiescent"
                break
            ev = schedule.next_event(state)
            if ev is None:
                status = "quiescent" if detect_quiescence(state) else "schedule-exhausted"
                break
            step(state, ev)
            if stop.max_rounds is not None and len(state.ledger.boundaries) >= stop.max_rounds:
                status = "round-budget"
                break
            if stop.detect_cycles:
                key = (state.config_key(), schedule.state_key())
                pos = len(snaps)
                first = seen.get(key)
                if first is not None:
                    configs = snaps[first:]
                    moving = frozenset(n for n in state.honest
                                       if len({c[n] for c in configs}) > 1)
                    if moving:
                        trace.witness = OscillationWitness(start_clock + first, state.clock, configs, moving)
                        status = "oscillation"
                    else:
                        status = "quiescent" if detect_quiescence(state) else "cycle-without-change"
                    break
                seen[key] = pos
                snaps.append(dict(state.selected))
        else:
            if stop.quiescence and detect_quiescence(state):
                status = "quiescent"
    finally:
        state.trace = None
    trace.status = status
    trace.final = dict(state.selected)
    trace.clock = state.clock
    trace.dropped = state.dropped
    trace.boundaries = list(state.ledger.boundaries)
    return trace


class _ChangesOnly:
    """Trace proxy that keeps selection changes but skips the event log."""

    def __init__(self, trace):
        self._t = trace
        self.changes = trace.changes
        self.events = _Sink()


class _Sink(list):
    def append(self, item):
        pass


def detect_oscillation(trace: Trace):
    """The witness recorded by a cycle-detecting run, or None."""
    return trace.witness


def round_count(trace: Trace) -> int:
    return len(trace.boundaries)
