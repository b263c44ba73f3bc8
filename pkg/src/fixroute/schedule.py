"""Event sources for :func:`fixroute.engine.run`."""

from __future__ import annotations

import random

from .engine import Activate, Deliver, Drop


class FairRandomSchedule:
    """Seeded random schedule with a hard fairness window.

    Within any ``window`` events every node is activated at least once and
    every non-empty channel delivers at least one message (see :meth:`_debt`).  Deliveries pick
    the newest message most of the time and an arbitrary one otherwise, so
    messages arrive out of order.  Random drops only ever hit a message that
    a newer one on the same channel supersedes; the newest message on a
    channel is never dropped, which keeps every channel live.
    """

    def __init__(self, seed: int, window: int | None = None, p_deliver: float = 0.6,
                 p_drop: float = 0.03, p_reorder: float = 0.3, p_member: float = 0.4):
        self.seed = seed
        self.rng = random.Random(seed)
        self.window = window
        self.p_deliver = p_deliver
        self.p_drop = p_drop
        self.p_reorder = p_reorder
        self.p_member = p_member
        self._last_act = None

    def _setup(self, state):
        self.window = self.window or 4 * len(state.actors)
        self._last_act = dict.fromkeys(state.actors, state.clock)

    def _debt(self, state):
        """Event forced by the fairness window, or None.

        Pending obligations are one activation job (served by activating
        every node that is halfway to its deadline) and one job per busy
        channel.  They are served earliest deadline first as soon as the
        schedule gets tight; if the channel deadlines cannot all be met one
        delivery at a time, every channel is flushed in one event.
        """
        clock = state.clock
        w = self.window
        la = self._last_act
        since = state.busy_since
        busy = state.busy.items
        jobs = len(busy) + 1
        act_slack = min(la.values()) + w - clock
        if act_slack > jobs and all(since[e] + w - clock > jobs for e in busy):
            return None
        slacks = sorted([(act_slack, -1)] + [(since[e] + w - clock, k) for k, e in enumerate(busy)])
        if all(sl > k + 1 for k, (sl, _) in enumerate(slacks)):
            return None
        first = slacks[0][1]
        if first == -1:
            nodes = [n for n, t in la.items() if clock - t >= w // 2 or t + w - clock == act_slack]
            for n in nodes:
                la[n] = clock + 1
            return Activate(nodes)
        if any(sl < k + 1 for k, (sl, _) in enumerate(slacks)):
            return Deliver(None, "all")
        return Deliver(busy[first], "newest")

    def next_event(self, state):
        if self._last_act is None:
            self._setup(state)
        ev = self._debt(state)
        if ev is not None:
            return ev
        clock = state.clock
        la = self._last_act
        rng = self.rng
        r = rng.random()
        busy = state.busy.items
        if busy and r < self.p_deliver:
            e = busy[int(rng.random() * len(busy))]
            ch = state.channels[e]
            if len(ch) > 1 and rng.random() < self.p_reorder:
                return Deliver(e, ch[int(rng.random() * len(ch))][0])
            return Deliver(e, "newest")
        if busy and r < self.p_deliver + self.p_drop:
            e = busy[int(rng.random() * len(busy))]
            ch = state.channels[e]
            if len(ch) > 1:
                return Drop(e, ch[int(rng.random() * (len(ch) - 1))][0])
        nodes = [n for n in state.actors if rng.random() < self.p_member]
        if not nodes:
            nodes = [state.actors[int(rng.random() * len(state.actors))]]
        for n in nodes:
            la[n] = clock + 1
        return Activate(nodes)

    def state_key(self):
        # a seeded generator's internal state never meaningfully recurs
        return (self.seed, self.rng.getstate())


class ExplicitSchedule:
    """Finite event list, optionally repeated forever; generator state is the position."""

    def __init__(self, events, repeat: bool = False):
        self.events = list(events)
        self.repeat = repeat
        self.pos = 0

    def next_event(self, state):
        if self.pos >= len(self.events):
            if not self.repeat or not self.events:
                return None
            self.pos = 0
        ev = self.events[self.pos]
        self.pos += 1
        return ev

    def state_key(self):
        return self.pos % len(self.events) if self.events else 0


class SynchronousSchedule:
    """Deliver everything in flight, then activate every node; repeat."""

    def __init__(self):
        self.phase = 0

    def next_event(self, state):
        self.phase ^= 1
        if self.phase == 1:
            return Deliver(None, "all")
        return Activate(state.actors)

    def state_key(self):
        return self.phase
