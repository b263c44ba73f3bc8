"""Routes are plain tuples of node ids; the empty route is ``()``.

A non-empty route starts at its owner and ends at the destination.  Only
helpers live here, so routes stay hashable and cheap to compare.
"""

from __future__ import annotations

from .errors import ParseError

EMPTY: tuple = ()

_EMPTY_SPELLINGS = {"-", "empty", "none", "()", ""}


def length(route: tuple) -> int:
    """Number of edges; the empty route has length 0."""
    return len(route) - 1 if route else 0


def owner(route: tuple):
    return route[0] if route else None


def next_hop(route: tuple):
    return route[1] if len(route) > 1 else None


def is_simple(route) -> bool:
    return len(set(route)) == len(route)


def prefix_to(route: tuple, node: int) -> tuple:
    """Prefix of ``route`` ending at ``node`` (inclusive)."""
    return route[: route.index(node) + 1]


def suffix_from(route: tuple, node: int) -> tuple:
    """Suffix of ``route`` starting at ``node``."""
    return route[route.index(node):]


def pred(node: int, route: tuple):
    i = route.index(node)
    return route[i - 1] if i > 0 else None


def succ(node: int, route: tuple):
    i = route.index(node)
    return route[i + 1] if i + 1 < len(route) else None


def format_route(route, destination=None) -> str:
    if not route:
        return "-"
    return ",".join("d" if destination is not None and n == destination else str(n) for n in route)


def parse_route(text: str, destination=None, lineno=None) -> tuple:
    text = text.strip()
    if text.lower() in _EMPTY_SPELLINGS:
        return EMPTY
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok == "d":
            if destination is None:
                raise ParseError("'d' used before the destination is known", lineno)
            out.append(destination)
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"bad node id {tok!r} in route {text!r}", lineno) from None
    return tuple(out)
