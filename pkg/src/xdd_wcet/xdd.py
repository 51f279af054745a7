"""Execution decision diagrams.

An XDD is a reduced, ordered, hash-consed multi-terminal decision diagram.
Internal nodes test a micro-architectural event (absent on the ``lo`` branch,
present on the ``hi`` branch) and leaves hold extended integer times
(cycles, ``+inf`` or ``-inf``).

All diagrams live in an :class:`XddStore`, which owns the unique table, the
per-operator memo tables and the event registry. Handles are plain Python
objects compared by identity: two diagrams denote the same map from
configurations to times if and only if they are the same object.

The store is not synchronized; one analysis run uses it from one thread.
"""

import itertools
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import AbstractSet, Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from .errors import (
    InfiniteSubtrahendError,
    OrderingError,
    SupportTooLargeError,
    TimeOverflowError,
    UndefinedEventError,
)

logger = logging.getLogger(__name__)

ExtTime = Union[int, float]

POS_INF: float = math.inf
NEG_INF: float = -math.inf

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

MAX_EXPLICIT_SUPPORT = 20


def is_finite(k: ExtTime) -> bool:
    return k != POS_INF and k != NEG_INF


def _checked(k: int) -> int:
    if k < INT64_MIN or k > INT64_MAX:
        raise TimeOverflowError(f"time {k} does not fit in 64 bits")
    return k


def normalize_time(k: ExtTime) -> ExtTime:
    """Return the canonical representation of an extended time.

    Finite times are Python ints; infinities are the float infinities.
    """
    if isinstance(k, bool):
        raise TypeError("booleans are not times")
    if isinstance(k, int):
        return _checked(k)
    if isinstance(k, float):
        if math.isnan(k):
            raise TypeError("NaN is not a time")
        if math.isinf(k):
            return k
        if k.is_integer():
            return _checked(int(k))
    raise TypeError(f"not an extended integer time: {k!r}")


def ext_add(a: ExtTime, b: ExtTime) -> ExtTime:
    """Addition over Z u {+inf, -inf}; -inf absorbs everything, +inf absorbs finite values."""
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    if a == POS_INF or b == POS_INF:
        return POS_INF
    return _checked(a + b)


def ext_sub(a: ExtTime, b: ExtTime) -> ExtTime:
    if not is_finite(b):
        raise InfiniteSubtrahendError(f"cannot subtract {format_time(b)}")
    if not is_finite(a):
        return a
    return _checked(a - b)


def sched_me_time(me: ExtTime, fe: ExtTime) -> ExtTime:
    return me if me <= fe else POS_INF


def sched_fe_time(fe: ExtTime, me: ExtTime) -> ExtTime:
    return fe if fe < me else POS_INF


def above_time(k: ExtTime, floor: ExtTime) -> ExtTime:
    return k if k > floor else NEG_INF


def format_time(k: ExtTime) -> str:
    if k == POS_INF:
        return "+inf"
    if k == NEG_INF:
        return "-inf"
    return str(k)


# Binary leaf operators addressable by name; memo tables are keyed by these names.
OPERATORS: Dict[str, Callable[[ExtTime, ExtTime], ExtTime]] = {
    "max": max,
    "plus": ext_add,
    "min": min,
    "minus": ext_sub,
    "sched_me": sched_me_time,
    "sched_fe": sched_fe_time,
    "above": above_time,
}


@dataclass(frozen=True)
class EventId:
    """One occurrence of a micro-architectural event.

    ``sequence`` is the creation rank of ``base`` in its store; the event
    order is ``(generation, sequence)``.
    """

    base: str
    generation: int
    sequence: int = field(compare=False)

    @property
    def order_index(self) -> Tuple[int, int]:
        return (self.generation, self.sequence)

    def __str__(self) -> str:
        return f"{self.base}[{self.generation}]"


class Xdd:
    """Interned diagram handle. Build through :class:`XddStore`, never directly."""

    __slots__ = ("uid", "event", "lo", "hi", "value")

    def __init__(self, uid: int, event: Optional[EventId], lo: Optional["Xdd"],
                 hi: Optional["Xdd"], value: Optional[ExtTime]):
        self.uid = uid
        self.event = event
        self.lo = lo
        self.hi = hi
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.event is None

    def __repr__(self) -> str:
        if self.event is None:
            return f"Xdd(leaf={format_time(self.value)})"
        return f"Xdd(#{self.uid} {self.event})"


Configuration = Union[AbstractSet[EventId], Mapping]


@dataclass(frozen=True)
class ExplicitMap:
    """Total map from configurations over ``support`` to extended times."""

    support: Tuple[EventId, ...]
    table: Dict[FrozenSet[EventId], ExtTime]

    def __post_init__(self):
        if len(self.table) != 2 ** len(self.support):
            raise ValueError(
                f"explicit map over {len(self.support)} events needs "
                f"{2 ** len(self.support)} entries, got {len(self.table)}"
            )

    @classmethod
    def tabulate(cls, support: Iterable[EventId],
                 fn: Callable[[FrozenSet[EventId]], ExtTime]) -> "ExplicitMap":
        ordered = tuple(sorted(set(support), key=lambda e: e.order_index))
        table = {gamma: normalize_time(fn(gamma)) for gamma in configurations(ordered)}
        return cls(ordered, table)

    def __getitem__(self, gamma: AbstractSet[EventId]) -> ExtTime:
        return self.table[frozenset(e for e in gamma if e in self.support)]


def configurations(support: Iterable[EventId]) -> List[FrozenSet[EventId]]:
    """All subsets of ``support``, in a deterministic order."""
    events = list(support)
    result = []
    for bits in itertools.product((False, True), repeat=len(events)):
        result.append(frozenset(e for e, on in zip(events, bits) if on))
    return result


class XddStore:
    """Unique table, memo tables and event registry for one analysis run."""

    def __init__(self):
        self._next_uid = 0
        self._leaves: Dict[ExtTime, Xdd] = {}
        self._nodes: Dict[Tuple[EventId, int, int], Xdd] = {}
        self._memo: Dict[str, Dict[Tuple[int, int], Xdd]] = {name: {} for name in OPERATORS}
        self._support_cache: Dict[int, FrozenSet[EventId]] = {}
        self._sequence: Dict[str, int] = {}
        self.zero = self.leaf(NEG_INF)
        self.one = self.leaf(0)
        self.top = self.leaf(POS_INF)

    # -- events ---------------------------------------------------------------

    def declare(self, base: str) -> int:
        """Register an event base and return its creation rank."""
        if base not in self._sequence:
            self._sequence[base] = len(self._sequence)
        return self._sequence[base]

    def event(self, base: str, generation: int = 0) -> EventId:
        if generation < 0:
            raise ValueError("generation numbers are non-negative")
        return EventId(base, generation, self.declare(base))

    @property
    def bases(self) -> List[str]:
        return sorted(self._sequence, key=self._sequence.__getitem__)

    # -- construction -----------------------------------------------------------

    def _new(self, event, lo, hi, value) -> Xdd:
        handle = Xdd(self._next_uid, event, lo, hi, value)
        self._next_uid += 1
        return handle

    def leaf(self, k: ExtTime) -> Xdd:
        k = normalize_time(k)
        handle = self._leaves.get(k)
        if handle is None:
            handle = self._new(None, None, None, k)
            self._leaves[k] = handle
        return handle

    def node(self, event: EventId, lo: Xdd, hi: Xdd) -> Xdd:
        if lo is hi:
            return lo
        for child in (lo, hi):
            if child.event is not None and not event.order_index < child.event.order_index:
                raise OrderingError(f"{event} cannot sit above {child.event}")
        key = (event, lo.uid, hi.uid)
        handle = self._nodes.get(key)
        if handle is None:
            handle = self._new(event, lo, hi, None)
            self._nodes[key] = handle
        return handle

    def indicator(self, event: EventId, absent: ExtTime, present: ExtTime) -> Xdd:
        """Single-event diagram, e.g. ``NODE(ic, -inf, 0)`` for a bus-use mask."""
        return self.node(event, self.leaf(absent), self.leaf(present))

    def __len__(self) -> int:
        return len(self._leaves) + len(self._nodes)

    # -- operators --------------------------------------------------------------

    @staticmethod
    def _cofactors(f: Xdd, event: EventId) -> Tuple[Xdd, Xdd]:
        if f.event == event:
            return f.lo, f.hi
        return f, f

    def apply(self, op: str, f: Xdd, g: Xdd) -> Xdd:
        """Pointwise ``op`` over all configurations; ``op`` names an entry of OPERATORS."""
        return self._apply(OPERATORS[op], self._memo[op], f, g)

    def _apply(self, fn, memo, f: Xdd, g: Xdd) -> Xdd:
        if f.event is None and g.event is None:
            return self.leaf(fn(f.value, g.value))
        key = (f.uid, g.uid)
        result = memo.get(key)
        if result is not None:
            return result
        if g.event is None or (f.event is not None and f.event.order_index <= g.event.order_index):
            top = f.event
        else:
            top = g.event
        f0, f1 = self._cofactors(f, top)
        g0, g1 = self._cofactors(g, top)
        result = self.node(top, self._apply(fn, memo, f0, g0), self._apply(fn, memo, f1, g1))
        memo[key] = result
        return result

    def oplus(self, f: Xdd, g: Xdd) -> Xdd:
        if f is self.zero or f is g:
            return g
        if g is self.zero:
            return f
        return self.apply("max", f, g)

    def otimes(self, f: Xdd, g: Xdd) -> Xdd:
        if f is self.one:
            return g
        if g is self.one:
            return f
        if f is self.zero or g is self.zero:
            return self.zero
        return self.apply("plus", f, g)

    def ominus(self, f: Xdd, g: Xdd) -> Xdd:
        if f is self.top or f is g:
            return g
        if g is self.top:
            return f
        return self.apply("min", f, g)

    def oslash(self, f: Xdd, g: Xdd) -> Xdd:
        bad = [k for k in self.leaf_values(g) if not is_finite(k)]
        if bad:
            raise InfiniteSubtrahendError(f"subtrahend has infinite leaf {format_time(bad[0])}")
        if g is self.one:
            return f
        return self.apply("minus", f, g)

    def sched_me(self, f_me: Xdd, f_fe: Xdd) -> Xdd:
        """``f_me`` where it is not later than ``f_fe``, ``+inf`` elsewhere."""
        return self.apply("sched_me", f_me, f_fe)

    def sched_fe(self, f_fe: Xdd, f_me: Xdd) -> Xdd:
        """``f_fe`` where it is strictly earlier than ``f_me``, ``+inf`` elsewhere."""
        return self.apply("sched_fe", f_fe, f_me)

    def keep_above(self, f: Xdd, floor: Xdd) -> Xdd:
        """``f`` where it is strictly later than ``floor``, ``-inf`` elsewhere."""
        return self.apply("above", f, floor)

    def clear_memo(self) -> None:
        for memo in self._memo.values():
            memo.clear()
        self._support_cache.clear()

    # -- queries ----------------------------------------------------------------

    def eval(self, f: Xdd, gamma: Configuration) -> ExtTime:
        """Time of ``f`` under configuration ``gamma``.

        ``gamma`` is either the set of active events or a mapping from
        event to bool; a mapping must mention every event met on the way.
        """
        explicit = isinstance(gamma, Mapping)
        while f.event is not None:
            if explicit:
                if f.event not in gamma:
                    raise UndefinedEventError(f"configuration does not define {f.event}")
                active = bool(gamma[f.event])
            else:
                active = f.event in gamma
            f = f.hi if active else f.lo
        return f.value

    def support(self, f: Xdd) -> FrozenSet[EventId]:
        if f.event is None:
            return frozenset()
        cached = self._support_cache.get(f.uid)
        if cached is None:
            cached = self.support(f.lo) | self.support(f.hi) | {f.event}
            self._support_cache[f.uid] = cached
        return cached

    def _walk(self, f: Xdd) -> Iterable[Xdd]:
        seen = set()
        stack = [f]
        while stack:
            h = stack.pop()
            if h.uid in seen:
                continue
            seen.add(h.uid)
            yield h
            if h.event is not None:
                stack.append(h.hi)
                stack.append(h.lo)

    def leaf_values(self, f: Xdd) -> List[ExtTime]:
        return sorted({h.value for h in self._walk(f) if h.event is None})

    def max_finite_leaf(self, f: Xdd) -> Optional[int]:
        finite = [k for k in self.leaf_values(f) if is_finite(k)]
        return max(finite) if finite else None

    def size(self, f: Xdd) -> int:
        """Number of distinct handles (nodes and leaves) reachable from ``f``."""
        return sum(1 for _ in self._walk(f))

    # -- explicit maps ------------------------------------------------------------

    def to_explicit(self, f: Xdd, support: Iterable[EventId]) -> ExplicitMap:
        events = set(support)
        missing = self.support(f) - events
        if missing:
            raise UndefinedEventError(
                "support does not cover " + ", ".join(sorted(str(e) for e in missing))
            )
        if len(events) > MAX_EXPLICIT_SUPPORT:
            raise SupportTooLargeError(f"{len(events)} events exceed {MAX_EXPLICIT_SUPPORT}")
        return ExplicitMap.tabulate(events, lambda gamma: self.eval(f, gamma))

    def from_explicit(self, m: ExplicitMap) -> Xdd:
        if len(m.support) > MAX_EXPLICIT_SUPPORT:
            raise SupportTooLargeError(f"{len(m.support)} events exceed {MAX_EXPLICIT_SUPPORT}")
        events = sorted(m.support, key=lambda e: e.order_index)

        def build(i: int, active: FrozenSet[EventId]) -> Xdd:
            if i == len(events):
                return self.leaf(m.table[active])
            return self.node(events[i], build(i + 1, active), build(i + 1, active | {events[i]}))

        return build(0, frozenset())

    # -- relabeling -----------------------------------------------------------------

    def relabel(self, f: Xdd, rename: Mapping, eliminate: AbstractSet[EventId] = frozenset()) -> Xdd:
        """Rename events of ``f`` and drop the ones in ``eliminate``.

        ``rename`` must be injective on the support of ``f``. A dropped event
        is replaced by the maximum of its branches, an upper bound of both.
        The result is rebuilt in canonical order.
        """
        done: Dict[int, Xdd] = {}
        chosen: Dict[Tuple[EventId, int, int], Xdd] = {}

        def select(event: EventId, hi: Xdd, lo: Xdd) -> Xdd:
            key = (event, hi.uid, lo.uid)
            result = chosen.get(key)
            if result is not None:
                return result
            tops = [h.event for h in (hi, lo) if h.event is not None]
            first = min(tops, key=lambda e: e.order_index) if tops else None
            if first is None or event.order_index < first.order_index:
                result = self.node(event, lo, hi)
            else:
                hi0, hi1 = self._cofactors(hi, first)
                lo0, lo1 = self._cofactors(lo, first)
                result = self.node(first, select(event, hi0, lo0), select(event, hi1, lo1))
            chosen[key] = result
            return result

        def walk(h: Xdd) -> Xdd:
            if h.event is None:
                return h
            result = done.get(h.uid)
            if result is not None:
                return result
            lo, hi = walk(h.lo), walk(h.hi)
            if h.event in eliminate:
                result = self.oplus(lo, hi)
            else:
                result = select(rename.get(h.event, h.event), hi, lo)
            done[h.uid] = result
            return result

        return walk(f)

    # -- debug output ---------------------------------------------------------------

    def to_text(self, f: Xdd) -> str:
        """Stable nested text form, e.g. ``dc2[0](lo=7, hi=ic0[0](lo=16, hi=25))``."""
        if f.event is None:
            return format_time(f.value)
        return f"{f.event}(lo={self.to_text(f.lo)}, hi={self.to_text(f.hi)})"

    def to_dot(self, f: Xdd, name: str = "xdd") -> str:
        lines = [f"digraph {name} {{"]
        for h in sorted(self._walk(f), key=lambda h: h.uid):
            if h.event is None:
                lines.append(f'  n{h.uid} [shape=box, label="{format_time(h.value)}"];')
            else:
                lines.append(f'  n{h.uid} [shape=circle, label="{h.event}"];')
                lines.append(f"  n{h.uid} -> n{h.lo.uid} [style=dashed];")
                lines.append(f"  n{h.uid} -> n{h.hi.uid};")
        lines.append("}")
        return "\n".join(lines) + "\n"
