"""Temporal states and transition matrices over the (max, +) XDD semiring.

Vectors are rows: applying a matrix is ``S' = S . M`` with
``S'[j] = max_i S[i] + M[i, j]``. The matrix of a step sequence ``s1; s2``
is therefore ``M(s1) . M(s2)``.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import LayoutMismatchError, UnresolvedResourceError
from .xdd import Xdd, XddStore

logger = logging.getLogger(__name__)

RHO = "rho"

SlotRef = Union[int, str]


class TimingPoint(str, Enum):
    """Whether a slot records the start or the exit time of its last user."""

    START = "start"
    END = "end"


@dataclass(frozen=True)
class Slot:
    name: str
    timing: TimingPoint


class SlotLayout:
    """Named, ordered slots of a temporal state; ``rho`` is always present."""

    def __init__(self, slots: Sequence[Slot]):
        self.slots: Tuple[Slot, ...] = tuple(slots)
        self._index = {}
        for i, slot in enumerate(self.slots):
            if slot.name in self._index:
                raise ValueError(f"duplicate slot name {slot.name!r}")
            self._index[slot.name] = i
        if RHO not in self._index:
            raise ValueError("a slot layout needs the time pointer slot 'rho'")

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(slot.name for slot in self.slots)

    @property
    def rho(self) -> int:
        return self._index[RHO]

    def __len__(self) -> int:
        return len(self.slots)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, SlotLayout) and self.slots == other.slots

    def __hash__(self) -> int:
        return hash(self.slots)

    def resolve(self, ref: SlotRef) -> int:
        if isinstance(ref, str):
            try:
                return self._index[ref]
            except KeyError:
                raise UnresolvedResourceError(f"no slot named {ref!r}") from None
        if not 0 <= ref < len(self.slots):
            raise UnresolvedResourceError(f"slot index {ref} outside layout of size {len(self.slots)}")
        return ref


def _check_same(a, b) -> None:
    if a.layout != b.layout:
        raise LayoutMismatchError("operands are built over different slot layouts")
    if a.store is not b.store:
        raise LayoutMismatchError("operands belong to different diagram stores")


class StateVector:
    """Temporal state: one diagram per slot of ``layout``."""

    __slots__ = ("store", "layout", "slots")

    def __init__(self, store: XddStore, layout: SlotLayout, slots: Iterable[Xdd]):
        self.store = store
        self.layout = layout
        self.slots: Tuple[Xdd, ...] = tuple(slots)
        if len(self.slots) != len(layout):
            raise LayoutMismatchError(f"state has {len(self.slots)} slots, layout has {len(layout)}")

    @classmethod
    def initial(cls, store: XddStore, layout: SlotLayout) -> "StateVector":
        """All slots at zero (no constraint) except the time pointer at one (time 0)."""
        slots = [store.zero] * len(layout)
        slots[layout.rho] = store.one
        return cls(store, layout, slots)

    @classmethod
    def zeros(cls, store: XddStore, layout: SlotLayout) -> "StateVector":
        return cls(store, layout, [store.zero] * len(layout))

    def __getitem__(self, ref: SlotRef) -> Xdd:
        return self.slots[self.layout.resolve(ref)]

    @property
    def rho(self) -> Xdd:
        return self.slots[self.layout.rho]

    def replace(self, ref: SlotRef, value: Xdd) -> "StateVector":
        slots = list(self.slots)
        slots[self.layout.resolve(ref)] = value
        return StateVector(self.store, self.layout, slots)

    def map(self, fn) -> "StateVector":
        return StateVector(self.store, self.layout, [fn(h) for h in self.slots])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StateVector)
            and self.layout == other.layout
            and all(a is b for a, b in zip(self.slots, other.slots))
        )

    def __hash__(self) -> int:
        return hash(tuple(h.uid for h in self.slots))

    def to_text(self) -> str:
        return "\n".join(
            f"{name} = {self.store.to_text(h)}" for name, h in zip(self.layout.names, self.slots)
        )


class TransitionMatrix:
    """Square matrix of diagrams, dense, tied to one layout."""

    __slots__ = ("store", "layout", "cells")

    def __init__(self, store: XddStore, layout: SlotLayout, cells: np.ndarray):
        n = len(layout)
        if cells.shape != (n, n):
            raise LayoutMismatchError(f"matrix shape {cells.shape} does not match layout size {n}")
        self.store = store
        self.layout = layout
        self.cells = cells

    @classmethod
    def identity(cls, store: XddStore, layout: SlotLayout) -> "TransitionMatrix":
        n = len(layout)
        cells = np.full((n, n), store.zero, dtype=object)
        for i in range(n):
            cells[i, i] = store.one
        return cls(store, layout, cells)

    def copy(self) -> "TransitionMatrix":
        return TransitionMatrix(self.store, self.layout, self.cells.copy())

    def __getitem__(self, key: Tuple[SlotRef, SlotRef]) -> Xdd:
        i, j = key
        return self.cells[self.layout.resolve(i), self.layout.resolve(j)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransitionMatrix) or self.layout != other.layout:
            return False
        return all(a is b for a, b in zip(self.cells.flat, other.cells.flat))

    def __hash__(self) -> int:
        return hash(tuple(h.uid for h in self.cells.flat))

    def __matmul__(self, other: "TransitionMatrix") -> "TransitionMatrix":
        return mat_mul(self, other)

    def to_text(self) -> str:
        """Slot-named grid; ``.`` is the zero element and ``1`` the unit."""
        zero, one = self.store.zero, self.store.one
        names = self.layout.names

        def cell(h: Xdd) -> str:
            if h is zero:
                return "."
            if h is one:
                return "1"
            return self.store.to_text(h)

        width = max(len(name) for name in names)
        lines = []
        for i, name in enumerate(names):
            row = [f"{names[j]}:{cell(h)}" for j, h in enumerate(self.cells[i]) if h is not zero]
            lines.append(f"{name.ljust(width)} | " + " ".join(row))
        return "\n".join(lines)


def dot(u: StateVector, v: StateVector) -> Xdd:
    _check_same(u, v)
    store = u.store
    acc = store.zero
    for a, b in zip(u.slots, v.slots):
        acc = store.oplus(acc, store.otimes(a, b))
    return acc


def vec_oplus(u: StateVector, v: StateVector) -> StateVector:
    _check_same(u, v)
    store = u.store
    return StateVector(store, u.layout, [store.oplus(a, b) for a, b in zip(u.slots, v.slots)])


def _row_support(m: TransitionMatrix, i: int) -> List[int]:
    zero = m.store.zero
    return [k for k in range(len(m.layout)) if m.cells[i, k] is not zero]


def vec_mat(s: StateVector, m: TransitionMatrix) -> StateVector:
    _check_same(s, m)
    store = s.store
    zero = store.zero
    n = len(s.layout)
    out = [zero] * n
    for i, si in enumerate(s.slots):
        if si is zero:
            continue
        for j in _row_support(m, i):
            out[j] = store.oplus(out[j], store.otimes(si, m.cells[i, j]))
    return StateVector(store, s.layout, out)


def mat_mul(b: TransitionMatrix, c: TransitionMatrix) -> TransitionMatrix:
    _check_same(b, c)
    store = b.store
    zero = store.zero
    n = len(b.layout)
    c_rows = [_row_support(c, k) for k in range(n)]
    cells = np.full((n, n), zero, dtype=object)
    for i in range(n):
        for k in _row_support(b, i):
            bik = b.cells[i, k]
            for j in c_rows[k]:
                cells[i, j] = store.oplus(cells[i, j], store.otimes(bik, c.cells[k, j]))
    return TransitionMatrix(store, b.layout, cells)


def mat_product(store: XddStore, layout: SlotLayout, matrices: Iterable[TransitionMatrix]) -> TransitionMatrix:
    result = TransitionMatrix.identity(store, layout)
    for m in matrices:
        result = mat_mul(result, m)
    return result


# -- matrices of the transition functions ----------------------------------------


def m_reset(store: XddStore, layout: SlotLayout) -> TransitionMatrix:
    m = TransitionMatrix.identity(store, layout)
    m.cells[layout.rho, layout.rho] = store.zero
    return m


def m_wait(store: XddStore, layout: SlotLayout, x: SlotRef) -> TransitionMatrix:
    m = TransitionMatrix.identity(store, layout)
    m.cells[layout.resolve(x), layout.rho] = store.one
    return m


def m_move(store: XddStore, layout: SlotLayout, src: SlotRef, dest: SlotRef) -> TransitionMatrix:
    s, d = layout.resolve(src), layout.resolve(dest)
    m = TransitionMatrix.identity(store, layout)
    if s == d:
        return m
    m.cells[d, d] = store.zero
    m.cells[s, d] = store.one
    return m


def m_consume(store: XddStore, layout: SlotLayout, latency: Xdd) -> TransitionMatrix:
    m = TransitionMatrix.identity(store, layout)
    m.cells[layout.rho, layout.rho] = latency
    return m


# -- the same functions applied directly to a state --------------------------------


def tau_reset(s: StateVector) -> StateVector:
    return s.replace(s.layout.rho, s.store.zero)


def tau_wait(s: StateVector, x: SlotRef) -> StateVector:
    return s.replace(s.layout.rho, s.store.oplus(s.rho, s[x]))


def tau_move(s: StateVector, src: SlotRef, dest: SlotRef) -> StateVector:
    return s.replace(dest, s[src])


def tau_consume(s: StateVector, latency: Xdd) -> StateVector:
    return s.replace(s.layout.rho, s.store.otimes(s.rho, latency))
