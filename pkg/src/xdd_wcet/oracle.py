"""Brute-force reference timings.

Everything here works on plain integers for one configuration at a time:
the execution graph of an instruction sequence is built directly from the
pipeline description, solved in topological order, and bus grants come from
a first-come-first-served simulation. Nothing in this module uses decision
diagrams, temporal states or step programs.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .errors import InvariantViolation, OracleGuardError
from .pipeline import MEMORY_CLASSES, PipelineSpec
from .program import Cfg, Instruction

logger = logging.getLogger(__name__)

ORACLE_GUARD = 2 ** 14

Vertex = Tuple[int, str]  # (index in the instruction sequence, stage)


@dataclass
class ScalarXg:
    """Execution graph with fixed latencies; ``edges[w]`` lists ``(v, delta)``."""

    vertices: List[Vertex]
    edges: Dict[Vertex, List[Tuple[Vertex, int]]]
    latency: Dict[Vertex, int] = field(default_factory=dict)


def solve_xg(g: ScalarXg) -> Dict[Vertex, Tuple[int, int]]:
    """Start and end time of every vertex: ``start(w) = max(start(v) + delta * latency(v))``."""
    graph = nx.DiGraph()
    graph.add_nodes_from(g.vertices)
    for w, preds in g.edges.items():
        for v, _ in preds:
            graph.add_edge(v, w)
    try:
        order = list(nx.topological_sort(graph))
    except nx.NetworkXUnfeasible as e:
        raise InvariantViolation("execution graph has a cycle") from e
    times: Dict[Vertex, Tuple[int, int]] = {}
    for w in order:
        start = 0
        for v, delta in g.edges.get(w, []):
            start = max(start, times[v][0] + delta * g.latency[v])
        times[w] = (start, start + g.latency[w])
    return times


# -- execution graph construction ------------------------------------------------------


def _unit_at(p: PipelineSpec, ins: Instruction, stage: str) -> Optional[str]:
    return p.timing(ins.cls).unit if stage == p.execute_stage else None


def _initiates_fetch(p: PipelineSpec, ins: Instruction) -> bool:
    return ins.position % p.memory.fetch_block_size == 0


def xg_edges(seq: Sequence[Instruction], p: PipelineSpec) -> Dict[Vertex, List[Tuple[Vertex, int]]]:
    """Dependencies of every vertex of ``seq`` on earlier vertices."""
    stages = p.stage_names
    rank = {s: k for k, s in enumerate(stages)}
    edges: Dict[Vertex, List[Tuple[Vertex, int]]] = {}

    def earlier(j: int, sj: str, i: int, si: str) -> bool:
        return j < i or (j == i and rank[sj] < rank[si])

    for i, ins in enumerate(seq):
        timing = p.timing(ins.cls)
        for s in stages:
            preds: List[Tuple[Vertex, int]] = []
            unit = _unit_at(p, ins, s)

            # program order
            if unit is not None:
                users = [j for j in range(i) if _unit_at(p, seq[j], s) == unit]
                if users:
                    preds.append(((users[-1], s), 0))
            else:
                x = p.program_order_stage(s)
                users = [j for j in range(i + 1)
                         if earlier(j, x, i, s) and _unit_at(p, seq[j], x) is None]
                if users:
                    preds.append(((users[-1], x), 0))

            # capacity order
            if unit is not None:
                users = [j for j in range(i) if _unit_at(p, seq[j], s) == unit]
                depth = p.unit(unit).count
            else:
                users = [j for j in range(i) if _unit_at(p, seq[j], s) is None]
                depth = p.stage(s).width
            if len(users) >= depth:
                preds.append(((users[-depth], s), 1))

            # pipeline order
            prev = p.previous_stage(s)
            if prev is not None:
                preds.append(((i, prev), 1))

            # queue capacity
            q = p.queue_after(s)
            if q is not None and i - q.capacity >= 0:
                preds.append(((i - q.capacity, p.next_stage(s)), 0))

            # fetch order
            if s == p.memory.fetch_stage:
                initiators = [j for j in range(i) if _initiates_fetch(p, seq[j])]
                if initiators:
                    preds.append(((initiators[-1], s), 1))

            # memory order
            if s == p.memory.memory_stage and ins.cls in MEMORY_CLASSES:
                for kind in MEMORY_CLASSES:
                    users = [j for j in range(i) if seq[j].cls == kind]
                    if users:
                        preds.append(((users[-1], s), 1))

            # data dependencies
            if s == timing.reads_at:
                for r in sorted(ins.regs_read):
                    writers = [
                        j for j in range(i + 1)
                        if r in seq[j].regs_written
                        and p.timing(seq[j].cls).writes_at is not None
                        and earlier(j, p.timing(seq[j].cls).writes_at, i, s)
                    ]
                    if writers:
                        j = writers[-1]
                        preds.append(((j, p.timing(seq[j].cls).writes_at), 1))

            edges[(i, s)] = preds
    return edges


def build_xg(seq: Sequence[Instruction], p: PipelineSpec) -> ScalarXg:
    """Execution graph of ``seq`` with hit latencies everywhere."""
    vertices = [(i, s) for i in range(len(seq)) for s in p.stage_names]
    latency = {(i, s): _hit_latency(p, seq[i], s) for i, s in vertices}
    return ScalarXg(vertices, xg_edges(seq, p), latency)


def _hit_latency(p: PipelineSpec, ins: Instruction, stage: str) -> int:
    if stage == p.execute_stage:
        return p.timing(ins.cls).latency
    return p.stage(stage).latency


# -- bus simulation -------------------------------------------------------------------------


@dataclass
class BusSchedule:
    me_grant: Optional[int]
    fe_grants: List[Optional[int]]


def simulate_contention(me_ready: int, fe_ready: Sequence[int], fe_uses: Sequence[bool],
                        bus_latency: int, me_uses: bool = True, complete: bool = True) -> BusSchedule:
    """First-come-first-served bus with priority to the memory access on ties.

    ``fe_ready`` are the request times of the fetches in program order. When
    ``complete`` is false the fetch list is only a prefix and the memory
    access stays unscheduled (None) if it has not been granted within it.
    """
    bus_free: Optional[int] = None
    me_grant: Optional[int] = None
    grants: List[Optional[int]] = []
    for ready, uses in zip(fe_ready, fe_uses):
        if not uses:
            grants.append(None)
            continue
        if me_uses and me_grant is None and me_ready <= ready:
            me_grant = me_ready if bus_free is None else max(me_ready, bus_free)
            bus_free = me_grant + bus_latency
        grant = ready if bus_free is None else max(ready, bus_free)
        grants.append(grant)
        bus_free = grant + bus_latency
    if complete and me_uses and me_grant is None:
        me_grant = me_ready if bus_free is None else max(me_ready, bus_free)
    return BusSchedule(me_grant, grants)


# -- paths and configurations ------------------------------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    """One dynamic NC access along a path; ``generation`` counts the enclosing
    loop restarts that follow it on the path."""

    base: str
    index: int  # instruction index in the path's instruction sequence
    kind: str
    generation: int

    @property
    def key(self) -> Tuple[str, int]:
        return (self.base, self.generation)


@dataclass(frozen=True)
class OracleEntry:
    path: Tuple[str, ...]
    active: FrozenSet[Tuple[str, int]]
    total: int


@dataclass
class _Window:
    me: Vertex
    fes: List[Vertex]


class PathTimer:
    """Times one instruction sequence under every configuration of its accesses."""

    def __init__(self, seq: Sequence[Instruction], block_spans: Sequence[Tuple[int, int]],
                 p: PipelineSpec, n_max: Optional[int] = None):
        self.seq = list(seq)
        self.p = p
        self.n_max = p.contention_window() if n_max is None else n_max
        self.edges = xg_edges(self.seq, p)
        self.order = [(i, s) for i in range(len(self.seq)) for s in p.stage_names]
        self.windows: List[_Window] = []
        self._window_of: Dict[Vertex, Tuple[int, int]] = {}
        if p.bus.shared:
            for lo, hi in block_spans:
                self._find_windows(lo, hi)

    # static structure

    def access_kind(self, v: Vertex) -> Optional[str]:
        i, s = v
        ins = self.seq[i]
        if s == self.p.memory.fetch_stage and _initiates_fetch(self.p, ins):
            return "fetch"
        if s == self.p.memory.memory_stage and ins.cls in MEMORY_CLASSES:
            return "data"
        return None

    def classification(self, v: Vertex) -> Optional[str]:
        kind = self.access_kind(v)
        if kind is None:
            return None
        ins = self.seq[v[0]]
        return ins.fetch if kind == "fetch" else ins.data

    def bus_capable(self, v: Vertex) -> bool:
        return self.p.bus.shared and self.classification(v) in ("AM", "NC")

    def occurrence_base(self, v: Vertex) -> Optional[str]:
        if self.classification(v) != "NC":
            return None
        ins = self.seq[v[0]]
        return f"{ins.block}:{ins.id}:{self.access_kind(v)}"

    def _find_windows(self, lo: int, hi: int) -> None:
        vertices = [v for v in self.order if lo <= v[0] < hi]
        for k, me in enumerate(vertices):
            if self.access_kind(me) != "data" or not self.bus_capable(me):
                continue
            tainted: Set[Vertex] = set()
            fes: List[Vertex] = []
            for w in vertices[k + 1:]:
                if len(fes) >= self.n_max:
                    break
                hit = any((u == me and d == 1) or u in tainted for u, d in self.edges[w])
                if self.bus_capable(w) and self.access_kind(w) == "data":
                    break
                if self.bus_capable(w) and self.access_kind(w) == "fetch":
                    if hit:
                        break
                    fes.append(w)
                if hit:
                    tainted.add(w)
            index = len(self.windows)
            self.windows.append(_Window(me, fes))
            self._window_of[me] = (index, -1)
            for n, fe in enumerate(fes):
                self._window_of[fe] = (index, n)

    # timing under one configuration

    def run(self, active: Set[Vertex]) -> Dict[Vertex, Tuple[int, int]]:
        """Start and end of every vertex; ``active`` are the NC accesses that miss."""
        p = self.p
        start: Dict[Vertex, int] = {}
        end: Dict[Vertex, int] = {}
        fe_grant: Dict[Tuple[int, int], Optional[int]] = {}
        me_grant: Dict[int, Optional[int]] = {}

        def misses(v: Vertex) -> bool:
            c = self.classification(v)
            return c == "AM" or (c == "NC" and v in active)

        def uses_bus(v: Vertex) -> bool:
            return self.bus_capable(v) and misses(v)

        def get_start(v: Vertex) -> int:
            if v not in start:
                t = 0
                for u, d in self.edges[v]:
                    t = max(t, get_end(u) if d else get_start(u))
                start[v] = t
            return start[v]

        def window_schedule(w: int, upto: int, complete: bool) -> BusSchedule:
            win = self.windows[w]
            fes = win.fes[:upto]
            return simulate_contention(
                get_start(win.me), [get_start(f) for f in fes], [uses_bus(f) for f in fes],
                p.bus.latency, me_uses=uses_bus(win.me), complete=complete,
            )

        def grant(v: Vertex) -> int:
            where = self._window_of.get(v)
            if where is None:
                return get_start(v)
            w, n = where
            if n >= 0:
                if (w, n) not in fe_grant:
                    fe_grant[(w, n)] = window_schedule(w, n + 1, complete=False).fe_grants[n]
                return fe_grant[(w, n)]
            if w not in me_grant:
                win = self.windows[w]
                result = None
                for k in range(1, len(win.fes) + 1):
                    result = window_schedule(w, k, complete=False).me_grant
                    if result is not None:
                        break
                if result is None:
                    result = window_schedule(w, len(win.fes), complete=True).me_grant
                me_grant[w] = result
            return me_grant[w]

        def get_end(v: Vertex) -> int:
            if v not in end:
                i, s = v
                hit = _hit_latency(p, self.seq[i], s)
                if uses_bus(v):
                    end[v] = grant(v) + max(p.bus.latency, hit)
                elif not p.bus.shared and misses(v):
                    end[v] = get_start(v) + p.memory.miss_latency
                else:
                    end[v] = get_start(v) + hit
            return end[v]

        for v in self.order:
            get_end(v)
        return {v: (start[v], end[v]) for v in self.order}

    def total(self, active: Set[Vertex]) -> int:
        if not self.order:
            return 0
        return self.run(active)[self.order[-1]][1]


def enumerate_paths(cfg: Cfg, limit: int = ORACLE_GUARD) -> List[Tuple[str, ...]]:
    """Complete entry-to-exit paths with every loop header visited at most
    ``bound`` times per entry into its loop."""
    paths: List[Tuple[str, ...]] = []

    def visit(path: List[str], counts: Dict[str, int]) -> None:
        if len(paths) > limit:
            raise OracleGuardError(f"more than {limit} paths")
        b = path[-1]
        if b == cfg.exit:
            paths.append(tuple(path))
            return
        for c in cfg.successors(b):
            nxt = dict(counts)
            if c in cfg.loops:
                nxt[c] = nxt.get(c, 0) + 1 if cfg.is_back_edge(b, c) else 1
                if nxt[c] > cfg.loops[c].bound:
                    continue
            path.append(c)
            visit(path, nxt)
            path.pop()

    visit([cfg.entry], {})
    return paths


def path_sequence(cfg: Cfg, path: Sequence[str]) -> Tuple[List[Instruction], List[Tuple[int, int]]]:
    seq: List[Instruction] = []
    spans = []
    for b in path:
        lo = len(seq)
        seq.extend(cfg.blocks[b].instructions)
        spans.append((lo, len(seq)))
    return seq, spans


def path_occurrences(cfg: Cfg, path: Sequence[str], timer: PathTimer,
                     spans: Sequence[Tuple[int, int]]) -> Dict[Vertex, Occurrence]:
    """NC accesses along the path, keyed by vertex, with their generation numbers."""
    result: Dict[Vertex, Occurrence] = {}
    for k, (lo, hi) in enumerate(spans):
        block = path[k]
        enclosing = {loop.header for loop in cfg.enclosing_loops(block)}
        later = sum(
            1 for q in range(k + 1, len(path))
            if path[q] in enclosing and cfg.is_back_edge(path[q - 1], path[q])
        )
        for v in timer.order:
            if lo <= v[0] < hi:
                base = timer.occurrence_base(v)
                if base is not None:
                    result[v] = Occurrence(base, v[0], timer.access_kind(v), later)
    return result


def enumerate_timings(cfg: Cfg, p: PipelineSpec, n_max: Optional[int] = None,
                      guard: int = ORACLE_GUARD) -> List[OracleEntry]:
    """Total time of every (path, configuration) pair."""
    plans = []
    pairs = 0
    for path in enumerate_paths(cfg, guard):
        seq, spans = path_sequence(cfg, path)
        timer = PathTimer(seq, spans, p, n_max)
        occurrences = path_occurrences(cfg, path, timer, spans)
        pairs += 2 ** len(occurrences)
        if pairs > guard:
            raise OracleGuardError(f"more than {guard} path and configuration pairs")
        plans.append((path, timer, occurrences))

    entries: List[OracleEntry] = []
    for path, timer, occurrences in plans:
        vertices = list(occurrences)
        for bits in itertools.product((False, True), repeat=len(vertices)):
            active = {v for v, on in zip(vertices, bits) if on}
            total = timer.total(active)
            keys = frozenset(occurrences[v].key for v in active)
            entries.append(OracleEntry(path, keys, total))
    logger.debug(f"Oracle enumerated {len(entries)} path and configuration pairs")
    return entries


def format_entries(entries: Sequence[OracleEntry]) -> str:
    lines = []
    for e in entries:
        active = ",".join(f"{b}[{g}]" for b, g in sorted(e.active)) or "-"
        lines.append(f"{'>'.join(e.path)}  {{{active}}}  {e.total}")
    return "\n".join(lines)
