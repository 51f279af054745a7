"""Worklist analysis of temporal-state sets over a CFG."""

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .algebra import RHO, StateVector, vec_oplus
from .config import AnalysisConfig
from .contention import BlockPlan, ContentionSequence, Run, plan_block, schedule
from .errors import BudgetExceededError, InvariantViolation
from .pipeline import PipelineSpec
from .program import Access, Cfg, event_inventory
from .steps import StepCompiler
from .xdd import POS_INF, EventId, Xdd, XddStore, is_finite

logger = logging.getLogger(__name__)


class StateSet:
    """Deduplicated, insertion-ordered set of states sharing one time origin."""

    def __init__(self, base: str, states: Iterable[StateVector] = ()):
        self.base = base
        self._states: Dict[StateVector, None] = {}
        for s in states:
            self._states[s] = None

    def __len__(self) -> int:
        return len(self._states)

    def __iter__(self) -> Iterator[StateVector]:
        return iter(self._states)

    def __contains__(self, state: StateVector) -> bool:
        return state in self._states

    def add(self, state: StateVector) -> bool:
        if state in self._states:
            return False
        self._states[state] = None
        return True

    def update(self, other: "StateSet") -> List[StateVector]:
        """Add the members of ``other``; return the ones that were new."""
        if other.base != self.base:
            raise InvariantViolation(f"cannot merge states based at {other.base} into states based at {self.base}")
        return [s for s in other if self.add(s)]

    def reanchor(self, base: str) -> "StateSet":
        return StateSet(base, self)

    @property
    def states(self) -> List[StateVector]:
        return list(self._states)


@dataclass
class BlockTiming:
    """Time pointer at block exit, relative to the block's input origin, per input state."""

    block: str
    times: List[Xdd] = field(default_factory=list)
    worst: Optional[int] = None


@dataclass
class EventLifetime:
    base: str
    block: str
    born_at: int
    died_at: Optional[int]  # None while still alive at the block exit
    length: int


@dataclass
class BlockResult:
    block: str
    in_set: StateSet
    out_set: StateSet
    timing: BlockTiming
    pessimized: bool = False
    widened: bool = False


@dataclass
class PathStep:
    """One block of a replayed path: the time origin it passed on and its raw time pointer."""

    block: str
    base: Xdd
    rho: Xdd


@dataclass
class AnalysisResult:
    cfg: Cfg
    store: XddStore
    blocks: Dict[str, BlockResult]
    edges: Dict[Tuple[str, str], int]
    lifetimes: List[EventLifetime]
    iterations: int
    pessimized: bool
    widened: bool
    window: int = 0
    contention_traces: List[Tuple[str, List[Tuple[str, str, Xdd]]]] = field(default_factory=list)

    def block_times(self) -> Dict[str, int]:
        return {b: block_wcet(r.timing, self.store) for b, r in self.blocks.items()}


def block_wcet(timing: BlockTiming, store: XddStore) -> int:
    """Largest finite time over every state and configuration of ``timing``."""
    worst: Optional[int] = None
    for t in timing.times:
        if POS_INF in store.leaf_values(t):
            raise InvariantViolation(f"block {timing.block}: unscheduled time in {store.to_text(t)}")
        top = store.max_finite_leaf(t)
        if top is not None:
            worst = top if worst is None else max(worst, top)
    return worst if worst is not None else 0


def rebase(state: StateVector, t: Xdd) -> StateVector:
    """Move the time origin of ``state`` to ``t``; ``state.map(otimes t)`` restores it."""
    store = state.store
    return state.map(lambda h: store.oslash(h, t))


def restore(state: StateVector, t: Xdd) -> StateVector:
    store = state.store
    return state.map(lambda h: store.otimes(h, t))


class Analyzer:
    """Fixpoint analysis of one program on one pipeline."""

    def __init__(self, cfg: Cfg, pipeline: PipelineSpec, config: Optional[AnalysisConfig] = None,
                 store: Optional[XddStore] = None):
        self.cfg = cfg
        self.pipeline = pipeline
        self.config = config or AnalysisConfig()
        self.store = store or XddStore()
        self.inventory: List[Access] = event_inventory(cfg)
        for access in self.inventory:
            self.store.declare(access.base)
        self.accesses: Dict[str, Access] = {a.base: a for a in self.inventory}
        self.compiler = StepCompiler(pipeline, self.store)
        self.layout = self.compiler.layout
        window = self.config.contention_window
        self.window = pipeline.contention_window() if window is None else window
        first = pipeline.stage_names[0]
        self.floor_slot = f"{pipeline.program_order_stage(first)}.program"
        self._plans: Dict[str, BlockPlan] = {}

    # -- plans ----------------------------------------------------------------------

    def plan(self, block_id: str) -> BlockPlan:
        plan = self._plans.get(block_id)
        if plan is None:
            block = self.cfg.blocks[block_id]
            plan = plan_block(self.compiler, block.instructions, self.window, entry=block_id == self.cfg.entry)
            self._plans[block_id] = plan
        return plan

    def precompute(self) -> int:
        """Build every block plan and, when enabled, the matrices of its runs."""
        started = time.perf_counter()
        count = 0
        for block_id in self.cfg.order:
            plan = self.plan(block_id)
            if not self.config.use_matrices:
                continue
            for run in plan.runs:
                run.matrix(self.compiler)
                count += 1
            for seq in plan.windows:
                for bridge in seq.bridges:
                    bridge.matrix(self.compiler)
                    count += 1
        logger.info(f"Pre-computed {count} matrices in {time.perf_counter() - started:.3f}s")
        return count

    def initial_state(self) -> StateVector:
        return StateVector.initial(self.store, self.layout)

    # -- transfer -------------------------------------------------------------------

    def apply_block(self, block_id: str, state: StateVector,
                    lifetimes: Optional[List[EventLifetime]] = None,
                    traces: Optional[list] = None) -> StateVector:
        """Run the block on ``state`` without rebasing."""
        use_matrices = self.config.use_matrices
        tracker = _LifetimeTracker(self, block_id) if lifetimes is not None else None
        position = 0
        for item in self.plan(block_id).items:
            if isinstance(item, Run):
                state = item.apply(self.compiler, state, use_matrices)
                position = item.last_position(position)
            else:
                seq: ContentionSequence = item
                result = schedule(self.compiler, seq, state, use_matrices, trace=traces is not None)
                state = result.state
                position = seq.last.instruction.position
                if traces is not None:
                    traces.append((seq.me0.label, result.trace))
            if tracker is not None:
                tracker.checkpoint(position, state)
        if tracker is not None:
            lifetimes.extend(tracker.finish(len(self.cfg.blocks[block_id])))
        return state

    def rebase_base(self, state: StateVector) -> Xdd:
        """The time pointer itself: every configuration gets its own origin."""
        leaves = self.store.leaf_values(state.rho)
        if not all(is_finite(k) for k in leaves):
            raise InvariantViolation(f"time pointer is not finite everywhere: {self.store.to_text(state.rho)}")
        return state.rho

    def prune(self, state: StateVector) -> StateVector:
        """Replace slot values that cannot delay a later start time by -inf."""
        floor = state[self.floor_slot]
        keep = {self.layout.resolve(RHO), self.layout.resolve(self.floor_slot)}
        store = self.store
        slots = [h if i in keep else store.keep_above(h, floor) for i, h in enumerate(state.slots)]
        return StateVector(store, self.layout, slots)

    def transfer(self, block_id: str, state: StateVector, lifetimes=None, traces=None) -> Tuple[StateVector, Xdd, Xdd]:
        """Return (out state, raw time pointer, base) for one input state."""
        raw = self.apply_block(block_id, state, lifetimes, traces)
        base = self.rebase_base(raw)
        out = rebase(raw, base)
        if self.config.prune_stale:
            out = self.prune(out)
        return out, raw.rho, base

    # -- generations ------------------------------------------------------------------

    def generation_cap(self, base: str) -> Tuple[int, bool]:
        """Highest generation of events of ``base`` and whether max_gen is what limits it."""
        bound = self.cfg.bound_product(self.accesses[base].block) - 1
        return min(self.config.max_gen, bound), self.config.max_gen < bound

    def generation_relabel(self, events: Iterable[EventId],
                           header: str) -> Tuple[Dict[EventId, EventId], set, bool]:
        """Renaming that ages the events of the loop of ``header`` by one generation.

        Events already at their cap are eliminated instead; the flag tells
        whether max_gen, rather than the loop bounds, forced that.
        """
        loop = self.cfg.loops[header]
        rename: Dict[EventId, EventId] = {}
        eliminate = set()
        pessimized = False
        for e in events:
            access = self.accesses.get(e.base)
            if access is None or access.block not in loop.body:
                continue
            cap, forced = self.generation_cap(e.base)
            if e.generation >= cap:
                eliminate.add(e)
                pessimized = pessimized or forced
            else:
                rename[e] = self.store.event(e.base, e.generation + 1)
        return rename, eliminate, pessimized

    def bump_generation(self, state: StateVector, header: str) -> Tuple[StateVector, bool]:
        """Age the events of the loop of ``header`` by one generation."""
        events = set()
        for h in state.slots:
            events |= self.store.support(h)
        rename, eliminate, pessimized = self.generation_relabel(events, header)
        if not rename and not eliminate:
            return state, False
        if pessimized:
            logger.warning(f"Generation cap {self.config.max_gen} reached in loop {header}; events merged")
        store = self.store
        return state.map(lambda h: store.relabel(h, rename, eliminate)), pessimized

    def along_edge(self, source: str, target: str, state: StateVector) -> Tuple[StateVector, bool]:
        if self.cfg.is_back_edge(source, target):
            return self.bump_generation(state, target)
        return state, False

    # -- fixpoint -----------------------------------------------------------------------

    def run(self) -> AnalysisResult:
        cfg = self.cfg
        cap = self.config.max_states
        self.precompute()
        order = {b: i for i, b in enumerate(cfg.order)}
        in_sets = {b: StateSet(f"entry:{b}") for b in cfg.order}
        out_sets = {b: StateSet(f"exit:{b}") for b in cfg.order}
        timings = {b: BlockTiming(b) for b in cfg.order}
        done: Dict[str, set] = {b: set() for b in cfg.order}
        sent: Dict[Tuple[str, str], set] = {e: set() for e in cfg.edges}
        flags = {b: {"pessimized": False, "widened": False} for b in cfg.order}
        lifetimes: List[EventLifetime] = []
        traces: Optional[list] = [] if self.config.trace_contention else None
        contention_traces = []

        in_sets[cfg.entry].add(self.initial_state())
        queue = [(order[cfg.entry], cfg.entry)]
        queued = {cfg.entry}
        iterations = 0
        while queue:
            _, b = heapq.heappop(queue)
            queued.discard(b)
            iterations += 1
            if iterations > self.config.max_iterations:
                raise BudgetExceededError(f"iteration budget of {self.config.max_iterations} exhausted", b)
            fresh = [s for s in in_sets[b] if s not in done[b]]
            logger.debug(f"Visit {b}: {len(fresh)} new of {len(in_sets[b])} input states")
            for s in fresh:
                done[b].add(s)
                block_traces = [] if traces is not None else None
                out, raw_rho, _ = self.transfer(b, s, lifetimes, block_traces)
                timings[b].times.append(raw_rho)
                out_sets[b].add(out)
                if block_traces:
                    contention_traces.extend((f"{b}/{label}", t) for label, t in block_traces)
            if len(out_sets[b]) > cap:
                if not self.config.widen:
                    raise BudgetExceededError(f"{len(out_sets[b])} states exceed the cap of {cap}", b)
                joined = out_sets[b].states[0]
                for s in out_sets[b].states[1:]:
                    joined = vec_oplus(joined, s)
                logger.warning(f"Block {b}: {len(out_sets[b])} states widened into one")
                out_sets[b] = StateSet(out_sets[b].base, [joined])
                flags[b]["widened"] = True
            for c in cfg.successors(b):
                edge = (b, c)
                outgoing = StateSet(f"entry:{c}")
                for s in out_sets[b].reanchor(f"entry:{c}"):
                    if s in sent[edge]:
                        continue
                    sent[edge].add(s)
                    moved, pessimized = self.along_edge(b, c, s)
                    if pessimized:
                        flags[c]["pessimized"] = True
                    outgoing.add(moved)
                if in_sets[c].update(outgoing) and c not in queued:
                    heapq.heappush(queue, (order[c], c))
                    queued.add(c)
        logger.info(f"Fixpoint reached after {iterations} block visits")

        blocks = {}
        for b in cfg.order:
            timing = timings[b]
            timing.worst = block_wcet(timing, self.store)
            blocks[b] = BlockResult(b, in_sets[b], out_sets[b], timing, **flags[b])
        edges = {e: len(out_sets[e[0]]) for e in cfg.edges}
        return AnalysisResult(
            cfg=cfg,
            store=self.store,
            blocks=blocks,
            edges=edges,
            lifetimes=lifetimes,
            iterations=iterations,
            pessimized=any(f["pessimized"] for f in flags.values()),
            widened=any(f["widened"] for f in flags.values()),
            window=self.window,
            contention_traces=contention_traces,
        )

    def trace_path(self, path: Sequence[str]) -> List[PathStep]:
        """Replay one explicit path; per configuration, the total time of the path
        is the sum of the bases of all blocks but the last plus the last raw time.

        A back edge ages the recorded bases together with the state, so every
        step ends up named in the generations of the end of the path.
        """
        store = self.store
        steps: List[PathStep] = []
        state = self.initial_state()
        for k, b in enumerate(path):
            if k > 0 and self.cfg.is_back_edge(path[k - 1], b):
                events = set()
                for h in list(state.slots) + [x for s in steps for x in (s.base, s.rho)]:
                    events |= store.support(h)
                rename, eliminate, _ = self.generation_relabel(events, b)
                if rename or eliminate:
                    def age(h: Xdd) -> Xdd:
                        return store.relabel(h, rename, eliminate)

                    state = state.map(age)
                    steps = [PathStep(s.block, age(s.base), age(s.rho)) for s in steps]
            state, raw_rho, base = self.transfer(b, state)
            steps.append(PathStep(b, base, raw_rho))
        return steps


class _LifetimeTracker:
    """Follows events born in one block through the checkpoints of its plan."""

    def __init__(self, analyzer: Analyzer, block_id: str):
        self.analyzer = analyzer
        self.block_id = block_id
        self.alive: Dict[EventId, int] = {}
        self.records: List[EventLifetime] = []

    def checkpoint(self, position: int, state: StateVector) -> None:
        store = self.analyzer.store
        live = set()
        for h in state.slots:
            live |= store.support(h)
        for e in live:
            access = self.analyzer.accesses.get(e.base)
            if access is not None and access.block == self.block_id and e.generation == 0 and e not in self.alive:
                if not any(r.base == e.base for r in self.records):
                    self.alive[e] = access.position
        for e in [e for e in self.alive if e not in live]:
            born = self.alive.pop(e)
            self.records.append(EventLifetime(e.base, self.block_id, born, position, position - born))

    def finish(self, length: int) -> List[EventLifetime]:
        for e, born in self.alive.items():
            self.records.append(EventLifetime(e.base, self.block_id, born, None, length - born))
        return self.records


def analyze(cfg: Cfg, pipeline: PipelineSpec, config: Optional[AnalysisConfig] = None) -> AnalysisResult:
    return Analyzer(cfg, pipeline, config).run()
