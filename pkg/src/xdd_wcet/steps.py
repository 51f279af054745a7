"""Resources, timing step programs and their compilation to transition matrices.

Every (instruction, stage) vertex runs a step program of the form::

    WAIT*  RELEASE(at start)*  [bus access]  CONSUME  RELEASE(at exit)*

with an implicit reset of the time pointer in front. A bus access is a
CONSUME step flagged with the configurations that use the bus; on its own it
brings the completion of the access to the end of its bus transaction on
those configurations. The contention analysis replaces it when the access
can be overtaken.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .algebra import (
    RHO,
    Slot,
    SlotLayout,
    StateVector,
    TimingPoint,
    TransitionMatrix,
    m_consume,
    m_move,
    m_reset,
    m_wait,
    mat_product,
)
from .errors import UnresolvedResourceError
from .pipeline import MEMORY_CLASSES, PipelineSpec
from .program import Instruction
from .xdd import Xdd, XddStore

logger = logging.getLogger(__name__)

FETCH = "fetch"


class ResourceKind(str, Enum):
    SINGLE = "single"
    FIFO = "fifo"
    REGISTER = "register"
    MEMORY_ORDER = "memory-order"
    FETCH_ORDER = "fetch-order"


@dataclass(frozen=True)
class Resource:
    """A pipeline resource and the temporal-state slots recording its last uses.

    Waiting reads the oldest slot. Releasing shifts the slots one place
    towards the oldest, from the oldest end down, then stores the time
    pointer in the first slot.
    """

    name: str
    kind: ResourceKind
    slots: Tuple[str, ...]
    timing: TimingPoint

    @property
    def wait_slot(self) -> str:
        return self.slots[-1]

    @property
    def release_moves(self) -> List[Tuple[str, str]]:
        moves = [(self.slots[k - 1], self.slots[k]) for k in range(len(self.slots) - 1, 0, -1)]
        moves.append((RHO, self.slots[0]))
        return moves


class StepKind(str, Enum):
    WAIT = "WAIT"
    RELEASE = "RELEASE"
    CONSUME = "CONSUME"


@dataclass(frozen=True)
class Step:
    kind: StepKind
    resource: Optional[Resource] = None
    latency: Optional[Xdd] = None
    bus_use: Optional[Xdd] = None

    @property
    def is_bus_access(self) -> bool:
        return self.bus_use is not None

    def describe(self, store: XddStore) -> str:
        if self.kind is StepKind.CONSUME:
            text = f"CONSUME({store.to_text(self.latency)})"
            return f"{text} [bus]" if self.is_bus_access else text
        return f"{self.kind.value}({self.resource.name})"


@dataclass(frozen=True)
class StepProgram:
    """Step program of one (instruction, stage) vertex."""

    instruction: Instruction
    stage: str
    steps: Tuple[Step, ...]
    access: Optional[str] = None  # "fetch" or "data" when the vertex may use the bus

    @property
    def bus_step(self) -> Optional[int]:
        for i, step in enumerate(self.steps):
            if step.is_bus_access:
                return i
        return None

    def split_access(self) -> Tuple["StepProgram", Step, "StepProgram"]:
        """Split around the bus access into the part before it and the part after it."""
        i = self.bus_step
        if i is None:
            raise ValueError(f"{self.label} has no bus access")
        before = StepProgram(self.instruction, self.stage, self.steps[:i])
        after = StepProgram(self.instruction, self.stage, self.steps[i + 1:])
        return before, self.steps[i], after

    @property
    def label(self) -> str:
        return f"{self.instruction.block}:{self.instruction.id}/{self.stage}"


def build_layout(p: PipelineSpec) -> SlotLayout:
    """Deterministic slot layout with one slot per dependency of the pipeline."""
    slots: List[Slot] = []
    for i, stage in enumerate(p.stages):
        slots.append(Slot(f"{stage.name}.program", TimingPoint.START))
        slots.extend(Slot(f"{stage.name}.capacity[{k}]", TimingPoint.END) for k in range(stage.width))
        if i > 0:
            slots.append(Slot(f"{stage.name}.pipeline", TimingPoint.END))
    for q in p.queues:
        nxt = p.next_stage(q.after)
        slots.extend(Slot(f"{q.after}->{nxt}.queue[{k}]", TimingPoint.START) for k in range(q.capacity))
    slots.append(Slot(FETCH, TimingPoint.END))
    slots.append(Slot("memory.load", TimingPoint.END))
    slots.append(Slot("memory.store", TimingPoint.END))
    slots.extend(Slot(f"reg[{r}]", TimingPoint.END) for r in range(p.registers))
    for u in p.units:
        slots.append(Slot(f"{u.name}.program", TimingPoint.START))
        slots.extend(Slot(f"{u.name}.capacity[{k}]", TimingPoint.END) for k in range(u.count))
    slots.append(Slot(RHO, TimingPoint.START))
    return SlotLayout(slots)


def build_resources(p: PipelineSpec) -> Dict[str, Resource]:
    resources: Dict[str, Resource] = {}

    def add(name: str, kind: ResourceKind, slots: Sequence[str], timing: TimingPoint) -> None:
        resources[name] = Resource(name, kind, tuple(slots), timing)

    for i, stage in enumerate(p.stages):
        s = stage.name
        add(f"{s}.program", ResourceKind.SINGLE, [f"{s}.program"], TimingPoint.START)
        add(f"{s}.capacity", ResourceKind.FIFO,
            [f"{s}.capacity[{k}]" for k in range(stage.width)], TimingPoint.END)
        if i > 0:
            add(f"{s}.pipeline", ResourceKind.SINGLE, [f"{s}.pipeline"], TimingPoint.END)
    for q in p.queues:
        name = f"{q.after}->{p.next_stage(q.after)}.queue"
        add(name, ResourceKind.FIFO, [f"{name}[{k}]" for k in range(q.capacity)], TimingPoint.START)
    add(FETCH, ResourceKind.FETCH_ORDER, [FETCH], TimingPoint.END)
    for kind in MEMORY_CLASSES:
        add(f"memory.{kind}", ResourceKind.MEMORY_ORDER, [f"memory.{kind}"], TimingPoint.END)
    for r in range(p.registers):
        add(f"reg[{r}]", ResourceKind.REGISTER, [f"reg[{r}]"], TimingPoint.END)
    for u in p.units:
        add(f"{u.name}.program", ResourceKind.SINGLE, [f"{u.name}.program"], TimingPoint.START)
        add(f"{u.name}.capacity", ResourceKind.FIFO,
            [f"{u.name}.capacity[{k}]" for k in range(u.count)], TimingPoint.END)
    return resources


class StepCompiler:
    """Generates, interprets and compiles step programs for one pipeline."""

    def __init__(self, pipeline: PipelineSpec, store: XddStore):
        self.pipeline = pipeline
        self.store = store
        self.layout = build_layout(pipeline)
        self.resources = build_resources(pipeline)
        self._programs: Dict[Tuple[Instruction, str], StepProgram] = {}
        self._vertices: Dict[StepProgram, TransitionMatrix] = {}
        self._blocks: Dict[Tuple[Tuple[Instruction, ...], bool], TransitionMatrix] = {}

    def resource(self, name: str) -> Resource:
        try:
            return self.resources[name]
        except KeyError:
            raise UnresolvedResourceError(f"pipeline {self.pipeline.name} has no resource {name!r}") from None

    # -- generation -------------------------------------------------------------

    def initiates_fetch(self, instr: Instruction) -> bool:
        return instr.position % self.pipeline.memory.fetch_block_size == 0

    def access_kind(self, instr: Instruction, stage: str) -> Optional[str]:
        """"fetch" or "data" when the vertex accesses memory, None otherwise."""
        memory = self.pipeline.memory
        if stage == memory.fetch_stage and self.initiates_fetch(instr):
            return "fetch"
        if stage == memory.memory_stage and instr.uses_memory:
            return "data"
        return None

    def access_event(self, instr: Instruction, kind: str):
        base = instr.event_base(kind)
        return self.store.event(base, 0) if base is not None else None

    def bus_delay(self, instr: Instruction, stage: str) -> int:
        """Cycles a bus transaction adds on top of the hit latency that follows it.

        A miss over the shared bus completes when the bus is released, so its
        total latency is the larger of the bus latency and the hit latency.
        """
        return max(self.pipeline.bus.latency - self.pipeline.base_latency(instr.cls, stage), 0)

    def _latency_steps(self, instr: Instruction, stage: str) -> Tuple[List[Step], Optional[str]]:
        p = self.pipeline
        store = self.store
        hit = p.base_latency(instr.cls, stage)
        kind = self.access_kind(instr, stage)
        classification = None
        if kind == "fetch":
            classification = instr.fetch
        elif kind == "data":
            classification = instr.data
        if classification is None or classification == "AH":
            return [Step(StepKind.CONSUME, latency=store.leaf(hit))], None
        event = self.access_event(instr, kind)
        if not p.bus.shared:
            miss = p.memory.miss_latency
            if event is None:
                latency = store.leaf(miss)
            else:
                latency = store.indicator(event, hit, miss)
            return [Step(StepKind.CONSUME, latency=latency)], None
        if event is None:
            use = store.one
        else:
            use = store.indicator(event, float("-inf"), 0)
        delay = store.oplus(store.one, store.otimes(use, store.leaf(self.bus_delay(instr, stage))))
        return [
            Step(StepKind.CONSUME, latency=delay, bus_use=use),
            Step(StepKind.CONSUME, latency=store.leaf(hit)),
        ], kind

    def gen_steps(self, instr: Instruction, stage: str) -> StepProgram:
        key = (instr, stage)
        cached = self._programs.get(key)
        if cached is not None:
            return cached
        p = self.pipeline
        p.stage(stage)
        timing = p.timing(instr.cls)
        unit = timing.unit if stage == p.execute_stage else None
        nxt = p.next_stage(stage)
        r = self.resource

        waits: List[Step] = []
        order = r(f"{unit}.program") if unit else r(f"{p.program_order_stage(stage)}.program")
        capacity = r(f"{unit}.capacity") if unit else r(f"{stage}.capacity")
        waits.append(Step(StepKind.WAIT, order))
        waits.append(Step(StepKind.WAIT, capacity))
        if p.previous_stage(stage) is not None:
            waits.append(Step(StepKind.WAIT, r(f"{stage}.pipeline")))
        if p.queue_after(stage) is not None:
            waits.append(Step(StepKind.WAIT, r(f"{stage}->{nxt}.queue")))
        if stage == p.memory.fetch_stage:
            waits.append(Step(StepKind.WAIT, r(FETCH)))
        if stage == p.memory.memory_stage and instr.uses_memory:
            waits.extend(Step(StepKind.WAIT, r(f"memory.{kind}")) for kind in MEMORY_CLASSES)
        if stage == timing.reads_at:
            waits.extend(Step(StepKind.WAIT, r(f"reg[{reg}]")) for reg in sorted(instr.regs_read))

        at_start = [Step(StepKind.RELEASE, r(f"{unit}.program") if unit else r(f"{stage}.program"))]
        prev = p.previous_stage(stage)
        if prev is not None and p.queue_after(prev) is not None:
            at_start.append(Step(StepKind.RELEASE, r(f"{prev}->{stage}.queue")))

        consume, kind = self._latency_steps(instr, stage)

        at_exit: List[Step] = []
        if nxt is not None:
            at_exit.append(Step(StepKind.RELEASE, r(f"{nxt}.pipeline")))
        at_exit.append(Step(StepKind.RELEASE, capacity))
        if stage == p.memory.fetch_stage and self.initiates_fetch(instr):
            at_exit.append(Step(StepKind.RELEASE, r(FETCH)))
        if stage == p.memory.memory_stage and instr.uses_memory:
            at_exit.append(Step(StepKind.RELEASE, r(f"memory.{instr.cls}")))
        if stage == timing.writes_at:
            at_exit.extend(Step(StepKind.RELEASE, r(f"reg[{reg}]")) for reg in sorted(instr.regs_written))

        program = StepProgram(instr, stage, tuple(waits + at_start + consume + at_exit), kind)
        self._programs[key] = program
        return program

    def block_programs(self, instrs: Iterable[Instruction]) -> List[StepProgram]:
        """Step programs of a block in evaluation order: instruction-major, stage-minor."""
        return [self.gen_steps(ins, s) for ins in instrs for s in self.pipeline.stage_names]

    # -- interpretation ---------------------------------------------------------------

    def run_steps(self, steps: Iterable[Step], state: StateVector) -> StateVector:
        """Apply steps without the leading reset."""
        store = self.store
        layout = self.layout
        slots = list(state.slots)
        rho = layout.rho
        for step in steps:
            if step.kind is StepKind.WAIT:
                slots[rho] = store.oplus(slots[rho], slots[layout.resolve(step.resource.wait_slot)])
            elif step.kind is StepKind.RELEASE:
                for src, dest in step.resource.release_moves:
                    slots[layout.resolve(dest)] = slots[layout.resolve(src)]
            else:
                slots[rho] = store.otimes(slots[rho], step.latency)
        return StateVector(store, layout, slots)

    def interpret(self, sp: StepProgram, state: StateVector) -> StateVector:
        return self.run_steps(sp.steps, state.replace(RHO, self.store.zero))

    def interpret_block(self, instrs: Iterable[Instruction], state: StateVector,
                        entry: bool = False) -> StateVector:
        if entry:
            state = state.replace(FETCH, state.rho)
        for sp in self.block_programs(instrs):
            state = self.interpret(sp, state)
        return state

    # -- compilation -------------------------------------------------------------------

    def steps_matrices(self, steps: Iterable[Step]) -> List[TransitionMatrix]:
        """Elementary matrices of a run of steps, without the leading reset."""
        store, layout = self.store, self.layout
        matrices = []
        for step in steps:
            if step.kind is StepKind.WAIT:
                matrices.append(m_wait(store, layout, step.resource.wait_slot))
            elif step.kind is StepKind.RELEASE:
                matrices.extend(m_move(store, layout, src, dest) for src, dest in step.resource.release_moves)
            else:
                matrices.append(m_consume(store, layout, step.latency))
        return matrices

    def step_matrices(self, sp: StepProgram) -> List[TransitionMatrix]:
        """Elementary matrices of a step program, reset first."""
        return [m_reset(self.store, self.layout)] + self.steps_matrices(sp.steps)

    def compile_steps(self, sp: StepProgram) -> TransitionMatrix:
        cached = self._vertices.get(sp)
        if cached is None:
            cached = mat_product(self.store, self.layout, self.step_matrices(sp))
            self._vertices[sp] = cached
        return cached

    def compile_head(self, steps: Sequence[Step]) -> TransitionMatrix:
        """Matrix of the tail of a vertex whose reset already happened."""
        return mat_product(self.store, self.layout, self.steps_matrices(steps))

    def seed_matrix(self) -> TransitionMatrix:
        """Hands the entry time over to the fetch order, as at program start."""
        return m_move(self.store, self.layout, RHO, FETCH)

    def compile_block(self, instrs: Sequence[Instruction], entry: bool = False) -> TransitionMatrix:
        key = (tuple(instrs), entry)
        cached = self._blocks.get(key)
        if cached is None:
            matrices = [self.seed_matrix()] if entry else []
            matrices.extend(self.compile_steps(sp) for sp in self.block_programs(instrs))
            cached = mat_product(self.store, self.layout, matrices)
            self._blocks[key] = cached
        return cached

    def compile_run(self, programs: Sequence[StepProgram]) -> TransitionMatrix:
        """Matrix of a run of vertex programs, each with its own reset."""
        return mat_product(self.store, self.layout, [self.compile_steps(sp) for sp in programs])
