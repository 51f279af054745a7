"""Shared-bus contention between one memory-stage access and later fetches.

A block is cut at its bus accesses. Each memory-stage access ``ME_0`` that
may use the bus opens a window with the following fetch accesses that can
still overtake it; the code between two accesses is a :class:`Run`. Inside
a window the grant times of all accesses are computed for every
configuration at once by :func:`schedule`.
"""

import logging
import string
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

from .algebra import RHO, StateVector, TransitionMatrix, mat_product, vec_mat
from .errors import InvariantViolation
from .program import Instruction
from .steps import FETCH, Step, StepCompiler, StepKind, StepProgram
from .xdd import POS_INF, Xdd, XddStore

logger = logging.getLogger(__name__)


class Run:
    """Straight-line code between two bus accesses.

    ``head`` finishes the vertex of the previous access (no reset),
    ``programs`` are complete vertices and ``pre`` starts the vertex of the
    next access up to its bus request.
    """

    def __init__(self, head: Tuple[Step, ...], programs: Tuple[StepProgram, ...],
                 pre: Optional[StepProgram], seed_fetch: bool = False):
        self.head = head
        self.programs = programs
        self.pre = pre
        self.seed_fetch = seed_fetch
        self._matrix: Optional[TransitionMatrix] = None

    @property
    def instructions(self) -> List[Instruction]:
        seen = []
        for sp in self.programs + ((self.pre,) if self.pre else ()):
            if sp.instruction not in seen:
                seen.append(sp.instruction)
        return seen

    def last_position(self, default: int) -> int:
        if self.pre is not None:
            return self.pre.instruction.position
        if self.programs:
            return self.programs[-1].instruction.position
        return default

    def run(self, compiler: StepCompiler, state: StateVector) -> StateVector:
        if self.seed_fetch:
            state = state.replace(FETCH, state.rho)
        state = compiler.run_steps(self.head, state)
        for sp in self.programs:
            state = compiler.interpret(sp, state)
        if self.pre is not None:
            state = compiler.interpret(self.pre, state)
        return state

    def matrix(self, compiler: StepCompiler) -> TransitionMatrix:
        if self._matrix is None:
            matrices = [compiler.seed_matrix()] if self.seed_fetch else []
            if self.head:
                matrices.append(compiler.compile_head(self.head))
            matrices.extend(compiler.compile_steps(sp) for sp in self.programs)
            if self.pre is not None:
                matrices.append(compiler.compile_steps(self.pre))
            self._matrix = mat_product(compiler.store, compiler.layout, matrices)
        return self._matrix

    def apply(self, compiler: StepCompiler, state: StateVector, use_matrices: bool = True) -> StateVector:
        if use_matrices:
            return vec_mat(state, self.matrix(compiler))
        return self.run(compiler, state)


@dataclass
class FetchAccess:
    program: StepProgram
    use: Xdd

    @property
    def must_use_bus(self) -> bool:
        return self.use.is_leaf


@dataclass
class ContentionSequence:
    """``ME_0`` with the fetches ``FE_1 .. FE_n`` that may overtake it.

    ``bridges[0]`` leads from the bus request of ``ME_0`` to the bus request
    of ``FE_1``, ``bridges[i]`` from ``FE_i`` to ``FE_i+1``.
    """

    me0: StepProgram
    me_use: Xdd
    fes: List[FetchAccess]
    bridges: List[Run]

    @property
    def n(self) -> int:
        return len(self.fes)

    @property
    def last(self) -> StepProgram:
        return self.fes[-1].program if self.fes else self.me0


@dataclass
class BlockPlan:
    """Alternating runs and contention windows: run, window, run, ..., run."""

    runs: List[Run]
    windows: List[ContentionSequence]

    @property
    def items(self) -> List[object]:
        out: List[object] = []
        for i, run in enumerate(self.runs):
            out.append(run)
            if i < len(self.windows):
                out.append(self.windows[i])
        return out


@dataclass
class ContentionResult:
    me_grant: Xdd
    fe_grants: List[Xdd]
    state: StateVector
    trace: List[Tuple[str, str, Xdd]] = field(default_factory=list)


# -- structural analysis ------------------------------------------------------------


def _taint(steps, tainted: Set[str], reset: bool) -> None:
    """Propagate "depends on the bus completion of ME_0" through steps."""
    if reset:
        tainted.discard(RHO)
    for step in steps:
        if step.kind is StepKind.WAIT:
            if step.resource.wait_slot in tainted:
                tainted.add(RHO)
        elif step.kind is StepKind.RELEASE:
            for src, dest in step.resource.release_moves:
                if src in tainted:
                    tainted.add(dest)
                else:
                    tainted.discard(dest)


def plan_block(compiler: StepCompiler, instrs, n_max: int, entry: bool = False) -> BlockPlan:
    """Cut a block at its bus-capable memory accesses and build their windows."""
    programs = compiler.block_programs(instrs)
    runs: List[Run] = []
    windows: List[ContentionSequence] = []
    head: Tuple[Step, ...] = ()
    pending: List[StepProgram] = []
    seed = entry
    i = 0
    while i < len(programs):
        sp = programs[i]
        if sp.access != "data":
            pending.append(sp)
            i += 1
            continue
        me_pre, me_bus, me_post = sp.split_access()
        runs.append(Run(head, tuple(pending), me_pre, seed))
        seed = False

        tainted = {RHO}
        _taint(me_post.steps, tainted, reset=False)
        fes: List[FetchAccess] = []
        bridges: List[Run] = []
        bridge_head = me_post.steps
        between: List[StepProgram] = []
        last = i
        j = i + 1
        while j < len(programs) and len(fes) < n_max:
            q = programs[j]
            if q.access == "data":
                break
            if q.access == "fetch":
                q_pre, q_bus, q_post = q.split_access()
                ahead = set(tainted)
                _taint(q_pre.steps, ahead, reset=True)
                if RHO in ahead:
                    break
                fes.append(FetchAccess(q, q_bus.bus_use))
                bridges.append(Run(bridge_head, tuple(between), q_pre))
                _taint(q.steps, tainted, reset=True)
                bridge_head = q_post.steps
                between = []
                last = j
            else:
                _taint(q.steps, tainted, reset=True)
                between.append(q)
            j += 1
        windows.append(ContentionSequence(sp, me_bus.bus_use, fes, bridges))
        head = bridge_head if fes else me_post.steps
        pending = []
        i = last + 1
    runs.append(Run(head, tuple(pending), None, seed))
    return BlockPlan(runs, windows)


def find_contention_points(compiler: StepCompiler, instrs, n_max: int) -> List[ContentionSequence]:
    return plan_block(compiler, instrs, n_max).windows


# -- scheduling -------------------------------------------------------------------------


def _label(k: int) -> str:
    letters = string.ascii_lowercase
    return letters[k] if k < len(letters) else f"{letters[k % 26]}{k // 26}"


def _inf_unless(store: XddStore, use: Xdd) -> Xdd:
    # +inf where the access does not use the bus, 0 where it does
    return store.sched_me(store.one, use)


def schedule(compiler: StepCompiler, seq: ContentionSequence, s0: StateVector,
             use_matrices: bool = True, trace: bool = False) -> ContentionResult:
    """Grant times of ``ME_0`` and its contenders, and the state after the window.

    ``s0`` is the state at the bus request of ``ME_0``: its time pointer is
    the ready time of the access.
    """
    store = compiler.store
    lam = store.leaf(compiler.pipeline.bus.latency)
    steps: List[Tuple[str, str, Xdd]] = []

    def record(name: str, h: Xdd) -> Xdd:
        if trace:
            steps.append((_label(len(steps)), name, h))
        return h

    def merge(state: StateVector, grant: Xdd, sp: StepProgram) -> StateVector:
        # completion of the requester; the bus itself stays busy for lam
        delay = store.leaf(compiler.bus_delay(sp.instruction, sp.stage))
        return state.replace(RHO, store.oplus(state.rho, store.otimes(grant, delay)))

    def pending(me_hat: Xdd) -> bool:
        return POS_INF in store.leaf_values(store.otimes(me_hat, seq.me_use))

    rho_me = record("rho_ME0", store.otimes(s0.rho, _inf_unless(store, seq.me_use)))
    me_hat = record("hat_ME0", store.top)
    rel = record("rho_rel", store.zero)

    fe_hats: List[Xdd] = []
    state = seq.bridges[0].apply(compiler, s0, use_matrices) if seq.fes else None
    i = 0
    while i < seq.n and pending(me_hat):
        fe = seq.fes[i]
        rho_fe = record(f"rho_FE{i + 1}", store.otimes(state.rho, fe.use))
        sched_me = record("sched_ME0", store.oplus(store.sched_me(rho_me, rho_fe), rel))
        me_hat = record("hat_ME0", store.ominus(me_hat, sched_me))
        sched_fe = record(f"sched_FE{i + 1}", store.sched_fe(rho_fe, rho_me))
        rel = record("rho_rel", store.oplus(rel, store.otimes(sched_fe, lam)))
        # a fetch that lost to ME_0 waits for its own ready time as well
        fe_hat = record(
            f"hat_FE{i + 1}", store.ominus(sched_fe, store.oplus(store.otimes(me_hat, lam), rho_fe))
        )
        fe_hats.append(fe_hat)
        i += 1
        if i < seq.n:
            state = seq.bridges[i].apply(compiler, merge(state, fe_hat, fe.program), use_matrices)
    if i < seq.n:
        logger.debug(f"{seq.me0.label}: scheduled after {i} of {seq.n} contenders")

    me_hat = store.ominus(me_hat, store.oplus(rel, rho_me))
    me_hat = record("hat_ME0", store.otimes(me_hat, seq.me_use))
    if POS_INF in store.leaf_values(me_hat):
        raise InvariantViolation(f"{seq.me0.label}: bus access left unscheduled on some configuration")

    final = merge(s0, me_hat, seq.me0)
    for k, fe in enumerate(seq.fes):
        final = seq.bridges[k].apply(compiler, final, use_matrices)
        if k >= len(fe_hats):
            fe_hats.append(store.otimes(store.oplus(final.rho, store.otimes(me_hat, lam)), fe.use))
        final = merge(final, fe_hats[k], fe.program)
    return ContentionResult(me_hat, fe_hats, final, steps)
