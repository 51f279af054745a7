"""Program descriptions: basic blocks of classified instructions, edges and loop bounds."""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Literal, Optional, Tuple, Union

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ProgramValidationError
from .pipeline import INSTRUCTION_CLASSES, MEMORY_CLASSES, validation_error

logger = logging.getLogger(__name__)

Classification = Literal["AH", "AM", "NC"]

IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class InstructionSpec(_Strict):
    """One instruction record of a program document."""
    id: str
    cls: str = Field(alias="class")
    regs_read: List[int] = Field(default_factory=list)
    regs_written: List[int] = Field(default_factory=list)
    fetch: Classification = Field(default="AH", description="Instruction cache classification")
    data: Optional[Classification] = Field(default=None, description="Data cache classification (load/store)")

    @field_validator("cls")
    @classmethod
    def _known_class(cls, value: str) -> str:
        if value not in INSTRUCTION_CLASSES:
            raise ValueError(f"unknown instruction class {value!r}")
        return value

    @field_validator("regs_read", "regs_written")
    @classmethod
    def _registers(cls, value: List[int]) -> List[int]:
        if any(r < 0 for r in value):
            raise ValueError("register numbers are non-negative")
        return value

    @model_validator(mode="after")
    def _data_classification(self) -> "InstructionSpec":
        if self.cls in MEMORY_CLASSES and self.data is None:
            raise ValueError(f"{self.cls} instruction needs a data classification")
        if self.cls not in MEMORY_CLASSES and self.data is not None:
            raise ValueError(f"{self.cls} instruction cannot have a data classification")
        return self


class BlockSpec(_Strict):
    id: str
    instructions: List[InstructionSpec] = Field(default_factory=list)

    @field_validator("id")
    @classmethod
    def _identifier(cls, value: str) -> str:
        if not IDENTIFIER.match(value):
            raise ValueError(f"block id {value!r} must be an identifier")
        return value


class EdgeSpec(_Strict):
    source: str
    target: str


class LoopSpec(_Strict):
    header: str
    bound: int = Field(ge=1, description="Maximum executions of the header per entry into the loop")


class ProgramDocument(_Strict):
    schema_version: Literal[1] = 1
    name: str = "program"
    entry: Optional[str] = None
    exit: Optional[str] = None
    blocks: List[BlockSpec] = Field(min_length=1)
    edges: List[EdgeSpec] = Field(default_factory=list)
    loops: List[LoopSpec] = Field(default_factory=list)


# -- validated IR ----------------------------------------------------------------


@dataclass(frozen=True)
class Access:
    """A memory access that carries an event, i.e. one classified NC."""
    base: str
    block: str
    instruction: str
    position: int
    kind: str  # "fetch" or "data"


@dataclass(frozen=True)
class Instruction:
    id: str
    cls: str
    regs_read: FrozenSet[int]
    regs_written: FrozenSet[int]
    fetch: str
    data: Optional[str]
    block: str
    position: int

    @property
    def uses_memory(self) -> bool:
        return self.cls in MEMORY_CLASSES

    def event_base(self, kind: str) -> Optional[str]:
        """Event base of the fetch or data access, or None when it is not NC."""
        classification = self.fetch if kind == "fetch" else self.data
        if classification != "NC":
            return None
        return f"{self.block}:{self.id}:{kind}"


@dataclass(frozen=True)
class BasicBlock:
    id: str
    instructions: Tuple[Instruction, ...]
    synthetic: bool = False

    def __len__(self) -> int:
        return len(self.instructions)


@dataclass(frozen=True)
class Loop:
    header: str
    bound: int
    body: FrozenSet[str]
    back_edges: FrozenSet[Tuple[str, str]]
    entry_edges: FrozenSet[Tuple[str, str]]


@dataclass(frozen=True)
class Cfg:
    """Validated, immutable control-flow graph with a single entry and exit."""

    name: str
    blocks: Dict[str, BasicBlock]
    order: Tuple[str, ...]
    graph: nx.DiGraph = field(repr=False)
    entry: str
    exit: str
    loops: Dict[str, Loop]
    document: ProgramDocument = field(repr=False)

    def block(self, block_id: str) -> BasicBlock:
        return self.blocks[block_id]

    def successors(self, block_id: str) -> List[str]:
        return sorted(self.graph.successors(block_id), key=self.order.index)

    def predecessors(self, block_id: str) -> List[str]:
        return sorted(self.graph.predecessors(block_id), key=self.order.index)

    @property
    def edges(self) -> List[Tuple[str, str]]:
        return sorted(self.graph.edges, key=lambda e: (self.order.index(e[0]), self.order.index(e[1])))

    def is_back_edge(self, source: str, target: str) -> bool:
        loop = self.loops.get(target)
        return loop is not None and (source, target) in loop.back_edges

    def enclosing_loops(self, block_id: str) -> List[Loop]:
        """Loops containing ``block_id``, outermost first."""
        inside = [loop for loop in self.loops.values() if block_id in loop.body]
        return sorted(inside, key=lambda loop: -len(loop.body))

    def bound_product(self, block_id: str) -> int:
        product = 1
        for loop in self.enclosing_loops(block_id):
            product *= loop.bound
        return product

    @property
    def is_acyclic(self) -> bool:
        return not self.loops

    def to_document(self) -> Dict[str, Any]:
        return self.document.model_dump(by_alias=True, exclude_none=True)


def _fresh(name: str, taken) -> str:
    while name in taken:
        name = f"{name}_"
    return name


def build_cfg(doc: ProgramDocument) -> Cfg:
    blocks: Dict[str, BasicBlock] = {}
    order: List[str] = []
    for i, b in enumerate(doc.blocks):
        if b.id in blocks:
            raise ProgramValidationError(f"duplicate block id {b.id!r}", f"blocks[{i}].id")
        if not b.instructions:
            raise ProgramValidationError("block has no instructions", f"blocks[{i}].instructions")
        seen = set()
        instructions = []
        for j, ins in enumerate(b.instructions):
            if ins.id in seen:
                raise ProgramValidationError(f"duplicate instruction id {ins.id!r}", f"blocks[{i}].instructions[{j}].id")
            seen.add(ins.id)
            instructions.append(Instruction(
                id=ins.id,
                cls=ins.cls,
                regs_read=frozenset(ins.regs_read),
                regs_written=frozenset(ins.regs_written),
                fetch=ins.fetch,
                data=ins.data,
                block=b.id,
                position=j,
            ))
        blocks[b.id] = BasicBlock(b.id, tuple(instructions))
        order.append(b.id)

    graph = nx.DiGraph()
    graph.add_nodes_from(order)
    for i, e in enumerate(doc.edges):
        for end, name in (("source", e.source), ("target", e.target)):
            if name not in blocks:
                raise ProgramValidationError(f"edge refers to unknown block {name!r}", f"edges[{i}].{end}")
        graph.add_edge(e.source, e.target)

    entry = doc.entry
    if entry is not None and entry not in blocks:
        raise ProgramValidationError(f"unknown entry block {entry!r}", "entry")
    exit_ = doc.exit
    if exit_ is not None and exit_ not in blocks:
        raise ProgramValidationError(f"unknown exit block {exit_!r}", "exit")

    if entry is None or graph.in_degree(entry) > 0:
        heads = [entry] if entry is not None else [b for b in order if graph.in_degree(b) == 0]
        if not heads:
            raise ProgramValidationError("no block without predecessors to enter the program", "entry")
        alpha = _fresh("entry", blocks)
        blocks[alpha] = BasicBlock(alpha, (), synthetic=True)
        order.insert(0, alpha)
        graph.add_node(alpha)
        for h in heads:
            graph.add_edge(alpha, h)
        entry = alpha
    if exit_ is None or graph.out_degree(exit_) > 0:
        tails = [exit_] if exit_ is not None else [b for b in order if graph.out_degree(b) == 0]
        if not tails:
            raise ProgramValidationError("no block without successors to leave the program", "exit")
        omega = _fresh("exit", blocks)
        blocks[omega] = BasicBlock(omega, (), synthetic=True)
        order.append(omega)
        graph.add_node(omega)
        for t in tails:
            graph.add_edge(t, omega)
        exit_ = omega

    reachable = nx.descendants(graph, entry) | {entry}
    for b in order:
        if b not in reachable:
            raise ProgramValidationError(f"block {b!r} is unreachable from {entry!r}", _block_location(doc, b))
    coreachable = nx.ancestors(graph, exit_) | {exit_}
    for b in order:
        if b not in coreachable:
            raise ProgramValidationError(f"block {b!r} never reaches {exit_!r}", _block_location(doc, b))

    loops = _natural_loops(doc, graph, entry, order)
    logger.debug(f"Program {doc.name}: {len(order)} blocks, {graph.number_of_edges()} edges, {len(loops)} loops")
    return Cfg(doc.name, blocks, tuple(order), graph, entry, exit_, loops, doc)


def _block_location(doc: ProgramDocument, block_id: str) -> str:
    for i, b in enumerate(doc.blocks):
        if b.id == block_id:
            return f"blocks[{i}]"
    return block_id


def _natural_loops(doc: ProgramDocument, graph: nx.DiGraph, entry: str, order: List[str]) -> Dict[str, Loop]:
    idom = nx.immediate_dominators(graph, entry)

    def dominates(a: str, b: str) -> bool:
        while True:
            if a == b:
                return True
            parent = idom.get(b, b)
            if parent == b:
                return False
            b = parent

    back_edges: Dict[str, List[Tuple[str, str]]] = {}
    for u, v in graph.edges:
        if dominates(v, u):
            back_edges.setdefault(v, []).append((u, v))

    forward = graph.copy()
    forward.remove_edges_from(e for edges in back_edges.values() for e in edges)
    if not nx.is_directed_acyclic_graph(forward):
        cycle = nx.find_cycle(forward)
        raise ProgramValidationError(
            "irreducible cycle through " + " -> ".join(u for u, _ in cycle), _block_location(doc, cycle[0][0])
        )

    bounds: Dict[str, int] = {}
    for i, spec in enumerate(doc.loops):
        if spec.header not in graph:
            raise ProgramValidationError(f"loop bound for unknown block {spec.header!r}", f"loops[{i}].header")
        if spec.header not in back_edges:
            raise ProgramValidationError(f"block {spec.header!r} is not a loop header", f"loops[{i}].header")
        if spec.header in bounds:
            raise ProgramValidationError(f"duplicate loop bound for {spec.header!r}", f"loops[{i}].header")
        bounds[spec.header] = spec.bound

    loops: Dict[str, Loop] = {}
    for header in sorted(back_edges, key=order.index):
        if header not in bounds:
            raise ProgramValidationError(f"unbounded cycle through loop header {header!r}", _block_location(doc, header))
        body = {header}
        stack = [u for u, _ in back_edges[header]]
        while stack:
            n = stack.pop()
            if n not in body:
                body.add(n)
                stack.extend(graph.predecessors(n))
        entries = frozenset((u, header) for u in graph.predecessors(header) if u not in body)
        loops[header] = Loop(header, bounds[header], frozenset(body), frozenset(back_edges[header]), entries)
    return loops


def parse_program(document: Dict[str, Any]) -> Cfg:
    """Validate a program document and build its CFG."""
    try:
        doc = ProgramDocument.model_validate(document)
    except ValidationError as e:
        raise validation_error(e, ProgramValidationError) from e
    return build_cfg(doc)


def load_program(source: Union[str, Path, Dict[str, Any]]) -> Cfg:
    if isinstance(source, dict):
        return parse_program(source)
    path = Path(source)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ProgramValidationError(f"cannot read program description: {e}", str(path)) from e
    return parse_program(document)


def event_inventory(cfg: Cfg) -> List[Access]:
    """One entry per NC access: block order, instruction order, fetch before data."""
    inventory = []
    for block_id in cfg.order:
        for ins in cfg.blocks[block_id].instructions:
            for kind in ("fetch", "data"):
                base = ins.event_base(kind)
                if base is not None:
                    inventory.append(Access(base, block_id, ins.id, ins.position, kind))
    return inventory
