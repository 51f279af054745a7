"""Pipeline descriptions: schema, validation and bundled presets."""

import json
import logging
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import PipelineValidationError, UnknownInstructionClassError

logger = logging.getLogger(__name__)

INSTRUCTION_CLASSES = (
    "alu-add",
    "alu-mul",
    "alu-div",
    "fp-add",
    "fp-mul",
    "fp-div",
    "load",
    "store",
    "branch",
    "nop",
)

MEMORY_CLASSES = ("load", "store")

PRESET_PACKAGE = "xdd_wcet.presets"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StageSpec(_Strict):
    """One pipeline stage."""
    name: str = Field(description="Stage name, unique within the pipeline")
    width: int = Field(default=1, ge=1, description="Instructions the stage holds at once")
    latency: int = Field(default=1, ge=0, description="Cycles spent in the stage")
    program_order_from: Optional[str] = Field(
        default=None, description="Stage whose program-order slot this stage waits on"
    )


class QueueSpec(_Strict):
    after: str = Field(description="Stage feeding the queue; the queue drains into the next stage")
    capacity: int = Field(ge=1, description="Queue entries")


class UnitSpec(_Strict):
    name: str = Field(description="Functional unit name")
    count: int = Field(default=1, ge=1, description="Instructions the unit holds at once")


class ClassTiming(_Strict):
    latency: int = Field(ge=0, description="Cycles at the execute stage")
    unit: Optional[str] = Field(default=None, description="Functional unit executing the class")
    reads_at: Optional[str] = Field(default=None, description="Stage that waits for source registers")
    writes_at: Optional[str] = Field(default=None, description="Stage whose exit publishes results")


class MemorySpec(_Strict):
    fetch_stage: str
    memory_stage: str
    fetch_block_size: int = Field(default=1, ge=1, description="Instructions fetched per memory access")
    miss_latency: int = Field(ge=0, description="Stage latency of a miss without contention")


class BusSpec(_Strict):
    latency: int = Field(ge=1, description="Cycles one transfer occupies the bus")
    shared: bool = Field(default=True, description="Model contention between fetch and memory accesses")
    window: Optional[int] = Field(default=None, ge=0, description="Contention window override")


class PipelineSpec(_Strict):
    """Complete pipeline description, schema version 1."""

    schema_version: Literal[1] = 1
    name: str = "pipeline"
    stages: List[StageSpec] = Field(min_length=1)
    queues: List[QueueSpec] = Field(default_factory=list)
    units: List[UnitSpec] = Field(default_factory=list)
    execute_stage: str
    classes: Dict[str, ClassTiming]
    memory: MemorySpec
    bus: BusSpec
    registers: int = Field(default=16, ge=0)

    @model_validator(mode="after")
    def _check_references(self) -> "PipelineSpec":
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ValueError("stage names must be unique")
        for name in names:
            if not name or any(c in name for c in ".[]> "):
                raise ValueError(f"stage name {name!r} may not be empty or contain '.', '[', ']', '>' or spaces")
        known = set(names)
        for stage in self.stages:
            if stage.program_order_from is not None and stage.program_order_from not in known:
                raise ValueError(f"stage {stage.name}: unknown program_order_from {stage.program_order_from!r}")
        seen = set()
        for queue in self.queues:
            if queue.after not in known:
                raise ValueError(f"queue after unknown stage {queue.after!r}")
            if queue.after == names[-1]:
                raise ValueError(f"queue after the last stage {queue.after!r}")
            if queue.after in seen:
                raise ValueError(f"two queues after stage {queue.after!r}")
            seen.add(queue.after)
        unit_names = [u.name for u in self.units]
        if len(set(unit_names)) != len(unit_names):
            raise ValueError("unit names must be unique")
        if self.execute_stage not in known:
            raise ValueError(f"unknown execute_stage {self.execute_stage!r}")
        missing = [c for c in INSTRUCTION_CLASSES if c not in self.classes]
        if missing:
            raise ValueError("no timing for classes " + ", ".join(missing))
        extra = [c for c in self.classes if c not in INSTRUCTION_CLASSES]
        if extra:
            raise ValueError("unknown classes " + ", ".join(sorted(extra)))
        for cls, timing in self.classes.items():
            if timing.unit is not None and timing.unit not in unit_names:
                raise ValueError(f"class {cls}: unknown unit {timing.unit!r}")
            for stage in (timing.reads_at, timing.writes_at):
                if stage is not None and stage not in known:
                    raise ValueError(f"class {cls}: unknown stage {stage!r}")
        for stage in (self.memory.fetch_stage, self.memory.memory_stage):
            if stage not in known:
                raise ValueError(f"memory refers to unknown stage {stage!r}")
        if names.index(self.memory.fetch_stage) >= names.index(self.memory.memory_stage):
            raise ValueError("fetch_stage must come before memory_stage")
        return self

    # -- lookups --------------------------------------------------------------

    @property
    def stage_names(self) -> List[str]:
        return [s.name for s in self.stages]

    def stage(self, name: str) -> StageSpec:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def stage_index(self, name: str) -> int:
        return self.stage_names.index(name)

    def next_stage(self, name: str) -> Optional[str]:
        names = self.stage_names
        i = names.index(name)
        return names[i + 1] if i + 1 < len(names) else None

    def previous_stage(self, name: str) -> Optional[str]:
        names = self.stage_names
        i = names.index(name)
        return names[i - 1] if i > 0 else None

    def queue_after(self, name: str) -> Optional[QueueSpec]:
        for q in self.queues:
            if q.after == name:
                return q
        return None

    def queue_before(self, name: str) -> Optional[QueueSpec]:
        prev = self.previous_stage(name)
        return self.queue_after(prev) if prev is not None else None

    def unit(self, name: str) -> UnitSpec:
        for u in self.units:
            if u.name == name:
                return u
        raise KeyError(name)

    def timing(self, cls: str) -> ClassTiming:
        try:
            return self.classes[cls]
        except KeyError:
            raise UnknownInstructionClassError(f"pipeline {self.name} has no timing for class {cls!r}") from None

    def program_order_stage(self, name: str) -> str:
        return self.stage(name).program_order_from or name

    def base_latency(self, cls: str, stage: str) -> int:
        """Hit latency of a vertex: class latency at the execute stage, stage latency elsewhere."""
        if stage == self.execute_stage:
            return self.timing(cls).latency
        return self.stage(stage).latency

    def contention_window(self) -> int:
        """Maximum number of later fetches that can overtake one memory access on the bus."""
        if self.bus.window is not None:
            return self.bus.window
        names = self.stage_names
        lo = names.index(self.memory.fetch_stage)
        hi = names.index(self.memory.memory_stage)
        queued = sum(q.capacity for q in self.queues if lo <= names.index(q.after) < hi)
        in_flight = sum(self.stages[i].width for i in range(lo + 1, hi))
        return queued + in_flight


def _location(loc) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out


def validation_error(exc: ValidationError, error_cls, prefix: str = ""):
    """Convert the first pydantic error into a document error with a dotted location."""
    first = exc.errors()[0]
    location = _location(first.get("loc", ()))
    if prefix:
        location = f"{prefix}.{location}" if location else prefix
    return error_cls(first.get("msg", str(exc)), location or None)


def parse_pipeline(document: Dict[str, Any]) -> PipelineSpec:
    try:
        return PipelineSpec.model_validate(document)
    except ValidationError as e:
        raise validation_error(e, PipelineValidationError) from e


def preset_names() -> List[str]:
    files = resources.files(PRESET_PACKAGE)
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> PipelineSpec:
    path = resources.files(PRESET_PACKAGE).joinpath(f"{name}.json")
    if not path.is_file():
        raise PipelineValidationError(
            f"unknown preset {name!r} (available: {', '.join(preset_names())})", "pipeline"
        )
    logger.debug(f"Loading pipeline preset {name}")
    return parse_pipeline(json.loads(path.read_text(encoding="utf-8")))


def load_pipeline(source: Union[str, Path, Dict[str, Any]]) -> PipelineSpec:
    """Load a pipeline from a preset name, a JSON file or an already parsed document."""
    if isinstance(source, dict):
        return parse_pipeline(source)
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise PipelineValidationError(f"cannot read pipeline description: {e}", str(path)) from e
        return parse_pipeline(document)
    return load_preset(str(source))
