"""Configuration management for the XDD WCET engine."""

import os
from typing import Literal, Optional

from pydantic import BaseModel, Field


class AnalysisConfig(BaseModel):
    """Worklist analysis settings."""
    max_states: int = Field(default=1024, ge=1, description="Maximum temporal states per block out-set")
    max_gen: int = Field(default=16, ge=0, description="Maximum generation number of an event")
    max_iterations: int = Field(default=100000, ge=1, description="Maximum block visits of the worklist")
    widen: bool = Field(default=False, description="Join an oversized state set into one state instead of failing")
    use_matrices: bool = Field(default=True, description="Pre-compute transition matrices for straight-line code")
    prune_stale: bool = Field(default=True, description="Drop slot values that can no longer delay any start time")
    contention_window: Optional[int] = Field(
        default=None, ge=0, description="Fetches that may overtake a memory access; pipeline default when unset"
    )
    trace_contention: bool = Field(default=False, description="Record every intermediate contention diagram")


class ReportConfig(BaseModel):
    """Report settings."""
    format: Literal["text", "json"] = Field(default="text", description="Report format")
    emit_lp: Optional[str] = Field(default=None, description="Path of the IPET linear program to write")
    dump_xdd: Optional[str] = Field(default=None, description="Directory receiving DOT dumps of block times")


class WcetConfig(BaseModel):
    """Top-level settings."""
    log_level: str = Field(default="INFO", description="Logging level")
    pipeline: str = Field(default="teaching", description="Default pipeline preset or description file")
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    report: ReportConfig = Field(default_factory=ReportConfig)


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in ("1", "true", "yes", "on")


def load_config() -> WcetConfig:
    """Load configuration from environment variables."""
    window = os.getenv("XDD_WCET_CONTENTION_WINDOW")
    return WcetConfig(
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        pipeline=os.getenv("XDD_WCET_PIPELINE", "teaching"),
        analysis=AnalysisConfig(
            max_states=int(os.getenv("XDD_WCET_MAX_STATES", "1024")),
            max_gen=int(os.getenv("XDD_WCET_MAX_GEN", "16")),
            max_iterations=int(os.getenv("XDD_WCET_MAX_ITERATIONS", "100000")),
            widen=_flag("XDD_WCET_WIDEN", "false"),
            use_matrices=_flag("XDD_WCET_USE_MATRICES", "true"),
            contention_window=int(window) if window else None,
        ),
    )
