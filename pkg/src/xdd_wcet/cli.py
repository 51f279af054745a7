#!/usr/bin/env python3
"""
xdd-wcet command line

Analyse a program description on a pipeline and print the timing report.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from . import __version__
from .analysis import Analyzer, AnalysisResult
from .config import AnalysisConfig, WcetConfig, load_config
from .crosscheck import CrossCheckReport, cross_validate
from .errors import (
    BudgetExceededError,
    DocumentError,
    InvariantViolation,
    OracleGuardError,
    XddWcetError,
)
from .ipet import emit_ipet
from .pipeline import PipelineSpec, load_pipeline
from .program import Cfg, load_program
from .report import build_report, error_document, render

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DOCUMENT = 3
EXIT_BUDGET = 4
EXIT_INVARIANT = 5
EXIT_ORACLE = 6


def exit_code(error: BaseException) -> int:
    if isinstance(error, DocumentError):
        return EXIT_DOCUMENT
    if isinstance(error, (BudgetExceededError, OracleGuardError)):
        return EXIT_BUDGET
    if isinstance(error, InvariantViolation):
        return EXIT_INVARIANT
    return EXIT_FAILURE


def error_kind(error: BaseException) -> str:
    return type(error).__name__ if isinstance(error, XddWcetError) else "InternalError"


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return value == "on"


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def _non_negative(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xdd-wcet",
        description="Static pipeline timing analysis with event-driven diagrams",
    )
    parser.add_argument("program", help="Program description (JSON)")
    parser.add_argument("--pipeline", help="Pipeline preset name or description file")
    parser.add_argument("--format", choices=("text", "json"), help="Report format")
    parser.add_argument("--output", help="Write the report to this file instead of stdout")
    parser.add_argument("--emit-lp", metavar="PATH", help="Write the IPET linear program")
    parser.add_argument("--trace-contention", action="store_true", help="Report every contention step")
    parser.add_argument("--max-states", type=_positive, help="Temporal states per block out-set")
    parser.add_argument("--max-gen", type=_non_negative, help="Highest event generation")
    parser.add_argument("--max-iterations", type=_positive, help="Worklist block visits")
    parser.add_argument("--widen", type=_on_off, metavar="on|off", help="Join oversized state sets")
    parser.add_argument("--no-matrices", action="store_true", help="Interpret steps instead of using matrices")
    parser.add_argument("--no-prune", action="store_true", help="Keep stale slot values")
    parser.add_argument("--contention-window", type=int, help="Override the contention window size")
    parser.add_argument("--oracle-check", action="store_true", help="Cross-check against path enumeration")
    parser.add_argument("--dump-xdd", metavar="DIR", help="Write DOT files of the block times")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def resolve_config(args: argparse.Namespace, base: Optional[WcetConfig] = None) -> WcetConfig:
    """Environment defaults overridden by command-line flags."""
    config = base or load_config()
    analysis = config.analysis.model_copy(update={
        k: v for k, v in {
            "max_states": args.max_states,
            "max_gen": args.max_gen,
            "max_iterations": args.max_iterations,
            "widen": args.widen,
            "contention_window": args.contention_window,
        }.items() if v is not None
    })
    if args.no_matrices:
        analysis = analysis.model_copy(update={"use_matrices": False})
    if args.no_prune:
        analysis = analysis.model_copy(update={"prune_stale": False})
    if args.trace_contention:
        analysis = analysis.model_copy(update={"trace_contention": True})
    report = config.report.model_copy(update={
        k: v for k, v in {"format": args.format, "emit_lp": args.emit_lp, "dump_xdd": args.dump_xdd}.items()
        if v is not None
    })
    return config.model_copy(update={
        "pipeline": args.pipeline or config.pipeline,
        "analysis": AnalysisConfig.model_validate(analysis.model_dump()),
        "report": report,
    })


def execute(cfg: Cfg, pipeline: PipelineSpec, config: AnalysisConfig,
            oracle_check: bool = False) -> Tuple[AnalysisResult, Dict[str, Any], Optional[CrossCheckReport]]:
    """Analyse, optionally cross-check, and build the report document."""
    result = Analyzer(cfg, pipeline, config).run()
    oracle = cross_validate(cfg, pipeline, config, result=result) if oracle_check else None
    return result, build_report(result, pipeline, oracle), oracle


def dump_xdds(result: AnalysisResult, directory: str) -> List[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for b, r in result.blocks.items():
        for k, t in enumerate(r.timing.times):
            path = out / f"{b}_{k}.dot"
            path.write_text(result.store.to_dot(t, f"{b}_{k}"), encoding="utf-8")
            written.append(path)
    logger.info(f"Wrote {len(written)} DOT files to {out}")
    return written


def _write(text: str, target: Optional[str]) -> None:
    if target:
        Path(target).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    args = build_parser().parse_args(argv)
    fmt = args.format or "text"
    try:
        config = resolve_config(args)
        fmt = config.report.format
        pipeline = load_pipeline(config.pipeline)
        cfg = load_program(args.program)
        result, document, oracle = execute(cfg, pipeline, config.analysis, args.oracle_check)
        _write(render(document, fmt), args.output)
        if config.report.emit_lp:
            Path(config.report.emit_lp).write_text(emit_ipet(cfg, result.block_times()), encoding="utf-8")
            logger.info(f"IPET program written to {config.report.emit_lp}")
        if config.report.dump_xdd:
            dump_xdds(result, config.report.dump_xdd)
        logger.info("Report written")
        if oracle is not None and not oracle.ok:
            return EXIT_ORACLE
        return EXIT_OK
    except Exception as e:
        location = getattr(e, "location", None)
        logger.error(f"{error_kind(e)}: {e}")
        if fmt == "json":
            message = getattr(e, "message", str(e))
            _write(render(error_document(error_kind(e), message, location), "json"), args.output)
        else:
            sys.stderr.write(f"error: {e}\n")
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
