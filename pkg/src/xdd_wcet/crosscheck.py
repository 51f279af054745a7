"""Compare analysis results against the brute-force oracle."""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .analysis import AnalysisResult, Analyzer, PathStep
from .config import AnalysisConfig
from .ipet import longest_path_wcet
from .oracle import ORACLE_GUARD, enumerate_timings
from .pipeline import PipelineSpec
from .program import Cfg
from .xdd import ExtTime, ext_add

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mismatch:
    path: Tuple[str, ...]
    active: FrozenSet[Tuple[str, int]]
    oracle: int
    analysis: ExtTime

    def describe(self) -> str:
        active = ",".join(f"{b}[{g}]" for b, g in sorted(self.active)) or "-"
        return f"{'>'.join(self.path)} {{{active}}}: oracle {self.oracle}, analysis {self.analysis}"


@dataclass
class CrossCheckReport:
    paths: int = 0
    pairs: int = 0
    exact: bool = True  # false when merged generations only allow an upper-bound check
    mismatches: List[Mismatch] = field(default_factory=list)
    # paths whose fixpoint block times, or the WCET built from them, fall below the oracle
    bound_violations: List[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.bound_violations


def path_total(analyzer: Analyzer, steps: List[PathStep], active: FrozenSet[Tuple[str, int]]) -> ExtTime:
    """Total time of a replayed path under one configuration."""
    store = analyzer.store
    gamma = {store.event(base, gen) for base, gen in active}
    total: ExtTime = 0
    for step in steps[:-1]:
        total = ext_add(total, store.eval(step.base, gamma))
    return ext_add(total, store.eval(steps[-1].rho, gamma))


def path_bound(times: Mapping[str, int], path: Tuple[str, ...]) -> int:
    """Upper bound of a path built from per-block WCETs."""
    return sum(times[b] for b in path)


def cross_validate(cfg: Cfg, pipeline: PipelineSpec, config: Optional[AnalysisConfig] = None,
                   guard: int = ORACLE_GUARD, result: Optional[AnalysisResult] = None) -> CrossCheckReport:
    """Replay every bounded path through the analysis and check each
    configuration against the oracle.

    The block WCETs of the fixpoint (``result``, computed when not given)
    must bound every path as well, and so must the longest-path WCET when
    the CFG has no loops.
    """
    analyzer = Analyzer(cfg, pipeline, config)
    entries = enumerate_timings(cfg, pipeline, analyzer.window, guard)
    caps = [analyzer.generation_cap(a.base) for a in analyzer.inventory]
    report = CrossCheckReport(exact=not any(forced for _, forced in caps))
    if result is None:
        result = Analyzer(cfg, pipeline, config).run()
    times = result.block_times()
    wcet = longest_path_wcet(cfg, times)

    replayed: Dict[Tuple[str, ...], List[PathStep]] = {}
    for entry in entries:
        steps = replayed.get(entry.path)
        if steps is None:
            steps = analyzer.trace_path(entry.path)
            replayed[entry.path] = steps
        total = path_total(analyzer, steps, entry.active)
        report.pairs += 1
        agrees = total == entry.total if report.exact else total >= entry.total
        if not agrees:
            mismatch = Mismatch(entry.path, entry.active, entry.total, total)
            logger.error(f"Oracle mismatch: {mismatch.describe()}")
            report.mismatches.append(mismatch)
        bound = path_bound(times, entry.path)
        if wcet is not None:
            bound = min(bound, wcet)
        if bound < entry.total:
            violation = Mismatch(entry.path, entry.active, entry.total, bound)
            logger.error(f"WCET bound below oracle: {violation.describe()}")
            report.bound_violations.append(violation)
    report.paths = len(replayed)
    logger.info(
        f"Cross-checked {report.pairs} pairs on {report.paths} paths, {len(report.mismatches)} mismatches, "
        f"{len(report.bound_violations)} bound violations"
    )
    return report
