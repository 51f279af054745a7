"""IPET linear programs in lp_solve format, plus a longest-path WCET for acyclic CFGs.

Grammar of the emitted file::

    // comment
    max: <t> x_<block> + ...;
    <name>: <lhs> (= | <= | >=) <rhs>;
    int <var>, <var>, ...;

A side is a sum of terms ``[coef] var`` or a bare integer.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx

from .errors import DocumentError, InvariantViolation
from .program import Cfg

logger = logging.getLogger(__name__)


def block_var(block_id: str) -> str:
    return f"x_{block_id}"


def edge_var(source: str, target: str) -> str:
    return f"e_{source}_{target}"


def _sum(terms: List[Tuple[int, str]]) -> str:
    parts = [var if coef == 1 else f"{coef} {var}" for coef, var in terms]
    return " + ".join(parts) if parts else "0"


def emit_ipet(cfg: Cfg, timings: Mapping[str, int]) -> str:
    """Linear program maximising the sum of block times weighted by execution counts."""
    for b in cfg.order:
        t = timings.get(b)
        if t is None or isinstance(t, float):
            raise InvariantViolation(f"block {b} has no finite time")

    lines = [f"// IPET for program {cfg.name}", ""]
    objective = " + ".join(f"{timings[b]} {block_var(b)}" for b in cfg.order)
    lines.append(f"max: {objective};")
    lines.append("")

    lines.append("// entry and exit")
    lines.append(f"c_entry: {block_var(cfg.entry)} = 1;")
    if cfg.exit != cfg.entry:
        lines.append(f"c_exit: {block_var(cfg.exit)} = 1;")
    lines.append("")

    lines.append("// flow conservation")
    for b in cfg.order:
        x = block_var(b)
        ins = [(1, edge_var(a, b)) for a in cfg.predecessors(b)]
        outs = [(1, edge_var(b, c)) for c in cfg.successors(b)]
        if ins:
            lines.append(f"c_in_{b}: {x} = {_sum(ins)};")
        if outs:
            lines.append(f"c_out_{b}: {x} = {_sum(outs)};")

    if cfg.loops:
        lines.append("")
        lines.append("// loop bounds")
        for header in cfg.order:
            loop = cfg.loops.get(header)
            if loop is None:
                continue
            entries = sorted(loop.entry_edges, key=lambda e: (cfg.order.index(e[0]), cfg.order.index(e[1])))
            rhs = _sum([(loop.bound, edge_var(a, h)) for a, h in entries])
            lines.append(f"c_bound_{header}: {block_var(header)} <= {rhs};")

    variables = [block_var(b) for b in cfg.order] + [edge_var(a, b) for a, b in cfg.edges]
    lines.append("")
    lines.append(f"int {', '.join(variables)};")
    return "\n".join(lines) + "\n"


# -- self-check parser ----------------------------------------------------------------


@dataclass
class LpConstraint:
    name: Optional[str]
    lhs: Dict[str, int]
    op: str
    rhs: Dict[str, int]  # the constant term is stored under ""


@dataclass
class LpDocument:
    objective: Dict[str, int] = field(default_factory=dict)
    constraints: List[LpConstraint] = field(default_factory=list)
    integers: List[str] = field(default_factory=list)

    def constraint(self, name: str) -> LpConstraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)


_TERM = re.compile(r"^([+-]?\d+)?\s*([A-Za-z_][A-Za-z0-9_]*)?$")
_RELATION = re.compile(r"(<=|>=|=)")


def _parse_side(text: str) -> Dict[str, int]:
    result: Dict[str, int] = {}
    for raw in re.sub(r"-\s*", "+ -", text).split("+"):
        term = raw.strip()
        if not term:
            continue
        m = _TERM.match(term)
        if m is None or (m.group(1) is None and m.group(2) is None):
            raise DocumentError(f"malformed term {term!r}", text)
        coef = int(m.group(1)) if m.group(1) is not None else 1
        var = m.group(2) or ""
        result[var] = result.get(var, 0) + coef
    return result


def parse_lp(text: str) -> LpDocument:
    """Parse the subset of the lp_solve format written by :func:`emit_ipet`."""
    body = "\n".join(line.split("//", 1)[0] for line in text.splitlines())
    doc = LpDocument()
    seen_objective = False
    for statement in (s.strip() for s in body.split(";")):
        if not statement:
            continue
        if statement.startswith("max:"):
            if seen_objective:
                raise DocumentError("more than one objective", statement)
            doc.objective = _parse_side(statement[len("max:"):])
            seen_objective = True
            continue
        if statement.startswith("int "):
            doc.integers = [v.strip() for v in statement[len("int "):].split(",") if v.strip()]
            continue
        name = None
        head, sep, rest = statement.partition(":")
        if sep:
            name, statement = head.strip(), rest
        parts = _RELATION.split(statement, maxsplit=1)
        if len(parts) != 3:
            raise DocumentError("constraint without relation", statement)
        lhs, op, rhs = parts
        doc.constraints.append(LpConstraint(name, _parse_side(lhs), op, _parse_side(rhs)))
    if not seen_objective:
        raise DocumentError("missing objective", "max")
    return doc


# -- convenience WCET ----------------------------------------------------------------------


def longest_path_wcet(cfg: Cfg, timings: Mapping[str, int]) -> Optional[int]:
    """Exact WCET as the heaviest entry-to-exit path; None when the CFG has loops."""
    if not cfg.is_acyclic:
        return None
    graph = nx.DiGraph()
    graph.add_node(cfg.entry)
    for a, b in cfg.edges:
        graph.add_edge(a, b, weight=timings[b])
    best = {cfg.entry: timings[cfg.entry]}
    for b in nx.topological_sort(graph):
        if b not in best:
            continue
        for c in graph.successors(b):
            candidate = best[b] + graph.edges[b, c]["weight"]
            if candidate > best.get(c, candidate - 1):
                best[c] = candidate
    wcet = best[cfg.exit]
    logger.debug(f"Longest path of {cfg.name}: {wcet}")
    return wcet
