"""Text and JSON reports of an analysis run."""

import json
from collections import Counter
from typing import Any, Dict, List, Optional

from .analysis import AnalysisResult
from .crosscheck import CrossCheckReport
from .ipet import longest_path_wcet
from .pipeline import PipelineSpec
from .program import event_inventory

REPORT_SCHEMA = "xdd-wcet-report/1"


def _histogram(values) -> Dict[str, int]:
    counts = Counter(values)
    return {str(k): counts[k] for k in sorted(counts)}


def build_report(result: AnalysisResult, pipeline: PipelineSpec,
                 oracle: Optional[CrossCheckReport] = None) -> Dict[str, Any]:
    """Machine-readable report document."""
    cfg = result.cfg
    store = result.store
    times = result.block_times()
    blocks = {}
    for b in cfg.order:
        r = result.blocks[b]
        blocks[b] = {
            "in_states": len(r.in_set),
            "out_states": len(r.out_set),
            "wcet": times[b],
            "instructions": len(cfg.blocks[b]),
            "synthetic": cfg.blocks[b].synthetic,
            "pessimized": r.pessimized,
            "widened": r.widened,
            "times": [store.to_text(t) for t in r.timing.times],
        }
    edges = [
        {"source": a, "target": c, "states": n}
        for (a, c), n in sorted(result.edges.items(), key=lambda e: (cfg.order.index(e[0][0]), cfg.order.index(e[0][1])))
    ]
    lifetimes = [
        {"event": l.base, "block": l.block, "born_at": l.born_at, "died_at": l.died_at, "length": l.length}
        for l in sorted(result.lifetimes, key=lambda l: (cfg.order.index(l.block), l.born_at, l.base))
    ]
    document: Dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "status": "ok",
        "program": cfg.name,
        "pipeline": pipeline.name,
        "contention_window": result.window if pipeline.bus.shared else None,
        "iterations": result.iterations,
        "pessimized": result.pessimized,
        "widened": result.widened,
        "blocks": blocks,
        "edges": edges,
        "states_per_edge": _histogram(e["states"] for e in edges),
        "lifetimes": lifetimes,
        "lifetime_histogram": _histogram(l["length"] for l in lifetimes),
        "wcet": longest_path_wcet(cfg, times),
        "events": [a.base for a in event_inventory(cfg)],
    }
    if oracle is not None:
        document["oracle"] = {
            "match": oracle.ok,
            "exact": oracle.exact,
            "paths": oracle.paths,
            "pairs": oracle.pairs,
            "mismatches": [m.describe() for m in oracle.mismatches],
            "bound_violations": [m.describe() for m in oracle.bound_violations],
        }
    if result.contention_traces:
        document["contention"] = [
            {"window": name, "steps": [{"label": lab, "name": n, "xdd": store.to_text(h)} for lab, n, h in steps]}
            for name, steps in result.contention_traces
        ]
    return document


def render_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def render_text(document: Dict[str, Any]) -> str:
    lines: List[str] = [
        "xdd-wcet report",
        f"program: {document['program']}",
        f"pipeline: {document['pipeline']}",
        f"block visits: {document['iterations']}",
        "",
    ]
    for b, info in document["blocks"].items():
        lines.append(f"block {b}")
        lines.append(f"  states: in {info['in_states']}, out {info['out_states']}")
        lines.append(f"  wcet: {info['wcet']}")
        for k, text in enumerate(info["times"]):
            lines.append(f"  time[{k}]: {text}")
        flags = [name for name in ("pessimized", "widened", "synthetic") if info[name]]
        if flags:
            lines.append(f"  flags: {', '.join(flags)}")
    lines.append("")
    lines.append("edges")
    for e in document["edges"]:
        lines.append(f"  {e['source']} -> {e['target']}: {e['states']} states")
    lines.append("")
    lines.append("event lifetimes")
    if not document["lifetime_histogram"]:
        lines.append("  none")
    for length, count in document["lifetime_histogram"].items():
        lines.append(f"  {length} instructions: {count} events")
    for window in document.get("contention", []):
        lines.append("")
        lines.append(f"contention {window['window']}")
        for step in window["steps"]:
            lines.append(f"  {step['label']}. {step['name']} = {step['xdd']}")
    lines.append("")
    if document["wcet"] is None:
        lines.append("WCET: solve the IPET program (the CFG has loops)")
    else:
        lines.append(f"WCET: {document['wcet']}")
    if document["pessimized"] or document["widened"]:
        lines.append("warning: results are pessimized")
    oracle = document.get("oracle")
    if oracle is not None:
        if oracle["match"]:
            lines.append(f"oracle match ({oracle['pairs']} configurations on {oracle['paths']} paths)")
        else:
            lines.append(f"oracle mismatch ({len(oracle['mismatches'])} of {oracle['pairs']})")
            lines.extend(f"  {m}" for m in oracle["mismatches"])
            if oracle.get("bound_violations"):
                lines.append(f"WCET bound below oracle ({len(oracle['bound_violations'])} of {oracle['pairs']})")
                lines.extend(f"  {m}" for m in oracle["bound_violations"])
    return "\n".join(lines) + "\n"


def render(document: Dict[str, Any], fmt: str) -> str:
    return render_json(document) if fmt == "json" else render_text(document)


def error_document(kind: str, message: str, location: Optional[str] = None) -> Dict[str, Any]:
    return {"schema": REPORT_SCHEMA, "status": "error", "error": {"kind": kind, "message": message, "location": location}}
