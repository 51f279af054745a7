"""Tests for the brute-force reference timings."""

import ast
from pathlib import Path

import pytest

import xdd_wcet.oracle as oracle_module
from xdd_wcet.errors import InvariantViolation, OracleGuardError
from xdd_wcet.oracle import (
    PathTimer,
    ScalarXg,
    build_xg,
    enumerate_paths,
    enumerate_timings,
    format_entries,
    path_occurrences,
    path_sequence,
    solve_xg,
)
from xdd_wcet.pipeline import load_preset
from xdd_wcet.program import parse_program
from tests.programs import (
    SAMPLE_TIMES,
    SAMPLE_TOTAL,
    block,
    diamond,
    ins,
    sample,
    loop,
    nested_loops,
    program,
    self_loop,
    straight,
)


class TestScalarGraphs:
    """Test cases for solving execution graphs with fixed latencies."""

    def test_single_vertex(self):
        """One vertex starts at zero."""
        g = ScalarXg([(0, "A")], {}, {(0, "A"): 1})
        assert solve_xg(g) == {(0, "A"): (0, 1)}

    def test_end_dependency(self):
        """A wait on the end of a predecessor."""
        g = ScalarXg([(0, "A"), (1, "A")], {(1, "A"): [((0, "A"), 1)]}, {(0, "A"): 2, (1, "A"): 3})
        assert solve_xg(g)[(1, "A")] == (2, 5)

    def test_start_dependency(self):
        """A wait on the start of a predecessor."""
        g = ScalarXg([(0, "A"), (1, "A")], {(1, "A"): [((0, "A"), 0)]}, {(0, "A"): 2, (1, "A"): 3})
        assert solve_xg(g)[(1, "A")] == (0, 3)

    def test_cycle(self):
        """A cyclic graph cannot be solved."""
        g = ScalarXg([(0, "A"), (1, "A")], {(0, "A"): [((1, "A"), 1)], (1, "A"): [((0, "A"), 1)]},
                     {(0, "A"): 1, (1, "A"): 1})
        with pytest.raises(InvariantViolation):
            solve_xg(g)

    def test_sample_times(self):
        """Start and end of every vertex of the six-instruction example."""
        seq = parse_program(sample()).block("b0").instructions
        times = solve_xg(build_xg(seq, load_preset("teaching")))
        for i, stages in SAMPLE_TIMES.items():
            for stage, expected in stages.items():
                assert times[(i, stage)] == expected, (i, stage)

    def test_path_timer_agrees_without_misses(self):
        """With every access hitting, the path timer gives the same schedule."""
        seq = list(parse_program(sample()).block("b0").instructions)
        timer = PathTimer(seq, [(0, len(seq))], load_preset("teaching"))
        assert timer.total(set()) == SAMPLE_TOTAL
        assert timer.run(set())[(5, "CM")] == SAMPLE_TIMES[5]["CM"]


class TestPaths:
    """Test cases for path enumeration."""

    def test_straight(self):
        """A straight program has one path through the synthetic blocks."""
        assert enumerate_paths(parse_program(straight())) == [("entry", "b0", "b1", "exit")]

    def test_diamond(self):
        """Two paths, in successor order."""
        paths = enumerate_paths(parse_program(diamond()))
        assert [p[2] for p in paths] == ["b1", "b2"]

    def test_loop_bounds(self):
        """Every iteration count up to the bound."""
        paths = enumerate_paths(parse_program(loop(bound=3)))
        assert sorted(p.count("h") for p in paths) == [1, 2, 3]

    def test_nested_loops(self):
        """The inner bound restarts with every entry into the inner loop."""
        paths = enumerate_paths(parse_program(nested_loops()))
        assert len(paths) == 3

    def test_guard(self):
        """Too many paths stop the enumeration."""
        with pytest.raises(OracleGuardError):
            enumerate_paths(parse_program(diamond()), limit=0)


class TestTimings:
    """Test cases for (path, configuration) enumeration."""

    def test_counts(self):
        """One entry per path and configuration of its NC accesses."""
        p = load_preset("teaching")
        assert len(enumerate_timings(parse_program(straight()), p)) == 1
        assert len(enumerate_timings(parse_program(diamond()), p)) == 4
        assert len(enumerate_timings(parse_program(self_loop()), p)) == 6
        assert len(enumerate_timings(parse_program(loop(bound=3)), p)) == 14
        assert len(enumerate_timings(parse_program(nested_loops()), p)) == 7

    def test_pair_guard(self):
        """Too many pairs stop the enumeration."""
        with pytest.raises(OracleGuardError):
            enumerate_timings(parse_program(loop(bound=3)), load_preset("teaching"), guard=10)

    def test_generations(self):
        """An occurrence is aged by every later back edge of its loop."""
        cfg = parse_program(self_loop())
        path = ("entry", "h", "h", "exit")
        seq, spans = path_sequence(cfg, path)
        timer = PathTimer(seq, spans, load_preset("teaching"))
        occurrences = path_occurrences(cfg, path, timer, spans)
        assert sorted(o.key for o in occurrences.values()) == [("h:i0:data", 0), ("h:i0:data", 1)]

    def test_miss_is_slower(self):
        """A miss never makes a path faster."""
        entries = enumerate_timings(parse_program(self_loop(bound=1)), load_preset("teaching"))
        hit = [e.total for e in entries if not e.active]
        miss = [e.total for e in entries if e.active]
        assert max(miss) > max(hit)

    def test_isolated_miss_costs_the_memory_latency(self):
        """An uncontended miss over the shared bus takes the memory latency, not bus plus hit."""
        doc = program("p", [block("b0", ins("i0", "load", writes=[1], fetch="NC", data="NC"))])
        seq = list(parse_program(doc).block("b0").instructions)
        timer = PathTimer(seq, [(0, 1)], load_preset("experimental"))
        for stage in ("FE", "EX"):
            start, end = timer.run({(0, stage)})[(0, stage)]
            assert end - start == 7, stage
            start, end = timer.run(set())[(0, stage)]
            assert end - start == 1, stage

    def test_teaching_miss_lasts_one_bus_transaction(self):
        """On the teaching pipeline a miss ends with its 9-cycle bus transaction."""
        doc = program("p", [block("b0", ins("i0", "load", writes=[1], data="NC"))])
        seq = list(parse_program(doc).block("b0").instructions)
        timer = PathTimer(seq, [(0, 1)], load_preset("teaching"))
        start, end = timer.run({(0, "ME")})[(0, "ME")]
        assert end - start == 9

    def test_format(self):
        """Entries print as path, active events and total."""
        entries = enumerate_timings(parse_program(straight()), load_preset("teaching"))
        text = format_entries(entries)
        assert text.startswith("entry>b0>b1>exit  {-}  ")
        assert text.endswith(str(entries[0].total))


class TestIndependence:
    """The reference must not share code with the analysis it checks."""

    def test_imports(self):
        """No imports of diagrams, states, steps, contention or the analysis."""
        tree = ast.parse(Path(oracle_module.__file__).read_text(encoding="utf-8"))
        imported = set()
        for node in ast.walk(tree):
            if isinstance(node, ast.ImportFrom):
                imported.add((node.module or "").split(".")[-1])
            elif isinstance(node, ast.Import):
                imported.update(alias.name.split(".")[-1] for alias in node.names)
        assert not imported & {"xdd", "algebra", "steps", "contention", "analysis"}
