"""Tests for the IPET writer and its self-check parser."""

import pytest

from xdd_wcet.errors import DocumentError, InvariantViolation
from xdd_wcet.ipet import block_var, edge_var, emit_ipet, longest_path_wcet, parse_lp
from xdd_wcet.program import parse_program
from tests.programs import diamond, loop, single

LOOP_TIMES = {"pre": 4, "h": 10, "body": 3, "post": 2}
DIAMOND_TIMES = {"entry": 0, "b0": 5, "b1": 7, "b2": 3, "b3": 4, "exit": 0}


class TestEmit:
    """Test cases for the emitted linear program."""

    def setup_method(self):
        """Set up test fixtures."""
        self.cfg = parse_program(loop(bound=3))
        self.text = emit_ipet(self.cfg, LOOP_TIMES)

    def test_header_and_objective(self):
        """Comment header and weighted objective."""
        assert self.text.startswith("// IPET for program loop\n")
        assert "max: 4 x_pre + 10 x_h + 3 x_body + 2 x_post;" in self.text

    def test_entry_exit_and_bounds(self):
        """Entry and exit run once; the header is bounded by its entry edge."""
        assert "c_entry: x_pre = 1;" in self.text
        assert "c_exit: x_post = 1;" in self.text
        assert "c_bound_h: x_h <= 3 e_pre_h;" in self.text

    def test_flow_conservation(self):
        """Inflow and outflow rows for every block with edges."""
        assert "c_in_h: x_h = e_pre_h + e_body_h;" in self.text
        assert "c_out_h: x_h = e_h_body + e_h_post;" in self.text
        assert "c_in_pre" not in self.text

    def test_round_trip_through_parser(self):
        """The parser reads back every row."""
        doc = parse_lp(self.text)
        assert doc.objective == {"x_pre": 4, "x_h": 10, "x_body": 3, "x_post": 2}
        bound = doc.constraint("c_bound_h")
        assert bound.op == "<="
        assert bound.lhs == {"x_h": 1}
        assert bound.rhs == {"e_pre_h": 3}
        assert doc.constraint("c_entry").rhs == {"": 1}
        assert set(doc.integers) == {block_var(b) for b in self.cfg.order} | {
            edge_var(a, b) for a, b in self.cfg.edges
        }

    def test_single_block(self):
        """Entry and exit rows use the synthetic blocks."""
        cfg = parse_program(single())
        text = emit_ipet(cfg, {"entry": 0, "b0": 5, "exit": 0})
        assert "c_entry: x_entry = 1;" in text
        assert "max: 0 x_entry + 5 x_b0 + 0 x_exit;" in text

    def test_missing_time(self):
        """Every block needs a finite time."""
        with pytest.raises(InvariantViolation):
            emit_ipet(self.cfg, {"pre": 4})


class TestParser:
    """Test cases for malformed input."""

    def test_missing_objective(self):
        """A program without objective is rejected."""
        with pytest.raises(DocumentError):
            parse_lp("c: x = 1;")

    def test_missing_relation(self):
        """Rows need a relation."""
        with pytest.raises(DocumentError):
            parse_lp("max: 3 x;\nc: x 2;")

    def test_negative_terms(self):
        """Subtraction becomes a negative coefficient."""
        doc = parse_lp("max: x - 2 y;\nc: x - 1 y >= 0;")
        assert doc.objective == {"x": 1, "y": -2}
        assert doc.constraint("c").lhs == {"x": 1, "y": -1}


class TestLongestPath:
    """Test cases for the acyclic WCET."""

    def test_diamond(self):
        """The heavier branch wins."""
        assert longest_path_wcet(parse_program(diamond()), DIAMOND_TIMES) == 16

    def test_loops_need_the_solver(self):
        """Cyclic programs have no longest path."""
        assert longest_path_wcet(parse_program(loop()), LOOP_TIMES) is None
