"""Tests for program documents and CFG construction."""

import json

import pytest

from xdd_wcet.errors import ProgramValidationError
from xdd_wcet.program import event_inventory, load_program, parse_program
from tests.programs import (
    block,
    diamond,
    ins,
    irreducible,
    loop,
    nested_loops,
    program,
    self_loop,
    straight,
    unbounded,
)


class TestCfgConstruction:
    """Test cases for building control-flow graphs."""

    def test_implicit_entry_and_exit(self):
        """Without an entry and exit the program is wrapped in synthetic blocks."""
        cfg = parse_program(diamond())
        assert cfg.entry == "entry"
        assert cfg.exit == "exit"
        assert cfg.order == ("entry", "b0", "b1", "b2", "b3", "exit")
        assert cfg.successors("entry") == ["b0"]
        assert cfg.predecessors("exit") == ["b3"]
        assert cfg.is_acyclic

    def test_explicit_entry_and_exit(self):
        """A named entry without predecessors and exit without successors are used as is."""
        doc = diamond()
        doc["entry"], doc["exit"] = "b0", "b3"
        cfg = parse_program(doc)
        assert cfg.entry == "b0"
        assert cfg.exit == "b3"
        assert not any(b.synthetic for b in cfg.blocks.values())

    def test_synthetic_blocks(self):
        """A loop header as entry gets an empty block in front and behind."""
        cfg = parse_program(self_loop())
        assert cfg.entry == "entry"
        assert cfg.exit == "exit"
        assert cfg.block("entry").synthetic
        assert len(cfg.block("exit")) == 0
        assert cfg.successors("entry") == ["h"]

    def test_synthetic_names_avoid_clashes(self):
        """An existing block called entry forces a fresh name."""
        doc = program("clash", [block("entry", ins("i0")), block("b", ins("i0"))],
                      edges=[("entry", "b"), ("b", "entry")], loops=[("entry", 2)],
                      entry="entry", exit="b")
        cfg = parse_program(doc)
        assert cfg.entry == "entry_"
        assert cfg.exit == "exit"

    def test_instruction_positions(self):
        """Instructions know their block and position."""
        cfg = parse_program(straight())
        second = cfg.block("b1").instructions[1]
        assert second.block == "b1"
        assert second.position == 1
        assert second.regs_read == frozenset({3})

    def test_loops(self):
        """Natural loops, bodies and bound products."""
        cfg = parse_program(loop(bound=3))
        h = cfg.loops["h"]
        assert h.bound == 3
        assert h.body == {"h", "body"}
        assert h.back_edges == {("body", "h")}
        assert h.entry_edges == {("pre", "h")}
        assert cfg.is_back_edge("body", "h")
        assert not cfg.is_back_edge("pre", "h")
        assert cfg.bound_product("body") == 3
        assert cfg.bound_product("post") == 1

    def test_nested_loops(self):
        """Enclosing loops are listed outermost first."""
        cfg = parse_program(nested_loops())
        assert [lp.header for lp in cfg.enclosing_loops("inner")] == ["outer", "inner"]
        assert cfg.bound_product("inner") == 4
        assert cfg.bound_product("latch") == 2


class TestValidation:
    """Test cases for rejected programs."""

    def test_unbounded_loop(self):
        """A cycle without a bound is rejected at its header."""
        with pytest.raises(ProgramValidationError) as exc:
            parse_program(unbounded())
        assert "unbounded" in exc.value.message
        assert exc.value.location == "blocks[1]"

    def test_irreducible(self):
        """A cycle with two entries is rejected."""
        with pytest.raises(ProgramValidationError, match="irreducible"):
            parse_program(irreducible())

    def test_empty_block(self):
        """Blocks need at least one instruction."""
        with pytest.raises(ProgramValidationError) as exc:
            parse_program(program("empty", [block("b0")]))
        assert exc.value.location == "blocks[0].instructions"

    def test_unknown_class(self):
        """Malformed records point at the offending field."""
        doc = program("bad", [block("b0", ins("i0"), ins("i1", "vector-add"))])
        with pytest.raises(ProgramValidationError) as exc:
            parse_program(doc)
        assert exc.value.location == "blocks[0].instructions[1].class"

    def test_load_needs_data_classification(self):
        """Loads and stores carry a data classification."""
        doc = program("bad", [block("b0", ins("i0", "load", writes=[1]))])
        with pytest.raises(ProgramValidationError, match="data classification"):
            parse_program(doc)

    def test_duplicate_instruction(self):
        """Instruction ids are unique within a block."""
        doc = program("dup", [block("b0", ins("i0"), ins("i0"))])
        with pytest.raises(ProgramValidationError) as exc:
            parse_program(doc)
        assert exc.value.location == "blocks[0].instructions[1].id"

    def test_unknown_edge_target(self):
        """Edges must name existing blocks."""
        doc = program("edge", [block("b0", ins("i0"))], edges=[("b0", "b9")])
        with pytest.raises(ProgramValidationError) as exc:
            parse_program(doc)
        assert exc.value.location == "edges[0].target"

    def test_bound_on_non_header(self):
        """Loop bounds only go on loop headers."""
        doc = diamond()
        doc["loops"] = [{"header": "b1", "bound": 2}]
        with pytest.raises(ProgramValidationError, match="not a loop header"):
            parse_program(doc)

    def test_unreadable_file(self, tmp_path):
        """Broken JSON is reported against the file."""
        path = tmp_path / "prog.json"
        path.write_text("[", encoding="utf-8")
        with pytest.raises(ProgramValidationError) as exc:
            load_program(str(path))
        assert exc.value.location == str(path)

    def test_load_from_file(self, tmp_path):
        """A valid file loads."""
        path = tmp_path / "prog.json"
        path.write_text(json.dumps(straight()), encoding="utf-8")
        assert load_program(str(path)).name == "straight"


class TestEventInventory:
    """Test cases for the NC access inventory."""

    def test_order_and_bases(self):
        """Block order, then instruction order, fetch before data."""
        doc = program("inv", [
            block("b0", ins("i0", "load", writes=[1], fetch="NC", data="NC"), ins("i1", fetch="AM")),
            block("b1", ins("i0", "store", reads=[1], data="NC")),
        ], edges=[("b0", "b1")])
        inventory = event_inventory(parse_program(doc))
        assert [a.base for a in inventory] == ["b0:i0:fetch", "b0:i0:data", "b1:i0:data"]
        assert [a.kind for a in inventory] == ["fetch", "data", "data"]

    def test_no_events_without_nc(self):
        """AH and AM accesses carry no events."""
        assert event_inventory(parse_program(straight())) == []
