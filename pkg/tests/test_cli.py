"""Tests for the command line."""

import json

import pytest

from xdd_wcet.cli import (
    EXIT_BUDGET,
    EXIT_DOCUMENT,
    EXIT_FAILURE,
    EXIT_INVARIANT,
    EXIT_OK,
    build_parser,
    exit_code,
    main,
    resolve_config,
)
from xdd_wcet.config import WcetConfig
from xdd_wcet.errors import (
    BudgetExceededError,
    InvariantViolation,
    OracleGuardError,
    ProgramValidationError,
)
from tests.programs import block, diamond, ins, loop, program, single


@pytest.fixture
def write_program(tmp_path):
    def write(doc, name="prog.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return write


class TestExitCodes:
    """Test cases for mapping errors to exit codes."""

    def test_mapping(self):
        """Each error family has its own code."""
        assert exit_code(ProgramValidationError("bad", "blocks[0]")) == EXIT_DOCUMENT
        assert exit_code(BudgetExceededError("too many", "h")) == EXIT_BUDGET
        assert exit_code(OracleGuardError("too many paths")) == EXIT_BUDGET
        assert exit_code(InvariantViolation("broken")) == EXIT_INVARIANT
        assert exit_code(ValueError("other")) == EXIT_FAILURE


class TestArguments:
    """Test cases for flag handling."""

    def test_flags_override_environment_defaults(self):
        """Command-line flags win over the loaded configuration."""
        args = build_parser().parse_args(
            ["p.json", "--max-states", "7", "--widen", "on", "--no-matrices", "--format", "json"]
        )
        config = resolve_config(args, WcetConfig())
        assert config.analysis.max_states == 7
        assert config.analysis.widen is True
        assert config.analysis.use_matrices is False
        assert config.report.format == "json"
        assert config.pipeline == "teaching"

    def test_invalid_widen(self):
        """Widen only takes on or off."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["p.json", "--widen", "maybe"])

    def test_max_gen_accepts_zero(self):
        """Generation zero is a valid cap; only negative values are rejected."""
        args = build_parser().parse_args(["p.json", "--max-gen", "0"])
        assert args.max_gen == 0
        assert resolve_config(args, WcetConfig()).analysis.max_gen == 0
        with pytest.raises(SystemExit):
            build_parser().parse_args(["p.json", "--max-gen", "-1"])
        with pytest.raises(SystemExit):
            build_parser().parse_args(["p.json", "--max-states", "0"])

    def test_version(self, capsys):
        """The version flag prints and exits."""
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "xdd-wcet" in capsys.readouterr().out


class TestRuns:
    """Test cases for complete runs."""

    def test_single_block_text(self, write_program, capsys):
        """A one-instruction program takes five cycles on the teaching pipeline."""
        assert main([write_program(single())]) == EXIT_OK
        out = capsys.readouterr().out
        assert "block b0" in out
        assert "WCET: 5" in out

    def test_single_block_json(self, write_program, capsys):
        """The JSON report carries per-block results."""
        assert main([write_program(single()), "--format", "json"]) == EXIT_OK
        document = json.loads(capsys.readouterr().out)
        assert document["status"] == "ok"
        assert document["schema"] == "xdd-wcet-report/1"
        assert document["blocks"]["b0"]["wcet"] == 5
        assert document["blocks"]["entry"]["synthetic"] is True
        assert document["contention_window"] == 10
        assert document["wcet"] == 5

    def test_deterministic_output(self, write_program, capsys):
        """Two runs print the same report."""
        path = write_program(diamond())
        main([path, "--format", "json"])
        first = capsys.readouterr().out
        main([path, "--format", "json"])
        assert capsys.readouterr().out == first

    def test_oracle_check(self, write_program, capsys):
        """The cross-check result is part of the text report."""
        assert main([write_program(diamond()), "--oracle-check"]) == EXIT_OK
        assert "oracle match (4 configurations on 2 paths)" in capsys.readouterr().out

    def test_loop_needs_ipet(self, write_program, tmp_path, capsys):
        """Cyclic programs point at the linear program, which is written on request."""
        lp = tmp_path / "prog.lp"
        assert main([write_program(loop()), "--emit-lp", str(lp)]) == EXIT_OK
        assert "WCET: solve the IPET program" in capsys.readouterr().out
        text = lp.read_text(encoding="utf-8")
        assert "c_bound_h: x_h <= 3 e_pre_h;" in text

    def test_output_file_and_dumps(self, write_program, tmp_path):
        """Reports and DOT dumps go to the requested places."""
        out = tmp_path / "report.json"
        dumps = tmp_path / "dot"
        code = main([write_program(single()), "--format", "json", "--output", str(out), "--dump-xdd", str(dumps)])
        assert code == EXIT_OK
        assert json.loads(out.read_text(encoding="utf-8"))["program"] == "single"
        assert (dumps / "b0_0.dot").read_text(encoding="utf-8").startswith("digraph")

    def test_trace_contention(self, write_program, capsys):
        """Traced windows appear in the JSON report."""
        doc = program("c", [block("b0", ins("i0", writes=[1]), ins("i1", "load", reads=[1], data="NC"),
                                  ins("i2", fetch="NC"))])
        assert main([write_program(doc), "--format", "json", "--trace-contention"]) == EXIT_OK
        document = json.loads(capsys.readouterr().out)
        assert document["contention"][0]["steps"][0]["name"] == "rho_ME0"


class TestFailures:
    """Test cases for failing runs."""

    def test_malformed_program(self, write_program, capsys):
        """A schema violation exits with the document code and a located error."""
        doc = program("bad", [block("b0", ins("i0", "warp-drive"))])
        assert main([write_program(doc), "--format", "json"]) == EXIT_DOCUMENT
        document = json.loads(capsys.readouterr().out)
        assert document["status"] == "error"
        assert document["error"]["kind"] == "ProgramValidationError"
        assert document["error"]["location"] == "blocks[0].instructions[0].class"

    def test_missing_file(self, tmp_path, capsys):
        """An unreadable program is a document error reported on stderr."""
        assert main([str(tmp_path / "missing.json")]) == EXIT_DOCUMENT
        assert capsys.readouterr().err.startswith("error: ")

    def test_unknown_pipeline(self, write_program):
        """Unknown presets are document errors."""
        assert main([write_program(single()), "--pipeline", "nope"]) == EXIT_DOCUMENT

    def test_budget(self, write_program):
        """An exhausted iteration budget exits with the budget code."""
        assert main([write_program(loop()), "--max-iterations", "1"]) == EXIT_BUDGET
