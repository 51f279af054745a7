"""Tests for the MCP server tools."""

import json

import pytest

from xdd_wcet.server import XddWcetMCPServer
from tests.programs import block, ins, program, single


def payload(result):
    assert len(result) == 1
    return json.loads(result[0].text)


class TestXddWcetMCPServer:
    """Test cases for XddWcetMCPServer."""

    def setup_method(self):
        """Set up test fixtures."""
        self.server = XddWcetMCPServer()

    def test_tools(self):
        """Test tool registration."""
        names = [tool.name for tool in self.server.tools()]
        assert names == ["list_pipelines", "analyze_program"]
        schema = self.server.tools()[1].inputSchema
        assert schema["required"] == ["program"]

    async def test_list_pipelines(self):
        """Test listing the bundled presets."""
        data = payload(await self.server.call_tool("list_pipelines", {}))
        pipelines = {p["name"]: p for p in data["pipelines"]}
        assert set(pipelines) == {"teaching", "experimental"}
        assert pipelines["teaching"]["contention_window"] == 10
        assert pipelines["experimental"]["contention_window"] == 12
        assert pipelines["teaching"]["shared_bus"] is True

    async def test_analyze_program(self):
        """Test analysing a one-instruction program."""
        data = payload(await self.server.call_tool("analyze_program", {"program": single()}))
        assert data["status"] == "ok"
        assert data["pipeline"] == "teaching"
        assert data["blocks"]["b0"]["wcet"] == 5

    async def test_analyze_with_oracle(self):
        """Test that the oracle check is attached to the report."""
        data = payload(await self.server.call_tool(
            "analyze_program", {"program": single(), "oracle_check": True, "contention_window": 1}
        ))
        assert data["oracle"]["match"] is True
        assert data["contention_window"] == 1

    async def test_malformed_program(self):
        """Test that validation failures come back as error documents."""
        doc = program("bad", [block("b0", ins("i0", "warp-drive"))])
        data = payload(await self.server.call_tool("analyze_program", {"program": doc}))
        assert data["status"] == "error"
        assert data["error"]["kind"] == "ProgramValidationError"
        assert data["error"]["location"] == "blocks[0].instructions[0].class"

    async def test_bad_arguments(self):
        """Test that a missing program is a document error."""
        data = payload(await self.server.call_tool("analyze_program", {"max_states": 4}))
        assert data["status"] == "error"
        assert data["error"]["location"].startswith("arguments")

    async def test_unknown_tool(self):
        """Test that unknown tools are rejected."""
        with pytest.raises(ValueError):
            await self.server.call_tool("http_request", {})
