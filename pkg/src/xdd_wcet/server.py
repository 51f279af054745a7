#!/usr/bin/env python3
"""
XDD WCET MCP Server

An MCP server exposing the pipeline timing analysis as tools.
"""

import asyncio
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Union

from dotenv import load_dotenv
from mcp.server import NotificationOptions, Server
from mcp.server.models import InitializationOptions
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool
from pydantic import BaseModel, Field, ValidationError

from . import __version__
from .cli import error_kind, execute
from .config import load_config
from .errors import DocumentError
from .pipeline import load_pipeline, load_preset, preset_names, validation_error
from .program import parse_program
from .report import error_document
from .steps import build_layout

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


class AnalyzeProgramParams(BaseModel):
    """Parameters for the analyze_program tool."""
    program: Dict[str, Any]
    pipeline: Union[str, Dict[str, Any], None] = None
    max_states: Optional[int] = Field(default=None, ge=1)
    max_gen: Optional[int] = Field(default=None, ge=0)
    widen: Optional[bool] = None
    contention_window: Optional[int] = Field(default=None, ge=0)
    oracle_check: bool = False


def _text(payload: Dict[str, Any]) -> List[TextContent]:
    return [TextContent(type="text", text=json.dumps(payload, indent=2, sort_keys=True))]


class XddWcetMCPServer:
    """MCP Server for static pipeline timing analysis."""

    def __init__(self):
        self.config = load_config()
        self.server = Server("xdd-wcet")
        self._setup_tools()

    def _setup_tools(self):
        """Register MCP tools."""

        @self.server.list_tools()
        async def handle_list_tools() -> List[Tool]:
            """List available tools."""
            return self.tools()

        @self.server.call_tool()
        async def handle_call_tool(
            name: str, arguments: Dict[str, Any]
        ) -> Sequence[TextContent]:
            """Handle tool calls."""
            return await self.call_tool(name, arguments)

    def tools(self) -> List[Tool]:
        return [
            Tool(
                name="list_pipelines",
                description="List the bundled pipeline presets",
                inputSchema={"type": "object", "properties": {}},
            ),
            Tool(
                name="analyze_program",
                description="Compute per-block worst-case times of a program on a pipeline",
                inputSchema={
                    "type": "object",
                    "properties": {
                        "program": {
                            "type": "object",
                            "description": "Program description (blocks, edges, loops)"
                        },
                        "pipeline": {
                            "type": ["string", "object"],
                            "description": "Preset name or inline pipeline description",
                            "default": self.config.pipeline
                        },
                        "max_states": {
                            "type": "integer",
                            "description": "Temporal states per block out-set"
                        },
                        "max_gen": {
                            "type": "integer",
                            "description": "Highest event generation"
                        },
                        "widen": {
                            "type": "boolean",
                            "description": "Join oversized state sets instead of failing"
                        },
                        "contention_window": {
                            "type": "integer",
                            "description": "Override the contention window size"
                        },
                        "oracle_check": {
                            "type": "boolean",
                            "description": "Cross-check the result by path enumeration"
                        }
                    },
                    "required": ["program"]
                }
            ),
        ]

    async def call_tool(self, name: str, arguments: Dict[str, Any]) -> Sequence[TextContent]:
        if name == "list_pipelines":
            return await self._handle_list_pipelines()
        if name == "analyze_program":
            return await self._handle_analyze_program(arguments)
        raise ValueError(f"Unknown tool: {name}")

    async def _handle_list_pipelines(self) -> Sequence[TextContent]:
        """Handle list_pipelines tool call."""
        presets = []
        for preset in preset_names():
            p = load_preset(preset)
            presets.append({
                "name": preset,
                "stages": p.stage_names,
                "slots": len(build_layout(p)),
                "shared_bus": p.bus.shared,
                "contention_window": p.contention_window(),
            })
        return _text({"pipelines": presets})

    async def _handle_analyze_program(self, arguments: Dict[str, Any]) -> Sequence[TextContent]:
        """Handle analyze_program tool call."""
        try:
            try:
                params = AnalyzeProgramParams(**arguments)
            except ValidationError as e:
                raise validation_error(e, DocumentError, "arguments") from e
            pipeline = load_pipeline(params.pipeline or self.config.pipeline)
            cfg = parse_program(params.program)
            overrides = {
                k: v for k, v in {
                    "max_states": params.max_states,
                    "max_gen": params.max_gen,
                    "widen": params.widen,
                    "contention_window": params.contention_window,
                }.items() if v is not None
            }
            analysis = self.config.analysis.model_validate({**self.config.analysis.model_dump(), **overrides})
            logger.info(f"Analysing {cfg.name} on {pipeline.name}")
            _, document, _ = await asyncio.to_thread(execute, cfg, pipeline, analysis, params.oracle_check)
            return _text(document)

        except Exception as e:
            logger.error(f"Error analysing program: {e}")
            return _text(error_document(error_kind(e), getattr(e, "message", str(e)), getattr(e, "location", None)))

    async def run_stdio(self):
        """Run the MCP server with stdio transport."""
        logger.info("Starting XDD WCET MCP Server (stdio)")

        async with stdio_server() as (read_stream, write_stream):
            try:
                await self.server.run(
                    read_stream,
                    write_stream,
                    InitializationOptions(
                        server_name="xdd-wcet",
                        server_version=__version__,
                        capabilities=self.server.get_capabilities(
                            notification_options=NotificationOptions(),
                            experimental_capabilities=None,
                        ),
                    ),
                )
            except Exception as e:
                logger.error(f"Server error: {e}")
                raise


async def async_main():
    """Async main entry point."""
    server = XddWcetMCPServer()
    await server.run_stdio()


def main():
    """Synchronous main entry point for console script."""
    asyncio.run(async_main())


if __name__ == "__main__":
    main()
