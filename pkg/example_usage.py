#!/usr/bin/env python3
"""
Example usage of the XDD WCET MCP Server.

This script lists the bundled pipelines and analyses a small loop through
the same tool handlers an MCP client would call.
"""

import asyncio
import json
import sys
from pathlib import Path

# Add src to path for local development
sys.path.insert(0, str(Path(__file__).parent / "src"))

from xdd_wcet.server import XddWcetMCPServer

LOOP_PROGRAM = {
    "schema_version": 1,
    "name": "sum",
    "blocks": [
        {"id": "pre", "instructions": [
            {"id": "i0", "class": "alu-add", "regs_written": [1], "fetch": "NC"},
        ]},
        {"id": "h", "instructions": [
            {"id": "i0", "class": "load", "regs_read": [1], "regs_written": [2], "fetch": "NC", "data": "NC"},
            {"id": "i1", "class": "alu-add", "regs_read": [2, 3], "regs_written": [3]},
            {"id": "i2", "class": "branch", "regs_read": [3]},
        ]},
        {"id": "post", "instructions": [
            {"id": "i0", "class": "store", "regs_read": [3], "data": "AH"},
        ]},
    ],
    "edges": [
        {"source": "pre", "target": "h"},
        {"source": "h", "target": "h"},
        {"source": "h", "target": "post"},
    ],
    "loops": [{"header": "h", "bound": 4}],
}


async def example_list_pipelines():
    """Example of listing the bundled pipeline presets."""
    server = XddWcetMCPServer()
    result = await server.call_tool("list_pipelines", {})
    data = json.loads(result[0].text)

    print("Pipelines:")
    for p in data["pipelines"]:
        print(f"  {p['name']}: stages {' '.join(p['stages'])}, window {p['contention_window']}")


async def example_analyze():
    """Example of analysing a bounded loop with the oracle cross-check."""
    server = XddWcetMCPServer()
    arguments = {"program": LOOP_PROGRAM, "pipeline": "teaching", "oracle_check": True}

    print(f"\nAnalysing {LOOP_PROGRAM['name']}...")
    try:
        result = await server.call_tool("analyze_program", arguments)
        data = json.loads(result[0].text)
        if data["status"] != "ok":
            print(f"Error: {data['error']['kind']}: {data['error']['message']}")
            return

        for block, info in data["blocks"].items():
            print(f"  {block}: wcet {info['wcet']} ({info['in_states']} -> {info['out_states']} states)")
        print(f"Oracle match: {data['oracle']['match']} on {data['oracle']['paths']} paths")

    except Exception as e:
        print(f"Error: {e}")


async def main():
    """Main example function."""
    print("XDD WCET MCP Server Examples")
    print("=" * 40)

    await example_list_pipelines()
    await example_analyze()

    print("\nExamples completed!")


if __name__ == "__main__":
    asyncio.run(main())
