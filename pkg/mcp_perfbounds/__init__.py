"""
MCP adapter for performative-bounds.

Exposes the perfbounds.bound tool for MCP hosts.
"""

from mcp_perfbounds.tool import handle

__all__ = ["handle"]
__version__ = "0.1.0"
