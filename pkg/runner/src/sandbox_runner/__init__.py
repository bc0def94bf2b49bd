"""Sandbox worker process speaking the newline-JSON execution protocol."""

from .server import (
    PROTOCOL_VERSION,
    Diagnostic,
    WorkerState,
    handle_line,
    handle_request,
    reduce_traceback,
    serve_loop,
)

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL_VERSION",
    "Diagnostic",
    "WorkerState",
    "handle_line",
    "handle_request",
    "reduce_traceback",
    "serve_loop",
]
