"""Worker process executing submitted functions over stdin/stdout.

The protocol is newline-delimited JSON, one request per line, exactly one
response line per request, in order (protocol version 1):

  requests:  {"op":"hello"} | {"op":"load","source":S,"entry":E}
             | {"op":"call","args":A,"timeout_ms":T[,"seed":N]}
             | {"op":"reset"} | {"op":"exit"}
  responses: {"status":"ok","value":V}
             | {"status":"error","etype":E,"message":M,"frame":F}

Responses are serialized with sorted keys, compact separators, and ASCII
escaping so they are byte-stable; the golden transcript files are the
conformance suite for any implementation of this protocol.

Submitted code runs in a fresh namespace per load with a curated builtin
surface (math and random importable; no file, network, or process access).
Failures are reduced to the exception class, its message, and the innermost
stack frame only. The loop is strictly single-threaded; calls run inline and
timeout enforcement is the supervising client's job (it kills and respawns
this process). Malformed input never terminates the loop: it answers a
ProtocolError response and keeps reading. This is a fault boundary, not a
security boundary — do not feed it hostile input.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import sys
from dataclasses import dataclass

PROTOCOL_VERSION = 1
SOURCE_FILENAME = "<candidate>"

_SAFE_BUILTIN_NAMES = (
    "abs", "all", "any", "bool", "dict", "divmod", "enumerate", "filter",
    "float", "int", "isinstance", "issubclass", "iter", "len", "list", "map",
    "max", "min", "next", "pow", "print", "range", "repr", "reversed",
    "round", "set", "sorted", "str", "sum", "tuple", "zip",
    "ArithmeticError", "AssertionError", "AttributeError", "Exception",
    "IndexError", "KeyError", "LookupError", "NameError", "RuntimeError",
    "StopIteration", "TypeError", "ValueError", "ZeroDivisionError", "True",
    "False", "None",
)

_ALLOWED_MODULES = ("math", "random")


def _restricted_import(name, globals=None, locals=None, fromlist=(), level=0):
    if level == 0 and name.split(".")[0] in _ALLOWED_MODULES:
        return __import__(name, globals, locals, fromlist, level)
    raise ImportError(f"import of {name!r} is not allowed in the sandbox")


def make_namespace() -> dict:
    import builtins

    allowed = {n: getattr(builtins, n) for n in _SAFE_BUILTIN_NAMES if hasattr(builtins, n)}
    allowed["True"], allowed["False"], allowed["None"] = True, False, None
    allowed["__import__"] = _restricted_import
    return {"__builtins__": allowed, "__name__": "__sandbox__"}


def encode_response(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonicalize_value(value, _depth: int = 0):
    """Restrict a return value to the wire domain: numbers, booleans,
    strings, None, and nested lists thereof (tuples become lists)."""
    if _depth > 32:
        raise TypeError("value nesting too deep for the wire protocol")
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise TypeError(f"non-finite number {value!r} is outside the wire domain")
        return value
    if isinstance(value, (list, tuple)):
        return [canonicalize_value(v, _depth + 1) for v in value]
    raise TypeError(f"{type(value).__name__} is outside the wire value domain")


@dataclass(frozen=True)
class Diagnostic:
    etype: str
    message: str
    frame: str


def reduce_traceback(exc: BaseException, source: str = "") -> Diagnostic:
    """Filter a raised exception down to its class, message, and the
    innermost frame; an empty message falls back to the class name."""
    etype = type(exc).__name__
    message = str(exc) or etype
    if isinstance(exc, SyntaxError):
        lineno = exc.lineno or 0
        text = (exc.text or "").rstrip("\n")
        frame = f'File "{SOURCE_FILENAME}", line {lineno}\n    {text.strip()}'
        return Diagnostic(etype=etype, message=message, frame=frame)
    tb = exc.__traceback__
    last = None
    while tb is not None:
        if tb.tb_frame.f_code.co_filename == SOURCE_FILENAME or last is None:
            last = tb
        tb = tb.tb_next
    if last is None:
        return Diagnostic(etype=etype, message=message, frame="")
    lineno = last.tb_lineno
    func = last.tb_frame.f_code.co_name
    lines = source.splitlines()
    src_line = lines[lineno - 1].strip() if 0 < lineno <= len(lines) else ""
    frame = f'File "{SOURCE_FILENAME}", line {lineno}, in {func}\n    {src_line}'
    return Diagnostic(etype=etype, message=message, frame=frame)


def _error(etype: str, message: str, frame: str = "") -> dict:
    return {"status": "error", "etype": etype, "message": message, "frame": frame}


def _diag_error(diag: Diagnostic) -> dict:
    return _error(diag.etype, diag.message, diag.frame)


class WorkerState:
    """One loaded entry callable at a time; call is only valid while an
    entry is present."""

    def __init__(self):
        self.loaded_entry = None
        self.protocol_version = PROTOCOL_VERSION
        self._source = ""

    def load(self, source: str, entry: str) -> dict:
        self.loaded_entry = None
        self._source = source
        namespace = make_namespace()
        try:
            code = compile(source, SOURCE_FILENAME, "exec")
            # Swallow prints from submitted code so they cannot corrupt the
            # protocol stream.
            with contextlib.redirect_stdout(io.StringIO()):
                exec(code, namespace)
        except BaseException as e:
            return _diag_error(reduce_traceback(e, source))
        fn = namespace.get(entry)
        if not callable(fn):
            return _error("EntryNotFound", f"entry {entry!r} is not defined by the source")
        self.loaded_entry = fn
        return {"status": "ok", "value": None}

    def call(self, args, seed=None) -> dict:
        if self.loaded_entry is None:
            return _error("NoEntryLoaded", "call received before a successful load")
        if seed is not None:
            import random

            random.seed(seed)
        try:
            with contextlib.redirect_stdout(io.StringIO()):
                value = self.loaded_entry(*args)
        except BaseException as e:
            return _diag_error(reduce_traceback(e, self._source))
        try:
            return {"status": "ok", "value": canonicalize_value(value)}
        except TypeError as e:
            return _error("TypeError", str(e))

    def reset(self) -> dict:
        self.loaded_entry = None
        self._source = ""
        return {"status": "ok", "value": None}


def handle_request(state: WorkerState, request) -> tuple[dict, bool]:
    """(response, keep_running) for one decoded request."""
    if not isinstance(request, dict) or "op" not in request:
        return _error("ProtocolError", "request must be an object with an 'op' field"), True
    op = request["op"]
    if op == "hello":
        return {"status": "ok", "value": {"protocol": state.protocol_version}}, True
    if op == "load":
        if "source" not in request or "entry" not in request:
            return _error("ProtocolError", "load requires 'source' and 'entry'"), True
        if not isinstance(request["source"], str) or not isinstance(request["entry"], str):
            return _error("ProtocolError", "'source' and 'entry' must be strings"), True
        return state.load(request["source"], request["entry"]), True
    if op == "call":
        args = request.get("args", [])
        if not isinstance(args, list):
            return _error("ProtocolError", "'args' must be a list"), True
        return state.call(args, seed=request.get("seed")), True
    if op == "reset":
        return state.reset(), True
    if op == "exit":
        return {"status": "ok", "value": None}, False
    return _error("ProtocolError", f"unknown op {op!r}"), True


def handle_line(state: WorkerState, line: str) -> tuple[str, bool]:
    try:
        request = json.loads(line)
    except (ValueError, TypeError):
        return (
            encode_response(_error("ProtocolError", "request line is not valid JSON")),
            True,
        )
    response, keep_running = handle_request(state, request)
    return encode_response(response), keep_running


def serve_loop(stdin=None, stdout=None) -> None:
    """Answer every request line with exactly one response line until the
    exit op or end of input. Never raises on malformed requests."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    state = WorkerState()
    for line in stdin:
        response, keep_running = handle_line(state, line)
        stdout.write(response + "\n")
        stdout.flush()
        if not keep_running:
            break


def main() -> int:
    serve_loop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
