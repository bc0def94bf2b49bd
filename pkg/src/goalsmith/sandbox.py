"""Sandboxed execution of generated code.

Two worker flavors speak the same newline-delimited JSON protocol:

* ``InProcessWorker`` runs submitted source in a curated namespace inside the
  current process. It is the test default and requires no external runner.
* ``SubprocessWorker`` supervises an external runner process over stdin and
  stdout; on a call timeout the process is killed and respawned.

The sandbox is a fault boundary, not a security boundary: it contains
crashes, infinite loops, and namespace pollution from generated code, but a
determined adversary could escape it. Do not feed it hostile input.

Wire protocol (version 1), one JSON object per line:
  requests:  {"op":"hello"} | {"op":"load","source":S,"entry":E}
             | {"op":"call","args":A,"timeout_ms":T[,"seed":N]}
             | {"op":"reset"} | {"op":"exit"}
  responses: {"status":"ok","value":V}
             | {"status":"error","etype":E,"message":M,"frame":F}
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass

PROTOCOL_VERSION = 1
SOURCE_FILENAME = "<candidate>"


class SandboxProtocolError(RuntimeError):
    """The worker broke the wire protocol or could not be spawned."""


@dataclass(frozen=True)
class Diagnostic:
    """A filtered failure: exception class, message, and exactly one frame."""

    etype: str
    message: str
    innermost_frame_text: str


@dataclass(frozen=True)
class CallResult:
    status: str  # "ok" | "error" | "timeout"
    value: object = None
    diagnostic: Diagnostic | None = None

    def __post_init__(self):
        if self.status == "ok":
            assert self.diagnostic is None
        elif self.status == "error":
            assert self.diagnostic is not None and self.diagnostic.message
        elif self.status == "timeout":
            assert self.value is None and self.diagnostic is None
        else:
            raise ValueError(f"unknown status {self.status!r}")


def encode_response(obj: dict) -> str:
    """Canonical response serialization; both worker flavors and the golden
    transcripts depend on these exact bytes."""
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


# --------------------------------------------------------------------------
# In-process execution engine (also the stub worker's core)

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


def reduce_exception(exc: BaseException, source: str = "") -> Diagnostic:
    """Keep only the innermost stack frame of a raised exception."""
    etype = type(exc).__name__
    message = str(exc) or etype
    if isinstance(exc, SyntaxError):
        lineno = exc.lineno or 0
        text = (exc.text or "").rstrip("\n")
        frame = f'File "{SOURCE_FILENAME}", line {lineno}\n    {text.strip()}'
        return Diagnostic(etype=etype, message=message, innermost_frame_text=frame)
    tb = exc.__traceback__
    last = None
    while tb is not None:
        if tb.tb_frame.f_code.co_filename == SOURCE_FILENAME or last is None:
            last = tb
        tb = tb.tb_next
    if last is None:
        return Diagnostic(etype=etype, message=message, innermost_frame_text="")
    lineno = last.tb_lineno
    func = last.tb_frame.f_code.co_name
    lines = source.splitlines()
    src_line = lines[lineno - 1].strip() if 0 < lineno <= len(lines) else ""
    frame = f'File "{SOURCE_FILENAME}", line {lineno}, in {func}\n    {src_line}'
    return Diagnostic(etype=etype, message=message, innermost_frame_text=frame)


def _diag_response(diag: Diagnostic) -> dict:
    return {
        "status": "error",
        "etype": diag.etype,
        "message": diag.message,
        "frame": diag.innermost_frame_text,
    }


def _simple_error(etype: str, message: str) -> dict:
    return {"status": "error", "etype": etype, "message": message, "frame": ""}


class ExecutionEngine:
    """Protocol semantics for one worker: a fresh namespace per load, one
    entry callable, traceback reduction, canonical value encoding."""

    def __init__(self):
        self._namespace: dict | None = None
        self._entry = None
        self._source = ""

    @property
    def has_entry(self) -> bool:
        return self._entry is not None

    def load(self, source: str, entry: str) -> dict:
        self._namespace = None
        self._entry = None
        self._source = source
        namespace = make_namespace()
        try:
            code = compile(source, SOURCE_FILENAME, "exec")
            exec(code, namespace)
        except BaseException as e:
            return _diag_response(reduce_exception(e, source))
        fn = namespace.get(entry)
        if not callable(fn):
            return _simple_error("EntryNotFound", f"entry {entry!r} is not defined by the source")
        self._namespace = namespace
        self._entry = fn
        return {"status": "ok", "value": None}

    def invoke(self, args, seed=None) -> dict:
        """Run the loaded entry to completion (no timeout enforcement)."""
        if self._entry is None:
            return _simple_error("NoEntryLoaded", "call received before a successful load")
        if seed is not None:
            import random

            random.seed(seed)
        try:
            value = self._entry(*args)
        except BaseException as e:
            return _diag_response(reduce_exception(e, self._source))
        try:
            return {"status": "ok", "value": canonicalize_value(value)}
        except TypeError as e:
            return _simple_error("TypeError", str(e))

    def reset(self) -> dict:
        self._namespace = None
        self._entry = None
        self._source = ""
        return {"status": "ok", "value": None}

    def handle_request(self, request) -> dict:
        if not isinstance(request, dict) or "op" not in request:
            return _simple_error("ProtocolError", "request must be an object with an 'op' field")
        op = request["op"]
        if op == "hello":
            return {"status": "ok", "value": {"protocol": PROTOCOL_VERSION}}
        if op == "load":
            if "source" not in request or "entry" not in request:
                return _simple_error("ProtocolError", "load requires 'source' and 'entry'")
            if not isinstance(request["source"], str) or not isinstance(request["entry"], str):
                return _simple_error("ProtocolError", "'source' and 'entry' must be strings")
            return self.load(request["source"], request["entry"])
        if op == "call":
            args = request.get("args", [])
            if not isinstance(args, list):
                return _simple_error("ProtocolError", "'args' must be a list")
            return self.invoke(args, seed=request.get("seed"))
        if op == "reset":
            return self.reset()
        if op == "exit":
            return {"status": "ok", "value": None}
        return _simple_error("ProtocolError", f"unknown op {op!r}")

    def handle_line(self, line: str) -> str:
        try:
            request = json.loads(line)
        except (ValueError, TypeError):
            return encode_response(_simple_error("ProtocolError", "request line is not valid JSON"))
        return encode_response(self.handle_request(request))


def _result_from_response(response: dict) -> CallResult:
    status = response.get("status")
    if status == "ok":
        return CallResult(status="ok", value=response.get("value"))
    if status == "error":
        diag = Diagnostic(
            etype=response.get("etype", "UnknownError"),
            message=response.get("message") or response.get("etype", "UnknownError"),
            innermost_frame_text=response.get("frame", ""),
        )
        return CallResult(status="error", diagnostic=diag)
    raise SandboxProtocolError(f"malformed worker response: {response!r}")


# --------------------------------------------------------------------------
# Worker handles


class WorkerHandle:
    """One sandbox worker; single request in flight at a time."""

    def load_source(self, source: str, entry: str) -> CallResult:
        raise NotImplementedError

    def call_entry(self, args, timeout: float = 5.0, seed=None) -> CallResult:
        raise NotImplementedError

    def reset(self) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class InProcessWorker(WorkerHandle):
    """Stub worker running generated code in this process. Timeouts are
    enforced with a helper thread; a timed-out call abandons the thread and
    resets the engine so the handle stays usable."""

    def __init__(self):
        self._engine = ExecutionEngine()
        self._last_source = ""
        self._last_entry = ""

    def load_source(self, source: str, entry: str) -> CallResult:
        self._last_source, self._last_entry = source, entry
        return _result_from_response(self._engine.load(source, entry))

    def call_entry(self, args, timeout: float = 5.0, seed=None) -> CallResult:
        if not self._engine.has_entry:
            return _result_from_response(self._engine.invoke(args, seed=seed))
        box: list[dict] = []

        def run():
            box.append(self._engine.invoke(args, seed=seed))

        worker = threading.Thread(target=run, daemon=True)
        worker.start()
        worker.join(timeout)
        if worker.is_alive():
            # Abandon the stuck thread; fresh engine, pending state cleared.
            self._engine = ExecutionEngine()
            if self._last_source:
                self._engine.load(self._last_source, self._last_entry)
            return CallResult(status="timeout")
        return _result_from_response(box[0])

    def reset(self) -> None:
        self._engine.reset()

    def close(self) -> None:
        self._engine.reset()


class SubprocessWorker(WorkerHandle):
    def __init__(self, command: list[str], startup_timeout: float = 10.0):
        self._command = list(command)
        self._startup_timeout = startup_timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._last_source = ""
        self._last_entry = ""
        self._spawn()

    def _spawn(self):
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise SandboxProtocolError(f"failed to spawn worker {self._command!r}: {e}") from e
        self._lines = queue.Queue()
        stdout = self._proc.stdout

        def pump():
            for line in stdout:
                self._lines.put(line.rstrip("\n"))

        threading.Thread(target=pump, daemon=True).start()
        hello = self._rpc({"op": "hello"}, self._startup_timeout)
        if hello is None:
            self._kill()
            raise SandboxProtocolError("worker did not answer the handshake in time")
        protocol = (hello.get("value") or {}).get("protocol")
        if protocol != PROTOCOL_VERSION:
            self._kill()
            raise SandboxProtocolError(f"worker speaks protocol {protocol!r}, expected {PROTOCOL_VERSION}")

    def _kill(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def _rpc(self, request: dict, timeout: float) -> dict | None:
        if self._proc is None or self._proc.poll() is not None:
            raise SandboxProtocolError("worker process is not running")
        line = json.dumps(request, ensure_ascii=True)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SandboxProtocolError(f"worker pipe closed: {e}") from e
        try:
            raw = self._lines.get(timeout=timeout)
        except queue.Empty:
            return None
        try:
            return json.loads(raw)
        except ValueError as e:
            raise SandboxProtocolError(f"worker sent invalid JSON: {raw!r}") from e

    def load_source(self, source: str, entry: str) -> CallResult:
        self._last_source, self._last_entry = source, entry
        response = self._rpc({"op": "load", "source": source, "entry": entry}, self._startup_timeout)
        if response is None:
            raise SandboxProtocolError("worker did not answer the load request")
        return _result_from_response(response)

    def call_entry(self, args, timeout: float = 5.0, seed=None) -> CallResult:
        request = {"op": "call", "args": args, "timeout_ms": int(timeout * 1000)}
        if seed is not None:
            request["seed"] = seed
        response = self._rpc(request, timeout)
        if response is None:
            # Kill the stuck worker and bring up a fresh one with the last
            # loaded source so the handle remains usable.
            self._kill()
            self._spawn()
            if self._last_source:
                self.load_source(self._last_source, self._last_entry)
            return CallResult(status="timeout")
        return _result_from_response(response)

    def reset(self) -> None:
        self._rpc({"op": "reset"}, self._startup_timeout)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._rpc({"op": "exit"}, 1.0)
            except SandboxProtocolError:
                pass
            self._kill()


@dataclass(frozen=True)
class WorkerConfig:
    """``command=None`` selects the in-process stub worker."""

    command: tuple[str, ...] | None = None
    startup_timeout: float = 10.0


def spawn_worker(config: WorkerConfig | None = None) -> WorkerHandle:
    config = config or WorkerConfig()
    if config.command is None:
        return InProcessWorker()
    return SubprocessWorker(list(config.command), config.startup_timeout)


class WorkerPool:
    """Hands out single-request-at-a-time handles to concurrent pipelines."""

    def __init__(self, config: WorkerConfig | None = None, size: int = 2):
        self._config = config or WorkerConfig()
        self._idle: queue.Queue = queue.Queue()
        for _ in range(size):
            self._idle.put(spawn_worker(self._config))
        self._size = size

    def acquire(self, timeout: float | None = None) -> WorkerHandle:
        return self._idle.get(timeout=timeout)

    def release(self, handle: WorkerHandle) -> None:
        self._idle.put(handle)

    def close(self) -> None:
        while not self._idle.empty():
            self._idle.get_nowait().close()
