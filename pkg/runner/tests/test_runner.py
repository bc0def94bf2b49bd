"""Protocol conformance for the worker process.

Covers the golden wire transcripts byte-exactly, survival under fuzzed
malformed input, and the supervising client's kill-on-timeout contract.
"""

import json
import random
import string
import subprocess
import sys
import time
from pathlib import Path

import pytest

from sandbox_runner import WorkerState, handle_line

TRANSCRIPTS = Path(__file__).resolve().parent.parent.parent / "fixtures" / "transcripts"
RUNNER_CMD = [sys.executable, "-m", "sandbox_runner"]


def spawn():
    return subprocess.Popen(
        RUNNER_CMD,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
        text=True,
        bufsize=1,
    )


def exchange(proc, line: str) -> str:
    proc.stdin.write(line + "\n")
    proc.stdin.flush()
    return proc.stdout.readline().rstrip("\n")


class TestGoldenTranscripts:
    @pytest.mark.parametrize(
        "name", sorted(p.name for p in TRANSCRIPTS.glob("*.jsonl"))
    )
    def test_transcript_reproduced_byte_exactly(self, name):
        records = [
            json.loads(raw)
            for raw in (TRANSCRIPTS / name).read_text(encoding="utf-8").splitlines()
        ]
        assert records
        proc = spawn()
        try:
            for record in records:
                assert exchange(proc, record["send"]) == record["expect"]
        finally:
            proc.stdin.close()
            assert proc.wait(timeout=5) == 0


class TestFuzzedInput:
    def test_survives_1000_malformed_lines(self):
        rng = random.Random(0)
        alphabet = string.printable.replace("\n", "").replace("\r", "")
        proc = spawn()
        try:
            for _ in range(1000):
                junk = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
                response = json.loads(exchange(proc, junk))
                assert response["status"] == "error"
                assert response["etype"] == "ProtocolError"
                assert proc.poll() is None
            # Still a working protocol peer afterwards.
            assert exchange(proc, '{"op":"hello"}') == '{"status":"ok","value":{"protocol":1}}'
            exchange(proc, '{"op":"exit"}')
            assert proc.wait(timeout=5) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()


class TestTimeoutContract:
    def test_client_kill_lands_within_twice_the_budget(self):
        """The runner executes calls inline; the supervising client must be
        able to observe the deadline and kill the process within 2x the
        configured budget."""
        budget = 0.4
        proc = spawn()
        try:
            load = {
                "op": "load",
                "source": "def spin():\n    while True:\n        pass\n",
                "entry": "spin",
            }
            assert json.loads(exchange(proc, json.dumps(load)))["status"] == "ok"
            start = time.monotonic()
            proc.stdin.write(
                json.dumps({"op": "call", "args": [], "timeout_ms": int(budget * 1000)}) + "\n"
            )
            proc.stdin.flush()
            time.sleep(budget)
            assert proc.poll() is None  # stuck, as expected
            proc.kill()
            proc.wait(timeout=5)
            elapsed = time.monotonic() - start
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()
        assert elapsed < 2 * budget


class TestSemantics:
    def run_lines(self, lines):
        state = WorkerState()
        return [handle_line(state, line)[0] for line in lines]

    def test_hello_bytes(self):
        (response,) = self.run_lines(['{"op":"hello"}'])
        assert response == '{"status":"ok","value":{"protocol":1}}'

    def test_call_before_load(self):
        (response,) = self.run_lines(['{"op":"call","args":[]}'])
        assert json.loads(response)["etype"] == "NoEntryLoaded"

    def test_one_response_per_line_in_order(self):
        lines = [
            '{"op":"hello"}',
            "garbage",
            json.dumps({"op": "load", "source": "def f(x):\n    return x\n", "entry": "f"}),
            '{"op":"call","args":[5]}',
            "[]",
            '{"op":"reset"}',
            '{"op":"call","args":[5]}',
        ]
        responses = [json.loads(r) for r in self.run_lines(lines)]
        assert [r.get("status") for r in responses] == [
            "ok", "error", "ok", "ok", "error", "ok", "error",
        ]
        assert responses[3]["value"] == 5
        assert responses[6]["etype"] == "NoEntryLoaded"

    def test_deep_exception_keeps_innermost_frame(self):
        source = (
            "def a():\n    return ghost\n"
            "def b():\n    return a()\n"
            "def entry():\n    return b()\n"
        )
        state = WorkerState()
        handle_line(state, json.dumps({"op": "load", "source": source, "entry": "entry"}))
        response = json.loads(handle_line(state, '{"op":"call","args":[]}')[0])
        assert response["etype"] == "NameError"
        assert response["frame"].count("File ") == 1
        assert "line 2, in a" in response["frame"]

    def test_syntax_error_frame_carries_line(self):
        state = WorkerState()
        raw, _ = handle_line(
            state, json.dumps({"op": "load", "source": "def f(:\n", "entry": "f"})
        )
        response = json.loads(raw)
        assert response["etype"] == "SyntaxError"
        assert 'File "<candidate>", line 1' in response["frame"]

    def test_empty_exception_message_falls_back_to_class(self):
        state = WorkerState()
        handle_line(
            state,
            json.dumps(
                {"op": "load", "source": "def f():\n    raise ValueError\n", "entry": "f"}
            ),
        )
        response = json.loads(handle_line(state, '{"op":"call","args":[]}')[0])
        assert response["message"] == "ValueError"

    def test_seeded_random_is_reproducible(self):
        state = WorkerState()
        source = "import random\ndef roll():\n    return random.random()\n"
        handle_line(state, json.dumps({"op": "load", "source": source, "entry": "roll"}))
        first = json.loads(handle_line(state, '{"op":"call","args":[],"seed":9}')[0])
        second = json.loads(handle_line(state, '{"op":"call","args":[],"seed":9}')[0])
        assert first["value"] == second["value"]

    def test_submitted_prints_do_not_reach_the_stream(self, capsys):
        state = WorkerState()
        source = "def f():\n    print('leak?')\n    return 1\n"
        handle_line(state, json.dumps({"op": "load", "source": source, "entry": "f"}))
        raw, _ = handle_line(state, '{"op":"call","args":[]}')
        assert json.loads(raw)["value"] == 1
        assert capsys.readouterr().out == ""

    def test_disallowed_import_is_an_error_response(self):
        state = WorkerState()
        raw, _ = handle_line(
            state, json.dumps({"op": "load", "source": "import os\n", "entry": "f"})
        )
        assert json.loads(raw)["etype"] == "ImportError"

    def test_exit_stops_the_loop(self):
        state = WorkerState()
        raw, keep_running = handle_line(state, '{"op":"exit"}')
        assert json.loads(raw) == {"status": "ok", "value": None}
        assert not keep_running
