"""Author the golden wire transcripts for the execution protocol.

Each transcript is a JSONL file under ``fixtures/transcripts/``; every record
is ``{"send": <raw request line>, "expect": <exact response line>}``. The
expected bytes come from the in-process execution engine, which defines the
canonical encoding; any protocol server must reproduce them byte-exactly.

Run from the repository root:

    python3 tools/make_transcripts.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from goalsmith.sandbox import ExecutionEngine

ROOT = Path(__file__).resolve().parent.parent
TRANSCRIPT_ROOT = ROOT / "fixtures" / "transcripts"


def req(**fields) -> str:
    return json.dumps(fields, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


GOAL_SOURCE = (
    "def generate_goal_poses(initial_poses):\n"
    "    x, y, z = initial_poses[0][:3]\n"
    "    return [[x, y, z + 0.2, 1.0, 0.0, 0.0, 0.0]]\n"
)

CRASHY_SOURCE = (
    "def generate_goal_poses(initial_poses):\n"
    "    return initial_poses[0][0] / (len(initial_poses) - len(initial_poses))\n"
)

DEEP_SOURCE = (
    "def a():\n"
    "    return missing_name\n"
    "def b():\n"
    "    return a()\n"
    "def entry():\n"
    "    return b()\n"
)

POSES = [[0.5, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0]]

TRANSCRIPTS = {
    "handshake.jsonl": [
        req(op="hello"),
        req(op="exit"),
    ],
    "load-call.jsonl": [
        req(op="hello"),
        req(op="load", source=GOAL_SOURCE, entry="generate_goal_poses"),
        req(op="call", args=[POSES], timeout_ms=5000),
        req(op="call", args=[POSES], timeout_ms=5000, seed=7),
        req(op="reset"),
        req(op="call", args=[POSES], timeout_ms=5000),
        req(op="exit"),
    ],
    "errors.jsonl": [
        req(op="hello"),
        req(op="call", args=[POSES], timeout_ms=5000),
        req(op="load", source="def f(:\n", entry="f"),
        req(op="load", source=GOAL_SOURCE, entry="no_such_entry"),
        req(op="load", source=CRASHY_SOURCE, entry="generate_goal_poses"),
        req(op="call", args=[POSES], timeout_ms=5000),
        req(op="load", source=DEEP_SOURCE, entry="entry"),
        req(op="call", args=[], timeout_ms=5000),
        req(op="exit"),
    ],
    "malformed.jsonl": [
        req(op="hello"),
        "this is not json",
        "{\"op\":",
        json.dumps([1, 2, 3]),
        json.dumps({"verb": "hello"}),
        req(op="teleport"),
        req(op="load", source=GOAL_SOURCE),
        req(op="hello"),
        req(op="exit"),
    ],
}


def main() -> int:
    TRANSCRIPT_ROOT.mkdir(parents=True, exist_ok=True)
    for name, lines in TRANSCRIPTS.items():
        engine = ExecutionEngine()
        records = [
            {"send": line, "expect": engine.handle_line(line)} for line in lines
        ]
        path = TRANSCRIPT_ROOT / name
        path.write_text(
            "\n".join(json.dumps(r, ensure_ascii=True) for r in records) + "\n",
            encoding="utf-8",
        )
        print(f"wrote {path} ({len(records)} exchanges)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
