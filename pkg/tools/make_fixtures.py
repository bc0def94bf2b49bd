"""Author the bundled replay fixture corpus.

Runs the synthesis loop against scripted completions while recording every
request/response pair, producing replay fixture directories under
``fixtures/replay/<name>/`` plus ``fixtures/replay/expected.json`` holding
the expected per-fixture outcome table (status, rejection reason, attempt
count, and the canonical outcome JSON used for byte-identity checks).

Run from the repository root:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from goalsmith import codegen
from goalsmith.gateway import ChatRequest, RecordBackend, ScriptedBackend
from goalsmith.prompts import build_paraphrase_prompt
from goalsmith.sandbox import InProcessWorker
from goalsmith.scene import default_bounds, default_manifest, get_task
from goalsmith.sim import goal_set_from_value
from goalsmith.validator import validate

ROOT = Path(__file__).resolve().parent.parent
FIXTURE_ROOT = ROOT / "fixtures" / "replay"


def fenced(body: str) -> str:
    return f"```python\n{body.rstrip()}\n```"


GOAL_TEST = fenced(
    """\
def test_function():
    poses = [
        [0.5, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0],
        [0.3, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0],
        [0.7, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0],
    ]
    goals = generate_goal_poses(poses)
    assert isinstance(goals, list) and goals
    for goal in goals:
        assert len(goal) in (3, 7)
        assert all(isinstance(v, (int, float)) for v in goal)
    return True"""
)

REWARD_TEST = fenced(
    """\
def test_function():
    obj = [0.5, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0]
    grip = [0.5, 0.5, 0.905]
    action = [0.0] * 7
    near = compute_task_reward(obj, grip, [0.5, 0.5, 0.805], action, False, 0.78)
    far = compute_task_reward(obj, grip, [0.9, 0.9, 0.805], action, False, 0.78)
    assert isinstance(near, float) and isinstance(far, float)
    assert near > far
    return True"""
)

GOOD_REWARD = fenced(
    """\
def compute_task_reward(object_position, gripper_position, goal_position, action, collided, table_height):
    import math
    reward = 0.0
    reach = math.sqrt(sum((o - g) ** 2 for o, g in zip(object_position[:3], gripper_position[:3])))
    reward += 0.08 / (1.0 + reach ** 2)
    if goal_position is not None:
        dist = math.sqrt(sum((o - t) ** 2 for o, t in zip(object_position[:3], goal_position[:3])))
        reward += 1.28 / (1.0 + dist ** 2)
        if dist < 0.05:
            reward += 4.0
    if collided:
        reward -= 1.28
    return reward"""
)


def goal_body(expr: str) -> str:
    return fenced(
        f"""\
def generate_goal_poses(initial_poses):
    return {expr}"""
    )


FIXTURES = [
    # ---- clean: a single generation plus a passing functional test ----
    {
        "name": "d01-clean",
        "task": "d01",
        "kind": "goal",
        "responses": [
            goal_body("[[0.9, 0.9, 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 2},
    },
    {
        "name": "d05-clean",
        "task": "d05",
        "kind": "goal",
        "responses": [
            fenced(
                """\
def generate_goal_poses(initial_poses):
    x, y = initial_poses[0][0], initial_poses[0][1]
    return [[x, y, 0.78 + 0.15, 1.0, 0.0, 0.0, 0.0]]"""
            ),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 2},
    },
    {
        "name": "d29-clean",
        "task": "d29",
        "kind": "goal",
        "responses": [
            fenced(
                """\
def generate_goal_poses(initial_poses):
    side = 0.1
    cx, cy = 0.5, 0.5
    height = side * (3 ** 0.5) / 2
    points = [
        (cx - side / 2, cy - height / 3),
        (cx + side / 2, cy - height / 3),
        (cx, cy + 2 * height / 3),
    ]
    return [[x, y, 0.805, 1.0, 0.0, 0.0, 0.0] for x, y in points]"""
            ),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 2},
    },
    {
        "name": "m08-clean",
        "task": "m08",
        "kind": "reward",
        "responses": [GOOD_REWARD, REWARD_TEST],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 2},
    },
    # ---- recoverable: one buggy candidate, one successful repair ----
    {
        "name": "d02-name-error",
        "task": "d02",
        "kind": "goal",
        "responses": [
            goal_body("[[tabel_edge, 0.9, 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            goal_body("[[0.075, 0.9, 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 3},
        "first_etype": "NameError",
    },
    {
        "name": "d10-zero-division",
        "task": "d10",
        "kind": "goal",
        "responses": [
            fenced(
                """\
def generate_goal_poses(initial_poses):
    count = len(initial_poses)
    offset = 1.0 / (count - count)
    return [[0.5, 0.35 + offset, 0.805, 1.0, 0.0, 0.0, 0.0]]"""
            ),
            goal_body("[[0.5, 0.35, 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 3},
        "first_etype": "ZeroDivisionError",
    },
    {
        "name": "d27-type-error",
        "task": "d27",
        "kind": "goal",
        "responses": [
            goal_body("[initial_poses[0] + 0.2]"),
            fenced(
                """\
def generate_goal_poses(initial_poses):
    x, y, z = initial_poses[0][:3]
    return [[x, y, z + 0.2, 1.0, 0.0, 0.0, 0.0]]"""
            ),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 3},
        "first_etype": "TypeError",
    },
    {
        "name": "d13-syntax-error",
        "task": "d13",
        "kind": "goal",
        "responses": [
            fenced(
                """\
def generate_goal_poses(initial_poses):
    return [[1.1, initial_poses[0][1], 0.805, 1.0, 0.0, 0.0"""
            ),
            goal_body("[[1.1, initial_poses[0][1], 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            GOAL_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 3},
        "first_etype": "SyntaxError",
    },
    {
        "name": "m05-index-error",
        "task": "m05",
        "kind": "reward",
        "responses": [
            fenced(
                """\
def compute_task_reward(object_position, gripper_position, goal_position, action, collided, table_height):
    height = object_position[7] - table_height
    return height"""
            ),
            GOOD_REWARD,
            REWARD_TEST,
        ],
        "expected": {"status": "accepted", "rejection_reason": None, "attempts": 3},
        "first_etype": "IndexError",
    },
    # ---- unrecoverable ----
    {
        "name": "d03-budget-exhausted",
        "task": "d03",
        "kind": "goal",
        "responses": [
            goal_body(f'(_ for _ in ()).throw(RuntimeError("broken candidate {i}"))')
            for i in range(4)
        ],
        "expected": {
            "status": "rejected",
            "rejection_reason": "repair_budget_exhausted",
            "attempts": 4,
        },
    },
    {
        "name": "d07-test-failed",
        "task": "d07",
        "kind": "goal",
        "responses": [
            goal_body("[[0.2, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0]]"),
            fenced(
                """\
def test_function():
    goals = generate_goal_poses([[0.5, 0.5, 0.805, 1.0, 0.0, 0.0, 0.0]])
    assert len(goals) == 2, "expected one goal per gripper finger"
    return True"""
            ),
        ],
        "expected": {
            "status": "rejected",
            "rejection_reason": "functional_test_failed",
            "attempts": 2,
        },
    },
    {
        "name": "m04-extraction-failed",
        "task": "m04",
        "kind": "reward",
        "responses": ["```\n```"] * 4,
        "expected": {
            "status": "rejected",
            "rejection_reason": "extraction_failed",
            "attempts": 4,
        },
    },
]

PARAPHRASES_D01 = "\n".join(
    [
        "Slide a cube into the table's top right corner.",
        "Place one cube at the upper right corner of the table.",
        "Bring a cube over to the top right corner area of the table.",
    ]
)


def record_fixture(spec: dict) -> dict:
    task = get_task(spec["task"])
    manifest = default_manifest()
    fixture_dir = FIXTURE_ROOT / spec["name"]
    if fixture_dir.exists():
        shutil.rmtree(fixture_dir)
    backend = RecordBackend(ScriptedBackend(spec["responses"]), fixture_dir)
    worker = InProcessWorker()
    try:
        outcome = codegen.synthesize(
            task, manifest, codegen.SynthesisConfig(kind=spec["kind"]), backend, worker
        )
    finally:
        worker.close()

    expected = spec["expected"]
    assert outcome.status == expected["status"], (spec["name"], outcome.status)
    assert outcome.rejection_reason == expected["rejection_reason"], (
        spec["name"],
        outcome.rejection_reason,
    )
    assert len(outcome.attempts) == expected["attempts"], (spec["name"], len(outcome.attempts))
    if "first_etype" in spec:
        diag = outcome.attempts[0].result.diagnostic
        assert diag is not None and diag.etype == spec["first_etype"], (spec["name"], diag)
    if outcome.status == "accepted" and spec["kind"] == "goal":
        # Sanity: the accepted source should produce a goal the validator
        # accepts on the default scene.
        ns: dict = {}
        exec(outcome.source, ns)  # trusted authored source, not model output
        value = ns["generate_goal_poses"]([p.as_vector() for _, p in manifest.cubes])
        goal = goal_set_from_value(
            [[float(v) for v in item] for item in value], manifest
        )
        report = validate(goal, task, manifest, default_bounds(manifest))
        assert report.valid, (spec["name"], report.violations)

    return {
        "task": spec["task"],
        "kind": spec["kind"],
        "status": outcome.status,
        "rejection_reason": outcome.rejection_reason,
        "attempts": expected["attempts"],
        "outcome_json": outcome.to_json(),
    }


def record_paraphrase_fixture() -> None:
    fixture_dir = FIXTURE_ROOT / "d01-paraphrase"
    if fixture_dir.exists():
        shutil.rmtree(fixture_dir)
    backend = RecordBackend(ScriptedBackend([PARAPHRASES_D01]), fixture_dir)
    prompt = build_paraphrase_prompt(get_task("d01"), 3)
    completion = backend.complete(ChatRequest.user(prompt))
    assert len(completion.splitlines()) == 3


def main() -> int:
    FIXTURE_ROOT.mkdir(parents=True, exist_ok=True)
    expected = {}
    for spec in FIXTURES:
        expected[spec["name"]] = record_fixture(spec)
        print(f"recorded {spec['name']}: {expected[spec['name']]['status']}")
    record_paraphrase_fixture()
    print("recorded d01-paraphrase")
    (FIXTURE_ROOT / "expected.json").write_text(
        json.dumps(expected, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {FIXTURE_ROOT / 'expected.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
