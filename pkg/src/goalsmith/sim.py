"""Kinematic tabletop simulator with a scripted pick-and-place controller.

The controller handles objects in order: approach the cube in a straight
line, grasp within tolerance, carry to the target, release (setting the
target orientation). Motion is bounded by a per-step displacement; there is
no dynamics and no hidden entropy, so (manifest, goals, seed) fully
determine an episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .rewards import RewardBreakdown, RewardScales, StepContext, compose, eval_independent, native_goal_term
from .scene import (
    GoalSet,
    Pose,
    SceneManifest,
    TaskSpec,
    WorkspaceBounds,
    default_bounds,
    within_workspace,
)
from .validator import oracle_goal, validate

STEP_SIZE = 0.02
GRASP_TOL = 0.01
SUCCESS_TOL = 0.05
MAX_STEPS = 500


@dataclass(frozen=True)
class SimState:
    cube_poses: tuple[Pose, ...]
    gripper_position: tuple[float, float, float]
    holding: int | None
    step_count: int


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    steps_used: int
    reward_trace: tuple[RewardBreakdown, ...]
    final_state: SimState

    def __post_init__(self):
        assert len(self.reward_trace) == self.steps_used


@dataclass(frozen=True)
class SuiteRow:
    task_id: str
    episodes: int
    success_rate: float
    mean_steps: float
    status: str  # "ok" | "synthesis-failed"


@dataclass(frozen=True)
class SuiteReport:
    rows: tuple[SuiteRow, ...]


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def _step_toward(position, target, step_size):
    d = _dist(position, target)
    if d <= step_size:
        return tuple(target), True
    scale = step_size / d
    return tuple(p + (t - p) * scale for p, t in zip(position, target)), False


def rollout(
    m: SceneManifest,
    g: GoalSet,
    reward,
    max_steps: int = MAX_STEPS,
    seed: int = 0,
    bounds: WorkspaceBounds | None = None,
    step_size: float = STEP_SIZE,
    grasp_tol: float = GRASP_TOL,
    success_tol: float = SUCCESS_TOL,
) -> EpisodeResult:
    """One scripted episode. ``bounds``, when given, confines the gripper:
    targets outside the workspace are never approached and the episode runs
    to the step cap. ``reward`` maps StepContext -> RewardBreakdown."""
    if len(g) > len(m.cubes):
        raise ValueError("goal set addresses more objects than the scene holds")
    cube_poses = [pose for _, pose in m.cubes]
    bx, by, bz = m.robot_base.position
    gripper = (bx, by, bz + 0.22)
    holding: int | None = None
    trace: list[RewardBreakdown] = []
    step_count = 0

    plan: list[tuple[int, Pose]] = list(enumerate(g.targets))
    unreachable = [
        i for i, target in plan if bounds is not None and not within_workspace(target, m, bounds)
    ]
    queue = [(i, t) for i, t in plan if i not in unreachable]
    active: tuple[int, Pose] | None = queue.pop(0) if queue else None
    phase = "approach"

    def context() -> StepContext:
        obj_index = active[0] if active is not None else plan[0][0]
        goal_pose = dict(plan).get(obj_index)
        return StepContext(
            object_pose=cube_poses[obj_index],
            gripper_position=gripper,
            action=(step_size,) * 7,
            goal=goal_pose,
            collided=False,
            table_height=m.table_height,
        )

    while step_count < max_steps:
        if active is None and not queue and not unreachable:
            break  # every reachable target done; unreachable ones idle to the cap
        step_count += 1
        if active is not None:
            index, target = active
            if phase == "approach":
                gripper, _ = _step_toward(gripper, cube_poses[index].position, step_size)
                if _dist(gripper, cube_poses[index].position) <= grasp_tol:
                    gripper = cube_poses[index].position
                    holding = index
                    phase = "carry"
            elif phase == "carry":
                gripper, arrived = _step_toward(gripper, target.position, step_size)
                cube_poses[index] = Pose(gripper, cube_poses[index].orientation)
                if arrived:
                    cube_poses[index] = Pose(target.position, target.orientation)
                    holding = None
                    phase = "approach"
                    active = queue.pop(0) if queue else None
        trace.append(reward(context()))

    success = all(
        _dist(cube_poses[i].position, target.position) <= success_tol for i, target in plan
    )
    final = SimState(
        cube_poses=tuple(cube_poses),
        gripper_position=gripper,
        holding=holding,
        step_count=step_count,
    )
    return EpisodeResult(
        success=success, steps_used=step_count, reward_trace=tuple(trace), final_state=final
    )


@dataclass(frozen=True)
class Artifact:
    """What drives a task during suite evaluation: the built-in oracle or an
    accepted generated source."""

    kind: str  # "oracle" | "goal_source" | "reward_source"
    source: str | None = None


def _episode_seed(base_seed: int, task_index: int, episode: int) -> int:
    return base_seed * 1_000_003 + task_index * 1_009 + episode


def default_reward(scales: RewardScales | None = None, success_tol: float = SUCCESS_TOL):
    scales = scales or RewardScales()
    return compose(
        lambda ctx: eval_independent(ctx, scales),
        native_goal_term(scales, success_tol),
    )


def evaluate_suite(
    tasks,
    artifacts: dict,
    episodes_per_task: int = 10,
    seed: int = 0,
    manifest: SceneManifest | None = None,
    bounds: WorkspaceBounds | None = None,
    scales: RewardScales | None = None,
    max_steps: int = MAX_STEPS,
    jitter: float = 0.05,
    worker_factory=None,
) -> SuiteReport:
    """Evaluate each task over seeded episodes and aggregate success rates.

    ``artifacts`` maps task id -> Artifact; a missing entry marks the row as
    synthesis-failed with rate 0. Sandboxed goal sources need a
    ``worker_factory`` producing fresh WorkerHandles.
    """
    from .scene import default_manifest

    m = manifest or default_manifest()
    b = bounds or default_bounds(m)
    reward = default_reward(scales)
    rows: list[SuiteRow] = []

    for task_index, t in enumerate(tasks):
        artifact = artifacts.get(t.id)
        if artifact is None:
            rows.append(SuiteRow(t.id, episodes_per_task, 0.0, 0.0, "synthesis-failed"))
            continue
        successes = 0
        steps_total = 0
        for episode in range(episodes_per_task):
            ep_seed = _episode_seed(seed, task_index, episode)
            em = m.with_jitter(ep_seed, jitter) if jitter > 0 else m
            goal = _resolve_goal(t, em, artifact, ep_seed, worker_factory)
            if goal is None or not validate(goal, t, em, b).valid:
                steps_total += max_steps
                continue
            episode_bounds = None if t.constraint.kind == "off_table" else b
            result = rollout(em, goal, reward, max_steps=max_steps, seed=ep_seed, bounds=episode_bounds)
            successes += 1 if result.success else 0
            steps_total += result.steps_used
        rows.append(
            SuiteRow(
                task_id=t.id,
                episodes=episodes_per_task,
                success_rate=successes / episodes_per_task,
                mean_steps=steps_total / episodes_per_task,
                status="ok",
            )
        )
    return SuiteReport(rows=tuple(rows))


def _resolve_goal(t: TaskSpec, m: SceneManifest, artifact: Artifact, ep_seed: int, worker_factory):
    if artifact.kind == "oracle" or artifact.kind == "reward_source":
        # Reward-family rollouts still need target poses; the oracle supplies
        # the pose logic the generated reward scores against.
        return oracle_goal(t, m, seed=ep_seed)
    if artifact.kind == "goal_source":
        if worker_factory is None:
            raise ValueError("sandboxed goal sources need a worker_factory")
        worker = worker_factory()
        try:
            loaded = worker.load_source(artifact.source, "generate_goal_poses")
            if loaded.status != "ok":
                return None
            args = [[pose.as_vector() for _, pose in m.cubes]]
            result = worker.call_entry(args, timeout=5.0, seed=ep_seed)
            if result.status != "ok":
                return None
            return goal_set_from_value(result.value, m)
        finally:
            worker.close()
    raise ValueError(f"unknown artifact kind {artifact.kind!r}")


def goal_set_from_value(value, m: SceneManifest) -> GoalSet | None:
    """Interpret a sandboxed goal function's return value: a list of
    3-vectors (position) or 7-vectors (position + quaternion)."""
    if not isinstance(value, list) or not value:
        return None
    targets = []
    for item in value:
        if not isinstance(item, list) or len(item) not in (3, 7):
            return None
        try:
            if len(item) == 3:
                targets.append(Pose(tuple(float(v) for v in item)))
            else:
                q = tuple(float(v) for v in item[3:])
                norm = math.sqrt(sum(x * x for x in q))
                if norm == 0:
                    return None
                q = tuple(x / norm for x in q)
                targets.append(Pose(tuple(float(v) for v in item[:3]), q))
        except (TypeError, ValueError):
            return None
    return GoalSet(tuple(targets))


CSV_HEADER = "task,episodes,success_rate,mean_steps,status"


def emit_report(r: SuiteReport, format: str = "csv") -> str:
    """CSV or Markdown rendering with a bit-stable column order."""
    if format == "csv":
        lines = [CSV_HEADER]
        for row in r.rows:
            lines.append(
                f"{row.task_id},{row.episodes},{row.success_rate:.4f},{row.mean_steps:.1f},{row.status}"
            )
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [
            "| task | episodes | success_rate | mean_steps | status |",
            "| --- | --- | --- | --- | --- |",
        ]
        for row in r.rows:
            lines.append(
                f"| {row.task_id} | {row.episodes} | {row.success_rate:.4f} "
                f"| {row.mean_steps:.1f} | {row.status} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")
