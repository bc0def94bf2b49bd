"""Reward terms for the pick-and-place environment family.

The task-independent terms (reach shaping, lift bonus, action and collision
penalties) use the Franka-style training-loop scales; the task-dependent term
is either the native goal-distance term or a sandboxed generated function.
Shaping uses the bounded inverse-quadratic form scale / (1 + d^2) so every
term stays finite; the form is centralized here so an alternative can be
swapped in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .sandbox import WorkerHandle
from .scene import Pose


class EvaluationError(RuntimeError):
    """A sandboxed reward term failed; never silently mapped to zero."""


@dataclass(frozen=True)
class RewardScales:
    object_dist: float = 0.08
    lift_bonus: float = 4.0
    goal_dist: float = 1.28
    goal_bonus: float = 4.0
    action_penalty: float = 0.01
    collision_penalty: float = 1.28

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"scale {name} must be >= 0")


@dataclass(frozen=True)
class StepContext:
    object_pose: Pose
    gripper_position: tuple[float, float, float]
    action: tuple[float, ...] = (0.0,) * 7
    goal: Pose | None = None
    collided: bool = False
    table_height: float = 0.78

    def __post_init__(self):
        values = list(self.gripper_position) + list(self.action) + [self.table_height]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("StepContext vectors must be finite")


@dataclass(frozen=True)
class RewardBreakdown:
    reach: float = 0.0
    lift: float = 0.0
    goal_shaping: float = 0.0
    goal_bonus: float = 0.0
    action: float = 0.0
    collision: float = 0.0
    total: float = field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(
            self,
            "total",
            self.reach + self.lift + self.goal_shaping + self.goal_bonus + self.action + self.collision,
        )


def _distance(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


LIFT_CLEARANCE = 0.02  # above the cube rest height before the bonus fires


def eval_independent(ctx: StepContext, s: RewardScales, cube_edge: float = 0.05) -> RewardBreakdown:
    """Task-independent terms only; goal terms are left at zero."""
    d_go = _distance(ctx.gripper_position, ctx.object_pose.position)
    reach = s.object_dist / (1.0 + d_go * d_go)
    lifted = ctx.object_pose.position[2] > ctx.table_height + cube_edge / 2.0 + LIFT_CLEARANCE
    lift = s.lift_bonus if lifted else 0.0
    action = -s.action_penalty * sum(a * a for a in ctx.action)
    collision = -s.collision_penalty if ctx.collided else 0.0
    return RewardBreakdown(reach=reach, lift=lift, action=action, collision=collision)


def eval_goal_term(
    object_pose: Pose, goal: Pose, s: RewardScales, success_tol: float = 0.05
) -> tuple[float, float]:
    """(shaping, bonus) from the object-to-goal position distance."""
    if success_tol <= 0:
        raise ValueError("success_tol must be positive")
    d = _distance(object_pose.position, goal.position)
    shaping = s.goal_dist / (1.0 + d * d)
    bonus = s.goal_bonus if d < success_tol else 0.0
    return shaping, bonus


def native_goal_term(s: RewardScales, success_tol: float = 0.05):
    """Task-dependent evaluator backed by the built-in goal-distance term."""

    def evaluator(ctx: StepContext) -> tuple[float, float]:
        if ctx.goal is None:
            return 0.0, 0.0
        return eval_goal_term(ctx.object_pose, ctx.goal, s, success_tol)

    return evaluator


def compose(independent, dependent):
    """Combine a task-independent evaluator with a task-dependent one.

    ``independent`` maps StepContext -> RewardBreakdown (goal terms zero);
    ``dependent`` maps StepContext -> scalar or (shaping, bonus). The scalar
    form lands in the goal_shaping slot.
    """

    def evaluator(ctx: StepContext) -> RewardBreakdown:
        base = independent(ctx)
        term = dependent(ctx)
        if isinstance(term, tuple):
            shaping, bonus = term
        else:
            shaping, bonus = float(term), 0.0
        return RewardBreakdown(
            reach=base.reach,
            lift=base.lift,
            goal_shaping=shaping,
            goal_bonus=bonus,
            action=base.action,
            collision=base.collision,
        )

    return evaluator


def sandboxed_dependent(
    worker: WorkerHandle,
    source: str,
    goal: Pose | None = None,
    entry: str = "compute_task_reward",
    timeout: float = 5.0,
):
    """Task-dependent evaluator that runs a generated function in a sandbox
    worker. Errors surface as EvaluationError, never as silent zeros."""
    loaded = worker.load_source(source, entry)
    if loaded.status != "ok":
        diag = loaded.diagnostic
        raise EvaluationError(f"reward source failed to load: {diag.etype}: {diag.message}")

    def evaluator(ctx: StepContext) -> float:
        args = [
            list(ctx.object_pose.as_vector()),
            list(ctx.gripper_position),
            list(goal.position) if goal is not None else None,
            list(ctx.action),
            bool(ctx.collided),
            ctx.table_height,
        ]
        result = worker.call_entry(args, timeout=timeout)
        if result.status == "timeout":
            raise EvaluationError("reward evaluation timed out")
        if result.status != "ok":
            diag = result.diagnostic
            raise EvaluationError(f"reward evaluation failed: {diag.etype}: {diag.message}")
        value = result.value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EvaluationError(f"reward function returned non-numeric value {value!r}")
        return float(value)

    return evaluator
