"""Reward composition: independent terms, goal terms, sandboxed terms."""

import math

import pytest
from hypothesis import given, strategies as st

from goalsmith.rewards import (
    EvaluationError,
    LIFT_CLEARANCE,
    RewardBreakdown,
    RewardScales,
    StepContext,
    compose,
    eval_goal_term,
    eval_independent,
    native_goal_term,
    sandboxed_dependent,
)
from goalsmith.sandbox import InProcessWorker
from goalsmith.scene import Pose

finite = st.floats(-2.0, 2.0, allow_nan=False)


def make_context(obj_z=0.805, collided=False, action=(0.0,) * 7, goal=None):
    return StepContext(
        object_pose=Pose((0.5, 0.5, obj_z)),
        gripper_position=(0.5, 0.5, obj_z + 0.1),
        action=action,
        goal=goal,
        collided=collided,
        table_height=0.78,
    )


contexts = st.builds(
    StepContext,
    object_pose=st.builds(Pose, st.tuples(finite, finite, st.floats(0.0, 2.0))),
    gripper_position=st.tuples(finite, finite, finite),
    action=st.tuples(*[st.floats(-1.0, 1.0)] * 7),
    goal=st.one_of(st.none(), st.builds(Pose, st.tuples(finite, finite, finite))),
    collided=st.booleans(),
    table_height=st.just(0.78),
)


class TestScales:
    def test_defaults(self):
        s = RewardScales()
        assert (s.object_dist, s.lift_bonus, s.goal_dist) == (0.08, 4.0, 1.28)
        assert (s.goal_bonus, s.action_penalty, s.collision_penalty) == (4.0, 0.01, 1.28)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            RewardScales(lift_bonus=-1.0)


class TestBreakdown:
    @given(finite, finite, finite, finite, finite, finite)
    def test_total_is_exact_sum(self, a, b, c, d, e, f):
        r = RewardBreakdown(reach=a, lift=b, goal_shaping=c, goal_bonus=d, action=e, collision=f)
        assert r.total == a + b + c + d + e + f

    @given(contexts)
    def test_composed_breakdown_is_additive(self, ctx):
        evaluator = compose(
            lambda c: eval_independent(c, RewardScales()), native_goal_term(RewardScales())
        )
        r = evaluator(ctx)
        assert r.total == r.reach + r.lift + r.goal_shaping + r.goal_bonus + r.action + r.collision


class TestIndependentTerms:
    def test_lift_bonus_steps_exactly(self):
        s = RewardScales()
        threshold = 0.78 + 0.025 + LIFT_CLEARANCE
        below = eval_independent(make_context(obj_z=threshold - 1e-6), s)
        above = eval_independent(make_context(obj_z=threshold + 1e-6), s)
        assert below.lift == 0.0
        assert above.lift == 4.0

    def test_collision_penalty_steps_exactly(self):
        s = RewardScales()
        assert eval_independent(make_context(collided=True), s).collision == -1.28
        assert eval_independent(make_context(collided=False), s).collision == 0.0

    def test_action_penalty_is_quadratic(self):
        s = RewardScales()
        small = eval_independent(make_context(action=(0.1,) * 7), s).action
        large = eval_independent(make_context(action=(0.2,) * 7), s).action
        assert large == pytest.approx(4 * small)
        assert small < 0

    def test_reach_shaping_bounded_by_scale(self):
        s = RewardScales()
        r = eval_independent(make_context(), s)
        assert 0 < r.reach <= s.object_dist


class TestGoalTerm:
    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_shaping_monotone_in_distance(self, d1, d2):
        s = RewardScales()
        near, far = sorted((d1, d2))
        obj = Pose((0.0, 0.0, 0.805))
        s_near, _ = eval_goal_term(obj, Pose((near, 0.0, 0.805)), s)
        s_far, _ = eval_goal_term(obj, Pose((far, 0.0, 0.805)), s)
        assert s_near >= s_far

    def test_bonus_fires_inside_tolerance(self):
        s = RewardScales()
        obj = Pose((0.5, 0.5, 0.805))
        _, bonus = eval_goal_term(obj, Pose((0.5, 0.5 + 0.049, 0.805)), s)
        assert bonus == 4.0
        _, bonus = eval_goal_term(obj, Pose((0.5, 0.5 + 0.051, 0.805)), s)
        assert bonus == 0.0

    def test_invalid_tolerance_rejected(self):
        with pytest.raises(ValueError):
            eval_goal_term(Pose((0, 0, 0.805)), Pose((0, 0, 0.805)), RewardScales(), success_tol=0)

    def test_native_term_without_goal_is_zero(self):
        assert native_goal_term(RewardScales())(make_context()) == (0.0, 0.0)


class TestCompose:
    def test_scalar_dependent_lands_in_goal_shaping(self):
        evaluator = compose(lambda c: eval_independent(c, RewardScales()), lambda c: 0.625)
        r = evaluator(make_context())
        assert r.goal_shaping == 0.625
        assert r.goal_bonus == 0.0

    def test_tuple_dependent_splits_terms(self):
        evaluator = compose(lambda c: eval_independent(c, RewardScales()), lambda c: (0.5, 4.0))
        r = evaluator(make_context())
        assert (r.goal_shaping, r.goal_bonus) == (0.5, 4.0)


class TestSandboxedDependent:
    GOOD = (
        "def compute_task_reward(object_position, gripper_position, goal_position,"
        " action, collided, table_height):\n"
        "    return object_position[2] - table_height\n"
    )

    def test_runs_generated_source(self):
        with InProcessWorker() as worker:
            evaluator = sandboxed_dependent(worker, self.GOOD, goal=Pose((0.9, 0.9, 0.805)))
            value = evaluator(make_context())
            assert value == pytest.approx(0.805 - 0.78)

    def test_load_failure_raises(self):
        with InProcessWorker() as worker:
            with pytest.raises(EvaluationError):
                sandboxed_dependent(worker, "def compute_task_reward(:\n", None)

    def test_runtime_failure_raises_not_zero(self):
        bad = (
            "def compute_task_reward(object_position, gripper_position, goal_position,"
            " action, collided, table_height):\n"
            "    return object_position[99]\n"
        )
        with InProcessWorker() as worker:
            evaluator = sandboxed_dependent(worker, bad)
            with pytest.raises(EvaluationError):
                evaluator(make_context())

    def test_non_numeric_return_raises(self):
        weird = (
            "def compute_task_reward(object_position, gripper_position, goal_position,"
            " action, collided, table_height):\n"
            "    return 'high'\n"
        )
        with InProcessWorker() as worker:
            evaluator = sandboxed_dependent(worker, weird)
            with pytest.raises(EvaluationError):
                evaluator(make_context())


class TestStepContext:
    def test_rejects_non_finite_values(self):
        with pytest.raises(ValueError):
            StepContext(object_pose=Pose((0, 0, 0.805)), gripper_position=(math.inf, 0, 0))
