"""Scripted-controller episodes and suite evaluation."""

import pytest

from goalsmith.rewards import RewardScales
from goalsmith.scene import (
    GoalSet,
    Pose,
    default_bounds,
    default_manifest,
    get_task,
    task_catalog,
)
from goalsmith.sim import (
    Artifact,
    CSV_HEADER,
    MAX_STEPS,
    default_reward,
    emit_report,
    evaluate_suite,
    goal_set_from_value,
    rollout,
)
from goalsmith.validator import oracle_goal


def single_goal(x, y, z=0.805):
    return GoalSet((Pose((x, y, z)),))


class TestRollout:
    def test_reaches_a_nearby_goal(self):
        m = default_manifest()
        result = rollout(m, single_goal(0.9, 0.9), default_reward())
        assert result.success
        assert result.steps_used <= MAX_STEPS
        assert result.final_state.cube_poses[0].position == (0.9, 0.9, 0.805)

    def test_snap_sets_target_orientation(self):
        m = default_manifest()
        flipped = GoalSet((Pose((0.9, 0.9, 0.805), (0.0, 1.0, 0.0, 0.0)),))
        result = rollout(m, flipped, default_reward())
        assert result.success
        assert result.final_state.cube_poses[0].orientation == (0.0, 1.0, 0.0, 0.0)

    def test_trace_length_matches_steps(self):
        m = default_manifest()
        result = rollout(m, single_goal(0.9, 0.9), default_reward())
        assert len(result.reward_trace) == result.steps_used

    def test_unreachable_target_idles_to_the_cap(self):
        m = default_manifest()
        result = rollout(
            m, single_goal(0.9, 0.9, z=5.0), default_reward(), bounds=default_bounds(m)
        )
        assert not result.success
        assert result.steps_used == MAX_STEPS

    def test_unbounded_rollout_can_leave_the_table(self):
        m = default_manifest()
        result = rollout(m, single_goal(1.1, 0.5), default_reward(), bounds=None)
        assert result.success

    def test_three_object_goal(self):
        m = default_manifest()
        t = get_task("d29")
        goal = oracle_goal(t, m, seed=1)
        result = rollout(m, goal, default_reward())
        assert result.success
        assert result.steps_used <= MAX_STEPS

    def test_too_many_targets_rejected(self):
        m = default_manifest()
        goal = GoalSet(tuple(Pose((0.5, 0.5 + 0.01 * i, 0.805)) for i in range(4)))
        with pytest.raises(ValueError):
            rollout(m, goal, default_reward())

    def test_rollout_is_deterministic(self):
        m = default_manifest()
        a = rollout(m, single_goal(0.8, 0.8), default_reward())
        b = rollout(m, single_goal(0.8, 0.8), default_reward())
        assert a == b


class TestGoalSetFromValue:
    def test_position_only_vectors(self):
        g = goal_set_from_value([[0.5, 0.5, 0.805]], default_manifest())
        assert g.targets[0].orientation == (1.0, 0.0, 0.0, 0.0)

    def test_full_pose_vectors_normalize_quaternion(self):
        g = goal_set_from_value([[0.5, 0.5, 0.805, 2.0, 0.0, 0.0, 0.0]], default_manifest())
        assert g.targets[0].orientation == (1.0, 0.0, 0.0, 0.0)

    @pytest.mark.parametrize(
        "value",
        [None, [], "goal", [[0.5, 0.5]], [[0.5, 0.5, 0.805, 0.0, 0.0, 0.0, 0.0]], [["a", "b", "c"]]],
    )
    def test_malformed_values_return_none(self, value):
        assert goal_set_from_value(value, default_manifest()) is None


class TestEvaluateSuite:
    def test_oracle_artifacts_succeed(self):
        tasks = [get_task("d01"), get_task("d13"), get_task("d29")]
        report = evaluate_suite(
            tasks, {t.id: Artifact("oracle") for t in tasks}, episodes_per_task=3
        )
        for row in report.rows:
            assert row.success_rate == 1.0
            assert row.status == "ok"

    def test_missing_artifact_marks_synthesis_failed(self):
        tasks = [get_task("d01")]
        report = evaluate_suite(tasks, {}, episodes_per_task=3)
        row = report.rows[0]
        assert row.status == "synthesis-failed"
        assert row.success_rate == 0.0

    def test_goal_source_artifact_runs_in_sandbox(self):
        from goalsmith.sandbox import InProcessWorker

        source = (
            "def generate_goal_poses(initial_poses):\n"
            "    return [[0.9, 0.9, 0.805, 1.0, 0.0, 0.0, 0.0]]\n"
        )
        report = evaluate_suite(
            [get_task("d01")],
            {"d01": Artifact("goal_source", source)},
            episodes_per_task=2,
            worker_factory=InProcessWorker,
        )
        assert report.rows[0].success_rate == 1.0

    def test_invalid_goal_source_counts_failures(self):
        from goalsmith.sandbox import InProcessWorker

        source = "def generate_goal_poses(initial_poses):\n    return []\n"
        report = evaluate_suite(
            [get_task("d01")],
            {"d01": Artifact("goal_source", source)},
            episodes_per_task=2,
            worker_factory=InProcessWorker,
        )
        row = report.rows[0]
        assert row.success_rate == 0.0
        assert row.mean_steps == MAX_STEPS

    def test_suite_is_deterministic(self):
        tasks = [get_task("d01"), get_task("d27")]
        artifacts = {t.id: Artifact("oracle") for t in tasks}
        a = evaluate_suite(tasks, artifacts, episodes_per_task=4, seed=3)
        b = evaluate_suite(tasks, artifacts, episodes_per_task=4, seed=3)
        assert a == b


class TestReports:
    def sample_report(self):
        tasks = [get_task("d01")]
        return evaluate_suite(tasks, {"d01": Artifact("oracle")}, episodes_per_task=2)

    def test_csv_layout(self):
        text = emit_report(self.sample_report(), "csv")
        lines = text.splitlines()
        assert lines[0] == CSV_HEADER
        assert lines[1].startswith("d01,2,1.0000,")

    def test_markdown_layout(self):
        text = emit_report(self.sample_report(), "markdown")
        assert text.splitlines()[0].startswith("| task |")
        assert "| d01 |" in text

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            emit_report(self.sample_report(), "xml")
