"""Deterministic construction of every prompt the pipeline sends.

A generation prompt has four parts in fixed order: environment description,
task description, expected function signature with docstring, and optional
guidelines. Templates live on disk (data/templates) so wording can change
without touching code; rendering is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .sandbox import Diagnostic
from .scene import SceneManifest, TaskSpec


class SignatureMismatchError(ValueError):
    """The signature does not fit the task family."""


@dataclass(frozen=True)
class FunctionSignature:
    name: str
    params: tuple[tuple[str, str, str], ...]  # (name, semantic type, docstring line)
    returns: str
    docstring: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("signature name must be non-empty")
        for pname, ptype, pdoc in self.params:
            if not pdoc:
                raise ValueError(f"parameter {pname!r} needs a docstring line")

    def render(self) -> str:
        arglist = ", ".join(p[0] for p in self.params)
        lines = [f"def {self.name}({arglist}):", f'    """{self.docstring}', ""]
        if self.params:
            lines.append("    Args:")
            for pname, ptype, pdoc in self.params:
                lines.append(f"        {pname} ({ptype}): {pdoc}")
            lines.append("")
        lines.append(f"    Returns:")
        lines.append(f"        {self.returns}")
        lines.append('    """')
        return "\n".join(lines)


GOAL_SIGNATURE = FunctionSignature(
    name="generate_goal_poses",
    params=(
        (
            "initial_poses",
            "list of lists of 7 floats",
            "Initial pose [x, y, z, qw, qx, qy, qz] of every cube on the table, in order.",
        ),
    ),
    returns="List with one target per manipulated cube, each [x, y, z] or [x, y, z, qw, qx, qy, qz].",
    docstring="Produce target poses satisfying the task description.",
)

REWARD_SIGNATURE = FunctionSignature(
    name="compute_task_reward",
    params=(
        ("object_position", "list of 7 floats", "Current pose [x, y, z, qw, qx, qy, qz] of the manipulated cube."),
        ("gripper_position", "list of 3 floats", "Current gripper position [x, y, z]."),
        ("goal_position", "list of 3 floats or None", "Target position when the environment provides one."),
        ("action", "list of 7 floats", "Last joint-displacement action."),
        ("collided", "bool", "True when the arm collided this step."),
        ("table_height", "float", "Height of the table surface in meters."),
    ),
    returns="A single float: the task-dependent reward term for this step.",
    docstring="Score progress toward the task described above; higher is better.",
)


@dataclass(frozen=True)
class PromptBundle:
    env_section: str
    task_section: str
    signature_section: str
    guidelines_section: str
    generation_language: str

    def render(self) -> str:
        parts = [self.env_section, self.task_section, self.signature_section]
        if self.guidelines_section:
            parts.append(self.guidelines_section)
        return "\n\n".join(parts) + "\n"


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("goalsmith.data.templates").joinpath(name).read_text(encoding="utf-8")


def _fmt(x: float) -> str:
    return f"{x:g}"


def render_environment(m: SceneManifest, language: str) -> str:
    sx, sy, sz = m.table_size
    bx, by, bz = m.robot_base.position
    cube_positions = "; ".join(
        f"{cid} at ({_fmt(p.position[0])}, {_fmt(p.position[1])}, {_fmt(p.position[2])})"
        for cid, p in m.cubes
    )
    return _template("environment.txt").format(
        table_dims=f"{_fmt(sx)}m x {_fmt(sy)}m x {_fmt(sz)}m",
        base_position=f"({_fmt(bx)}, {_fmt(by)}, {_fmt(bz)})",
        n_cubes=len(m.cubes),
        cube_edge_cm=_fmt(m.cube_edge * 100),
        rest_height=_fmt(m.cube_rest_height),
        cube_positions=cube_positions,
        language=language,
    ).rstrip("\n")


def signature_for(t: TaskSpec) -> FunctionSignature:
    return GOAL_SIGNATURE if t.family == "goal_gcrl" else REWARD_SIGNATURE


def build_generation_prompt(
    m: SceneManifest,
    t: TaskSpec,
    sig: FunctionSignature,
    guidelines: tuple[str, ...] = (),
    lang: str = "python",
) -> PromptBundle:
    expected = signature_for(t)
    if sig.name != expected.name:
        raise SignatureMismatchError(
            f"task {t.id} ({t.family}) expects signature {expected.name!r}, got {sig.name!r}"
        )
    guidelines_section = ""
    if guidelines:
        guidelines_section = "Additional guidelines:\n" + "\n".join(f"- {g}" for g in guidelines)
    return PromptBundle(
        env_section=render_environment(m, lang),
        task_section=f"Task: {t.description}",
        signature_section="Complete the following function:\n\n" + sig.render(),
        guidelines_section=guidelines_section,
        generation_language=lang,
    )


def build_repair_prompt(d: Diagnostic, source: str) -> str:
    if not d.etype:
        raise ValueError("diagnostic must be non-empty")
    return _template("repair.txt").format(
        etype=d.etype,
        message=d.message,
        frame=d.innermost_frame_text,
        source=source,
    )


def default_test_guidelines() -> tuple[str, ...]:
    return tuple(
        line[2:]
        for line in _template("test_default_guidelines.txt").splitlines()
        if line.startswith("- ")
    )


def build_test_prompt(source: str, guidelines: tuple[str, ...] = ()) -> str:
    text = _template("test.txt").format(
        guidelines="\n".join(f"- {g}" for g in guidelines),
        source=source,
    )
    if not guidelines:
        # Two-section prompt: drop the empty guidelines block.
        text = text.replace("Guidelines:\n\n\n", "")
    return text


def build_paraphrase_prompt(t: TaskSpec, n: int) -> str:
    if n < 1:
        raise ValueError("paraphrase count must be >= 1")
    return _template("paraphrase.txt").format(n=n, description=t.description)
