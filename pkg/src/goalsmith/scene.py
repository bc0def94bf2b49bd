"""Tabletop scene geometry, workspace predicates, and the task catalog.

Everything here is immutable after construction and shared by prompting,
validation, and simulation. Conventions: world z-up, origin on the floor
under the table, quaternions ordered (w, x, y, z). From the robot's
viewpoint "left" is -x, "right" is +x, "ahead" is +y, "backward" is -y.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources

import yaml


class ManifestError(ValueError):
    """Raised when a manifest document is malformed or breaks an invariant."""

    def __init__(self, message: str, field_name: str | None = None):
        super().__init__(message)
        self.field_name = field_name


def _finite3(v, name: str) -> tuple[float, float, float]:
    if len(v) != 3:
        raise ManifestError(f"{name} must have 3 components, got {len(v)}", name)
    out = tuple(float(x) for x in v)
    if not all(math.isfinite(x) for x in out):
        raise ManifestError(f"{name} components must be finite", name)
    return out


@dataclass(frozen=True)
class Pose:
    """A position plus a unit quaternion (w, x, y, z) in the world frame."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", _finite3(self.position, "position"))
        q = tuple(float(x) for x in self.orientation)
        if len(q) != 4:
            raise ManifestError("orientation must have 4 components", "orientation")
        norm = math.sqrt(sum(x * x for x in q))
        if not math.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise ManifestError(f"orientation must be a unit quaternion, |q| = {norm}", "orientation")
        object.__setattr__(self, "orientation", q)

    @classmethod
    def at(cls, x: float, y: float, z: float) -> "Pose":
        return cls(position=(x, y, z))

    def as_vector(self) -> list[float]:
        """[x, y, z, qw, qx, qy, qz] for wire marshalling."""
        return [*self.position, *self.orientation]


# The quaternion for a half-turn about x: maps the cube's +z axis to -z.
FLIP_ORIENTATION = (0.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class WorkspaceBounds:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    reach_radius: float
    base_exclusion_radius: float

    def __post_init__(self):
        for name in ("x_range", "y_range", "z_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ManifestError(f"{name} must be a non-empty interval", name)
        if not self.reach_radius > self.base_exclusion_radius > 0:
            raise ManifestError(
                "reach_radius must exceed base_exclusion_radius, both positive",
                "reach_radius",
            )


@dataclass(frozen=True)
class ConstraintDescriptor:
    """Machine-checkable stand-in for a task's textual constraint.

    ``kind`` selects the predicate evaluated by the validator; ``params``
    carries the kind-specific numbers (offsets and regions in meters,
    tolerances as documented in the catalog data file).
    """

    kind: str
    params: dict = field(default_factory=dict)

    _KINDS = frozenset(
        {
            "region",
            "height",
            "relative_offset",
            "orientation_flip",
            "corner_any",
            "diagonal",
            "off_table",
            "proximity_to_base",
            "distance_from_base",
            "multi_right_triangle",
            "multi_isosceles",
            "multi_pairwise_distance",
            "multi_square_center_corner",
            "multi_left_center_right",
        }
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ManifestError(f"unknown constraint kind {self.kind!r}", "constraint")
        for key, value in self.params.items():
            if key.startswith("tol") or key.endswith("_tol"):
                if not value > 0:
                    raise ManifestError(f"tolerance {key} must be positive", key)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    family: str  # "goal_gcrl" | "reward_mtrl"
    description: str
    n_objects: int
    constraint: ConstraintDescriptor
    relative: bool = False

    def __post_init__(self):
        if self.family not in ("goal_gcrl", "reward_mtrl"):
            raise ManifestError(f"unknown task family {self.family!r}", "family")
        if self.n_objects < 1:
            raise ManifestError("n_objects must be >= 1", "n_objects")


@dataclass(frozen=True)
class GoalSet:
    """One target pose per manipulated object, in object order."""

    targets: tuple[Pose, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class SceneManifest:
    table_size: tuple[float, float, float]
    table_height: float
    robot_base: Pose
    cube_edge: float
    cubes: tuple[tuple[str, Pose], ...]
    origin_note: str = "world origin (0, 0, 0) on the floor under the table"
    workspace: WorkspaceBounds | None = None

    def __post_init__(self):
        object.__setattr__(self, "table_size", _finite3(self.table_size, "table_size"))
        if self.cube_edge <= 0:
            raise ManifestError("cube_edge must be positive", "cube_edge")
        if self.table_height <= 0:
            raise ManifestError("table_height must be positive", "table_height")
        object.__setattr__(self, "cubes", tuple((str(i), p) for i, p in self.cubes))
        rest = self.table_height + self.cube_edge / 2.0
        for cube_id, pose in self.cubes:
            x, y, z = pose.position
            if abs(z - rest) > 1e-9:
                raise ManifestError(
                    f"cube {cube_id} must rest on the table (z = {rest}), got z = {z}",
                    "cubes",
                )
            if not (0.0 <= x <= self.table_size[0] and 0.0 <= y <= self.table_size[1]):
                raise ManifestError(f"cube {cube_id} is outside the table footprint", "cubes")

    @property
    def cube_rest_height(self) -> float:
        return self.table_height + self.cube_edge / 2.0

    def initial_pose(self, index: int) -> Pose:
        return self.cubes[index][1]

    def with_jitter(self, seed: int, amount: float = 0.05) -> "SceneManifest":
        """Perturb cube x, y uniformly by +/- ``amount`` (the initial-state
        distribution stand-in). Jittered positions are clamped to the
        footprint; z and orientation are untouched."""
        rng = random.Random(seed)
        jittered = []
        for cube_id, pose in self.cubes:
            x, y, z = pose.position
            x = min(max(x + rng.uniform(-amount, amount), 0.0), self.table_size[0])
            y = min(max(y + rng.uniform(-amount, amount), 0.0), self.table_size[1])
            jittered.append((cube_id, Pose((x, y, z), pose.orientation)))
        return replace(self, cubes=tuple(jittered))


def default_bounds(m: SceneManifest | None = None) -> WorkspaceBounds:
    """Workspace defaults: table footprint in x, y; half a meter of air above
    the table; 0.85 m reach around the base with a 0.10 m exclusion disc."""
    if m is not None and m.workspace is not None:
        return m.workspace
    height = m.table_height if m is not None else 0.78
    sx = m.table_size[0] if m is not None else 1.0
    sy = m.table_size[1] if m is not None else 1.0
    return WorkspaceBounds(
        x_range=(0.0, sx),
        y_range=(0.0, sy),
        z_range=(height, height + 0.5),
        reach_radius=0.85,
        base_exclusion_radius=0.10,
    )


def horizontal_distance_to_base(p: Pose | tuple, m: SceneManifest) -> float:
    pos = p.position if isinstance(p, Pose) else p
    bx, by, _ = m.robot_base.position
    return math.hypot(pos[0] - bx, pos[1] - by)


def within_workspace(p: Pose, m: SceneManifest, b: WorkspaceBounds) -> bool:
    x, y, z = p.position
    if not (b.x_range[0] <= x <= b.x_range[1]):
        return False
    if not (b.y_range[0] <= y <= b.y_range[1]):
        return False
    if not (b.z_range[0] <= z <= b.z_range[1]):
        return False
    d = horizontal_distance_to_base(p, m)
    return b.base_exclusion_radius <= d <= b.reach_radius


def _load_data_text(name: str) -> str:
    return resources.files("goalsmith.data").joinpath(name).read_text(encoding="utf-8")


def _parse_pose(node, field_name: str) -> Pose:
    if not isinstance(node, dict) or "position" not in node:
        raise ManifestError(f"{field_name} must be a mapping with a position", field_name)
    return Pose(
        position=_finite3(node["position"], f"{field_name}.position"),
        orientation=tuple(node.get("orientation", (1.0, 0.0, 0.0, 0.0))),
    )


_MANIFEST_KEYS = ("table_size", "table_height", "robot_base", "cube_edge", "cubes")


def parse_manifest(doc: dict) -> SceneManifest:
    for key in _MANIFEST_KEYS:
        if key not in doc:
            raise ManifestError(f"manifest is missing required field {key!r}", key)
    workspace = None
    if "workspace" in doc:
        w = doc["workspace"]
        try:
            workspace = WorkspaceBounds(
                x_range=tuple(w["x_range"]),
                y_range=tuple(w["y_range"]),
                z_range=tuple(w["z_range"]),
                reach_radius=float(w["reach_radius"]),
                base_exclusion_radius=float(w["base_exclusion_radius"]),
            )
        except KeyError as e:
            raise ManifestError(f"workspace is missing field {e.args[0]!r}", "workspace") from e
    cubes = []
    for node in doc["cubes"]:
        if "id" not in node:
            raise ManifestError("every cube needs an id", "cubes")
        cubes.append((node["id"], _parse_pose(node, f"cubes[{node['id']}]")))
    return SceneManifest(
        table_size=tuple(doc["table_size"]),
        table_height=float(doc["table_height"]),
        robot_base=_parse_pose(doc["robot_base"], "robot_base"),
        cube_edge=float(doc["cube_edge"]),
        cubes=tuple(cubes),
        origin_note=doc.get("origin_note", SceneManifest.origin_note),
        workspace=workspace,
    )


def load_manifest(text: str) -> SceneManifest:
    """Parse a YAML manifest document. Parse failures carry the YAML line;
    invariant failures name the offending field."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark is not None else ""
        raise ManifestError(f"manifest is not valid YAML{line}: {e}") from e
    if not isinstance(doc, dict):
        raise ManifestError("manifest document must be a mapping")
    return parse_manifest(doc)


def dump_manifest(m: SceneManifest) -> str:
    doc = {
        "table_size": list(m.table_size),
        "table_height": m.table_height,
        "robot_base": {
            "position": list(m.robot_base.position),
            "orientation": list(m.robot_base.orientation),
        },
        "cube_edge": m.cube_edge,
        "cubes": [
            {"id": cid, "position": list(p.position), "orientation": list(p.orientation)}
            for cid, p in m.cubes
        ],
        "origin_note": m.origin_note,
    }
    if m.workspace is not None:
        doc["workspace"] = {
            "x_range": list(m.workspace.x_range),
            "y_range": list(m.workspace.y_range),
            "z_range": list(m.workspace.z_range),
            "reach_radius": m.workspace.reach_radius,
            "base_exclusion_radius": m.workspace.base_exclusion_radius,
        }
    return yaml.safe_dump(doc, sort_keys=False)


@lru_cache(maxsize=1)
def default_manifest() -> SceneManifest:
    """The bundled desk fixture: 1 m x 1 m x 0.78 m table, arm base on the
    table at (0.5, 0.165, 0.78), three 5 cm cubes."""
    return load_manifest(_load_data_text("manifest.yaml"))


@lru_cache(maxsize=1)
def task_catalog() -> tuple[TaskSpec, ...]:
    """All 41 catalogued tasks: d01..d32 (goal generation) and m01..m09
    (reward generation), each with its constraint descriptor."""
    doc = yaml.safe_load(_load_data_text("tasks.yaml"))
    specs = []
    for node in doc["tasks"]:
        constraint = ConstraintDescriptor(
            kind=node["constraint"]["kind"],
            params={k: v for k, v in node["constraint"].items() if k != "kind"},
        )
        specs.append(
            TaskSpec(
                id=node["id"],
                family=node["family"],
                description=node["description"],
                n_objects=int(node.get("n_objects", 1)),
                constraint=constraint,
                relative=bool(node.get("relative", False)),
            )
        )
    ids = [t.id for t in specs]
    if len(set(ids)) != len(ids):
        raise ManifestError("task catalog ids must be unique", "tasks")
    return tuple(specs)


def get_task(task_id: str) -> TaskSpec:
    for t in task_catalog():
        if t.id == task_id:
            return t
    raise KeyError(f"unknown task id {task_id!r}")
