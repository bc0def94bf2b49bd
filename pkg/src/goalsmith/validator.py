"""Machine-checkable oracles for the catalogued tasks.

``validate`` decides whether a goal set satisfies a task's constraint
descriptor plus workspace reachability; ``oracle_goal`` provides hand-written
reference goal generators (a stand-in for generated code in tests);
``mutate_goal`` produces the canonical invalidating perturbations used by the
mutation-detection suite.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .scene import (
    FLIP_ORIENTATION,
    GoalSet,
    Pose,
    SceneManifest,
    TaskSpec,
    WorkspaceBounds,
    default_bounds,
    horizontal_distance_to_base,
    within_workspace,
)


@dataclass(frozen=True)
class Violation:
    target_index: int
    rule: str
    measured: float
    bound: float


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[Violation, ...]

    def __post_init__(self):
        assert self.valid == (len(self.violations) == 0)


def _xy(p: Pose) -> tuple[float, float]:
    return p.position[0], p.position[1]


def _dist(a, b) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def _dist_xy(a: Pose, b: Pose) -> float:
    return math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])


def _rotated_z_axis(q: tuple[float, float, float, float]) -> tuple[float, float, float]:
    w, x, y, z = q
    return (2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y))


def _corners(m: SceneManifest) -> list[tuple[float, float]]:
    sx, sy = m.table_size[0], m.table_size[1]
    return [(0.0, 0.0), (sx, 0.0), (0.0, sy), (sx, sy)]


def _triangle_sides(targets) -> list[float]:
    p = [t.position for t in targets]
    return [_dist(p[0], p[1]), _dist(p[1], p[2]), _dist(p[2], p[0])]


def _vertex_cosines(targets) -> list[float]:
    """Cosine of the interior angle at each vertex (xy plane)."""
    p = [(t.position[0], t.position[1]) for t in targets]
    cosines = []
    for i in range(3):
        a, b, c = p[i], p[(i + 1) % 3], p[(i + 2) % 3]
        u = (b[0] - a[0], b[1] - a[1])
        v = (c[0] - a[0], c[1] - a[1])
        nu, nv = math.hypot(*u), math.hypot(*v)
        if nu < 1e-12 or nv < 1e-12:
            cosines.append(1.0)
        else:
            cosines.append((u[0] * v[0] + u[1] * v[1]) / (nu * nv))
    return cosines


def _evaluate(g: GoalSet, t: TaskSpec, m: SceneManifest):
    """Kind-specific predicate evaluation: (violations, measurements)."""
    kind = t.constraint.kind
    prm = t.constraint.params
    targets = g.targets
    violations: list[Violation] = []
    measures: list[tuple[str, float]] = []
    rest = m.cube_rest_height

    def check(index, rule, measured, bound, ok):
        measures.append((rule, measured))
        if not ok:
            violations.append(Violation(index, rule, measured, bound))

    if kind == "region":
        x, y, z = targets[0].position
        for axis, value in (("x", x), ("y", y), ("z", z)):
            lo, hi = prm[axis]
            check(0, f"region_{axis}", value, hi, lo <= value <= hi)

    elif kind == "height":
        z = targets[0].position[2]
        want = m.table_height + prm["dz"]
        err = abs(z - want)
        check(0, "height", z - m.table_height, prm["dz"], err <= prm["tol"])

    elif kind == "relative_offset":
        initial = m.initial_pose(0).position
        ex = initial[0] + prm.get("dx", 0.0)
        ey = initial[1] + prm.get("dy", 0.0)
        ez = prm["z_abs"] if "z_abs" in prm else initial[2] + prm.get("dz", 0.0)
        err = _dist(targets[0].position, (ex, ey, ez))
        check(0, "relative_offset", err, prm["tol"], err <= prm["tol"])

    elif kind == "orientation_flip":
        v = _rotated_z_axis(targets[0].orientation)
        angle = math.acos(max(-1.0, min(1.0, -v[2])))
        check(0, "orientation_flip", angle, prm["max_angle"], angle <= prm["max_angle"])

    elif kind == "corner_any":
        x, y, _ = targets[0].position
        margin = prm["margin"]
        best = min(max(abs(x - cx), abs(y - cy)) for cx, cy in _corners(m))
        check(0, "corner_distance", best, margin, best <= margin)
        z = targets[0].position[2]
        lo, hi = prm["z"]
        check(0, "corner_z", z, hi, lo <= z <= hi)

    elif kind == "diagonal":
        x, y, z = targets[0].position
        sx, sy = m.table_size[0], m.table_size[1]
        d_main = abs(x / sx - y / sy) * min(sx, sy) / math.sqrt(2)
        d_anti = abs(x / sx + y / sy - 1.0) * min(sx, sy) / math.sqrt(2)
        which = prm.get("which", "any")
        d = {"main": d_main, "anti": d_anti}.get(which, min(d_main, d_anti))
        check(0, "diagonal_distance", d, prm["tol"], d <= prm["tol"])
        lo, hi = prm["z"]
        check(0, "diagonal_z", z, hi, lo <= z <= hi)

    elif kind == "off_table":
        x, y, _ = targets[0].position
        margin = prm["margin"]
        overhang = max(-x, x - m.table_size[0], -y, y - m.table_size[1])
        check(0, "off_table_overhang", overhang, margin, overhang >= margin)

    elif kind == "proximity_to_base":
        d = horizontal_distance_to_base(targets[0], m)
        check(0, "base_distance", d, prm["max_dist"], d <= prm["max_dist"])

    elif kind == "distance_from_base":
        d = horizontal_distance_to_base(targets[0], m)
        check(0, "base_distance", d, prm["min_dist"], d >= prm["min_dist"])

    elif kind == "multi_right_triangle":
        sides = _triangle_sides(targets)
        cosines = _vertex_cosines(targets)
        best = min(abs(c) for c in cosines)
        for i, c in enumerate(cosines):
            measures.append((f"vertex_cos_{i}", c))
        if best > prm["cos_tol"]:
            idx = min(range(3), key=lambda i: abs(cosines[i]))
            violations.append(Violation(idx, "right_angle_cos", best, prm["cos_tol"]))
        shortest = min(sides)
        check(0, "min_leg", shortest, prm["min_leg"], shortest >= prm["min_leg"])

    elif kind == "multi_isosceles":
        sides = _triangle_sides(targets)
        for i, s in enumerate(sides):
            measures.append((f"side_{i}", s))
        diffs = [abs(sides[0] - sides[1]), abs(sides[1] - sides[2]), abs(sides[2] - sides[0])]
        best = min(diffs)
        if best > prm["side_tol"]:
            violations.append(Violation(0, "isosceles_side_equality", best, prm["side_tol"]))
        shortest = min(sides)
        check(0, "min_side", shortest, prm["min_side"], shortest >= prm["min_side"])

    elif kind == "multi_pairwise_distance":
        sides = _triangle_sides(targets)
        for i, s in enumerate(sides):
            check(i, "pairwise_distance", s, prm["spacing"], abs(s - prm["spacing"]) <= prm["tol"])

    elif kind == "multi_square_center_corner":
        cx, cy = prm["center"]
        tol = prm["tol"]
        pts = [_xy(p) for p in targets]
        radii = [math.hypot(px - cx, py - cy) for px, py in pts]
        far = max(range(3), key=lambda i: radii[i])
        u, v = [i for i in range(3) if i != far]
        measures.append(("square_diag_radius", radii[far]))
        check(u, "square_side_equality", abs(radii[u] - radii[v]), tol, abs(radii[u] - radii[v]) <= tol)
        du = (pts[u][0] - cx, pts[u][1] - cy)
        dv = (pts[v][0] - cx, pts[v][1] - cy)
        nu, nv = math.hypot(*du), math.hypot(*dv)
        cos = (du[0] * dv[0] + du[1] * dv[1]) / (nu * nv) if nu > 1e-12 and nv > 1e-12 else 1.0
        check(far, "square_angle_cos", cos, 0.05, abs(cos) <= 0.05)
        closure = math.hypot(
            pts[far][0] - (pts[u][0] + pts[v][0] - cx),
            pts[far][1] - (pts[u][1] + pts[v][1] - cy),
        )
        check(far, "square_closure", closure, 2 * tol, closure <= 2 * tol)

    elif kind == "multi_left_center_right":
        sx, sy = m.table_size[0], m.table_size[1]
        x0 = targets[0].position[0]
        check(0, "left_x", x0, prm["left_max_x"], x0 <= prm["left_max_x"])
        box = prm["center_box"]
        cdx = abs(targets[1].position[0] - sx / 2)
        cdy = abs(targets[1].position[1] - sy / 2)
        off = max(cdx, cdy)
        check(1, "center_box", off, box, off <= box)
        x2 = targets[2].position[0]
        check(2, "right_x", x2, prm["right_min_x"], x2 >= prm["right_min_x"])

    else:  # pragma: no cover - descriptor construction rejects unknown kinds
        raise ValueError(f"unhandled constraint kind {kind!r}")

    return violations, measures


def validate(
    g: GoalSet,
    t: TaskSpec,
    m: SceneManifest | None = None,
    b: WorkspaceBounds | None = None,
) -> ValidationReport:
    """Check workspace membership for every target (skipped for off-table
    tasks) plus the task's kind-specific predicate."""
    m = m if m is not None else _default_manifest()
    b = b if b is not None else default_bounds(m)
    if len(g) != t.n_objects:
        raise ValueError(f"goal set has {len(g)} targets, task {t.id} expects {t.n_objects}")
    violations: list[Violation] = []
    if t.constraint.kind != "off_table":
        for i, target in enumerate(g.targets):
            if not within_workspace(target, m, b):
                violations.append(
                    Violation(i, "workspace", horizontal_distance_to_base(target, m), b.reach_radius)
                )
    kind_violations, _ = _evaluate(g, t, m)
    violations.extend(kind_violations)
    return ValidationReport(valid=not violations, violations=tuple(violations))


def measure(g: GoalSet, t: TaskSpec, m: SceneManifest | None = None) -> list[tuple[str, float]]:
    """Raw geometric measurements backing ``validate``, for reports."""
    m = m if m is not None else _default_manifest()
    _, measures = _evaluate(g, t, m)
    return measures


def _default_manifest() -> SceneManifest:
    from .scene import default_manifest

    return default_manifest()


# --------------------------------------------------------------------------
# Reference goal generators


def _sample_workspace_point(rng, t, m, b, sampler, fallback):
    """Rejection-sample a pose the full validator accepts; the deterministic
    fallback covers pathological bound configurations."""
    for _ in range(300):
        candidate = sampler(rng)
        if validate(candidate, t, m, b).valid:
            return candidate
    return fallback


def _on_table(m: SceneManifest, x: float, y: float, orientation=(1.0, 0.0, 0.0, 0.0)) -> Pose:
    return Pose((x, y, m.cube_rest_height), orientation)


def oracle_goal(
    t: TaskSpec,
    m: SceneManifest | None = None,
    seed: int = 0,
    b: WorkspaceBounds | None = None,
) -> GoalSet:
    """A goal set that ``validate`` accepts, sampled deterministically from
    ``seed``. Covers every catalogued task."""
    m = m if m is not None else _default_manifest()
    b = b if b is not None else default_bounds(m)
    rng = random.Random(f"{t.id}:{seed}")
    kind = t.constraint.kind
    prm = t.constraint.params
    rest = m.cube_rest_height
    initial = m.initial_pose(0).position

    def region_sampler(xr, yr, zr):
        def sample(r):
            return GoalSet(
                (
                    Pose(
                        (
                            r.uniform(*xr),
                            r.uniform(*yr),
                            r.uniform(*zr),
                        )
                    ),
                )
            )

        return sample

    if kind == "region":
        sampler = region_sampler(prm["x"], prm["y"], prm["z"])
        fx = sum(prm["x"]) / 2
        fy = sum(prm["y"]) / 2
        fz = sum(prm["z"]) / 2
        return _sample_workspace_point(rng, t, m, b, sampler, GoalSet((Pose((fx, fy, fz)),)))

    if kind == "height":
        z = m.table_height + prm["dz"]
        sampler = region_sampler((0.25, 0.75), (0.3, 0.8), (z, z))
        return _sample_workspace_point(rng, t, m, b, sampler, GoalSet((Pose((0.5, 0.5, z)),)))

    if kind == "relative_offset":
        x = initial[0] + prm.get("dx", 0.0)
        y = initial[1] + prm.get("dy", 0.0)
        z = prm["z_abs"] if "z_abs" in prm else initial[2] + prm.get("dz", 0.0)
        return GoalSet((Pose((x, y, z)),))

    if kind == "orientation_flip":
        return GoalSet((Pose(initial, FLIP_ORIENTATION),))

    if kind == "corner_any":
        margin = prm["margin"]
        cx, cy = rng.choice(_corners(m))
        xr = (cx, cx + margin) if cx == 0.0 else (cx - margin, cx)
        yr = (cy, cy + margin) if cy == 0.0 else (cy - margin, cy)
        sampler = region_sampler(xr, yr, prm["z"])
        fallback = GoalSet((_on_table(m, 0.14, 0.14),))
        return _sample_workspace_point(rng, t, m, b, sampler, fallback)

    if kind == "diagonal":
        which = prm.get("which", "any")
        if which == "any":
            which = rng.choice(("main", "anti"))

        def sampler(r):
            s = r.uniform(0.2, 0.8)
            x = s * m.table_size[0]
            y = s * m.table_size[1] if which == "main" else (1 - s) * m.table_size[1]
            return GoalSet((_on_table(m, x, y),))

        return _sample_workspace_point(rng, t, m, b, sampler, GoalSet((_on_table(m, 0.7, 0.7),)))

    if kind == "off_table":
        x = m.table_size[0] + prm["margin"] + 0.06 + rng.uniform(0.0, 0.04)
        return GoalSet((Pose((x, initial[1], rest)),))

    if kind == "proximity_to_base":
        bx, by, _ = m.robot_base.position

        def sampler(r):
            radius = r.uniform(b.base_exclusion_radius + 0.02, prm["max_dist"] - 0.02)
            theta = r.uniform(0.0, 2 * math.pi)
            return GoalSet((_on_table(m, bx + radius * math.cos(theta), by + radius * math.sin(theta)),))

        return _sample_workspace_point(rng, t, m, b, sampler, GoalSet((_on_table(m, bx + 0.2, by),)))

    if kind == "distance_from_base":
        bx, by, _ = m.robot_base.position

        def sampler(r):
            radius = r.uniform(prm["min_dist"] + 0.02, b.reach_radius - 0.02)
            theta = r.uniform(0.25 * math.pi, 0.75 * math.pi)  # into the table
            return GoalSet((_on_table(m, bx + radius * math.cos(theta), by + radius * math.sin(theta)),))

        return _sample_workspace_point(rng, t, m, b, sampler, GoalSet((_on_table(m, 0.5, 0.85),)))

    if kind == "multi_pairwise_distance":
        spacing = prm["spacing"]
        circumradius = spacing / math.sqrt(3)

        def sampler(r):
            cx = r.uniform(0.4, 0.6)
            cy = r.uniform(0.45, 0.65)
            theta = r.uniform(0.0, 2 * math.pi)
            targets = []
            for k in range(3):
                a = theta + k * 2 * math.pi / 3
                targets.append(_on_table(m, cx + circumradius * math.cos(a), cy + circumradius * math.sin(a)))
            return GoalSet(tuple(targets))

        return _sample_workspace_point(rng, t, m, b, sampler, sampler(random.Random(0)))

    if kind == "multi_right_triangle":

        def sampler(r):
            ax = r.uniform(0.4, 0.6)
            ay = r.uniform(0.45, 0.6)
            theta = r.uniform(0.0, 2 * math.pi)
            l1 = r.uniform(0.10, 0.18)
            l2 = r.uniform(0.10, 0.18)
            u = (math.cos(theta), math.sin(theta))
            v = (-u[1], u[0])
            return GoalSet(
                (
                    _on_table(m, ax, ay),
                    _on_table(m, ax + l1 * u[0], ay + l1 * u[1]),
                    _on_table(m, ax + l2 * v[0], ay + l2 * v[1]),
                )
            )

        return _sample_workspace_point(rng, t, m, b, sampler, sampler(random.Random(0)))

    if kind == "multi_isosceles":
        # Equal sides 0.15, base 0.20: the base differs from the legs by well
        # over the mutation perturbation, keeping the mutation corpus crisp.
        base_len, leg = 0.20, 0.15
        apex_h = math.sqrt(leg * leg - (base_len / 2) ** 2)

        def sampler(r):
            cx = r.uniform(0.4, 0.6)
            cy = r.uniform(0.45, 0.6)
            theta = r.uniform(0.0, 2 * math.pi)
            u = (math.cos(theta), math.sin(theta))
            v = (-u[1], u[0])
            a = (cx - base_len / 2 * u[0], cy - base_len / 2 * u[1])
            c = (cx + base_len / 2 * u[0], cy + base_len / 2 * u[1])
            apex = (cx + apex_h * v[0], cy + apex_h * v[1])
            return GoalSet(
                (_on_table(m, *a), _on_table(m, *apex), _on_table(m, *c))
            )

        return _sample_workspace_point(rng, t, m, b, sampler, sampler(random.Random(0)))

    if kind == "multi_square_center_corner":
        cx, cy = prm["center"]

        def sampler(r):
            s = r.uniform(0.12, 0.18)
            theta = r.uniform(0.0, 2 * math.pi)
            u = (math.cos(theta), math.sin(theta))
            v = (-u[1], u[0])
            return GoalSet(
                (
                    _on_table(m, cx + s * u[0], cy + s * u[1]),
                    _on_table(m, cx + s * v[0], cy + s * v[1]),
                    _on_table(m, cx + s * (u[0] + v[0]), cy + s * (u[1] + v[1])),
                )
            )

        return _sample_workspace_point(rng, t, m, b, sampler, sampler(random.Random(0)))

    if kind == "multi_left_center_right":

        def sampler(r):
            left = _on_table(m, r.uniform(0.12, prm["left_max_x"] - 0.02), r.uniform(0.3, 0.7))
            center = _on_table(
                m,
                m.table_size[0] / 2 + r.uniform(-0.08, 0.08),
                m.table_size[1] / 2 + r.uniform(-0.08, 0.08),
            )
            right = _on_table(m, r.uniform(prm["right_min_x"] + 0.02, 0.88), r.uniform(0.3, 0.7))
            return GoalSet((left, center, right))

        return _sample_workspace_point(rng, t, m, b, sampler, sampler(random.Random(0)))

    raise ValueError(f"no oracle for constraint kind {kind!r}")  # pragma: no cover


# --------------------------------------------------------------------------
# Mutation corpus

MUTATION_CLASSES = (
    "out_of_workspace",
    "break_right_angle",
    "perturb_pairwise_distance",
    "flip_relative_sign",
    "drop_height",
)


def _move_target(g: GoalSet, index: int, position) -> GoalSet:
    targets = list(g.targets)
    targets[index] = Pose(tuple(position), targets[index].orientation)
    return GoalSet(tuple(targets))


def mutate_goal(g: GoalSet, t: TaskSpec, m: SceneManifest, mutation: str) -> GoalSet | None:
    """Apply one of the canonical invalidating mutations to an oracle goal.

    Returns None when the mutation class does not apply to the task.
    """
    kind = t.constraint.kind
    prm = t.constraint.params

    if mutation == "out_of_workspace":
        if kind == "off_table":
            return None
        x, y, z = g.targets[0].position
        return _move_target(g, 0, (m.table_size[0] + 0.5, y, z))

    if mutation == "break_right_angle":
        if kind != "multi_right_triangle":
            return None
        cosines = _vertex_cosines(g.targets)
        apex = min(range(3), key=lambda i: abs(cosines[i]))
        leg_index = (apex + 1) % 3
        ax, ay = g.targets[apex].position[0], g.targets[apex].position[1]
        px, py, pz = g.targets[leg_index].position
        angle = math.radians(20.0)
        dx, dy = px - ax, py - ay
        rx = ax + dx * math.cos(angle) - dy * math.sin(angle)
        ry = ay + dx * math.sin(angle) + dy * math.cos(angle)
        return _move_target(g, leg_index, (rx, ry, pz))

    if mutation == "perturb_pairwise_distance":
        if kind not in ("multi_pairwise_distance", "multi_isosceles"):
            return None
        pairs = [(0, 1), (1, 2), (2, 0)]
        if kind == "multi_isosceles":
            # Stretch the odd side so no pair of sides stays equal.
            sides = _triangle_sides(g.targets)
            oddness = [
                abs(sides[k] - sides[(k + 1) % 3]) + abs(sides[k] - sides[(k + 2) % 3])
                for k in range(3)
            ]
            i, j = pairs[max(range(3), key=lambda k: oddness[k])]
        else:
            i, j = pairs[0]
        pi, pj = g.targets[i].position, g.targets[j].position
        length = _dist(pi, pj)
        scale = (length + 0.03) / length
        moved = tuple(pi[k] + (pj[k] - pi[k]) * scale for k in range(3))
        return _move_target(g, j, moved)

    if mutation == "flip_relative_sign":
        if kind != "relative_offset":
            return None
        initial = m.initial_pose(0).position
        dx, dy = prm.get("dx", 0.0), prm.get("dy", 0.0)
        x, y, z = g.targets[0].position
        if abs(dx) > 1e-12:
            return _move_target(g, 0, (initial[0] - dx, y, z))
        if abs(dy) > 1e-12:
            return _move_target(g, 0, (x, initial[1] - dy, z))
        dz = prm.get("dz", 0.0)
        return _move_target(g, 0, (x, y, initial[2] - dz))

    if mutation == "drop_height":
        applies = (
            kind == "height"
            or (kind == "region" and prm["z"][0] >= m.cube_rest_height + 0.05)
            or (kind == "relative_offset" and (prm.get("z_abs") is not None or prm.get("dz", 0.0) > 0))
        )
        if not applies:
            return None
        x, y, z = g.targets[0].position
        return _move_target(g, 0, (x, y, z - 0.10))

    raise ValueError(f"unknown mutation class {mutation!r}")
