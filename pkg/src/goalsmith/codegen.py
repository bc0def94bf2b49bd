"""Generate -> validate -> execute -> auto-correct -> functional-test loop.

A synthesis run asks the backend for a candidate function, loads and executes
it on placeholder inputs in a sandbox worker, and re-prompts with the filtered
diagnostic when it fails. Repair prompts are built only from the immediately
preceding attempt. Once the candidate executes cleanly, a generated functional
test is run as a binding final gate. Every attempt is logged; under the replay
backend the whole run is a pure function of its inputs and fixtures.
"""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import Backend, BackendError, ChatRequest, EmptyCompletionError, extract_code, request_digest
from .prompts import (
    FunctionSignature,
    GOAL_SIGNATURE,
    REWARD_SIGNATURE,
    build_generation_prompt,
    build_repair_prompt,
    build_test_prompt,
    default_test_guidelines,
)
from .sandbox import CallResult, Diagnostic, WorkerHandle
from .scene import SceneManifest, TaskSpec

EMIT_ONLY_CODE_GUIDELINE = "Reply with only the function source code inside one fenced code block."


@dataclass(frozen=True)
class SynthesisConfig:
    kind: str  # "goal" | "reward"
    signature: FunctionSignature | None = None
    guidelines: tuple[str, ...] = ()
    max_repairs: int = 3
    timeout: float = 5.0
    seed: int = 0
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.2
    max_tokens: int = 1024
    generation_language: str = "python"

    def __post_init__(self):
        if self.kind not in ("goal", "reward"):
            raise ValueError(f"unknown synthesis kind {self.kind!r}")
        if self.max_repairs < 0:
            raise ValueError("max_repairs must be >= 0")
        if self.signature is None:
            default = GOAL_SIGNATURE if self.kind == "goal" else REWARD_SIGNATURE
            object.__setattr__(self, "signature", default)


@dataclass(frozen=True)
class Attempt:
    stage: str  # "generate" | "repair" | "test"
    prompt_digest: str
    completion_digest: str
    result: CallResult


@dataclass(frozen=True)
class SynthesisOutcome:
    status: str  # "accepted" | "rejected"
    attempts: tuple[Attempt, ...]
    source: str | None = None
    rejection_reason: str | None = None
    test_source: str | None = None

    def to_json(self) -> str:
        def result_doc(r: CallResult):
            doc = {"status": r.status}
            if r.status == "ok":
                doc["value"] = r.value
            if r.diagnostic is not None:
                doc["diagnostic"] = {
                    "etype": r.diagnostic.etype,
                    "message": r.diagnostic.message,
                    "frame": r.diagnostic.innermost_frame_text,
                }
            return doc

        doc = {
            "status": self.status,
            "rejection_reason": self.rejection_reason,
            "source": self.source,
            "test_source": self.test_source,
            "attempts": [
                {
                    "stage": a.stage,
                    "prompt_digest": a.prompt_digest,
                    "completion_digest": a.completion_digest,
                    "result": result_doc(a.result),
                }
                for a in self.attempts
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def placeholder_inputs(kind: str, m: SceneManifest) -> list:
    """Arguments used to smoke-execute a candidate before acceptance."""
    if kind == "goal":
        return [[pose.as_vector() for _, pose in m.cubes]]
    if kind == "reward":
        center = [m.table_size[0] / 2, m.table_size[1] / 2, m.cube_rest_height]
        object_pose = center + [1.0, 0.0, 0.0, 0.0]
        gripper = [center[0], center[1], center[2] + 0.1]
        return [object_pose, gripper, None, [0.0] * 7, False, m.table_height]
    raise ValueError(f"unknown synthesis kind {kind!r}")


def _text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def find_test_entry(test_source: str) -> str | None:
    try:
        tree = ast.parse(test_source)
    except SyntaxError:
        return None
    names = [n.name for n in ast.walk(tree) if isinstance(n, ast.FunctionDef)]
    for name in names:
        if name.startswith("test"):
            return name
    return names[0] if names else None


def run_functional_test(
    test_source: str, target_source: str, worker: WorkerHandle, timeout: float = 5.0
) -> CallResult:
    """Load target and test in one worker namespace and invoke the test.

    ok means the test raised nothing and returned None or a truthy value.
    """
    if not test_source.strip() or not target_source.strip():
        raise ValueError("both sources must be non-empty")
    entry = find_test_entry(test_source)
    combined = target_source.rstrip() + "\n\n\n" + test_source.lstrip()
    loaded = worker.load_source(combined, entry or "test_function")
    if loaded.status != "ok":
        return loaded
    result = worker.call_entry([], timeout=timeout)
    if result.status == "ok" and result.value is not None and not result.value:
        diag = Diagnostic(
            etype="AssertionError",
            message="functional test returned a falsy value",
            innermost_frame_text="",
        )
        return CallResult(status="error", diagnostic=diag)
    return result


class _AuditTrail:
    """Writes prompts, completions, diagnostics, and final sources for one
    synthesis run into a directory; silently inert when no directory given."""

    def __init__(self, directory=None):
        self._dir = Path(directory) if directory else None
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
        self._index = 0

    def attempt(self, stage: str, prompt: str, completion: str, result: CallResult):
        if self._dir is None:
            return
        tag = f"attempt-{self._index:02d}-{stage}"
        (self._dir / f"{tag}.prompt.txt").write_text(prompt, encoding="utf-8")
        (self._dir / f"{tag}.completion.txt").write_text(completion, encoding="utf-8")
        doc = {"status": result.status}
        if result.diagnostic is not None:
            doc["diagnostic"] = {
                "etype": result.diagnostic.etype,
                "message": result.diagnostic.message,
                "frame": result.diagnostic.innermost_frame_text,
            }
        (self._dir / f"{tag}.result.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")
        self._index += 1

    def finish(self, outcome: "SynthesisOutcome"):
        if self._dir is None:
            return
        if outcome.source:
            (self._dir / "final-source.py").write_text(outcome.source, encoding="utf-8")
        if outcome.test_source:
            (self._dir / "test-source.py").write_text(outcome.test_source, encoding="utf-8")
        (self._dir / "outcome.json").write_text(outcome.to_json() + "\n", encoding="utf-8")


def synthesize(
    t: TaskSpec,
    m: SceneManifest,
    cfg: SynthesisConfig,
    backend: Backend,
    worker: WorkerHandle,
    audit_dir=None,
) -> SynthesisOutcome:
    audit = _AuditTrail(audit_dir)
    attempts: list[Attempt] = []

    def ask(prompt: str) -> tuple[str, str, str]:
        request = ChatRequest(
            model=cfg.model,
            messages=(("user", prompt),),
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
        )
        completion = backend.complete(request)
        return completion, request_digest(request), _text_digest(completion)

    def record(stage, prompt, pdigest, completion, cdigest, result):
        attempts.append(Attempt(stage, pdigest, cdigest, result))
        audit.attempt(stage, prompt, completion, result)

    def rejected(reason: str) -> SynthesisOutcome:
        outcome = SynthesisOutcome(status="rejected", attempts=tuple(attempts), rejection_reason=reason)
        audit.finish(outcome)
        return outcome

    base_prompt = build_generation_prompt(
        m, t, cfg.signature, guidelines=cfg.guidelines, lang=cfg.generation_language
    ).render()

    args = placeholder_inputs(cfg.kind, m)
    prompt = base_prompt
    stage = "generate"
    source: str | None = None
    repairs_used = 0
    extraction_failed_last = False

    while True:
        try:
            completion, pdigest, cdigest = ask(prompt)
        except BackendError as e:
            return rejected("backend_error")

        try:
            extracted = extract_code(completion)
        except EmptyCompletionError:
            extracted = None
        if extracted is None or not extracted.text.strip():
            failure = CallResult(
                status="error",
                diagnostic=Diagnostic(
                    etype="ExtractionError",
                    message="completion contained no code",
                    innermost_frame_text="",
                ),
            )
            record(stage, prompt, pdigest, completion, cdigest, failure)
            if repairs_used >= cfg.max_repairs:
                return rejected("extraction_failed")
            repairs_used += 1
            extraction_failed_last = True
            prompt = build_generation_prompt(
                m,
                t,
                cfg.signature,
                guidelines=tuple(cfg.guidelines) + (EMIT_ONLY_CODE_GUIDELINE,),
                lang=cfg.generation_language,
            ).render()
            stage = "repair"
            continue

        candidate = extracted.text
        if source is not None and candidate == source and not extraction_failed_last:
            # The repair changed nothing; further rounds would loop forever.
            failure = CallResult(
                status="error",
                diagnostic=Diagnostic(
                    etype="RepairStalled",
                    message="repair produced identical source",
                    innermost_frame_text="",
                ),
            )
            record(stage, prompt, pdigest, completion, cdigest, failure)
            return rejected("repair_budget_exhausted")
        extraction_failed_last = False
        source = candidate

        result = worker.load_source(candidate, cfg.signature.name)
        if result.status == "ok":
            result = worker.call_entry(args, timeout=cfg.timeout, seed=cfg.seed)
        record(stage, prompt, pdigest, completion, cdigest, result)

        if result.status == "ok":
            break
        if repairs_used >= cfg.max_repairs:
            return rejected("repair_budget_exhausted")
        repairs_used += 1
        diagnostic = result.diagnostic or Diagnostic(
            etype="Timeout",
            message=f"execution exceeded {cfg.timeout} s",
            innermost_frame_text="",
        )
        prompt = build_repair_prompt(diagnostic, candidate)
        stage = "repair"

    # Functional-test gate: one shot, failures reject rather than repair.
    test_prompt = build_test_prompt(source, default_test_guidelines())
    try:
        completion, pdigest, cdigest = ask(test_prompt)
    except BackendError:
        return rejected("backend_error")
    try:
        extracted = extract_code(completion)
    except EmptyCompletionError:
        extracted = None
    if extracted is None or not extracted.text.strip():
        failure = CallResult(
            status="error",
            diagnostic=Diagnostic(
                etype="ExtractionError",
                message="test completion contained no code",
                innermost_frame_text="",
            ),
        )
        record("test", test_prompt, pdigest, completion, cdigest, failure)
        return rejected("functional_test_failed")
    test_source = extracted.text
    test_result = run_functional_test(test_source, source, worker, timeout=cfg.timeout)
    record("test", test_prompt, pdigest, completion, cdigest, test_result)
    if test_result.status != "ok":
        outcome = SynthesisOutcome(
            status="rejected",
            attempts=tuple(attempts),
            rejection_reason="functional_test_failed",
            test_source=test_source,
        )
        audit.finish(outcome)
        return outcome

    outcome = SynthesisOutcome(
        status="accepted",
        attempts=tuple(attempts),
        source=source,
        test_source=test_source,
    )
    audit.finish(outcome)
    return outcome


def synthesis_statistics(outcomes) -> dict:
    """Pass-rate summary over an audit trail, matching the live-run metrics:
    ``accepted`` counts runs that passed the functional-test gate,
    ``executable`` counts runs whose final candidate executed cleanly."""
    outcomes = list(outcomes)
    total = len(outcomes)
    accepted = sum(1 for o in outcomes if o.status == "accepted")
    executable = sum(
        1
        for o in outcomes
        if o.status == "accepted"
        or any(a.stage in ("generate", "repair") and a.result.status == "ok" for a in o.attempts)
    )

    def pct(x):
        return f"{100.0 * x / total:.1f}%" if total else "n/a"

    return {
        "total": total,
        "accepted": accepted,
        "executable": executable,
        "accepted_rate": accepted / total if total else 0.0,
        "executable_rate": executable / total if total else 0.0,
        "accepted_pct": pct(accepted),
        "executable_pct": pct(executable),
    }
