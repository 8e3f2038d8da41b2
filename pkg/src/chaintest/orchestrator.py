"""Iterative generate/fix session with coverage-stagnation stopping."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from typing import Optional

from .backends import CoverageSnapshot, RunOutcome, ScriptedModel, ScriptedRunner
from .errors import BackendError, NoCodeFound
from .model import MethodRef, package_of, simple_name
from .promptkit import (
    DEFAULT_BUDGET,
    DEFAULT_FRAMEWORK,
    DEFAULT_REASON_MAX,
    ContextBundle,
    FailureDigest,
    compose_fixing_prompt,
    compose_generation_prompt,
)

log = logging.getLogger(__name__)

STOP_MAX_ITERATIONS = "max_iterations"
STOP_STAGNATION = "stagnation"

UNTRIED, PASSING, FAILING, UNREPAIRED = "untried", "passing", "failing", "unrepaired"


@dataclass(frozen=True)
class SessionConfig:
    n_gen: int = 10
    n_fix: int = 3
    m: int = 3
    d_max: int = 3
    k_paths: int = 32
    temperature: float = 0.2
    framework: str = DEFAULT_FRAMEWORK
    budget: int = DEFAULT_BUDGET
    reason_max: int = DEFAULT_REASON_MAX

    def __post_init__(self):
        for name in ("n_gen", "n_fix", "m", "d_max", "k_paths", "budget", "reason_max"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.m > self.n_gen:
            raise ValueError("stagnation window m cannot exceed n_gen")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must lie in [0, 1]")


@dataclass
class TestCase:
    __test__ = False  # not a pytest class

    name: str
    source: str
    status: str = UNTRIED

    def to_dict(self):
        return {"name": self.name, "source": self.source, "status": self.status}


@dataclass
class IterationRecord:
    index: int
    generated: list[TestCase]
    fix_attempts_used: int
    outcome: RunOutcome
    improved: bool
    coverage: CoverageSnapshot
    error: Optional[str] = None

    def to_dict(self):
        return {
            "index": self.index,
            "generated": [t.name for t in self.generated],
            "fix_attempts_used": self.fix_attempts_used,
            "outcome": self.outcome.to_wire(),
            "retained_coverage": self.coverage.to_dict(),
            "improved": self.improved,
            "error": self.error,
        }


@dataclass
class SessionReport:
    focal: MethodRef
    iterations: list[IterationRecord]
    stop_reason: str
    final_suite: list[TestCase]
    final_coverage: CoverageSnapshot

    def to_dict(self):
        return {
            "focal": str(self.focal),
            "stop_reason": self.stop_reason,
            "iterations": [r.to_dict() for r in self.iterations],
            "final_suite": [t.to_dict() for t in self.final_suite],
            "final_coverage": self.final_coverage.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# -- test code handling ---------------------------------------------------------

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.S)
_TEST_METHOD = re.compile(
    r"@(?:org\.junit\.(?:jupiter\.api\.)?)?Test\b(?:\s*\([^)]*\))?"
    r"(?:\s*@\w+(?:\([^)]*\))?)*"
    r"\s*(?:(?:public|protected|private|static|final)\s+)*void\s+(\w+)\s*\("
)


def make_scaffold(focal_class: str, framework: str = DEFAULT_FRAMEWORK) -> TestCase:
    """Placeholder test container so the first real batch has a harness to join."""
    outer = simple_name(focal_class).split("$", 1)[0]
    container = f"{outer}CatTest"
    pkg = package_of(focal_class)
    if "5" in framework:
        imports = "import org.junit.jupiter.api.Test;\nimport static org.junit.jupiter.api.Assertions.*;\n"
    else:
        imports = "import org.junit.Test;\nimport static org.junit.Assert.*;\n"
    header = f"package {pkg};\n\n" if pkg else ""
    source = (
        f"{header}{imports}\n"
        f"public class {container} {{\n"
        "    @Test\n"
        "    public void placeholder() {\n"
        "        assertTrue(true);\n"
        "    }\n"
        "}\n"
    )
    return TestCase(f"{container}#placeholder", source, PASSING)


def extract_test_code(response: str) -> list[TestCase]:
    """One :class:`TestCase` per ``@Test`` method found in fenced code blocks.

    Methods from the same block share that block as their source.
    """
    tests = []
    for block in _FENCE.findall(response or ""):
        for name in _TEST_METHOD.findall(block):
            tests.append(TestCase(name, block.strip() + "\n"))
    if not tests:
        raise NoCodeFound("no fenced block with a test method in model response")
    return tests


def _rename(test: TestCase, new_name: str) -> TestCase:
    pattern = re.compile(rf"(\bvoid\s+){re.escape(test.name)}(\s*\()")
    return TestCase(new_name, pattern.sub(rf"\g<1>{new_name}\g<2>", test.source), test.status)


def uniquify(tests, taken: set[str]) -> list[TestCase]:
    """Rename tests whose names collide with ``taken`` (updated in place)."""
    out = []
    for t in tests:
        if t.name in taken:
            k = 2
            while f"{t.name}_v{k}" in taken:
                k += 1
            t = _rename(t, f"{t.name}_v{k}")
        taken.add(t.name)
        out.append(t)
    return out


# -- fixing -----------------------------------------------------------------------

@dataclass
class FixResult:
    repaired: list[TestCase]
    unrepaired: list[TestCase]
    rounds: int
    last_outcome: Optional[RunOutcome] = None
    error: Optional[str] = None


class SessionLog:
    """Append-only JSON-lines event log; a no-op when no path is given."""

    def __init__(self, path=None):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8") if path else None
        self.events: list[dict] = []

    def write(self, event: str, **data):
        record = {"event": event, **data}
        self.events.append(record)
        if self._fh:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


def _ask(model, prompt, temperature, session_log, phase):
    session_log.write("prompt", phase=phase, system=prompt.system, user=prompt.user)
    try:
        text = model.complete(prompt.system, prompt.user, temperature)
    except BackendError as exc:
        session_log.write("model_error", phase=phase, error=str(exc))
        raise
    session_log.write("response", phase=phase, text=text)
    return text


def _run(runner, suite, candidates, focal_class, session_log, phase):
    try:
        outcome = runner.run(list(suite), list(candidates), focal_class)
    except BackendError as exc:
        session_log.write("runner_error", phase=phase, error=str(exc))
        raise
    session_log.write("run", phase=phase, outcome=outcome.to_wire())
    return outcome


def fix_loop(
    failures,
    bundle: ContextBundle,
    model,
    runner,
    n_fix: int = 3,
    suite=(),
    temperature: float = 0.2,
    session_log: Optional[SessionLog] = None,
    digests=None,
    reason_max: int = DEFAULT_REASON_MAX,
) -> FixResult:
    """Repair failing tests for up to ``n_fix`` rounds.

    ``digests`` maps test name to the latest :class:`FailureDigest`; tests
    without one get a generic digest. ``suite`` is the passing suite the
    repaired tests are run against.
    """
    session_log = session_log or SessionLog()
    digests = dict(digests or {})
    pending = {t.name: t for t in failures}
    suite = list(suite)
    repaired: list[TestCase] = []
    rounds = 0
    last = None
    while pending and rounds < n_fix:
        rounds += 1
        batch = []
        for name, t in pending.items():
            d = digests.get(name)
            batch.append(
                FailureDigest.make(
                    name,
                    d.error_line if d else None,
                    d.reason if d else "test failed",
                    t.source,
                    reason_max,
                )
            )
        try:
            text = _ask(model, compose_fixing_prompt(batch, bundle), temperature, session_log, "fix")
            try:
                returned = {t.name: t for t in extract_test_code(text)}
            except NoCodeFound:
                returned = {}
            candidates = [
                TestCase(name, returned[name].source if name in returned else t.source)
                for name, t in pending.items()
            ]
            last = _run(runner, suite + repaired, candidates, bundle.focal_class, session_log, "fix")
        except BackendError as exc:
            return FixResult(repaired, _mark(pending.values(), UNREPAIRED), rounds, last, str(exc))
        for t in candidates:
            if last.per_test.get(t.name) == "pass":
                t.status = PASSING
                repaired.append(t)
                del pending[t.name]
            else:
                pending[t.name] = t
        for d in last.failures:
            digests[d.test_name] = d
    return FixResult(repaired, _mark(pending.values(), UNREPAIRED), rounds, last)


def _mark(tests, status):
    out = []
    for t in tests:
        t.status = status
        out.append(t)
    return out


# -- stopping and the session loop ------------------------------------------------

def should_stop(history, config: SessionConfig) -> Optional[str]:
    if len(history) >= config.n_gen:
        return STOP_MAX_ITERATIONS
    if len(history) >= config.m and not any(r.improved for r in history[-config.m:]):
        return STOP_STAGNATION
    return None


def run_session(
    config: SessionConfig,
    bundle: ContextBundle,
    focal: MethodRef,
    model,
    runner,
    session_log: Optional[SessionLog] = None,
) -> SessionReport:
    """Generate, run, fix and retain tests until a stopping rule fires.

    The static analysis behind ``bundle`` is computed once by the caller. The
    cumulative suite starts with the scaffold placeholder; its baseline run
    sets the coverage that the first iteration must improve on.
    """
    session_log = session_log or SessionLog()
    focal_class = bundle.focal_class
    scaffold = make_scaffold(focal_class, config.framework)
    suite = [scaffold]
    taken = {scaffold.name}
    session_log.write("session", focal=str(focal), config=asdict(config))

    try:
        baseline = _run(runner, suite, [], focal_class, session_log, "baseline").coverage
    except BackendError:
        baseline = CoverageSnapshot()
    retained = baseline
    history: list[IterationRecord] = []
    prompt = compose_generation_prompt(bundle, focal, config.framework, config.budget)

    stop = None
    while stop is None:
        index = len(history) + 1
        generated: list[TestCase] = []
        fix_rounds = 0
        error = None
        outcome = RunOutcome(False, {}, (), retained)
        try:
            text = _ask(model, prompt, config.temperature, session_log, "generate")
            generated = uniquify(extract_test_code(text), taken)
            outcome = _run(runner, suite, generated, focal_class, session_log, "generate")
            passing = [t for t in generated if outcome.per_test.get(t.name) == "pass"]
            failing = [t for t in generated if outcome.per_test.get(t.name) != "pass"]
            for t in passing:
                t.status = PASSING
            for t in failing:
                t.status = FAILING
            current = outcome.coverage if outcome.compiled else retained
            if failing:
                fixed = fix_loop(
                    failing,
                    bundle,
                    model,
                    runner,
                    config.n_fix,
                    suite=suite + passing,
                    temperature=config.temperature,
                    session_log=session_log,
                    digests={d.test_name: d for d in outcome.failures},
                    reason_max=config.reason_max,
                )
                fix_rounds = fixed.rounds
                error = fixed.error
                passing += fixed.repaired
                if fixed.last_outcome is not None and fixed.last_outcome.compiled:
                    current = current.merged(fixed.last_outcome.coverage)
            suite += passing
            new_retained = retained.merged(current)
        except (BackendError, NoCodeFound) as exc:
            error = f"{type(exc).__name__}: {exc}"
            new_retained = retained

        improved = new_retained.improves_on(retained)
        retained = new_retained
        record = IterationRecord(index, generated, fix_rounds, outcome, improved, retained, error)
        history.append(record)
        session_log.write("iteration", record=record.to_dict())
        stop = should_stop(history, config)

    session_log.write("decision", stop_reason=stop, iterations=len(history))
    return SessionReport(focal, history, stop, suite, retained)


# -- replay ---------------------------------------------------------------------------

def backends_from_log(events) -> tuple[ScriptedModel, ScriptedRunner]:
    """Scripted backends that reproduce the responses recorded in a session log."""
    responses, outcomes = [], []
    for e in events:
        kind = e.get("event")
        if kind == "response":
            responses.append(e["text"])
        elif kind == "model_error":
            responses.append({"error": e["error"]})
        elif kind == "run":
            outcomes.append(e["outcome"])
        elif kind == "runner_error":
            outcomes.append({"error": e["error"]})
    return ScriptedModel(responses, synthesize=False), ScriptedRunner(outcomes)


def read_log(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
