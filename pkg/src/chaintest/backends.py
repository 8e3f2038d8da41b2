"""Language-model and test-runner backends plus their scripted doubles.

Runner wire format (JSON on the child's standard streams)::

    request:  {"suite": [{"name", "source"}], "candidates": [{"name", "source"}],
               "focal_class": str}
    response: {"compiled": bool,
               "results": [{"name", "status": "pass"|"fail", "error_line", "reason"}],
               "coverage": {"line_covered", "line_total", "branch_covered", "branch_total"}}

A nonzero exit status is a backend error.
"""

from __future__ import annotations

import json
import logging
import os
import re
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .errors import ModelError, RunnerError
from .promptkit import FailureDigest

log = logging.getLogger(__name__)

API_KEY_ENV = "CHAINTEST_API_KEY"


@dataclass(frozen=True)
class CoverageSnapshot:
    line_covered: int = 0
    line_total: int = 0
    branch_covered: int = 0
    branch_total: int = 0

    def __post_init__(self):
        for v in (self.line_covered, self.line_total, self.branch_covered, self.branch_total):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"coverage counts must be non-negative integers, got {v!r}")
        if self.line_covered > self.line_total or self.branch_covered > self.branch_total:
            raise ValueError("covered count exceeds total")

    def merged(self, other: "CoverageSnapshot") -> "CoverageSnapshot":
        """Element-wise maximum; the retained suite never loses coverage."""
        return CoverageSnapshot(
            max(self.line_covered, other.line_covered),
            max(self.line_total, other.line_total),
            max(self.branch_covered, other.branch_covered),
            max(self.branch_total, other.branch_total),
        )

    def improves_on(self, previous: "CoverageSnapshot") -> bool:
        return (
            self.line_covered > previous.line_covered
            or self.branch_covered > previous.branch_covered
        )

    def to_dict(self):
        return {
            "line_covered": self.line_covered,
            "line_total": self.line_total,
            "branch_covered": self.branch_covered,
            "branch_total": self.branch_total,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d.get("line_covered", 0),
            d.get("line_total", 0),
            d.get("branch_covered", 0),
            d.get("branch_total", 0),
        )


@dataclass(frozen=True)
class RunOutcome:
    compiled: bool
    per_test: dict[str, str]
    failures: tuple[FailureDigest, ...]
    coverage: CoverageSnapshot

    @property
    def passed(self) -> list[str]:
        return [n for n, s in self.per_test.items() if s == "pass"]

    def to_wire(self) -> dict:
        by_name = {f.test_name: f for f in self.failures}
        results = []
        for name, status in self.per_test.items():
            f = by_name.get(name)
            results.append(
                {
                    "name": name,
                    "status": status,
                    "error_line": f.error_line if f else None,
                    "reason": f.reason if f else "",
                }
            )
        return {"compiled": self.compiled, "results": results, "coverage": self.coverage.to_dict()}


def outcome_from_wire(doc: dict, candidates, previous: Optional[CoverageSnapshot] = None) -> RunOutcome:
    """Build a :class:`RunOutcome` for ``candidates`` from a response document.

    Candidates with no reported result count as failing. Missing ``results``
    means every candidate passed; missing ``coverage`` repeats ``previous``.
    """
    if not isinstance(doc, dict):
        raise RunnerError("runner response is not an object")
    try:
        compiled = bool(doc.get("compiled", True))
        if "coverage" in doc:
            coverage = CoverageSnapshot.from_dict(doc["coverage"])
        else:
            coverage = previous or CoverageSnapshot()
        reported = {r["name"]: r for r in doc.get("results", [])} if "results" in doc else None
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise RunnerError(f"bad runner response: {exc}") from exc

    per_test, failures = {}, []
    for test in candidates:
        if reported is None:
            status = "pass" if compiled else "fail"
            r = {"reason": "compilation failed"} if not compiled else {}
        else:
            r = reported.get(test.name)
            status = r.get("status", "fail") if r else "fail"
            if r is None:
                r = {"reason": "compilation failed" if not compiled else "no result reported"}
        if status != "pass":
            status = "fail"
            line = r.get("error_line")
            line = line if isinstance(line, int) and not isinstance(line, bool) else None
            failures.append(FailureDigest.make(test.name, line, str(r.get("reason") or ""), test.source))
        per_test[test.name] = status
    return RunOutcome(compiled, per_test, tuple(failures), coverage)


def _tests_doc(tests):
    return [{"name": t.name, "source": t.source} for t in tests]


class LanguageModelClient(Protocol):
    def complete(self, system: str, user: str, temperature: float) -> str: ...


class TestRunner(Protocol):
    __test__ = False

    def run(self, suite, candidates, focal_class: str) -> RunOutcome: ...


class HttpChatClient:
    """Chat-completions style endpoint (``messages`` in, ``choices[0].message.content`` out)."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None, model: Optional[str] = None, timeout: float = 300):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.model = model
        self.timeout = timeout

    def complete(self, system, user, temperature):
        payload = {
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": temperature,
        }
        if self.model:
            payload["model"] = self.model
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(
            self.endpoint, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ModelError(f"model request failed: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ModelError(f"unexpected model response shape: {exc}") from exc


class SubprocessRunner:
    def __init__(self, command, cwd=None, timeout: Optional[float] = None):
        self.command = list(command)
        self.cwd = cwd
        self.timeout = timeout

    def run(self, suite, candidates, focal_class):
        request = {
            "suite": _tests_doc(suite),
            "candidates": _tests_doc(candidates),
            "focal_class": focal_class,
        }
        try:
            proc = subprocess.run(
                self.command,
                input=json.dumps(request),
                capture_output=True,
                text=True,
                cwd=self.cwd,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise RunnerError(f"runner failed to execute: {exc}") from exc
        if proc.returncode != 0:
            raise RunnerError(f"runner exited with status {proc.returncode}: {proc.stderr.strip()[:500]}")
        try:
            doc = json.loads(proc.stdout)
        except ValueError as exc:
            raise RunnerError(f"runner output is not JSON: {exc}") from exc
        return outcome_from_wire(doc, candidates)


# -- scripted doubles ----------------------------------------------------------

_FAILING_NAME = re.compile(r"^### Failing test \d+: (\S+)$", re.M)


def synthetic_test_class(names, container="GeneratedTest") -> str:
    methods = "\n".join(
        f"    @Test\n    public void {n}() {{\n        assertTrue(true);\n    }}\n" for n in names
    )
    return (
        "```java\nimport org.junit.Test;\nimport static org.junit.Assert.*;\n\n"
        f"public class {container} {{\n{methods}}}\n```\n"
    )


@dataclass
class ScriptedModel:
    """Replays a fixed list of completions.

    Entries are completion strings or ``{"error": message}``. Once the list is
    exhausted and ``synthesize`` is set, generation calls return one fresh
    test method (``generatedTest<k>``) and fixing calls echo back every failing
    test name so the runner script decides the repair.
    """

    responses: list = field(default_factory=list)
    synthesize: bool = True
    calls: int = 0
    generated: int = 0

    def complete(self, system, user, temperature):
        self.calls += 1
        if self.responses:
            entry = self.responses.pop(0)
            if isinstance(entry, dict):
                raise ModelError(entry.get("error", "scripted model error"))
            return entry
        if not self.synthesize:
            raise ModelError("scripted model has no responses left")
        names = _FAILING_NAME.findall(user)
        if names:
            return synthetic_test_class(names, "FixedTest")
        self.generated += 1
        return synthetic_test_class([f"generatedTest{self.generated}"])


@dataclass
class ScriptedRunner:
    """Consumes runner response documents in order; the last one repeats.

    An entry ``{"error": message}`` raises a backend error for that call.
    """

    outcomes: list = field(default_factory=list)
    calls: int = 0
    last_coverage: Optional[CoverageSnapshot] = None

    def run(self, suite, candidates, focal_class):
        self.calls += 1
        if not self.outcomes:
            raise RunnerError("scripted runner has no outcomes")
        entry = self.outcomes.pop(0) if len(self.outcomes) > 1 else self.outcomes[0]
        if "error" in entry:
            raise RunnerError(entry["error"])
        outcome = outcome_from_wire(entry, candidates, self.last_coverage)
        self.last_coverage = outcome.coverage
        return outcome
