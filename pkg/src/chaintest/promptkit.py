"""Context rendering and prompt composition for generation and fixing."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .callgraph import MetadataMaps
from .depresolve import DependencyClosure, InitializationSet
from .errors import TokenBudgetExceeded
from .model import MethodRef, ProgramFacts, simple_name
from .paths import CallPath

DEFAULT_BUDGET = 60_000
DEFAULT_REASON_MAX = 500
DEFAULT_FRAMEWORK = "JUnit 4"

NO_CHAINS = "  No call chains found."
NO_INIT = "No initialization information available."
NO_SOURCES = "No related source files available."
NO_FOCAL_SOURCE = "Focal class source unavailable."

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Z_]+)\s*\}\}")


def load_template(name: str) -> str:
    return resources.files("chaintest").joinpath("templates", f"{name}.txt").read_text("utf-8")


def fill(template: str, values: dict) -> str:
    """Substitute ``{{NAME}}`` placeholders in a single pass.

    Substituted text is never rescanned, so braces inside inserted source
    code are left alone. An unbound placeholder raises ``KeyError``.
    """
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


# -- renderers ---------------------------------------------------------------

def render_call_chain_context(filtered) -> str:
    lines = ["Call-chain context:"]
    if not filtered:
        lines += ["", NO_CHAINS]
    for i, path in enumerate(filtered, 1):
        lines += ["", f"Context {i}:", f"  {path[0]}"]
        lines += [f"    -> {m}" for m in path[1:]]
    return "\n".join(lines) + "\n"


def _modifiers(cls: str, maps: MetadataMaps) -> str:
    mods = [maps.class_vis[cls].value]
    if maps.class_abstract.get(cls):
        mods.append("abstract")
    return " ".join(mods)


def _impl_names(names) -> list[str]:
    return [simple_name(n) for n in sorted(names, key=lambda n: (simple_name(n), n))]


def render_initialization_context(init: InitializationSet, maps: MetadataMaps) -> str:
    if not init.ctors:
        return ""
    lines = ["Dependency Context:"]
    for cls in sorted(init.ctors):
        lines += ["", f"{cls} ({_modifiers(cls, maps)}):"]
        ctors = init.ctors[cls]
        if not ctors:
            lines.append("  - no public constructors found")
        for ctor in ctors:
            lines.append(f"  - {simple_name(cls)}({', '.join(ctor.params)})")
        impls = init.known_impls.get(cls) or maps.impls.get(cls)
        if impls:
            lines.append("  - Known implementations:")
            lines += [f"      * {n}" for n in _impl_names(impls)]
    return "\n".join(lines) + "\n"


def select_related_sources(filtered, focal_class: str, d_max: int, repo_root, facts: ProgramFacts):
    """Top-``d_max`` most frequent declaring classes on the filtered paths.

    Returns ``(sources, missing)`` where ``sources`` is a list of
    ``(class name, file contents)`` and ``missing`` names classes skipped
    because their source could not be read.
    """
    counts = Counter(m.owner for path in filtered for m in path if m.owner != focal_class)
    ranked = sorted(counts, key=lambda c: (-counts[c], c))
    sources, missing = [], []
    for cls in ranked:
        if len(sources) >= d_max:
            break
        text = read_source(cls, repo_root, facts)
        if text is None:
            missing.append(cls)
        else:
            sources.append((cls, text))
    return sources, missing


def read_source(cls: str, repo_root, facts: ProgramFacts) -> Optional[str]:
    if cls not in facts or not facts[cls].source_path or repo_root is None:
        return None
    try:
        return (Path(repo_root) / facts[cls].source_path).read_text("utf-8")
    except OSError:
        return None


def render_sources(sources) -> str:
    if not sources:
        return NO_SOURCES
    blocks = [f"#### {name}\n```java\n{text.rstrip()}\n```" for name, text in sources]
    return "\n\n".join(blocks)


# -- bundles and prompts -----------------------------------------------------

@dataclass(frozen=True)
class ContextBundle:
    focal_class: str
    call_chain_text: str
    init_text: str
    related_sources: tuple[tuple[str, str], ...] = ()
    focal_source: str = ""
    # structured leftovers used only when shrinking to fit the budget
    paths: tuple[CallPath, ...] = field(default=(), repr=False)
    seed_init_text: Optional[str] = field(default=None, repr=False)


def build_context_bundle(
    filtered,
    init: InitializationSet,
    closure: DependencyClosure,
    maps: MetadataMaps,
    facts: ProgramFacts,
    focal_class: str,
    d_max: int,
    repo_root=None,
):
    """Assemble a :class:`ContextBundle`; also returns the classes whose source was missing."""
    sources, missing = select_related_sources(filtered, focal_class, d_max, repo_root, facts)
    seed_init = InitializationSet(
        {c: k for c, k in init.ctors.items() if c in closure.seed},
        {c: k for c, k in init.known_impls.items() if c in closure.seed},
    )
    focal_source = read_source(focal_class, repo_root, facts)
    if focal_source is None:
        missing.append(focal_class)
    bundle = ContextBundle(
        focal_class=focal_class,
        call_chain_text=render_call_chain_context(filtered),
        init_text=render_initialization_context(init, maps),
        related_sources=tuple(sources),
        focal_source=focal_source or "",
        paths=tuple(filtered),
        seed_init_text=render_initialization_context(seed_init, maps),
    )
    return bundle, missing


@dataclass(frozen=True)
class PromptPair:
    system: str
    user: str


def _generation_user(bundle: ContextBundle, focal: MethodRef, framework: str) -> str:
    focal_src = bundle.focal_source.rstrip()
    return fill(
        load_template("generation_user"),
        {
            "FRAMEWORK": framework,
            "FOCAL_METHOD": str(focal),
            "FOCAL_CLASS": bundle.focal_class,
            "CALL_CHAINS": bundle.call_chain_text.rstrip("\n"),
            "INITIALIZATION_INFO": bundle.init_text.rstrip("\n") or NO_INIT,
            "RELATED_SOURCE_FILES": render_sources(bundle.related_sources),
            "FOCAL_CLASS_SOURCE": f"```java\n{focal_src}\n```" if focal_src else NO_FOCAL_SOURCE,
        },
    )


def _shrink_candidates(bundle: ContextBundle):
    """Yield progressively smaller bundles in the fixed reduction order."""
    b = bundle
    sources = list(b.related_sources)
    while sources:
        sources.pop()
        b = replace(b, related_sources=tuple(sources))
        yield b
    if b.seed_init_text is not None and b.seed_init_text != b.init_text:
        b = replace(b, init_text=b.seed_init_text)
        yield b
    for k in range(len(b.paths) - 1, 0, -1):
        yield replace(b, call_chain_text=render_call_chain_context(b.paths[:k]))


def compose_generation_prompt(
    bundle: ContextBundle,
    focal: MethodRef,
    framework: str = DEFAULT_FRAMEWORK,
    budget: int = DEFAULT_BUDGET,
) -> PromptPair:
    system = load_template("generation_system")
    user = _generation_user(bundle, focal, framework)
    if len(user) > budget:
        for smaller in _shrink_candidates(bundle):
            user = _generation_user(smaller, focal, framework)
            if len(user) <= budget:
                break
        else:
            raise TokenBudgetExceeded(len(user), budget)
    return PromptPair(system, user)


@dataclass(frozen=True)
class FailureDigest:
    test_name: str
    error_line: Optional[int]
    reason: str
    source: str = ""

    @classmethod
    def make(cls, test_name, error_line, reason, source="", reason_max=DEFAULT_REASON_MAX):
        reason = " ".join((reason or "").split())
        if len(reason) > reason_max:
            reason = reason[: reason_max - 3] + "..."
        if error_line is not None and error_line < 1:
            error_line = None
        return cls(test_name, error_line, reason, source)


def render_failures(failures) -> str:
    blocks = []
    for i, f in enumerate(failures, 1):
        block = [
            f"### Failing test {i}: {f.test_name}",
            f"Error line: {f.error_line if f.error_line is not None else 'unknown'}",
            f"Reason: {f.reason or 'unknown'}",
        ]
        if f.source:
            block.append(f"```java\n{f.source.rstrip()}\n```")
        blocks.append("\n".join(block))
    return "\n\n".join(blocks)


def compose_fixing_prompt(failures, bundle: ContextBundle) -> PromptPair:
    if not failures:
        raise ValueError("compose_fixing_prompt needs at least one failure")
    user = fill(
        load_template("fixing_user"),
        {
            "FAILING_TESTS_AND_ERRORS": render_failures(failures),
            "RELATED_SOURCE_FILES": render_sources(bundle.related_sources),
        },
    )
    return PromptPair(load_template("fixing_system"), user)
