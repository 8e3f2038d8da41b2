import re

import pytest

from chaintest.callgraph import collect_metadata
from chaintest.depresolve import DependencyClosure, InitializationSet
from chaintest.errors import TokenBudgetExceeded
from chaintest.model import ClassInfo, MethodRef, ProgramFacts, Visibility
from chaintest.promptkit import (
    NO_CHAINS,
    NO_SOURCES,
    FailureDigest,
    build_context_bundle,
    compose_fixing_prompt,
    compose_generation_prompt,
    fill,
    render_call_chain_context,
    render_failures,
    render_initialization_context,
    select_related_sources,
)

from conftest import DETECTOR, GOLDEN, IA, XML

ANCHORS = (
    "Initialization-first testing",
    "Call-Chain Context (Test Design Driver)",
)
FIX_ANCHOR = "You should NOT modify the production code."
UNFILLED = re.compile(r"\{\{\s*[A-Z_]+\s*\}\}")


def test_call_chain_golden(jackson_analysis):
    assert jackson_analysis.bundle.call_chain_text == (GOLDEN / "callchain.txt").read_text()


def test_init_golden(jackson_analysis):
    assert jackson_analysis.bundle.init_text == (GOLDEN / "init.txt").read_text()


def test_init_block_details(jackson_analysis):
    text = jackson_analysis.bundle.init_text
    assert f"{IA} (public abstract):\n  - no public constructors found\n" in text
    assert text.count("  - XmlFactory(") == 5
    assert text.count("  - DataFormatDetector(") == 2
    assert text.count("  - JsonFactory(") == 2


def test_empty_chains_sentinel():
    assert render_call_chain_context([]) == f"Call-chain context:\n\n{NO_CHAINS}\n"


def test_empty_init_renders_nothing():
    maps = collect_metadata(ProgramFacts(()))
    assert render_initialization_context(InitializationSet({}, {}), maps) == ""


def test_chain_lines_use_step_arrows():
    a, b = MethodRef("p.A", "x"), MethodRef("p.B", "y", ("int",))
    assert render_call_chain_context([(a, b)]).splitlines()[2:] == ["Context 1:", "  p.A#x()", "    -> p.B#y(int)"]


# -- related sources -----------------------------------------------------------

def _facts(*names):
    return ProgramFacts(tuple(ClassInfo(n, Visibility.PUBLIC, source_path=f"{n}.java") for n in names))


def test_related_sources_ranked_by_frequency_then_name(tmp_path):
    facts = _facts("F", "A", "B", "C")
    for n in "ABC":
        (tmp_path / f"{n}.java").write_text(f"class {n} {{}}")
    m = lambda owner: MethodRef(owner, "m")
    paths = [(m("C"), m("F")), (m("B"), m("C"), m("F")), (m("A"), m("B"), m("F"))]
    sources, missing = select_related_sources(paths, "F", 2, tmp_path, facts)
    assert [n for n, _ in sources] == ["B", "C"]
    assert missing == []
    sources, _ = select_related_sources(paths, "F", 3, tmp_path, facts)
    assert [n for n, _ in sources] == ["B", "C", "A"]


def test_missing_sources_are_reported(tmp_path):
    facts = _facts("F", "A", "B")
    (tmp_path / "B.java").write_text("class B {}")
    paths = [(MethodRef("A", "m"), MethodRef("A", "n"), MethodRef("F", "m")), (MethodRef("B", "m"), MethodRef("F", "m"))]
    sources, missing = select_related_sources(paths, "F", 3, tmp_path, facts)
    assert [n for n, _ in sources] == ["B"]
    assert missing == ["A"]


def test_fixture_bundle_sources(jackson_analysis):
    assert [n for n, _ in jackson_analysis.bundle.related_sources] == [DETECTOR]
    assert "class XmlFactory" in jackson_analysis.bundle.focal_source
    assert jackson_analysis.missing_sources == ()


def test_bundle_without_repo_root(jackson_analysis):
    a = jackson_analysis
    bundle, missing = build_context_bundle(a.filtered, a.init, a.closure, a.maps, a.index.facts, XML, 3)
    assert bundle.related_sources == ()
    assert XML in missing and DETECTOR in missing


# -- generation prompt -----------------------------------------------------------

def test_generation_prompt_anchors(jackson_analysis):
    p = compose_generation_prompt(jackson_analysis.bundle, jackson_analysis.focal)
    text = p.system + p.user
    for anchor in ANCHORS:
        assert anchor in text
    assert not UNFILLED.search(text)
    assert jackson_analysis.bundle.call_chain_text.rstrip() in p.user
    assert "JUnit 4" in p.user and str(jackson_analysis.focal) in p.user


def test_generation_prompt_empty_sections(jackson_analysis):
    from dataclasses import replace

    bundle = replace(jackson_analysis.bundle, related_sources=(), init_text="", focal_source="")
    user = compose_generation_prompt(bundle, jackson_analysis.focal).user
    assert NO_SOURCES in user
    assert not UNFILLED.search(user)


def test_fill_does_not_rescan_inserted_text():
    assert fill("a {{X}} b", {"X": "{{Y}}"}) == "a {{Y}} b"
    with pytest.raises(KeyError):
        fill("{{MISSING}}", {})


def test_budget_drops_sources_first(jackson_analysis):
    bundle = jackson_analysis.bundle
    full = compose_generation_prompt(bundle, jackson_analysis.focal).user
    src_len = len(bundle.related_sources[0][1])
    small = compose_generation_prompt(bundle, jackson_analysis.focal, budget=len(full) - 1).user
    assert len(small) <= len(full) - src_len
    assert NO_SOURCES in small
    assert bundle.init_text.rstrip() in small


def test_budget_then_seed_init_then_paths(jackson_analysis):
    bundle = jackson_analysis.bundle
    focal = jackson_analysis.focal
    no_src = compose_generation_prompt(bundle, focal, budget=len(compose_generation_prompt(bundle, focal).user) - 1).user
    step2 = compose_generation_prompt(bundle, focal, budget=len(no_src) - 1).user
    assert "JsonFactory (public)" not in step2  # only the seed classes remain
    assert "\nContext 2:\n" in step2
    step3 = compose_generation_prompt(bundle, focal, budget=len(step2) - 1).user
    assert "\nContext 2:\n" not in step3 and "\nContext 1:\n" in step3


def test_budget_exhausted(jackson_analysis):
    with pytest.raises(TokenBudgetExceeded) as err:
        compose_generation_prompt(jackson_analysis.bundle, jackson_analysis.focal, budget=100)
    assert err.value.budget == 100


# -- fixing prompt ---------------------------------------------------------------------

def test_reason_truncated():
    d = FailureDigest.make("t", 3, "x" * 2000)
    assert len(d.reason) == 500 and d.reason.endswith("...")
    assert FailureDigest.make("t", 0, "a\n  b").reason == "a b"
    assert FailureDigest.make("t", 0, "").error_line is None


def test_fixing_prompt(jackson_analysis):
    failures = [
        FailureDigest.make("testOne", 12, "expected:<true> but was:<false>", "void testOne() {}"),
        FailureDigest.make("testTwo", None, "cannot find symbol"),
    ]
    p = compose_fixing_prompt(failures, jackson_analysis.bundle)
    assert FIX_ANCHOR in p.system
    assert "### Failing test 1: testOne" in p.user and "### Failing test 2: testTwo" in p.user
    assert "Error line: unknown" in p.user
    assert "class DataFormatDetector" in p.user
    assert not UNFILLED.search(p.system + p.user)


def test_fixing_prompt_needs_failures(jackson_analysis):
    with pytest.raises(ValueError):
        compose_fixing_prompt([], jackson_analysis.bundle)


def test_render_failures_block_layout():
    text = render_failures([FailureDigest.make("t", 4, "boom")])
    assert text == "### Failing test 1: t\nError line: 4\nReason: boom"


def test_closure_seed_text_is_subset(jackson_analysis):
    seed = jackson_analysis.bundle.seed_init_text
    assert seed and "DataFormatDetector" in seed and "JsonFactory (public)" not in seed
    assert isinstance(jackson_analysis.closure, DependencyClosure)
