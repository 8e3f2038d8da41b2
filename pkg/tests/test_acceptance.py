"""Acceptance criteria; each test records one [PASS]/[FAIL] line in the terminal summary."""

import json
import random
import time

from chaintest import analyze
from chaintest.backends import ScriptedModel, ScriptedRunner
from chaintest.callgraph import CallGraph, build_call_graph, collect_metadata, collect_target_overloads, compute_entry_points
from chaintest.cli import main
from chaintest.depresolve import dependency_type, resolve_dependencies
from chaintest.model import build_hierarchy
from chaintest.orchestrator import (
    STOP_MAX_ITERATIONS,
    STOP_STAGNATION,
    SessionConfig,
    SessionLog,
    backends_from_log,
    read_log,
    run_session,
)
from chaintest.paths import backward_reachable, extract_call_paths
from chaintest.promptkit import FailureDigest, compose_fixing_prompt, compose_generation_prompt

from conftest import ACCEPTANCE_RESULTS, GOLDEN, IA, JACKSON, JSONF, DETECTOR, XML
from oracles import (
    brute_cha,
    brute_ctor_closure,
    brute_predecessors,
    brute_simple_paths,
    random_ctor_facts,
    random_facts,
    random_graph,
)


def record(name, ok, detail):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def test_path_enumeration_oracle():
    start = time.perf_counter()
    mismatches = 0
    for seed in range(1000):
        _, edges, roots, targets = random_graph(random.Random(seed), max_nodes=15, max_out=4)
        d_max = seed % 5
        got = extract_call_paths(CallGraph(frozenset(edges)), roots, targets, d_max)
        if set(got) != brute_simple_paths(edges, roots, targets, d_max) or len(got) != len(set(got)):
            mismatches += 1
    elapsed = time.perf_counter() - start
    record("path enumeration oracle", mismatches == 0 and elapsed < 10,
           f"1000 graphs, {mismatches} mismatches, {elapsed:.2f}s")


def test_reachability_oracle():
    mismatches = 0
    for seed in range(1000):
        nodes, edges, _, targets = random_graph(random.Random(seed), max_nodes=15, max_out=4)
        if backward_reachable(CallGraph(frozenset(edges)), targets) != brute_predecessors(nodes, edges, targets):
            mismatches += 1
    record("reachability oracle", mismatches == 0, f"1000 graphs, {mismatches} mismatches")


def test_cha_oracle():
    mismatches = edges = 0
    for seed in range(500):
        facts = random_facts(random.Random(10_000 + seed), max_classes=10)
        roots = compute_entry_points(facts, collect_metadata(facts))
        g = build_call_graph(facts, build_hierarchy(facts), roots)
        edges += len(g.edges)
        if set(g.edges) != brute_cha(facts, roots):
            mismatches += 1
    record("CHA oracle", mismatches == 0, f"500 hierarchies, {edges} edges total, {mismatches} mismatches")


def test_closure_property():
    problems = 0
    for seed in range(500):
        rng = random.Random(20_000 + seed)
        facts = random_ctor_facts(rng)
        maps = collect_metadata(facts)
        focal = rng.choice(facts.classes).name
        closure = resolve_dependencies([], focal, maps)
        public = {c.name: [k.params for k in c.constructors if k.visibility.value == "public"] for c in facts}
        closed = all(
            dep in closure.classes
            for cls in closure.classes
            for k in maps.public_ctors(cls)
            for p in k.params
            if (dep := dependency_type(p, maps)) is not None
        )
        if not closed or closure.classes != brute_ctor_closure({focal}, set(public), public) or closure.rounds > len(facts):
            problems += 1
    record("closure property", problems == 0, f"500 constructor graphs, {problems} failures")


def test_paper_fixture_reproduction(jackson_analysis):
    bundle = jackson_analysis.bundle
    chain_ok = bundle.call_chain_text == (GOLDEN / "callchain.txt").read_text()
    init_ok = bundle.init_text == (GOLDEN / "init.txt").read_text()
    text = bundle.init_text
    blocks_ok = (
        [str(m) for p in jackson_analysis.filtered for m in p][-2:] == [
            f"{DETECTOR}#findFormat(byte[])", str(jackson_analysis.focal)]
        and len(jackson_analysis.filtered) == 2
        and text.count("  - XmlFactory(") == 5
        and f"{IA} (public abstract):\n  - no public constructors found\n  - Known implementations:" in text
        and text.split(f"{IA} (")[1].split("\n\n")[0].count("      * ") == 2
        and text.count("  - DataFormatDetector(") == 2
        and text.count("  - JsonFactory(") == 2
        and JSONF in jackson_analysis.closure.classes
    )
    record("paper fixture reproduction", chain_ok and init_ok and blocks_ok,
           f"callchain golden {chain_ok}, init golden {init_ok}, block contents {blocks_ok}")


def test_overload_handling(jackson_facts):
    targets = collect_target_overloads(jackson_facts, XML, "configure")
    analysis = analyze(jackson_facts, XML, "configure")
    endpoints = {p[-1] for p in analysis.filtered}
    ok = len(targets) == 2 and len({t.params for t in targets}) == 2 and endpoints == set(targets)
    record("overload handling", ok, f"{len(targets)} targets, {len(endpoints)} distinct path endpoints")


class CountingModel:
    """Wraps the scripted model and counts fixing calls per generation call."""

    def __init__(self):
        self.inner = ScriptedModel()
        self.per_iteration = []

    def complete(self, system, user, temperature):
        if "### Failing test" in user:
            self.per_iteration[-1] += 1
        else:
            self.per_iteration.append(0)
        return self.inner.complete(system, user, temperature)


def _cov(n):
    return {"line_covered": n, "line_total": 100, "branch_covered": 0, "branch_total": 10}


def test_stopping_rules(jackson_analysis):
    a = jackson_analysis
    flat = run_session(SessionConfig(), a.bundle, a.focal, ScriptedModel(), ScriptedRunner([{"coverage": _cov(3)}]))
    rising = run_session(SessionConfig(), a.bundle, a.focal, ScriptedModel(),
                         ScriptedRunner([{"coverage": _cov(i)} for i in range(11)]))
    model = CountingModel()
    run_session(SessionConfig(), a.bundle, a.focal, model, ScriptedRunner([{"results": [], "coverage": _cov(1)}]))
    ok = (
        flat.stop_reason == STOP_STAGNATION and len(flat.iterations) == 3
        and rising.stop_reason == STOP_MAX_ITERATIONS and len(rising.iterations) == 10
        and max(model.per_iteration) <= 3
    )
    record("stopping rules", ok,
           f"flat: {flat.stop_reason}/{len(flat.iterations)}, rising: {rising.stop_reason}/{len(rising.iterations)}, "
           f"max fix calls per iteration {max(model.per_iteration)}")


def test_monotonicity(jackson_analysis):
    a = jackson_analysis
    violations = sessions = 0
    for seed in range(50):
        rng = random.Random(seed)
        outcomes = []
        for _ in range(12):
            kind = rng.random()
            if kind < 0.1:
                outcomes.append({"error": "flaky"})
            elif kind < 0.2:
                outcomes.append({"compiled": False, "coverage": _cov(0)})
            elif kind < 0.35:
                outcomes.append({"results": [], "coverage": _cov(rng.randint(0, 100))})
            else:
                line = rng.randint(0, 100)
                outcomes.append({"coverage": {"line_covered": line, "line_total": 100,
                                              "branch_covered": rng.randint(0, 10), "branch_total": 10}})
        report = run_session(SessionConfig(), a.bundle, a.focal, ScriptedModel(), ScriptedRunner(outcomes))
        sessions += 1
        for prev, cur in zip(report.iterations, report.iterations[1:]):
            if (cur.coverage.line_covered < prev.coverage.line_covered
                    or cur.coverage.branch_covered < prev.coverage.branch_covered):
                violations += 1
    record("monotonicity", violations == 0, f"{sessions} randomized scripted sessions, {violations} decreases")


def test_determinism(tmp_path):
    args = ["--facts", str(JACKSON / "facts.json"), "--focal-class", XML, "--focal-method", "hasFormat"]
    assert main(["context", *args, "--out", str(tmp_path / "c1")]) == 0
    assert main(["context", *args, "--out", str(tmp_path / "c2")]) == 0
    names = ("callchain.txt", "init.txt", "paths.json", "diagnostics.json")
    context_same = all((tmp_path / "c1" / n).read_bytes() == (tmp_path / "c2" / n).read_bytes() for n in names)

    script = tmp_path / "mock.json"
    script.write_text(json.dumps({"runner": {"outcomes": [
        {"coverage": _cov(0)}, {"coverage": _cov(5)}, {"results": [], "coverage": _cov(5)},
        {"error": "flaky"}, {"coverage": _cov(9)}]}}))
    assert main(["run", *args, "--mock-script", str(script), "--out", str(tmp_path / "r1")]) == 0
    assert main(["run", *args, "--mock-script", str(tmp_path / "r1" / "session.jsonl"),
                 "--out", str(tmp_path / "r2")]) == 0
    replay_same = (tmp_path / "r1" / "report.json").read_bytes() == (tmp_path / "r2" / "report.json").read_bytes()
    record("determinism", context_same and replay_same,
           f"context outputs identical {context_same}, replayed report identical {replay_same}")


def test_prompt_fidelity(jackson_analysis):
    import re

    a = jackson_analysis
    gen = compose_generation_prompt(a.bundle, a.focal)
    fix = compose_fixing_prompt([FailureDigest.make("t1", 5, "AssertionError")], a.bundle)
    text = gen.system + gen.user + fix.system + fix.user
    anchors = ("Initialization-first testing", "Call-Chain Context (Test Design Driver)",
               "You should NOT modify the production code.")
    missing = [x for x in anchors if x not in text]
    unfilled = re.findall(r"\{\{\s*[A-Z_]+\s*\}\}", text)
    record("prompt fidelity", not missing and not unfilled,
           f"missing anchors {missing}, unsubstituted placeholders {unfilled}")


def test_replay_through_log_helpers(jackson_analysis, tmp_path):
    # supporting check for the determinism criterion at the library level
    a = jackson_analysis
    log = SessionLog(tmp_path / "s.jsonl")
    first = run_session(SessionConfig(), a.bundle, a.focal, ScriptedModel(),
                        ScriptedRunner([{"coverage": _cov(i)} for i in (0, 2, 2, 7)]), log)
    log.close()
    model, runner = backends_from_log(read_log(tmp_path / "s.jsonl"))
    assert run_session(SessionConfig(), a.bundle, a.focal, model, runner).to_json() == first.to_json()
