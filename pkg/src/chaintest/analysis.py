"""One-shot static analysis for a focal method, run once before a session."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .callgraph import (
    CallGraph,
    MetadataMaps,
    build_call_graph,
    collect_metadata,
    collect_target_overloads,
    compute_entry_points,
)
from .depresolve import (
    DEFAULT_PATHS_CAP,
    DependencyClosure,
    InitializationSet,
    build_initialization_set,
    filter_paths,
    resolve_dependencies,
)
from .errors import NoSuchMethod
from .model import HierarchyIndex, MethodRef, ProgramFacts, build_hierarchy
from .paths import CallPath, extract_call_paths
from .promptkit import ContextBundle, build_context_bundle

ROOTS_ALL_PUBLIC = "all-public"
ROOTS_FOCAL_CLASS = "focal-class-only"
ROOT_SCOPES = (ROOTS_ALL_PUBLIC, ROOTS_FOCAL_CLASS)


@dataclass(frozen=True)
class Analysis:
    focal: MethodRef
    index: HierarchyIndex
    maps: MetadataMaps
    roots: frozenset[MethodRef]
    targets: frozenset[MethodRef]
    graph: CallGraph
    raw_paths: tuple[CallPath, ...]
    filtered: tuple[CallPath, ...]
    closure: DependencyClosure
    init: InitializationSet
    bundle: ContextBundle
    missing_sources: tuple[str, ...]

    def diagnostics(self) -> dict:
        return {
            "focal": str(self.focal),
            "skipped_call_sites": [s.to_dict() for s in self.graph.skipped],
            "missing_sources": list(self.missing_sources),
            "counts": {
                "roots": len(self.roots),
                "targets": len(self.targets),
                "edges": len(self.graph.edges),
                "raw_paths": len(self.raw_paths),
                "filtered_paths": len(self.filtered),
                "closure_classes": len(self.closure.classes),
                "expansion_rounds": self.closure.rounds,
            },
        }

    def paths_document(self) -> dict:
        return {
            "focal": str(self.focal),
            "targets": sorted(str(t) for t in self.targets),
            "raw_paths": [[str(m) for m in p] for p in self.raw_paths],
            "filtered_paths": [[str(m) for m in p] for p in self.filtered],
        }


def split_focal_method(spec: str) -> tuple[str, Optional[tuple[str, ...]]]:
    """``name`` or ``name(p1,p2)`` -> (name, params or None)."""
    if "(" not in spec:
        return spec, None
    name, _, rest = spec.partition("(")
    inner = rest.rstrip(")")
    return name, tuple(p.strip() for p in inner.split(",") if p.strip())


def analyze(
    facts: ProgramFacts,
    focal_class: str,
    focal_method: str,
    d_max: int = 3,
    k_paths: int = DEFAULT_PATHS_CAP,
    roots_scope: str = ROOTS_ALL_PUBLIC,
    repo_root=None,
) -> Analysis:
    """Run call-graph construction, path extraction and dependency resolution.

    ``focal_method`` is a bare name (all overloads become targets, the first
    in canonical order is the session focal) or ``name(params)`` to pick the
    session focal among the overloads.
    """
    if roots_scope not in ROOT_SCOPES:
        raise ValueError(f"unknown roots scope {roots_scope!r}")
    name, params = split_focal_method(focal_method)
    index = build_hierarchy(facts)
    maps = collect_metadata(facts)
    targets = collect_target_overloads(facts, focal_class, name)
    if params is None:
        focal = min(targets, key=str)
    else:
        focal = MethodRef(focal_class, name, params)
        if focal not in targets:
            raise NoSuchMethod(str(focal))

    roots = compute_entry_points(facts, maps)
    if roots_scope == ROOTS_FOCAL_CLASS:
        roots = frozenset(r for r in roots if r.owner == focal_class)

    graph = build_call_graph(facts, index, roots)
    raw = extract_call_paths(graph, roots, targets, d_max)
    filtered = filter_paths(raw, maps, k_paths)
    closure = resolve_dependencies(filtered, focal_class, maps)
    init = build_initialization_set(closure, maps)
    bundle, missing = build_context_bundle(
        filtered, init, closure, maps, facts, focal_class, d_max, repo_root
    )
    return Analysis(
        focal=focal,
        index=index,
        maps=maps,
        roots=roots,
        targets=targets,
        graph=graph,
        raw_paths=tuple(raw),
        filtered=tuple(filtered),
        closure=closure,
        init=init,
        bundle=bundle,
        missing_sources=tuple(missing),
    )
