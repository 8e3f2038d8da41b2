"""Metadata maps, entry points, target overloads and the CHA call graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import NoSuchMethod, UnknownClass
from .model import (
    ConstructorInfo,
    HierarchyIndex,
    MethodRef,
    ProgramFacts,
    Visibility,
    lookup_dispatch,
)

__all__ = [
    "MethodRef",
    "MetadataMaps",
    "CallGraph",
    "AnalysisSeed",
    "collect_metadata",
    "compute_entry_points",
    "collect_target_overloads",
    "build_call_graph",
    "is_accessible",
]


@dataclass(frozen=True)
class MetadataMaps:
    class_vis: dict[str, Visibility]
    method_vis: dict[MethodRef, Visibility]
    ctors: dict[str, tuple[ConstructorInfo, ...]]
    impls: dict[str, frozenset[str]]
    # needed by the path filter ("m.class is not abstract")
    class_abstract: dict[str, bool]
    method_abstract: dict[MethodRef, bool]

    def public_ctors(self, cls: str) -> tuple[ConstructorInfo, ...]:
        return tuple(k for k in self.ctors.get(cls, ()) if k.visibility is Visibility.PUBLIC)


@dataclass(frozen=True)
class SkippedSite:
    caller: MethodRef
    owner: str
    name: str
    params: tuple[str, ...]
    reason: str  # "external-owner" | "unresolved"

    def to_dict(self):
        return {
            "caller": str(self.caller),
            "site": f"{self.owner}#{self.name}({','.join(self.params)})",
            "reason": self.reason,
        }


@dataclass(frozen=True)
class CallGraph:
    edges: frozenset[tuple[MethodRef, MethodRef]]
    nodes: frozenset[MethodRef] = frozenset()
    skipped: tuple[SkippedSite, ...] = field(default=(), compare=False)

    def sorted_edges(self) -> list[tuple[MethodRef, MethodRef]]:
        return sorted(self.edges, key=lambda e: (str(e[0]), str(e[1])))

    def successors(self) -> dict[MethodRef, set[MethodRef]]:
        out: dict[MethodRef, set[MethodRef]] = {}
        for src, dst in self.edges:
            out.setdefault(src, set()).add(dst)
        return out


@dataclass(frozen=True)
class AnalysisSeed:
    roots: frozenset[MethodRef]
    targets: frozenset[MethodRef]


def collect_metadata(facts: ProgramFacts) -> MetadataMaps:
    class_vis, method_vis, ctors = {}, {}, {}
    class_abstract, method_abstract = {}, {}
    impls: dict[str, set[str]] = {}
    for c in facts:
        class_vis[c.name] = c.visibility
        class_abstract[c.name] = c.abstract
        ctors[c.name] = c.constructors
        for ref, m in c.method_refs():
            method_vis[ref] = m.visibility
            method_abstract[ref] = m.abstract
        if c.visibility is Visibility.PUBLIC and not c.abstract:
            for sup in c.supertypes:
                impls.setdefault(sup, set()).add(c.name)
    return MetadataMaps(
        class_vis=class_vis,
        method_vis=method_vis,
        ctors=ctors,
        impls={k: frozenset(v) for k, v in impls.items()},
        class_abstract=class_abstract,
        method_abstract=method_abstract,
    )


def is_accessible(ref: MethodRef, maps: MetadataMaps) -> bool:
    """Public method of a public, non-abstract class: callable from a test."""
    return (
        maps.method_vis.get(ref) is Visibility.PUBLIC
        and maps.class_vis.get(ref.owner) is Visibility.PUBLIC
        and not maps.class_abstract.get(ref.owner, True)
    )


def compute_entry_points(facts: ProgramFacts, maps: MetadataMaps) -> frozenset[MethodRef]:
    return frozenset(
        ref
        for c in facts
        for ref, m in c.method_refs()
        if not m.abstract and is_accessible(ref, maps)
    )


def collect_target_overloads(facts: ProgramFacts, focal_class: str, focal_name: str) -> frozenset[MethodRef]:
    """Every method declared in ``focal_class`` named ``focal_name``."""
    if focal_class not in facts:
        raise UnknownClass(focal_class)
    targets = frozenset(ref for ref, m in facts[focal_class].method_refs() if m.name == focal_name)
    if not targets:
        raise NoSuchMethod(f"{focal_class}#{focal_name}")
    return targets


def _dispatch_targets(index: HierarchyIndex, site) -> set[MethodRef]:
    if site.kind in ("static", "special"):
        found = lookup_dispatch(index, site.owner, site.name, site.params)
        return {found} if found else set()
    out = set()
    for cls in index.concrete_subtypes[site.owner]:
        found = lookup_dispatch(index, cls, site.name, site.params)
        if found is not None:
            out.add(found)
    return out


def build_call_graph(facts: ProgramFacts, index: HierarchyIndex, roots) -> CallGraph:
    """Class Hierarchy Analysis from ``roots``.

    Virtual and interface sites fan out to the dispatch target of every
    concrete subtype of the static owner (owner included when concrete).
    Sites on owners outside the facts, or with no concrete target, are
    recorded in ``CallGraph.skipped``.
    """
    edges = set()
    skipped = []
    visited = set()
    queue = deque(sorted(r for r in roots if r in index.declared and not index.declared[r].abstract))
    visited.update(queue)
    while queue:
        caller = queue.popleft()
        for site in index.declared[caller].calls:
            if site.owner not in facts:
                skipped.append(SkippedSite(caller, site.owner, site.name, site.params, "external-owner"))
                continue
            callees = _dispatch_targets(index, site)
            if not callees:
                skipped.append(SkippedSite(caller, site.owner, site.name, site.params, "unresolved"))
                continue
            for callee in sorted(callees):
                edges.add((caller, callee))
                if callee not in visited:
                    visited.add(callee)
                    queue.append(callee)
    return CallGraph(edges=frozenset(edges), nodes=frozenset(visited), skipped=tuple(skipped))
