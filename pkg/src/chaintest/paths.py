"""Depth-limited call path extraction with backward-reachability pruning."""

from __future__ import annotations

from typing import Iterable

from .callgraph import CallGraph
from .model import MethodRef

CallPath = tuple[MethodRef, ...]


def path_key(path: CallPath):
    """Canonical order: shorter first, then lexicographic by method text."""
    return (len(path), tuple(str(m) for m in path))


def canonical(paths: Iterable[CallPath]) -> list[CallPath]:
    return sorted(set(paths), key=path_key)


def forward_adjacency(graph: CallGraph) -> dict[MethodRef, list[MethodRef]]:
    adj: dict[MethodRef, set[MethodRef]] = {}
    for src, dst in graph.edges:
        adj.setdefault(src, set()).add(dst)
    return {k: sorted(v) for k, v in adj.items()}


def backward_reachable(graph: CallGraph, targets) -> set[MethodRef]:
    """Least fixpoint of ``targets | {m : some callee of m can reach}``."""
    adj = forward_adjacency(graph)
    can_reach = set(targets)
    changed = True
    while changed:
        changed = False
        for m, callees in adj.items():
            if m not in can_reach and any(c in can_reach for c in callees):
                can_reach.add(m)
                changed = True
    return can_reach


def extract_call_paths(graph: CallGraph, roots, targets, d_max: int, prune: bool = True) -> list[CallPath]:
    """All simple paths from a root to a target with at most ``d_max`` edges.

    ``prune=False`` skips the backward-reachability restriction on roots; the
    result is the same, only the amount of search differs.
    """
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    targets = frozenset(targets)
    adj = forward_adjacency(graph)
    starts = set(roots)
    if prune:
        starts &= backward_reachable(graph, targets)

    found: list[CallPath] = []
    stack: list[MethodRef] = []
    visited: set[MethodRef] = set()

    def dfs(m, depth):
        stack.append(m)
        visited.add(m)
        if m in targets and depth <= d_max:
            found.append(tuple(stack))
        if depth < d_max:
            for s in adj.get(m, ()):
                if s not in visited:
                    dfs(s, depth + 1)
        stack.pop()
        visited.discard(m)

    for r in sorted(starts):
        dfs(r, 0)
    return canonical(found)
