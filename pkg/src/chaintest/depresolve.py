"""Path filtering and object-initialization dependency resolution."""

from __future__ import annotations

from dataclasses import dataclass

from .callgraph import MetadataMaps, is_accessible
from .model import ConstructorInfo, element_type, is_primitive
from .paths import CallPath, canonical

DEFAULT_PATHS_CAP = 32


def filter_paths(raw, maps: MetadataMaps, k_paths: int = DEFAULT_PATHS_CAP) -> list[CallPath]:
    """Project each path onto its test-accessible methods.

    Order is kept, repeated methods keep their first occurrence, empty
    projections are dropped and identical projections merged. The result is
    canonically ordered and capped at ``k_paths``.
    """
    if k_paths < 1:
        raise ValueError("k_paths must be positive")
    kept = []
    for path in raw:
        projected = []
        for m in path:
            if is_accessible(m, maps) and m not in projected:
                projected.append(m)
        if projected:
            kept.append(tuple(projected))
    return canonical(kept)[:k_paths]


def dependency_type(type_name: str, maps: MetadataMaps):
    """Class a parameter of this type pulls into the closure, or None.

    Arrays contribute their element type; primitives and types outside the
    facts contribute nothing.
    """
    base = element_type(type_name)
    if is_primitive(base) or base not in maps.class_vis:
        return None
    return base


@dataclass(frozen=True)
class DependencyClosure:
    classes: frozenset[str]
    seed: frozenset[str]
    rounds: int = 0


def resolve_dependencies(filtered, focal_class: str, maps: MetadataMaps) -> DependencyClosure:
    seed = {focal_class}
    for path in filtered:
        for m in path:
            seed.add(m.owner)
            for p in m.params:
                dep = dependency_type(p, maps)
                if dep:
                    seed.add(dep)

    closure = set(seed)
    rounds = 0
    while True:
        new = set()
        for cls in closure:
            for ctor in maps.public_ctors(cls):
                for p in ctor.params:
                    dep = dependency_type(p, maps)
                    if dep and dep not in closure:
                        new.add(dep)
        rounds += 1
        if not new:
            break
        closure |= new
    return DependencyClosure(frozenset(closure), frozenset(seed), rounds)


@dataclass(frozen=True)
class InitializationSet:
    ctors: dict[str, tuple[ConstructorInfo, ...]]
    known_impls: dict[str, frozenset[str]]

    def __len__(self):
        return len(self.ctors)


def build_initialization_set(closure: DependencyClosure, maps: MetadataMaps) -> InitializationSet:
    ctors, known = {}, {}
    for cls in sorted(closure.classes):
        ctors[cls] = maps.public_ctors(cls)
        if not ctors[cls]:
            known[cls] = maps.impls.get(cls, frozenset())
    return InitializationSet(ctors, known)
