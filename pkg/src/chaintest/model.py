"""Program-facts model: the declarative view of a Java-style codebase.

The facts document replaces bytecode loading. It lists every class with its
hierarchy edges, constructors, methods and the call sites inside each method
body. Everything downstream (call graph, paths, dependency closure) is
computed from a validated :class:`ProgramFacts` and its :class:`HierarchyIndex`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterator, Optional

import jsonschema

from .errors import (
    CyclicHierarchy,
    DuplicateClass,
    MalformedDocument,
    SchemaViolation,
    UnknownReceiver,
)

PRIMITIVES = frozenset(
    {"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"}
)


class Visibility(str, Enum):
    PUBLIC = "public"
    PROTECTED = "protected"
    PACKAGE = "package"
    PRIVATE = "private"

    def __str__(self):
        return self.value


CALL_KINDS = ("static", "virtual", "interface", "special")


def is_primitive(type_name: str) -> bool:
    return type_name in PRIMITIVES


def is_array(type_name: str) -> bool:
    return type_name.endswith("[]")


def element_type(type_name: str) -> str:
    """Strip every trailing ``[]`` dimension."""
    while type_name.endswith("[]"):
        type_name = type_name[:-2]
    return type_name


def simple_name(type_name: str) -> str:
    """``com.acme.Outer$Inner`` -> ``Outer$Inner``."""
    return type_name.rsplit(".", 1)[-1]


def package_of(type_name: str) -> str:
    if "." not in type_name:
        return ""
    return type_name.rsplit(".", 1)[0]


@dataclass(frozen=True, order=True)
class MethodRef:
    """Identity of a declared method: owner, name and parameter types."""

    owner: str
    name: str
    params: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.owner}#{self.name}({','.join(self.params)})"

    @classmethod
    def parse(cls, text: str) -> "MethodRef":
        """Inverse of ``str()``: ``owner#name(p1,p2)``."""
        owner, _, rest = text.partition("#")
        name, _, params = rest.partition("(")
        if not owner or not name or not params.endswith(")"):
            raise ValueError(f"not a canonical method reference: {text!r}")
        params = params[:-1]
        return cls(owner, name, tuple(params.split(",")) if params else ())


@dataclass(frozen=True)
class ConstructorInfo:
    visibility: Visibility
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class CallSite:
    kind: str
    owner: str
    name: str
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class MethodInfo:
    name: str
    params: tuple[str, ...]
    return_type: str
    visibility: Visibility
    static: bool = False
    abstract: bool = False
    calls: tuple[CallSite, ...] = ()


@dataclass(frozen=True)
class ClassInfo:
    name: str
    visibility: Visibility
    kind: str = "class"
    abstract: bool = False
    superclass: Optional[str] = None
    interfaces: tuple[str, ...] = ()
    constructors: tuple[ConstructorInfo, ...] = ()
    methods: tuple[MethodInfo, ...] = ()
    source_path: Optional[str] = None

    @property
    def is_interface(self) -> bool:
        return self.kind == "interface"

    @property
    def supertypes(self) -> tuple[str, ...]:
        head = (self.superclass,) if self.superclass else ()
        return head + self.interfaces

    def method_refs(self) -> Iterator[tuple[MethodRef, MethodInfo]]:
        for m in self.methods:
            yield MethodRef(self.name, m.name, m.params), m


@dataclass(frozen=True)
class ProgramFacts:
    classes: tuple[ClassInfo, ...] = ()

    @cached_property
    def by_name(self) -> dict[str, ClassInfo]:
        return {c.name: c for c in self.classes}

    def __contains__(self, name) -> bool:
        return name in self.by_name

    def __getitem__(self, name) -> ClassInfo:
        return self.by_name[name]

    def __iter__(self) -> Iterator[ClassInfo]:
        return iter(self.classes)

    def __len__(self) -> int:
        return len(self.classes)


# -- document format ---------------------------------------------------------

_TYPE = {"type": "string", "pattern": r"^\S+$"}
_TYPES = {"type": "array", "items": _TYPE}
_VIS = {"enum": [v.value for v in Visibility]}

FACTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["classes"],
    "properties": {
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": [
                    "name", "visibility", "kind", "abstract", "superclass",
                    "interfaces", "constructors", "methods",
                ],
                "properties": {
                    "name": _TYPE,
                    "visibility": _VIS,
                    "kind": {"enum": ["class", "interface"]},
                    "abstract": {"type": "boolean"},
                    "superclass": {"anyOf": [_TYPE, {"type": "null"}]},
                    "interfaces": _TYPES,
                    "constructors": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["visibility", "params"],
                            "properties": {"visibility": _VIS, "params": _TYPES},
                        },
                    },
                    "methods": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": [
                                "name", "params", "return", "visibility",
                                "static", "abstract", "calls",
                            ],
                            "properties": {
                                "name": _TYPE,
                                "params": _TYPES,
                                "return": _TYPE,
                                "visibility": _VIS,
                                "static": {"type": "boolean"},
                                "abstract": {"type": "boolean"},
                                "calls": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "additionalProperties": False,
                                        "required": ["kind", "owner", "name", "params"],
                                        "properties": {
                                            "kind": {"enum": list(CALL_KINDS)},
                                            "owner": _TYPE,
                                            "name": _TYPE,
                                            "params": _TYPES,
                                        },
                                    },
                                },
                            },
                        },
                    },
                    "source_path": {"anyOf": [{"type": "string"}, {"type": "null"}]},
                },
            },
        }
    },
}

_validator = jsonschema.Draft202012Validator(FACTS_SCHEMA)


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def parse_facts(document) -> ProgramFacts:
    """Parse and validate a facts document (``bytes`` or ``str``)."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not UTF-8: {exc}") from exc
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(exc)) from exc

    errors = sorted(_validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise SchemaViolation(_json_path(err.absolute_path), err.message)

    classes = []
    seen = set()
    for i, c in enumerate(raw["classes"]):
        if c["name"] in seen:
            raise DuplicateClass(c["name"])
        seen.add(c["name"])
        classes.append(_class_from_json(c, f"$.classes[{i}]"))
    facts = ProgramFacts(tuple(classes))
    _check_call_sites(facts)
    return facts


def _class_from_json(c: dict, path: str) -> ClassInfo:
    ctors = []
    for j, k in enumerate(c["constructors"]):
        if "void" in k["params"]:
            raise SchemaViolation(f"{path}.constructors[{j}].params", "constructor parameter of type void")
        ctors.append(ConstructorInfo(Visibility(k["visibility"]), tuple(k["params"])))

    methods = []
    signatures = set()
    for j, m in enumerate(c["methods"]):
        sig = (m["name"], tuple(m["params"]))
        if sig in signatures:
            raise SchemaViolation(f"{path}.methods[{j}]", f"duplicate method {m['name']}{sig[1]}")
        signatures.add(sig)
        if m["abstract"] and m["calls"]:
            raise SchemaViolation(f"{path}.methods[{j}].calls", "abstract method with call sites")
        calls = tuple(
            CallSite(s["kind"], s["owner"], s["name"], tuple(s["params"])) for s in m["calls"]
        )
        methods.append(
            MethodInfo(
                name=m["name"],
                params=tuple(m["params"]),
                return_type=m["return"],
                visibility=Visibility(m["visibility"]),
                static=m["static"],
                abstract=m["abstract"],
                calls=calls,
            )
        )

    if c["kind"] == "interface":
        if not c["abstract"]:
            raise SchemaViolation(f"{path}.abstract", "interfaces must be abstract")
        if ctors:
            raise SchemaViolation(f"{path}.constructors", "interfaces cannot declare constructors")

    return ClassInfo(
        name=c["name"],
        visibility=Visibility(c["visibility"]),
        kind=c["kind"],
        abstract=c["abstract"],
        superclass=c["superclass"],
        interfaces=tuple(c["interfaces"]),
        constructors=tuple(ctors),
        methods=tuple(methods),
        source_path=c.get("source_path"),
    )


def _check_call_sites(facts: ProgramFacts) -> None:
    for i, c in enumerate(facts.classes):
        for j, m in enumerate(c.methods):
            for k, site in enumerate(m.calls):
                if site.kind == "interface" and site.owner in facts and not facts[site.owner].is_interface:
                    raise SchemaViolation(
                        f"$.classes[{i}].methods[{j}].calls[{k}].owner",
                        f"interface call on non-interface {site.owner}",
                    )


def facts_to_dict(facts: ProgramFacts) -> dict:
    classes = []
    for c in facts.classes:
        d = {
            "name": c.name,
            "visibility": c.visibility.value,
            "kind": c.kind,
            "abstract": c.abstract,
            "superclass": c.superclass,
            "interfaces": list(c.interfaces),
            "constructors": [
                {"visibility": k.visibility.value, "params": list(k.params)} for k in c.constructors
            ],
            "methods": [
                {
                    "name": m.name,
                    "params": list(m.params),
                    "return": m.return_type,
                    "visibility": m.visibility.value,
                    "static": m.static,
                    "abstract": m.abstract,
                    "calls": [
                        {"kind": s.kind, "owner": s.owner, "name": s.name, "params": list(s.params)}
                        for s in m.calls
                    ],
                }
                for m in c.methods
            ],
        }
        if c.source_path is not None:
            d["source_path"] = c.source_path
        classes.append(d)
    return {"classes": classes}


def dump_facts(facts: ProgramFacts) -> bytes:
    return (json.dumps(facts_to_dict(facts), indent=2) + "\n").encode("utf-8")


# -- hierarchy ---------------------------------------------------------------

@dataclass(frozen=True)
class HierarchyIndex:
    """Subtype closure and declared-method lookup over one :class:`ProgramFacts`.

    ``subtypes[A]`` holds every class that transitively extends or implements
    ``A`` (not ``A`` itself). ``concrete_subtypes[A]`` holds the non-abstract
    members of ``subtypes[A] | {A}``.
    """

    facts: ProgramFacts
    subtypes: dict[str, frozenset[str]]
    concrete_subtypes: dict[str, frozenset[str]]
    declared: dict[MethodRef, MethodInfo] = field(repr=False)


def _find_cycle(facts: ProgramFacts) -> Optional[list[str]]:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {c.name: WHITE for c in facts.classes}
    stack: list[str] = []

    def visit(name):
        color[name] = GREY
        stack.append(name)
        for sup in facts[name].supertypes:
            if sup not in facts:
                continue
            if color[sup] == GREY:
                return stack[stack.index(sup):] + [sup]
            if color[sup] == WHITE:
                found = visit(sup)
                if found:
                    return found
        stack.pop()
        color[name] = BLACK
        return None

    for c in facts.classes:
        if color[c.name] == WHITE:
            found = visit(c.name)
            if found:
                return found
    return None


def build_hierarchy(facts: ProgramFacts) -> HierarchyIndex:
    cycle = _find_cycle(facts)
    if cycle:
        raise CyclicHierarchy(cycle)

    ancestors: dict[str, set[str]] = {}

    def ancestors_of(name):
        if name not in ancestors:
            acc = set()
            for sup in facts[name].supertypes:
                if sup in facts:
                    acc.add(sup)
                    acc |= ancestors_of(sup)
            ancestors[name] = acc
        return ancestors[name]

    subtypes: dict[str, set[str]] = {c.name: set() for c in facts.classes}
    for c in facts.classes:
        for a in ancestors_of(c.name):
            subtypes[a].add(c.name)

    concrete = {}
    for name, subs in subtypes.items():
        concrete[name] = frozenset(s for s in subs | {name} if not facts[s].abstract)

    declared = {}
    for c in facts.classes:
        for ref, m in c.method_refs():
            declared[ref] = m

    return HierarchyIndex(
        facts=facts,
        subtypes={k: frozenset(v) for k, v in subtypes.items()},
        concrete_subtypes=concrete,
        declared=declared,
    )


def lookup_dispatch(index: HierarchyIndex, receiver: str, name: str, params) -> Optional[MethodRef]:
    """Nearest non-abstract declaration of ``name(params)`` along the superclass chain."""
    facts = index.facts
    if receiver not in facts:
        raise UnknownReceiver(receiver)
    params = tuple(params)
    current = receiver
    while current is not None and current in facts:
        ref = MethodRef(current, name, params)
        method = index.declared.get(ref)
        if method is not None and not method.abstract:
            return ref
        current = facts[current].superclass
    return None
