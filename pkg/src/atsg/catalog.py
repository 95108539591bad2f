"""Part taxonomy, precedence rules, and the action-relationship table.

A catalog is loaded from TOML text with three kinds of tables::

    [[tool]]
    name = "wrench"
    fastening = true

    [[part]]
    name = "Screw"
    role = "fastener"          # or "structural"
    size_rank = 5
    affordances = ["thread"]
    tool = "wrench"
    total = 8

    [[rule]]
    main = "screw-hole"        # affordance of the main part, or "*"
    attached = "thread"        # affordance of the attached part, or "*"
    verb = "screw"
    main_tool = "gripper"
    attached_tool = "wrench"

A wildcard rule ``main = "*", attached = "*"`` must be present; it is the
fallback motion for any pair of parts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

WILDCARD = "*"

_PART_KEYS = {"name", "role", "size_rank", "affordances", "tool", "total"}
_RULE_KEYS = {"main", "attached", "verb", "main_tool", "attached_tool"}
_TOOL_KEYS = {"name", "fastening"}
_TOP_KEYS = {"part", "rule", "tool", "name"}


class CatalogError(ValueError):
    """Invalid catalog document; ``location`` names the offending table."""

    def __init__(self, message: str, location: str = "") -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class Role(enum.Enum):
    FASTENER = "fastener"
    STRUCTURAL = "structural"


@dataclass(frozen=True)
class PartType:
    name: str
    role: Role
    size_rank: int
    affordances: frozenset[str]
    required_tool: str
    total_count: int
    catalog_index: int

    @property
    def is_fastener(self) -> bool:
        return self.role is Role.FASTENER


@dataclass(frozen=True)
class ActionRule:
    main_affordance: str
    attached_affordance: str
    verb: str
    main_tool: str
    attached_tool: str

    @property
    def specificity(self) -> int:
        return (self.main_affordance != WILDCARD) + (self.attached_affordance != WILDCARD)


@dataclass(frozen=True)
class Catalog:
    part_types: Mapping[str, PartType]
    action_rules: tuple[ActionRule, ...]
    tool_names: frozenset[str]
    fastening_tools: frozenset[str] = frozenset()
    name: str = ""
    _rule_index: Mapping[tuple[str, str], ActionRule] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __getitem__(self, name: str) -> PartType:
        return self.part_types[name]

    def __contains__(self, name: object) -> bool:
        return name in self.part_types

    @property
    def verbs(self) -> frozenset[str]:
        return frozenset(rule.verb for rule in self.action_rules)

    def totals(self) -> dict[str, int]:
        return {t.name: t.total_count for t in self.part_types.values()}


def _expect(table: dict, key: str, kind: type | tuple[type, ...], location: str):
    if key not in table:
        raise CatalogError(f"missing key {key!r}", location)
    value = table[key]
    # bool is an int subclass; reject it where an integer is expected
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise CatalogError(f"key {key!r} has wrong type {type(value).__name__}", location)
    return value


def _reject_unknown(table: dict, allowed: set[str], location: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise CatalogError(f"unknown keys {unknown}", location)


def load_catalog(document: str) -> Catalog:
    """Parse and validate catalog TOML text."""
    try:
        raw = tomllib.loads(document)
    except tomllib.TOMLDecodeError as exc:
        raise CatalogError(f"parse failure: {exc}", "document") from exc
    _reject_unknown(raw, _TOP_KEYS, "document")

    tools: dict[str, bool] = {}
    for i, table in enumerate(raw.get("tool", [])):
        loc = f"tool[{i}]"
        _reject_unknown(table, _TOOL_KEYS, loc)
        name = _expect(table, "name", str, loc)
        if name in tools:
            raise CatalogError(f"duplicate tool {name!r}", loc)
        tools[name] = bool(table.get("fastening", False))

    parts: dict[str, PartType] = {}
    all_affordances: set[str] = set()
    part_tables = raw.get("part", [])
    if not part_tables:
        raise CatalogError("catalog has no parts", "document")
    for i, table in enumerate(part_tables):
        loc = f"part[{i}]"
        _reject_unknown(table, _PART_KEYS, loc)
        name = _expect(table, "name", str, loc)
        if name in parts:
            raise CatalogError(f"duplicate part name {name!r}", loc)
        try:
            role = Role(_expect(table, "role", str, loc).lower())
        except ValueError as exc:
            raise CatalogError("role must be 'fastener' or 'structural'", loc) from exc
        size_rank = _expect(table, "size_rank", int, loc)
        affordances = _expect(table, "affordances", list, loc)
        if not all(isinstance(a, str) and a != WILDCARD for a in affordances):
            raise CatalogError("affordances must be names other than '*'", loc)
        tool = _expect(table, "tool", str, loc)
        if tool not in tools:
            raise CatalogError(f"unknown tool {tool!r}", loc)
        if role is Role.FASTENER and not tools[tool]:
            raise CatalogError(f"fastener {name!r} needs a fastening tool, got {tool!r}", loc)
        total = _expect(table, "total", int, loc)
        if total < 0:
            raise CatalogError("total must be non-negative", loc)
        all_affordances.update(affordances)
        parts[name] = PartType(
            name=name,
            role=role,
            size_rank=size_rank,
            affordances=frozenset(affordances),
            required_tool=tool,
            total_count=total,
            catalog_index=i,
        )

    rules: list[ActionRule] = []
    index: dict[tuple[str, str], ActionRule] = {}
    for i, table in enumerate(raw.get("rule", [])):
        loc = f"rule[{i}]"
        _reject_unknown(table, _RULE_KEYS, loc)
        rule = ActionRule(
            main_affordance=_expect(table, "main", str, loc),
            attached_affordance=_expect(table, "attached", str, loc),
            verb=_expect(table, "verb", str, loc),
            main_tool=_expect(table, "main_tool", str, loc),
            attached_tool=_expect(table, "attached_tool", str, loc),
        )
        for aff in (rule.main_affordance, rule.attached_affordance):
            if aff != WILDCARD and aff not in all_affordances:
                raise CatalogError(f"rule references unknown affordance {aff!r}", loc)
        for tool in (rule.main_tool, rule.attached_tool):
            if tool not in tools:
                raise CatalogError(f"rule references unknown tool {tool!r}", loc)
        key = (rule.main_affordance, rule.attached_affordance)
        if key in index:
            raise CatalogError(f"duplicate rule key {key}", loc)
        index[key] = rule
        rules.append(rule)
    if (WILDCARD, WILDCARD) not in index:
        raise CatalogError("catalog needs a default rule (main = '*', attached = '*')", "document")

    return Catalog(
        part_types=MappingProxyType(parts),
        action_rules=tuple(rules),
        tool_names=frozenset(tools),
        fastening_tools=frozenset(t for t, fastening in tools.items() if fastening),
        name=str(raw.get("name", "")),
        _rule_index=MappingProxyType(index),
    )


def load_catalog_file(path: str | Path) -> Catalog:
    path = Path(path)
    try:
        return load_catalog(path.read_text(encoding="utf-8"))
    except CatalogError as exc:
        raise CatalogError(str(exc), str(path)) from exc


def lookup_action(main: PartType, attached: PartType, catalog: Catalog) -> tuple[str, str, str]:
    """Return ``(verb, main_tool, attached_tool)`` for attaching ``attached`` to ``main``.

    The most specific rule wins (both affordances named beats one named beats
    the wildcard pair); equally specific matches go to the earliest rule.
    """
    best: ActionRule | None = None
    for rule in catalog.action_rules:
        if rule.main_affordance != WILDCARD and rule.main_affordance not in main.affordances:
            continue
        if (
            rule.attached_affordance != WILDCARD
            and rule.attached_affordance not in attached.affordances
        ):
            continue
        if best is None or rule.specificity > best.specificity:
            best = rule
    assert best is not None  # the default rule always matches
    return best.verb, best.main_tool, best.attached_tool


def precedence_key(part: PartType) -> tuple[int, int, int]:
    """Sort key; larger means more likely to be the main child."""
    return (part.role is Role.STRUCTURAL, part.size_rank, -part.catalog_index)


def compare_precedence(a: PartType, b: PartType) -> PartType:
    """Return whichever of ``a`` and ``b`` becomes the main child.

    Structural parts beat fasteners, then the larger size rank wins, then the
    earlier catalog entry. Identical types return ``a``.
    """
    if a.name == b.name:
        return a
    return a if precedence_key(a) > precedence_key(b) else b


DATA_DIR = Path(__file__).parent / "data"
