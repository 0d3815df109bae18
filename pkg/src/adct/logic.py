"""Curation logic files.

Collection mode logic is a JSON document: a top-level "Fields" object maps
each field name to its translation block. A block may carry field property
overrides (datatype/multiValued/controlled/validation plus the block-only
dependency and sourcePriority keys), an ordered "action" array, and one
descriptor object per listed action keyed by the action's name. Descriptors
can nest further action arrays, and may route through filters that pick a
rule file per record.

Handle-id mode logic is a single CSV whose header signature decides the
plan kind: per-handle useMap, moveField, lookUp, add/coalesce, field
deletion, or whole-item removal.
"""

from __future__ import annotations

import enum
import heapq
import json
import re
from dataclasses import dataclass, field as dc_field

from adct.errors import (
    BadMode,
    DependencyCycle,
    EmptyDescriptor,
    MalformedDocument,
    MissingFieldsKey,
    UnknownAction,
    UnknownHeaderSignature,
)
from adct import rules as rules_mod
from adct.rules import (
    ATTACH_HEADER,
    LOOKUP_HEADER,
    MOVEFIELD_HEADER,
    USEMAP_HEADER,
    header_matches,
)
from adct.schema import coerce_bool


class ActionKind(enum.Enum):
    USE_MAP = "useMap"
    COPY_DATA = "copyData"
    MOVE_FIELD = "moveField"
    LOOK_UP = "lookUp"
    ADD = "add"
    DELETE_FIELD = "deleteField"
    ATTACH = "attach"


# a halting action consumes the value it matched; a continuing action lets
# the value flow on to the rest of the container
HALTING = {
    ActionKind.USE_MAP: True,
    ActionKind.COPY_DATA: True,
    ActionKind.MOVE_FIELD: True,
    ActionKind.LOOK_UP: False,
    ActionKind.ADD: False,
    ActionKind.DELETE_FIELD: True,
    ActionKind.ATTACH: True,
}

# add and attach run once per field, not once per value; deleteField
# registers its field deletion once but still consumes each value
FIELD_LEVEL = {ActionKind.ADD, ActionKind.ATTACH}

DEFAULT_INPUT_FILES = {
    ActionKind.USE_MAP: "useMap.xlsx",
    ActionKind.MOVE_FIELD: "moveField.xlsx",
    ActionKind.LOOK_UP: "lookUp.xlsx",
    ActionKind.ATTACH: "attach.xlsx",
}

_KIND_BY_NAME = {k.value.lower(): k for k in ActionKind}

# descriptor parameters meaningful per kind; anything else draws a warning
_APPLICABLE = {
    ActionKind.USE_MAP: {"inputFile", "delimiter"},
    ActionKind.MOVE_FIELD: {"inputFile"},
    ActionKind.LOOK_UP: {"inputFile"},
    ActionKind.COPY_DATA: {"targetField", "targetValue", "delimiter"},
    ActionKind.ADD: {"targetField", "targetValue", "delimiter"},
    ActionKind.DELETE_FIELD: set(),
    ActionKind.ATTACH: {"inputFile"},
}

_FTB_PROP_KEYS = {
    "datatype": "datatype",
    "multiValued": "multi_valued",
    "controlled": "controlled",
    "validation": "validation",
}
_FTB_BOOL_KEYS = ("multiValued", "controlled", "validation")


@dataclass(frozen=True)
class FilterSpec:
    """Named per-record predicate choosing an action's input file."""

    name: str
    field: str
    match_type: str  # equals | contains | matches
    value: str
    input_file: str
    delimiter: str | None = None


@dataclass(frozen=True)
class ActionDescriptor:
    kind: ActionKind
    input_file: str | None = None
    input_file_defaulted: bool = False
    delimiter: str | None = None
    target_fields: tuple[str, ...] = ()
    target_values: tuple[str, ...] | None = None
    filters: tuple[FilterSpec, ...] = ()
    nested: tuple["ActionDescriptor", ...] = ()
    explicit: bool = False

    @property
    def halting(self) -> bool:
        return HALTING[self.kind]

    def has_own_config(self) -> bool:
        """Whether the descriptor itself configures the action (used as the
        fallback when filters are present but none match)."""
        if self.kind in (ActionKind.USE_MAP, ActionKind.MOVE_FIELD, ActionKind.LOOK_UP, ActionKind.ATTACH):
            return self.input_file is not None and not self.input_file_defaulted
        if self.kind is ActionKind.COPY_DATA:
            return bool(self.target_fields or self.target_values is not None)
        return True


@dataclass(frozen=True)
class Ftb:
    """One field's translation block."""

    field: str
    props: tuple[tuple[str, object], ...] = ()  # FieldProps attribute overrides
    dependency: tuple[str, ...] = ()
    source_priority: tuple[str, ...] = ()
    actions: tuple[ActionDescriptor, ...] = ()

    def props_dict(self) -> dict:
        return dict(self.props)


@dataclass
class CurationPlan:
    ftbs: dict[str, Ftb]
    warnings: list[str] = dc_field(default_factory=list)

    def fields(self) -> list[str]:
        return list(self.ftbs)

    def priorities(self) -> dict[str, tuple[str, ...]]:
        return {f: ftb.source_priority for f, ftb in self.ftbs.items() if ftb.source_priority}


EMPTY_PLAN = CurationPlan({})


def parse_logic_collection(text: str) -> CurationPlan:
    """Parse a collection-mode logic document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument("logic is not valid JSON: %s" % exc) from None
    if not isinstance(doc, dict):
        raise MalformedDocument("logic root must be a JSON object")
    if "Fields" not in doc:
        raise MissingFieldsKey()
    fields_obj = doc["Fields"]
    if not isinstance(fields_obj, dict):
        raise MalformedDocument('"Fields" must be a JSON object')

    warnings: list[str] = []
    for key in doc:
        if key != "Fields":
            warnings.append("top-level key %r ignored" % key)

    ftbs: dict[str, Ftb] = {}
    for field, block in fields_obj.items():
        if not isinstance(block, dict):
            raise MalformedDocument("field %r: translation block must be an object" % field)
        ftb = _parse_ftb(field, block, warnings)
        if ftb is None:
            warnings.append("field %r: empty translation block is inactive" % field)
            continue
        ftbs[field] = ftb
    return CurationPlan(ftbs, warnings)


def _parse_ftb(field: str, block: dict, warnings: list[str]) -> Ftb | None:
    props: list[tuple[str, object]] = []
    for key, attr in _FTB_PROP_KEYS.items():
        if key not in block:
            continue
        value = block[key]
        if key in _FTB_BOOL_KEYS:
            value = coerce_bool(field, key, value)
        elif not isinstance(value, str):
            raise MalformedDocument("field %r: datatype must be a string" % field)
        props.append((attr, value))

    dependency = _string_list(block.get("dependency"), field, "dependency")
    priority = _string_list(block.get("sourcePriority"), field, "sourcePriority")
    actions, consumed = _parse_action_group(field, block, warnings)

    recognised = set(_FTB_PROP_KEYS) | {"dependency", "sourcePriority"} | consumed
    for key in block:
        if key not in recognised:
            warnings.append("field %r: key %r matches no listed action and is ignored" % (field, key))

    if not (props or dependency or priority or actions):
        return None
    return Ftb(field, tuple(props), dependency, priority, actions)


def _string_list(raw, field, what) -> tuple[str, ...]:
    if raw is None:
        return ()
    if isinstance(raw, str):
        return (raw,)
    if isinstance(raw, list) and all(isinstance(x, str) for x in raw):
        return tuple(raw)
    raise MalformedDocument("field %r: %s must be a string array" % (field, what))


def _parse_action_group(owner: str, block: dict, warnings: list[str]):
    """Parse an ordered action array plus its sibling descriptors.

    Works at the translation-block level and, recursively, inside a
    descriptor. Returns the descriptors and the set of block keys consumed.
    """
    consumed: set[str] = set()
    names = block.get("action")
    if names is None:
        return (), consumed
    consumed.add("action")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise MalformedDocument("%r: action must be an array of action names" % owner)

    descriptors = []
    for name in names:
        kind = _KIND_BY_NAME.get(name.lower())
        if kind is None:
            raise UnknownAction(owner, name)
        raw = block.get(name)
        if raw is not None:
            consumed.add(name)
        descriptors.append(_parse_descriptor(owner, name, kind, raw, warnings, consumed_into=consumed))
    return tuple(descriptors), consumed


def _parse_descriptor(owner, name, kind, raw, warnings, consumed_into) -> ActionDescriptor:
    if raw is None:
        input_file = DEFAULT_INPUT_FILES.get(kind)
        return ActionDescriptor(
            kind,
            input_file=input_file,
            input_file_defaulted=input_file is not None,
            explicit=False,
        )
    if not isinstance(raw, dict):
        raise MalformedDocument("%r: descriptor %r must be an object" % (owner, name))
    if not raw:
        raise EmptyDescriptor(owner, name)

    where = "%s.%s" % (owner, name)
    used: set[str] = set()

    filter_names = raw.get("filter")
    filters: list[FilterSpec] = []
    if filter_names is not None:
        used.add("filter")
        if not isinstance(filter_names, list) or not all(isinstance(n, str) for n in filter_names):
            raise MalformedDocument("%r: filter must be an array of names" % where)
        for fname in filter_names:
            spec = raw.get(fname)
            if not isinstance(spec, dict):
                raise MalformedDocument("%r: filter %r has no definition object" % (where, fname))
            used.add(fname)
            filters.append(_parse_filter(where, fname, spec))

    nested, nested_used = _parse_action_group(where, raw, warnings)
    used |= nested_used

    params = {}
    for key in ("inputFile", "delimiter", "targetField", "targetValue"):
        if key not in raw:
            continue
        used.add(key)
        if key not in _APPLICABLE[kind]:
            warnings.append("%s: %r does not apply to %s and is ignored" % (where, key, kind.value))
            continue
        params[key] = raw[key]

    for key in raw:
        if key not in used:
            warnings.append("%s: unknown key %r ignored" % (where, key))

    input_file = params.get("inputFile")
    defaulted = False
    if input_file is None and "inputFile" in _APPLICABLE[kind]:
        input_file = DEFAULT_INPUT_FILES.get(kind)
        defaulted = input_file is not None
    elif input_file is not None and not isinstance(input_file, str):
        raise MalformedDocument("%r: inputFile must be a string" % where)

    delimiter = params.get("delimiter")
    if delimiter is not None and not isinstance(delimiter, str):
        raise MalformedDocument("%r: delimiter must be a string" % where)

    target_fields = _one_or_many(params.get("targetField"), where, "targetField")
    target_values = _one_or_many(params.get("targetValue"), where, "targetValue")

    return ActionDescriptor(
        kind,
        input_file=input_file,
        input_file_defaulted=defaulted,
        delimiter=delimiter,
        target_fields=target_fields or (),
        target_values=target_values,
        filters=tuple(filters),
        nested=nested,
        explicit=True,
    )


def _one_or_many(raw, where, what) -> tuple[str, ...] | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        return (raw,)
    if isinstance(raw, list) and all(isinstance(x, str) for x in raw):
        return tuple(raw)
    raise MalformedDocument("%r: %s must be a string or string array" % (where, what))


def _parse_filter(where, name, spec) -> FilterSpec:
    field = spec.get("field")
    match_type = spec.get("matchType", "equals")
    value = spec.get("value")
    input_file = spec.get("inputFile")
    delimiter = spec.get("delimiter")
    if not isinstance(field, str) or not isinstance(value, str):
        raise MalformedDocument("%r: filter %r needs string field and value" % (where, name))
    if match_type not in ("equals", "contains", "matches"):
        raise MalformedDocument("%r: filter %r has bad matchType %r" % (where, name, match_type))
    if not isinstance(input_file, str) or not input_file:
        raise MalformedDocument("%r: filter %r must name an inputFile" % (where, name))
    if match_type == "matches":
        try:
            re.compile(value)
        except re.error as exc:
            raise MalformedDocument("%r: filter %r regex: %s" % (where, name, exc)) from None
    if delimiter is not None and not isinstance(delimiter, str):
        raise MalformedDocument("%r: filter %r delimiter must be a string" % (where, name))
    return FilterSpec(name, field, match_type, value, input_file, delimiter)


def render_logic(plan: CurationPlan) -> str:
    """Serialize a plan back to logic JSON; parse(render(parse(x))) == parse(x)."""
    fields = {}
    for name, ftb in plan.ftbs.items():
        fields[name] = _render_ftb(ftb)
    return json.dumps({"Fields": fields}, indent=2, ensure_ascii=False) + "\n"


_ATTR_TO_KEY = {v: k for k, v in _FTB_PROP_KEYS.items()}


def _render_ftb(ftb: Ftb) -> dict:
    block: dict = {}
    for attr, value in ftb.props:
        block[_ATTR_TO_KEY[attr]] = value
    if ftb.dependency:
        block["dependency"] = list(ftb.dependency)
    if ftb.source_priority:
        block["sourcePriority"] = list(ftb.source_priority)
    if ftb.actions:
        block.update(_render_action_group(ftb.actions))
    return block


def _render_action_group(actions) -> dict:
    out: dict = {"action": [d.kind.value for d in actions]}
    for d in actions:
        if not d.explicit:
            continue
        desc: dict = {}
        if d.input_file is not None and not d.input_file_defaulted:
            desc["inputFile"] = d.input_file
        if d.delimiter is not None:
            desc["delimiter"] = d.delimiter
        if d.target_fields:
            desc["targetField"] = list(d.target_fields) if len(d.target_fields) > 1 else d.target_fields[0]
        if d.target_values is not None:
            desc["targetValue"] = list(d.target_values) if len(d.target_values) > 1 else d.target_values[0]
        if d.filters:
            desc["filter"] = [f.name for f in d.filters]
            for f in d.filters:
                spec = {"field": f.field, "matchType": f.match_type, "value": f.value, "inputFile": f.input_file}
                if f.delimiter is not None:
                    spec["delimiter"] = f.delimiter
                desc[f.name] = spec
        if d.nested:
            desc.update(_render_action_group(d.nested))
        if desc:
            out[d.kind.value] = desc
    return out


# --- field ordering -----------------------------------------------------------

def order_fields(plan: CurationPlan, extra=()) -> list[str]:
    """Dependency-respecting processing order, lexicographic on ties.

    Covers every field with a translation block, every field named in a
    dependency list, and any extra fields the caller throws in (a record's
    own fields, typically). Raises DependencyCycle when dependencies loop.
    """
    nodes: set[str] = set(plan.ftbs)
    edges: dict[str, set[str]] = {}
    for field, ftb in plan.ftbs.items():
        for dep in ftb.dependency:
            nodes.add(dep)
            edges.setdefault(field, set()).add(dep)
    nodes.update(extra)

    indegree = {n: 0 for n in nodes}
    dependents: dict[str, list[str]] = {}
    for field, deps in edges.items():
        for dep in deps:
            indegree[field] += 1
            dependents.setdefault(dep, []).append(field)

    ready = [n for n in nodes if indegree[n] == 0]
    heapq.heapify(ready)
    out: list[str] = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for m in dependents.get(n, ()):
            indegree[m] -= 1
            if indegree[m] == 0:
                heapq.heappush(ready, m)
    if len(out) != len(nodes):
        raise DependencyCycle(sorted(n for n in nodes if indegree[n] > 0))
    return out


# --- handle-id logic ------------------------------------------------------------

class HidKind(enum.Enum):
    USE_MAP = "HidUseMap"
    MOVE_FIELD = "HidMoveField"
    LOOK_UP = "HidLookUp"
    ADD_COALESCE = "HidAddCoalesce"
    DELETE_FIELD = "HidDeleteField"
    ITEMS_REMOVE = "HidItemsRemove"


MODE_ADD = "add"
MODE_COALESCE = "coalesce"


@dataclass(frozen=True)
class HidAddRule:
    target_field: str
    mul_sep: str
    target_value: str
    mode: str
    file: str
    row: int

    def cells(self) -> tuple[str, ...]:
        return (self.target_field, self.mul_sep, self.target_value, self.mode)


@dataclass(frozen=True)
class HidDeleteRule:
    field: str
    file: str
    row: int


@dataclass
class HidPlan:
    kind: HidKind
    file: str
    by_handle: dict[str, list] = dc_field(default_factory=dict)
    handles: set[str] = dc_field(default_factory=set)  # ITEMS_REMOVE only

    def rows_for(self, handle: str | None) -> list:
        if handle is None:
            return []
        return self.by_handle.get(handle, [])

    def is_empty(self) -> bool:
        return not self.by_handle and not self.handles


_HID_COL = ("hid", "handle_id")
_HID_USEMAP_SIG = (_HID_COL,) + USEMAP_HEADER
_HID_MOVEFIELD_SIG = (_HID_COL,) + MOVEFIELD_HEADER
_HID_LOOKUP_SIG = (_HID_COL,) + LOOKUP_HEADER
_HID_ADD_SIG = (_HID_COL, ("targetfield",), ("mul_sep",), ("targetvalue",), ("mode",))
_HID_DELETE_SIG = (_HID_COL, ("sourcefield",))
_HID_ITEMS_SIG = (_HID_COL,)


def parse_logic_hid(text: str, field_sep: str = ",", file: str = "logic.csv") -> HidPlan:
    """Parse a handle-id rule CSV, detecting the plan kind from its header."""
    rows = rules_mod.parse_table_text(text, field_sep)
    rows = [r for r in rows if any(c != "" for c in r)]
    if not rows:
        raise UnknownHeaderSignature(())
    header = rows[0]

    if header_matches(header, _HID_USEMAP_SIG):
        return _hid_plan(HidKind.USE_MAP, rows, file, rules_mod.parse_usemap_row)
    if header_matches(header, _HID_MOVEFIELD_SIG):
        return _hid_plan(HidKind.MOVE_FIELD, rows, file, rules_mod.parse_movefield_row)
    if header_matches(header, _HID_LOOKUP_SIG):
        return _hid_plan(HidKind.LOOK_UP, rows, file, rules_mod.parse_lookup_row)
    if header_matches(header, _HID_ADD_SIG):
        return _hid_plan(HidKind.ADD_COALESCE, rows, file, _parse_hid_add_tail)
    if header_matches(header, _HID_DELETE_SIG):
        return _hid_plan(HidKind.DELETE_FIELD, rows, file, _parse_hid_delete_tail)
    if header_matches(header, _HID_ITEMS_SIG):
        plan = HidPlan(HidKind.ITEMS_REMOVE, file)
        for _, cells in rules_mod._data_rows(rows):
            plan.handles.add(cells[0])
        return plan
    raise UnknownHeaderSignature(header)


def _hid_plan(kind: HidKind, rows, file, tail_parser) -> HidPlan:
    plan = HidPlan(kind, file)
    for rownum, cells in rules_mod._data_rows(rows):
        handle, tail = cells[0], cells[1:]
        plan.by_handle.setdefault(handle, []).append(tail_parser(tail, file, rownum))
    return plan


def _parse_hid_add_tail(cells, file, rownum) -> HidAddRule:
    tf, sep, tv, mode_raw = rules_mod._pad(cells, 4, file, rownum)
    mode = mode_raw.strip().lower()
    if mode not in (MODE_ADD, MODE_COALESCE):
        raise BadMode(file, rownum, mode_raw)
    return HidAddRule(tf, sep, tv, mode, file, rownum)


def _parse_hid_delete_tail(cells, file, rownum) -> HidDeleteRule:
    (field,) = rules_mod._pad(cells, 1, file, rownum)
    return HidDeleteRule(field, file, rownum)


def iter_descriptors(plan: CurationPlan):
    """Every descriptor in the plan, nested ones included."""
    stack = [d for ftb in plan.ftbs.values() for d in ftb.actions]
    while stack:
        d = stack.pop(0)
        yield d
        stack.extend(d.nested)
