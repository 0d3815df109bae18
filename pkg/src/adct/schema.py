"""Field schemas: per-field properties, layered overrides and value checks.

A schema is a JSON object mapping field names to property objects. The
lookup is non-exhaustive by design: unknown fields fall back to the default
property set (text, multi-valued, uncontrolled, validated) so a schema never
has to enumerate a collection's whole vocabulary.
"""

from __future__ import annotations

import calendar
import json
import re
from dataclasses import dataclass, replace
from typing import Mapping

from adct.errors import MalformedDocument, NonBooleanProperty, ValidationFailure


@dataclass(frozen=True)
class FieldProps:
    datatype: str = "text"
    multi_valued: bool = True
    controlled: bool = False
    validation: bool = True


DEFAULT_PROPS = FieldProps()

# JSON spelling -> attribute name
_PROP_KEYS = {
    "datatype": "datatype",
    "multiValued": "multi_valued",
    "controlled": "controlled",
    "validation": "validation",
}
_BOOL_KEYS = ("multiValued", "controlled", "validation")


class FieldSchema:
    """Field name -> FieldProps with a non-failing default lookup."""

    def __init__(self, entries: Mapping[str, FieldProps] | None = None, warnings=()):
        self.entries = dict(entries or {})
        self.warnings = tuple(warnings)

    def lookup(self, field: str) -> FieldProps:
        return self.entries.get(field, DEFAULT_PROPS)

    def __contains__(self, field: str) -> bool:
        return field in self.entries

    def __eq__(self, other):
        return isinstance(other, FieldSchema) and self.entries == other.entries

    def __repr__(self):
        return "FieldSchema(%d entries)" % len(self.entries)


EMPTY_SCHEMA = FieldSchema()


def coerce_bool(field: str, key: str, value) -> bool:
    """Accept JSON booleans plus the strings "true"/"false" (any case)."""
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise NonBooleanProperty(field, key, value)


def parse_schema(text: str) -> FieldSchema:
    """Parse a schema document.

    Duplicate field entries keep the last occurrence and add a warning;
    non-boolean multiValued/controlled/validation raise NonBooleanProperty.
    """
    warnings: list[str] = []

    def on_pairs(pairs):
        seen = {}
        for key, value in pairs:
            if key in seen:
                warnings.append("duplicate schema entry %r: last occurrence wins" % key)
            seen[key] = value
        return seen

    try:
        doc = json.loads(text, object_pairs_hook=on_pairs)
    except json.JSONDecodeError as exc:
        raise MalformedDocument("schema is not valid JSON: %s" % exc) from None
    if not isinstance(doc, dict):
        raise MalformedDocument("schema root must be a JSON object")

    entries: dict[str, FieldProps] = {}
    for field, raw in doc.items():
        if not isinstance(raw, dict):
            raise MalformedDocument("schema entry %r must be an object" % field)
        props = DEFAULT_PROPS
        for key, value in raw.items():
            attr = _PROP_KEYS.get(key)
            if attr is None:
                warnings.append("schema entry %r: unknown property %r ignored" % (field, key))
                continue
            if key in _BOOL_KEYS:
                value = coerce_bool(field, key, value)
            elif not isinstance(value, str):
                raise MalformedDocument(
                    "schema entry %r: datatype must be a string, got %r" % (field, value)
                )
            props = replace(props, **{attr: value})
        entries[field] = props
    return FieldSchema(entries, warnings)


def effective_props(schema: FieldSchema, overrides: Mapping[str, object] | None, field: str) -> FieldProps:
    """Layer per-field overrides over the schema over the defaults, per key.

    `overrides` uses FieldProps attribute names and comes from a logic
    file's field translation block.
    """
    props = schema.lookup(field)
    if overrides:
        props = replace(props, **dict(overrides))
    return props


# --- value validation --------------------------------------------------------

_INT_RE = re.compile(r"[+-]?\d+")
_YEAR_RE = re.compile(r"\d{4}")

_MONTHS: dict[str, int] = {}
for _i in range(1, 13):
    _MONTHS[calendar.month_name[_i].lower()] = _i
    _MONTHS[calendar.month_abbr[_i].lower()] = _i

_DATE_PATTERNS = (
    # (regex, (year-group, month-group, day-group))
    (re.compile(r"(\d{4})-(\d{1,2})-(\d{1,2})"), (1, 2, 3)),
    (re.compile(r"(\d{4})/(\d{1,2})/(\d{1,2})"), (1, 2, 3)),
    (re.compile(r"(\d{1,2})/(\d{1,2})/(\d{4})"), (3, 2, 1)),
    (re.compile(r"(\d{1,2})-(\d{1,2})-(\d{4})"), (3, 2, 1)),
)
_MONTH_DATE_RE = re.compile(r"([A-Za-z]+)\.?\s+(\d{1,2}),\s*(\d{4})")


def validate_value(props: FieldProps, value: str) -> str:
    """Check a value against its datatype and return the canonical form.

    integer: optional sign plus digits, leading zeros stripped ("07" -> "7").
    date: recognised patterns normalise to ISO YYYY-MM-DD; a bare 4-digit
    year is kept as-is. person: trimmed. text and unknown datatypes pass
    through untouched. Raises ValidationFailure when the value does not fit.
    """
    datatype = props.datatype.lower()
    if datatype == "integer":
        v = value.strip()
        if not _INT_RE.fullmatch(v):
            raise ValidationFailure("integer", value)
        return str(int(v))
    if datatype == "date":
        return _validate_date(value)
    if datatype == "person":
        return value.strip()
    return value


def _validate_date(value: str) -> str:
    v = value.strip()
    if _YEAR_RE.fullmatch(v):
        return v
    for pattern, (gy, gm, gd) in _DATE_PATTERNS:
        m = pattern.fullmatch(v)
        if m:
            return _iso(value, m.group(gy), m.group(gm), m.group(gd))
    m = _MONTH_DATE_RE.fullmatch(v)
    if m:
        month = _MONTHS.get(m.group(1).lower())
        if month is None:
            raise ValidationFailure("date", value, "unknown month name")
        return _iso(value, m.group(3), str(month), m.group(2))
    raise ValidationFailure("date", value, "unrecognised date shape")


def _iso(original: str, year: str, month: str, day: str) -> str:
    import datetime

    try:
        d = datetime.date(int(year), int(month), int(day))
    except ValueError as exc:
        raise ValidationFailure("date", original, str(exc)) from None
    return d.isoformat()
