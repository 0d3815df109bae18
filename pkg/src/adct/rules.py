"""Tabular rule files: useMap, moveField, lookUp and attach.

CSV is the canonical format (UTF-8, configurable field separator, standard
quoting). .xlsx files are read best-effort from their first worksheet; every
cell is kept as text exactly as stored, so a sheet column formatted as text
preserves values like "07". Column order in each table is fixed; a header
that does not match raises HeaderOrderMismatch.

Cells are byte-preserved: no trimming, no case folding. Matching against
rule cells is textual and case sensitive throughout.
"""

from __future__ import annotations

import csv
import io
import re
import zipfile
from dataclasses import dataclass
from pathlib import Path
from xml.etree import ElementTree

from adct.errors import (
    BadCountExpr,
    BadExprType,
    BadMatchType,
    BadRegex,
    BadTargetValueType,
    HalfRemoveRow,
    HeaderOrderMismatch,
    MalformedRow,
)

REMOVE = "remove"

SRC_MATCHES = "matches"
SRC_CONTAINS = "contains"
SRC_COUNT = "count"

TGT_MOVE = "move"
TGT_SPLIT = "split"
TGT_REMOVE = "remove"
TGT_REPLACE = "replace"
TGT_REGXREPLACE = "regxreplace"

_TGT_TYPES = (TGT_MOVE, TGT_SPLIT, TGT_REMOVE, TGT_REPLACE, TGT_REGXREPLACE)


# --- row types ----------------------------------------------------------------

@dataclass(frozen=True)
class UseMapRule:
    source_field: str
    source_value: str
    target_field: str
    target_value: str
    file: str
    row: int

    @property
    def is_remove(self) -> bool:
        return self.target_field == REMOVE

    def cells(self) -> tuple[str, ...]:
        return (self.source_field, self.source_value, self.target_field, self.target_value)


@dataclass(frozen=True)
class MoveFieldRule:
    source_field: str
    match_group: str
    src_expr_type: str  # matches | contains | count
    src_expression: str
    target_field: str
    tgt_expr_type: str  # move | split | remove | replace | regxreplace
    tgt_expression: str
    tgt_string_value: str
    count: int | None
    file: str
    row: int

    def cells(self) -> tuple[str, ...]:
        src_type = self.src_expr_type if self.count is None else "count:=%d" % self.count
        return (
            self.source_field,
            self.match_group,
            src_type,
            self.src_expression,
            self.target_field,
            self.tgt_expr_type,
            self.tgt_expression,
            self.tgt_string_value,
        )


@dataclass(frozen=True)
class LookUpRule:
    source_field: str
    match_type: str  # equals | contains
    source_value: str
    target_field: str
    target_value: str
    target_value_type: str
    file: str
    row: int

    @property
    def is_remove(self) -> bool:
        return self.target_field == REMOVE

    def cells(self) -> tuple[str, ...]:
        return (
            self.source_field,
            self.match_type,
            self.source_value,
            self.target_field,
            self.target_value,
            self.target_value_type,
        )


@dataclass(frozen=True)
class AttachRule:
    handle: str
    asset_path: str
    asset_name: str
    file: str
    row: int

    def cells(self) -> tuple[str, ...]:
        return (self.handle, self.asset_path, self.asset_name)


# --- headers ------------------------------------------------------------------

# each column lists its accepted spellings, lowercased
USEMAP_HEADER = (("sourcefield",), ("sourcevalue",), ("targetfield",), ("targetvalue",))
MOVEFIELD_HEADER = (
    ("sourcefield",),
    ("matchgroup", "match_group"),
    ("matchtype", "src_exprtype"),
    ("matchvalue", "src_expression"),
    ("targetfield",),
    ("transformtype", "tgt_exprtype"),
    ("targetexpr", "tgt_expression"),
    ("targetreplace", "tgt_stringvalue"),
)
LOOKUP_HEADER = (
    ("sourcefield",),
    ("matchtype", "matchtyp"),
    ("sourcevalue",),
    ("targetfield",),
    ("targetvalue",),
    ("targetvaluetype",),
)
ATTACH_HEADER = (("handle_id",), ("assetpath",), ("assetname",))


def header_matches(cells, spec) -> bool:
    if len(cells) != len(spec):
        return False
    return all(c.strip().lower() in allowed for c, allowed in zip(cells, spec))


def check_header(cells, spec, file: str) -> None:
    if not header_matches(cells, spec):
        want = tuple(allowed[0] for allowed in spec)
        raise HeaderOrderMismatch(file, tuple(cells), want)


# --- table reading ------------------------------------------------------------

def read_table(path: Path | str, field_sep: str = ",") -> list[list[str]]:
    """Read a rule table into rows of text cells.

    .xlsx goes through the first-sheet reader, everything else is parsed as
    CSV. A UTF-8 BOM is tolerated.
    """
    path = Path(path)
    if path.suffix.lower() == ".xlsx":
        return read_xlsx_first_sheet(path)
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        return [list(row) for row in csv.reader(fh, delimiter=field_sep)]


def parse_table_text(text: str, field_sep: str = ",") -> list[list[str]]:
    return [list(row) for row in csv.reader(io.StringIO(text), delimiter=field_sep)]


_A1_RE = re.compile(r"([A-Z]+)(\d+)")


def read_xlsx_first_sheet(path: Path | str) -> list[list[str]]:
    """Best-effort text extraction from an .xlsx file's first worksheet.

    Handles shared strings, inline strings and raw (numeric) cell values.
    Every cell comes back as the stored text.
    """
    with zipfile.ZipFile(path) as z:
        shared: list[str] = []
        if "xl/sharedStrings.xml" in z.namelist():
            root = ElementTree.fromstring(z.read("xl/sharedStrings.xml"))
            for si in root.iter("{*}si"):
                shared.append("".join(t.text or "" for t in si.iter("{*}t")))
        sheet_name = _first_sheet_member(z)
        root = ElementTree.fromstring(z.read(sheet_name))
        rows: list[list[str]] = []
        for row_el in root.iter("{*}row"):
            cells: list[str] = []
            for c in row_el.iter("{*}c"):
                ref = c.get("r", "")
                m = _A1_RE.fullmatch(ref)
                col = _col_index(m.group(1)) if m else len(cells)
                while len(cells) < col:
                    cells.append("")
                cells.append(_cell_text(c, shared))
            rows.append(cells)
        return rows


def _first_sheet_member(z: zipfile.ZipFile) -> str:
    try:
        wb = ElementTree.fromstring(z.read("xl/workbook.xml"))
        rels = ElementTree.fromstring(z.read("xl/_rels/workbook.xml.rels"))
    except KeyError:
        return "xl/worksheets/sheet1.xml"
    rel_targets = {
        rel.get("Id"): rel.get("Target", "") for rel in rels.iter("{*}Relationship")
    }
    for sheet in wb.iter("{*}sheet"):
        rid = sheet.get("{http://schemas.openxmlformats.org/officeDocument/2006/relationships}id")
        target = rel_targets.get(rid)
        if target:
            target = target.lstrip("/")
            return target if target.startswith("xl/") else "xl/" + target
    return "xl/worksheets/sheet1.xml"


def _col_index(letters: str) -> int:
    n = 0
    for ch in letters:
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n - 1


def _cell_text(c, shared) -> str:
    kind = c.get("t", "n")
    if kind == "inlineStr":
        return "".join(t.text or "" for t in c.iter("{*}t"))
    v = c.find("{*}v")
    raw = v.text if v is not None and v.text is not None else ""
    if kind == "s":
        try:
            return shared[int(raw)]
        except (ValueError, IndexError):
            return raw
    return raw


# --- row parsing (shared with the handle-id logic tables) ----------------------

def _pad(cells, width, file, rownum):
    if len(cells) > width:
        if any(c != "" for c in cells[width:]):
            raise MalformedRow(file, rownum, "expected %d cells, got %d" % (width, len(cells)))
        return list(cells[:width])
    return list(cells) + [""] * (width - len(cells))


def parse_usemap_row(cells, file: str, rownum: int) -> UseMapRule:
    sf, sv, tf, tv = _pad(cells, 4, file, rownum)
    if (tf == REMOVE) != (tv == REMOVE):
        raise HalfRemoveRow(file, rownum)
    return UseMapRule(sf, sv, tf, tv, file, rownum)


_COUNT_RE = re.compile(r"count\s*:=\s*(.*)", re.IGNORECASE)


def parse_movefield_row(cells, file: str, rownum: int) -> MoveFieldRule:
    sf, group, src_type_raw, src_expr, tf, tgt_type_raw, tgt_expr, tgt_sv = _pad(
        cells, 8, file, rownum
    )
    count = None
    src_type = src_type_raw.strip().lower()
    m = _COUNT_RE.fullmatch(src_type_raw.strip())
    if m:
        src_type = SRC_COUNT
        try:
            count = int(m.group(1))
            if count < 0:
                raise ValueError
        except ValueError:
            raise BadCountExpr(file, rownum, src_type_raw) from None
    elif src_type not in (SRC_MATCHES, SRC_CONTAINS):
        raise BadExprType(file, rownum, src_type_raw)

    tgt_type = tgt_type_raw.strip().lower()
    if tgt_type not in _TGT_TYPES:
        raise BadExprType(file, rownum, tgt_type_raw)

    if src_type == SRC_MATCHES:
        _compile_or_raise(src_expr, file, rownum)
    if tgt_type == TGT_REGXREPLACE:
        pattern = _compile_or_raise(tgt_expr, file, rownum)
        for ref in re.findall(r"\$(\d+)", tgt_sv):
            if int(ref) > pattern.groups:
                raise BadRegex(
                    file, rownum, "$%s exceeds %d capture group(s)" % (ref, pattern.groups)
                )
    return MoveFieldRule(sf, group.strip(), src_type, src_expr, tf, tgt_type, tgt_expr, tgt_sv, count, file, rownum)


def _compile_or_raise(expr: str, file: str, rownum: int):
    try:
        return re.compile(expr)
    except re.error as exc:
        raise BadRegex(file, rownum, "%s in %r" % (exc, expr)) from None


def parse_lookup_row(cells, file: str, rownum: int) -> LookUpRule:
    sf, mt_raw, sv, tf, tv, tvt = _pad(cells, 6, file, rownum)
    mt = mt_raw.strip().lower()
    if mt not in ("equals", "contains"):
        raise BadMatchType(file, rownum, mt_raw)
    if tvt.strip().lower() != "value":
        raise BadTargetValueType(file, rownum, tvt)
    return LookUpRule(sf, mt, sv, tf, tv, tvt.strip(), file, rownum)


def parse_attach_row(cells, file: str, rownum: int) -> AttachRule:
    handle, asset_path, asset_name = _pad(cells, 3, file, rownum)
    return AttachRule(handle, asset_path, asset_name, file, rownum)


def _data_rows(rows):
    """Rows after the header, keeping original row numbers, skipping blanks."""
    for i, cells in enumerate(rows[1:], start=2):
        if any(c != "" for c in cells):
            yield i, cells


# --- indexed tables -----------------------------------------------------------

class UseMapIndex:
    """useMap rules keyed by (sourceField, sourceValue), byte-exact."""

    def __init__(self, rules: list[UseMapRule], file: str):
        self.rules = rules
        self.file = file
        self.by_key: dict[tuple[str, str], list[UseMapRule]] = {}
        for r in rules:
            self.by_key.setdefault((r.source_field, r.source_value), []).append(r)

    def match(self, field: str, value: str) -> list[UseMapRule]:
        return self.by_key.get((field, value), [])


class MoveFieldIndex:
    def __init__(self, rules: list[MoveFieldRule], file: str):
        self.rules = rules
        self.file = file
        self.by_field: dict[str, list[MoveFieldRule]] = {}
        for r in rules:
            self.by_field.setdefault(r.source_field, []).append(r)

    def match(self, field: str) -> list[MoveFieldRule]:
        return self.by_field.get(field, [])


class LookUpIndex:
    def __init__(self, rules: list[LookUpRule], file: str):
        self.rules = rules
        self.file = file
        self.by_field: dict[str, list[LookUpRule]] = {}
        for r in rules:
            self.by_field.setdefault(r.source_field, []).append(r)

    def match(self, field: str) -> list[LookUpRule]:
        return self.by_field.get(field, [])


class AttachIndex:
    def __init__(self, rules: list[AttachRule], file: str):
        self.rules = rules
        self.file = file
        self.by_handle: dict[str, list[AttachRule]] = {}
        for r in rules:
            self.by_handle.setdefault(r.handle, []).append(r)

    def match(self, handle: str) -> list[AttachRule]:
        return self.by_handle.get(handle, [])


def parse_usemap_rules(rows: list[list[str]], file: str) -> UseMapIndex:
    check_header(rows[0] if rows else [], USEMAP_HEADER, file)
    return UseMapIndex([parse_usemap_row(c, file, i) for i, c in _data_rows(rows)], file)


def parse_movefield_rules(rows: list[list[str]], file: str) -> MoveFieldIndex:
    check_header(rows[0] if rows else [], MOVEFIELD_HEADER, file)
    return MoveFieldIndex([parse_movefield_row(c, file, i) for i, c in _data_rows(rows)], file)


def parse_lookup_rules(rows: list[list[str]], file: str) -> LookUpIndex:
    check_header(rows[0] if rows else [], LOOKUP_HEADER, file)
    return LookUpIndex([parse_lookup_row(c, file, i) for i, c in _data_rows(rows)], file)


def parse_attach_rules(rows: list[list[str]], file: str) -> AttachIndex:
    check_header(rows[0] if rows else [], ATTACH_HEADER, file)
    return AttachIndex([parse_attach_row(c, file, i) for i, c in _data_rows(rows)], file)
