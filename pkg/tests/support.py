"""Shared builders for the test suite.

Everything here constructs fixtures from primitive pieces (dicts, rows,
bytes) so tests stay independent of the code paths they exercise. The
xlsx writer in particular builds workbooks with zipfile by hand rather
than going through any reader code.
"""

from __future__ import annotations

import csv
import io
import zipfile
from pathlib import Path
from xml.sax.saxutils import escape

from adct.record import MetadataRecord
from adct.sources import Asset, ItemPackage, write_sip_tar


def mrec(mapping) -> MetadataRecord:
    return MetadataRecord.from_mapping(mapping)


def pack(mapping, handle=None, assets=None) -> ItemPackage:
    rec = mrec(mapping)
    alist = [Asset(name=n, data=b) for n, b in (assets or {}).items()]
    return ItemPackage(record=rec, assets=alist, handle=handle or rec.handle)


def _split_item(item):
    if isinstance(item, tuple):
        return item[0], dict(item[1])
    return item, {}


def make_sip_folder(root, items):
    """Build a SIP folder tree.

    ``items`` is an iterable of field mappings, or (mapping, assets)
    pairs where assets maps relative file names to bytes.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for i, item in enumerate(items, 1):
        mapping, assets = _split_item(item)
        rec = mrec(mapping)
        name = (rec.handle or "item-%03d" % i).replace("/", "_")
        d = root / name
        d.mkdir()
        (d / "metadata.json").write_text(
            serialize_record(rec), encoding="utf-8"
        )
        for aname, data in assets.items():
            p = d / aname
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(data)
    return root


def make_sip_tar(path, items):
    pkgs = []
    for i, item in enumerate(items, 1):
        mapping, assets = _split_item(item)
        rec = mrec(mapping)
        pkgs.append(
            ItemPackage(
                record=rec,
                assets=[Asset(name=n, data=b) for n, b in assets.items()],
                handle=rec.handle or "item-%03d" % i,
            )
        )
    write_sip_tar(iter(pkgs), Path(path))
    return Path(path)


def serialize_record(rec: MetadataRecord) -> str:
    from adct.sources import serialize_item_metadata

    return serialize_item_metadata(rec)


def write_csv_table(path, rows, sep=","):
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, delimiter=sep, lineterminator="\n").writerows(rows)
    return path


def write_runfile(path, **keys):
    """Keys are written in kwarg order; None values are skipped."""
    path = Path(path)
    lines = ["%s=%s" % (k, v) for k, v in keys.items() if v is not None]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# minimal xlsx construction ------------------------------------------------

_CONTENT_TYPES = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
    '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
    '<Default Extension="xml" ContentType="application/xml"/>'
    '<Override PartName="/xl/workbook.xml" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
    "%s"
    "</Types>"
)

_ROOT_RELS = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
    '<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="xl/workbook.xml"/>'
    "</Relationships>"
)

_WORKBOOK = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" '
    'xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">'
    '<sheets><sheet name="Sheet1" sheetId="1" r:id="rId1"/></sheets>'
    "</workbook>"
)

_WORKBOOK_RELS = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
    '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
    '<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" Target="%s"/>'
    "%s"
    "</Relationships>"
)

_SHARED_REL = (
    '<Relationship Id="rId9" '
    'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings" '
    'Target="sharedStrings.xml"/>'
)


def _col_letter(i: int) -> str:
    # fixture tables stay under 26 columns
    assert i < 26
    return chr(ord("A") + i)


class RawCell(str):
    """Cell stored as a bare value, the way numbers are in real sheets."""


def xlsx_bytes(rows, shared=False, rels=True, sheet_member="xl/worksheets/sheet1.xml",
               skip_cells=()):
    """Build a one-sheet workbook.

    ``rows`` is a list of lists of strings; a None cell is omitted from
    the stream entirely, as spreadsheet tools do for untouched cells.
    ``shared`` stores text via the shared-string table instead of inline.
    ``rels`` False drops xl/_rels/workbook.xml.rels so consumers have to
    fall back on conventional member names. ``skip_cells`` is a set of
    (row, col) zero-based positions to leave out in addition to Nones.
    """
    strings: list[str] = []
    index: dict[str, int] = {}

    def sref(text: str) -> int:
        if text not in index:
            index[text] = len(strings)
            strings.append(text)
        return index[text]

    body = []
    for r, row in enumerate(rows):
        cells = []
        for c, val in enumerate(row):
            if val is None or (r, c) in skip_cells:
                continue
            ref = "%s%d" % (_col_letter(c), r + 1)
            text = str(val)
            if isinstance(val, RawCell):
                cells.append('<c r="%s"><v>%s</v></c>' % (ref, escape(text)))
            elif shared:
                cells.append('<c r="%s" t="s"><v>%d</v></c>' % (ref, sref(text)))
            else:
                cells.append(
                    '<c r="%s" t="inlineStr"><is><t xml:space="preserve">%s</t></is></c>'
                    % (ref, escape(text))
                )
        body.append('<row r="%d">%s</row>' % (r + 1, "".join(cells)))
    sheet = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main">'
        "<sheetData>%s</sheetData></worksheet>" % "".join(body)
    )

    overrides = (
        '<Override PartName="/%s" ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
        % sheet_member
    )
    if shared:
        overrides += (
            '<Override PartName="/xl/sharedStrings.xml" '
            'ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml"/>'
        )

    target = sheet_member[len("xl/"):] if sheet_member.startswith("xl/") else "/" + sheet_member

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as z:
        z.writestr("[Content_Types].xml", _CONTENT_TYPES % overrides)
        z.writestr("_rels/.rels", _ROOT_RELS)
        z.writestr("xl/workbook.xml", _WORKBOOK)
        if rels:
            z.writestr(
                "xl/_rels/workbook.xml.rels",
                _WORKBOOK_RELS % (target, _SHARED_REL if shared else ""),
            )
        z.writestr(sheet_member, sheet)
        if shared:
            items = "".join(
                '<si><t xml:space="preserve">%s</t></si>' % escape(s) for s in strings
            )
            z.writestr(
                "xl/sharedStrings.xml",
                '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
                '<sst xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" '
                'count="%d" uniqueCount="%d">%s</sst>' % (len(strings), len(strings), items),
            )
    return buf.getvalue()


def write_xlsx_table(path, rows, **kw):
    path = Path(path)
    path.write_bytes(xlsx_bytes(rows, **kw))
    return path


def run_cli(argv, answers=""):
    """Drive the command line entry point with canned prompt answers."""
    from adct.cli import run

    err = io.StringIO()
    code = run(list(argv), stdin=io.StringIO(answers), stderr=err)
    return code, err.getvalue()
