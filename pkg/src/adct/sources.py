"""Item package I/O.

Three container shapes carry the same logical payload, a stream of item
packages:

* SIP folder: one directory per item holding metadata.json plus an
  assets/ subtree.
* SIP tar: the same layout inside a (optionally gzipped) tar, streamed
  member by member so collection size never hits memory.
* CSV: one row per item, cells holding multi-values joined by a
  separator; no assets.

Reading and writing are deliberately canonicalising: writing what was
read produces stable bytes (sorted folder walk, zeroed tar timestamps,
fixed JSON layout), so a second read/write cycle is the identity.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import re
import shutil
import tarfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from adct.errors import (
    EmptyHandleAfterExpansion,
    MalformedItem,
    MissingHandleNoFormat,
    RunConfigError,
)
from adct.record import HANDLE_FIELD, MetadataRecord
from adct.runconfig import ResolvedConfig, SourceType

METADATA_NAME = "metadata.json"
ASSETS_DIR = "assets"

_HANDLE_TOKEN_RE = re.compile(r"\$\{([^}]*)\}")
_SANITIZE_RE = re.compile(r"[^A-Za-z0-9]+")


def sanitize_handle(handle: str) -> str:
    """Handles contain '/', file names must not."""
    return handle.replace("/", "_")


@dataclass
class Asset:
    """A non-metadata file belonging to an item.

    `name` is the path relative to the item directory (so usually under
    assets/). Exactly one of `path` (file-backed) and `data` (in-memory,
    used when streaming out of a tar) is set.
    """

    name: str
    path: Path | None = None
    data: bytes | None = None

    def read(self) -> bytes:
        if self.data is not None:
            return self.data
        return Path(self.path).read_bytes()

    def size(self) -> int:
        if self.data is not None:
            return len(self.data)
        return Path(self.path).stat().st_size


@dataclass
class ItemPackage:
    """One item: its metadata record plus any asset files.

    `handle` is the naming fallback captured at read time (the source
    directory name when the record itself has no Handle_ID).
    """

    record: MetadataRecord
    assets: list[Asset] = dc_field(default_factory=list)
    handle: str | None = None

    def dir_name(self) -> str:
        h = self.record.handle or self.handle
        if h is None:
            raise MissingHandleNoFormat("item without Handle_ID cannot be written")
        return sanitize_handle(h)


# --- metadata codec -------------------------------------------------------------

def parse_item_metadata(text: str, where: str) -> MetadataRecord:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise MalformedItem(where, "invalid JSON: %s" % exc) from None
    if not isinstance(doc, dict):
        raise MalformedItem(where, "metadata must be a JSON object")
    rec = MetadataRecord()
    for f, raw in doc.items():
        values = raw if isinstance(raw, list) else [raw]
        for v in values:
            if isinstance(v, str):
                rec.append(f, v)
            elif v is None or isinstance(v, (bool, int, float)):
                rec.append(f, json.dumps(v))
            else:
                raise MalformedItem(where, "field %r holds a non-scalar value" % f)
    return rec


def serialize_item_metadata(record: MetadataRecord) -> str:
    return json.dumps(record.to_mapping(), ensure_ascii=False, indent=2) + "\n"


# --- handle generation ----------------------------------------------------------

def generate_handle(template: str, record: MetadataRecord, seq: int) -> str:
    """Expand a handle template for one record.

    ${seq} is the 1-based record number; ${field:<name>} is the field's
    first value squeezed to [A-Za-z0-9_]. Literal text passes through.
    An expansion that comes out empty is an error, not a silent blank id.
    """

    def repl(m):
        name = m.group(1)
        if name == "seq":
            return str(seq)
        if name.startswith("field:"):
            first = record.first(name[len("field:"):]) or ""
            return _SANITIZE_RE.sub("_", first).strip("_")
        return ""

    out = _HANDLE_TOKEN_RE.sub(repl, template)
    if not out:
        raise EmptyHandleAfterExpansion(template)
    return out


# --- readers ---------------------------------------------------------------------

def iter_sip_folder(root: Path):
    root = Path(root)
    for child in sorted(p for p in root.iterdir() if p.is_dir()):
        meta = child / METADATA_NAME
        if not meta.is_file():
            raise MalformedItem(str(child), "missing %s" % METADATA_NAME)
        try:
            text = meta.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedItem(str(meta), "not valid UTF-8: %s" % exc) from None
        record = parse_item_metadata(text, str(meta))
        assets = [
            Asset(name=p.relative_to(child).as_posix(), path=p)
            for p in sorted(child.rglob("*"))
            if p.is_file() and p != meta
        ]
        yield ItemPackage(record=record, assets=assets, handle=record.handle or child.name)


def _normalize_member_name(name: str) -> str:
    name = name.lstrip("/")
    while name.startswith("./"):
        name = name[2:]
    return name


def iter_sip_tar(path: Path):
    """Stream items out of a tar without materialising the archive.

    Members of one item must be contiguous; the member list is cleared as
    we go so memory stays flat on very large collections.
    """
    path = Path(path)
    try:
        yield from _iter_sip_tar(path)
    except (tarfile.TarError, EOFError) as exc:
        # stream-mode tarfile surfaces corruption as TarError/EOFError,
        # neither of which is an OSError
        raise MalformedItem(str(path), str(exc)) from None


def _iter_sip_tar(path: Path):
    with tarfile.open(path, mode="r|*") as tar:
        current: str | None = None
        files: dict[str, bytes] = {}
        done: set[str] = set()

        def close_group():
            if current is None:
                return None
            done.add(current)
            meta = files.pop(METADATA_NAME, None)
            if meta is None:
                raise MalformedItem(
                    "%s:%s" % (path, current), "missing %s" % METADATA_NAME
                )
            try:
                text = meta.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise MalformedItem(
                    "%s:%s" % (path, current), "not valid UTF-8: %s" % exc
                ) from None
            record = parse_item_metadata(text, "%s:%s" % (path, current))
            assets = [Asset(name=n, data=b) for n, b in files.items()]
            return ItemPackage(record=record, assets=assets, handle=record.handle or current)

        for ti in tar:
            tar.members = []  # keep the bookkeeping list from growing
            name = _normalize_member_name(ti.name)
            if not name or name == ".":
                continue
            if "/" not in name:
                if ti.isdir():
                    continue
                raise MalformedItem("%s:%s" % (path, name), "entry outside an item directory")
            top, rel = name.split("/", 1)
            if ti.isdir() or not rel:
                continue
            if not ti.isfile():
                continue
            if top != current:
                pkg = close_group()
                if pkg is not None:
                    yield pkg
                if top in done:
                    raise MalformedItem(
                        "%s:%s" % (path, top), "item entries are not contiguous"
                    )
                current = top
                files = {}
            fh = tar.extractfile(ti)
            files[rel] = fh.read() if fh is not None else b""
        pkg = close_group()
        if pkg is not None:
            yield pkg


def _unescape_sep(sep: str) -> str:
    return {"\\t": "\t"}.get(sep, sep)


def _check_sep(sep: str, key: str) -> str:
    sep = _unescape_sep(sep)
    if len(sep) != 1:
        raise RunConfigError("%s must be a single character, got %r" % (key, sep))
    return sep


def iter_csv(path: Path, field_sep: str = ",", multi_sep: str = ";",
             handle_format: str | None = None):
    """One record per row; a missing Handle_ID is filled from the handle
    template when one is configured, otherwise it is fatal."""
    field_sep = _check_sep(field_sep, "csvFieldSep")
    path = Path(path)
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh, delimiter=field_sep)
        try:
            header = next(reader)
        except StopIteration:
            return
        header = [h.strip() for h in header]
        seq = 0
        for rownum, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            if len(row) > len(header):
                raise MalformedItem(
                    "%s:%d" % (path, rownum),
                    "row has %d cells but the header has %d" % (len(row), len(header)),
                )
            row = row + [""] * (len(header) - len(row))
            seq += 1
            rec = MetadataRecord()
            for f, cell in zip(header, row):
                if cell == "":
                    continue
                values = cell.split(multi_sep) if multi_sep else [cell]
                for v in values:
                    rec.append(f, v)
            if rec.handle is None:
                if handle_format is None:
                    raise MissingHandleNoFormat("%s:%d" % (path, rownum))
                rec.prepend_field(HANDLE_FIELD, generate_handle(handle_format, rec, seq))
            yield ItemPackage(record=rec, assets=[], handle=rec.handle)


def read_source(cfg: ResolvedConfig):
    """Open the configured source as a package stream."""
    st = cfg.props.source_type
    if st is SourceType.SIP_FOLDER:
        return iter_sip_folder(cfg.source_path)
    if st is SourceType.SIP_TAR:
        return iter_sip_tar(cfg.source_path)
    return iter_csv(
        cfg.source_path,
        field_sep=cfg.props.csv_field_sep,
        multi_sep=cfg.props.csv_multi_value_sep,
        handle_format=cfg.props.handle_id_format,
    )


# --- writers ---------------------------------------------------------------------

def write_sip_folder(packages, root: Path) -> int:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    count = 0
    for pkg in packages:
        item = root / pkg.dir_name()
        item.mkdir(parents=True, exist_ok=True)
        (item / METADATA_NAME).write_text(
            serialize_item_metadata(pkg.record), encoding="utf-8"
        )
        for asset in pkg.assets:
            dest = item / asset.name
            dest.parent.mkdir(parents=True, exist_ok=True)
            if asset.path is not None:
                shutil.copyfile(asset.path, dest)
            else:
                dest.write_bytes(asset.data)
        count += 1
    return count


def _tar_info(name: str, size: int) -> tarfile.TarInfo:
    # fixed metadata keeps archive bytes reproducible
    ti = tarfile.TarInfo(name)
    ti.size = size
    ti.mtime = 0
    ti.uid = 0
    ti.gid = 0
    ti.uname = ""
    ti.gname = ""
    ti.mode = 0o644
    return ti


def write_sip_tar(packages, path: Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    gzipped = path.suffix in (".gz", ".tgz") or path.name.endswith(".tar.gz")
    with open(path, "wb") as raw:
        gz = (
            gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0, compresslevel=6)
            if gzipped
            else None
        )
        stream = gz if gz is not None else raw
        tar = tarfile.open(mode="w", fileobj=stream)
        try:
            for pkg in packages:
                dirname = pkg.dir_name()
                payload = serialize_item_metadata(pkg.record).encode("utf-8")
                tar.addfile(
                    _tar_info("%s/%s" % (dirname, METADATA_NAME), len(payload)),
                    io.BytesIO(payload),
                )
                for asset in pkg.assets:
                    data = asset.read()
                    tar.addfile(
                        _tar_info("%s/%s" % (dirname, asset.name), len(data)),
                        io.BytesIO(data),
                    )
                tar.members = []
                count += 1
        finally:
            tar.close()
            if gz is not None:
                gz.close()
    return count


def write_csv(packages, path: Path, field_sep: str = ",", multi_sep: str = ";") -> int:
    """Spool records to JSON lines first so the header can be the union of
    every field seen, then emit rows on a second pass."""
    field_sep = _check_sep(field_sep, "csvFieldSep")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spool = path.parent / (path.name + ".spool")
    header: list[str] = []
    seen: set[str] = set()
    count = 0
    try:
        with open(spool, "w", encoding="utf-8") as sp:
            for pkg in packages:
                mapping = pkg.record.to_mapping()
                for f in pkg.record.fields():
                    if f not in seen:
                        seen.add(f)
                        header.append(f)
                sp.write(json.dumps(mapping, ensure_ascii=False) + "\n")
                count += 1
        with open(path, "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, delimiter=field_sep, lineterminator="\n")
            writer.writerow(header)
            with open(spool, encoding="utf-8") as sp:
                for line in sp:
                    mapping = json.loads(line)
                    writer.writerow(
                        [multi_sep.join(mapping.get(f, [])) for f in header]
                    )
    finally:
        spool.unlink(missing_ok=True)
    return count


def write_target(packages, cfg: ResolvedConfig) -> int:
    """Write the curated stream in the same container shape as the source."""
    st = cfg.props.source_type
    if st is SourceType.SIP_FOLDER:
        return write_sip_folder(packages, cfg.target_path)
    if st is SourceType.SIP_TAR:
        return write_sip_tar(packages, cfg.target_path)
    return write_csv(
        packages,
        cfg.target_path,
        field_sep=cfg.props.csv_field_sep,
        multi_sep=cfg.props.csv_multi_value_sep,
    )


def read_written_target(cfg: ResolvedConfig):
    """Re-open what write_target produced, for the CSV export pass."""
    st = cfg.props.source_type
    if st is SourceType.SIP_FOLDER:
        return iter_sip_folder(cfg.target_path)
    if st is SourceType.SIP_TAR:
        return iter_sip_tar(cfg.target_path)
    return iter_csv(
        cfg.target_path,
        field_sep=cfg.props.csv_field_sep,
        multi_sep=cfg.props.csv_multi_value_sep,
        handle_format=cfg.props.handle_id_format,
    )
