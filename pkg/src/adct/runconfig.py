"""run.properties parsing and path resolution.

A run is configured by a java-properties style text file: one ``key=value``
per line, ``#`` comments and blank lines ignored. Keys are matched
case-insensitively and with ``_``, ``-`` and spaces stripped, so
``source_data`` and ``SourceData`` both mean ``sourceData``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from adct.errors import (
    BadSourceType,
    ConfigDirMissing,
    DuplicateKey,
    LogicExtensionMismatch,
    MissingMandatory,
    RunConfigError,
    SourceFileMissing,
)


class RunMode(enum.Enum):
    COLLECTION = "collection"
    HANDLE_ID = "handleid"


class SourceType(enum.Enum):
    SIP_TAR = "SIP-TAR"
    SIP_FOLDER = "SIP-FOLDER"
    CSV = "CSV"


# canonical spelling of every recognised key
_KNOWN_KEYS = (
    "sourceData",
    "sourceType",
    "targetData",
    "logic",
    "dataReadPath",
    "auditHandle",
    "logPath",
    "configPath",
    "handleIdFormat",
    "schema",
    "schemaType",
    "serviceIP",
    "csvFieldSep",
    "csvMultiValueSep",
)

_MANDATORY = ("sourceData", "sourceType", "targetData", "logic")


def _norm_key(key: str) -> str:
    return re.sub(r"[\s_\-]+", "", key).lower()


_CANONICAL = {_norm_key(k): k for k in _KNOWN_KEYS}


@dataclass(frozen=True)
class RunProperties:
    """All run settings with defaults applied.

    logPath and configPath stay None here when absent; they default to the
    directory holding the run.properties file, which only resolve_paths
    knows about.
    """

    source_data: str
    source_type: SourceType
    target_data: str
    logic: str
    data_read_path: str | None = None
    audit_handles: tuple[str, ...] = ()
    log_path: str | None = None
    config_path: str | None = None
    handle_id_format: str | None = None
    schema: str | None = None
    schema_type: str = "general"
    service_ip: str | None = None
    csv_field_sep: str = ","
    csv_multi_value_sep: str = ";"
    warnings: tuple[str, ...] = field(default=(), compare=False)


def parse_run_properties(text: str, mode: RunMode) -> RunProperties:
    """Parse run.properties text for the given run mode.

    Raises MissingMandatory (listing every absent mandatory key),
    DuplicateKey, BadSourceType or LogicExtensionMismatch. Unknown keys are
    collected as warnings, never errors.
    """
    values: dict[str, str] = {}
    warnings: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RunConfigError("line %d is not key=value: %r" % (lineno, raw))
        key, _, value = line.partition("=")
        norm = _norm_key(key)
        canonical = _CANONICAL.get(norm)
        if canonical is None:
            warnings.append("unknown key %r ignored (line %d)" % (key.strip(), lineno))
            continue
        if canonical in values:
            raise DuplicateKey(canonical)
        values[canonical] = value.strip()

    missing = [k for k in _MANDATORY if not values.get(k)]
    if missing:
        raise MissingMandatory(missing)

    try:
        source_type = SourceType(values["sourceType"].upper())
    except ValueError:
        raise BadSourceType(values["sourceType"]) from None

    logic = values["logic"]
    want_ext = ".json" if mode is RunMode.COLLECTION else ".csv"
    if not logic.lower().endswith(want_ext):
        raise LogicExtensionMismatch(mode.name, logic)

    audit = tuple(
        h.strip() for h in values.get("auditHandle", "").split(",") if h.strip()
    )

    return RunProperties(
        source_data=values["sourceData"],
        source_type=source_type,
        target_data=values["targetData"],
        logic=logic,
        data_read_path=values.get("dataReadPath") or None,
        audit_handles=audit,
        log_path=values.get("logPath") or None,
        config_path=values.get("configPath") or None,
        handle_id_format=values.get("handleIdFormat") or None,
        schema=values.get("schema") or None,
        schema_type=values.get("schemaType") or "general",
        service_ip=values.get("serviceIP") or None,
        csv_field_sep=values.get("csvFieldSep") or ",",
        csv_multi_value_sep=values.get("csvMultiValueSep") or ";",
        warnings=tuple(warnings),
    )


def render_run_properties(props: RunProperties) -> str:
    """Serialize back to canonical key=value text.

    parse(render(parse(text))) == parse(text) for any accepted text.
    """
    out = [
        "sourceData=%s" % props.source_data,
        "sourceType=%s" % props.source_type.value,
        "targetData=%s" % props.target_data,
        "logic=%s" % props.logic,
    ]
    if props.data_read_path:
        out.append("dataReadPath=%s" % props.data_read_path)
    if props.audit_handles:
        out.append("auditHandle=%s" % ",".join(props.audit_handles))
    if props.log_path:
        out.append("logPath=%s" % props.log_path)
    if props.config_path:
        out.append("configPath=%s" % props.config_path)
    if props.handle_id_format:
        out.append("handleIdFormat=%s" % props.handle_id_format)
    if props.schema:
        out.append("schema=%s" % props.schema)
    out.append("schemaType=%s" % props.schema_type)
    if props.service_ip:
        out.append("serviceIP=%s" % props.service_ip)
    out.append("csvFieldSep=%s" % props.csv_field_sep)
    out.append("csvMultiValueSep=%s" % props.csv_multi_value_sep)
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class ResolvedConfig:
    """RunProperties with every path anchored to the filesystem."""

    mode: RunMode
    props: RunProperties
    runfile_dir: Path
    source_path: Path
    target_path: Path
    logic_path: Path
    config_dir: Path
    log_dir: Path
    schema_path: Path | None = None

    @property
    def report_base(self) -> Path:
        return self.target_path.parent


def resolve_paths(props: RunProperties, runfile_dir: Path | str, mode: RunMode) -> ResolvedConfig:
    """Anchor every configured file against its base directory.

    Config files (logic, schema, rule tables loaded later) resolve against
    configPath; source and target resolve against the run file's directory.
    logPath is created when absent, configPath must already exist.
    """
    base = Path(runfile_dir)

    config_dir = _anchor(base, props.config_path) if props.config_path else base
    if not config_dir.is_dir():
        raise ConfigDirMissing(config_dir)

    log_dir = _anchor(base, props.log_path) if props.log_path else base
    log_dir.mkdir(parents=True, exist_ok=True)

    source_path = _anchor(base, props.source_data)
    if not source_path.exists():
        raise SourceFileMissing(source_path)

    target_path = _anchor(base, props.target_data)
    logic_path = _anchor(config_dir, props.logic)
    schema_path = _anchor(config_dir, props.schema) if props.schema else None

    return ResolvedConfig(
        mode=mode,
        props=props,
        runfile_dir=base,
        source_path=source_path,
        target_path=target_path,
        logic_path=logic_path,
        config_dir=config_dir,
        log_dir=log_dir,
        schema_path=schema_path,
    )


def _anchor(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def with_defaults(props: RunProperties, **overrides) -> RunProperties:
    """Convenience for tests and programmatic use."""
    return replace(props, **overrides)
