"""Audit logging, replay, and the run report.

Every pipeline step lands in a per-handle log as one tab-separated line:

    timestamp  field  action  rule  "input"  ->  {outcome}

The outcome object holds exactly the buffer operations the step performed
(assignments, deletions, fieldDeletions), so replaying a handle's log over
its source record and committing reproduces the curated record. Values the
step merely routed into a later field's pipeline appear under "routed" for
the reader's benefit; replay ignores them.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

from adct.record import Assignment, AssignmentBuffer, commit
from adct.sources import sanitize_handle

AUDIT_SUFFIX = ".audit.log"
REPORT_DIR = "data-report"
_STAMP = "%Y_%m_%d-%H_%M_%S"


@dataclass(frozen=True)
class ParsedEvent:
    timestamp: str
    field: str
    action: str
    rule: str
    input: str
    assignments: tuple = ()
    deletions: tuple = ()
    field_deletions: tuple = ()
    routed: tuple = ()
    note: str = ""


def format_event(event, timestamp: str | None = None) -> str:
    ts = timestamp or datetime.datetime.now().isoformat(timespec="seconds")
    outcome = {
        "assignments": [list(t) for t in event.assignments],
        "deletions": [list(p) for p in event.deletions],
        "fieldDeletions": list(event.field_deletions),
    }
    if event.routed:
        outcome["routed"] = [list(t) for t in event.routed]
    if event.note:
        outcome["note"] = event.note
    return "\t".join(
        [
            ts,
            event.field,
            event.action,
            event.rule,
            json.dumps(event.input, ensure_ascii=False),
            "->",
            json.dumps(outcome, ensure_ascii=False),
        ]
    )


def parse_event(line: str) -> ParsedEvent:
    # JSON escapes any tab inside payloads, so the frame split is safe
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 7 or parts[5] != "->":
        raise ValueError("not an audit line: %r" % line)
    ts, field, action, rule, input_json, _, outcome_json = parts
    outcome = json.loads(outcome_json)
    return ParsedEvent(
        timestamp=ts,
        field=field,
        action=action,
        rule=rule,
        input=json.loads(input_json),
        assignments=tuple(tuple(t) for t in outcome.get("assignments", [])),
        deletions=tuple(tuple(p) for p in outcome.get("deletions", [])),
        field_deletions=tuple(outcome.get("fieldDeletions", [])),
        routed=tuple(tuple(t) for t in outcome.get("routed", [])),
        note=outcome.get("note", ""),
    )


def read_events(path: Path) -> list[ParsedEvent]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(parse_event(line))
    return out


def replay(events, record, props_for=None, priorities=None, normalizer=None):
    """Rebuild the curated record from its audit trail."""
    buffer = AssignmentBuffer()
    for e in events:
        for f, v, src in e.assignments:
            buffer.stage(Assignment(f, v, src))
        for f, v in e.deletions:
            buffer.delete_pair(f, v)
        for f in e.field_deletions:
            buffer.delete_field(f)
    return commit(
        buffer, record, props_for=props_for, priorities=priorities, normalizer=normalizer
    ).record


class AuditSink:
    """Appends events to one log file per audited handle.

    `handles=None` audits everything; otherwise only listed handles are
    written. Log I/O must never kill a run: the first OSError disables the
    sink and is reported as a warning.
    """

    def __init__(self, log_dir: Path | str, handles=None):
        self.log_dir = Path(log_dir)
        self.handles = set(handles) if handles is not None else None
        self._files: dict[str, object] = {}
        self.disabled = False
        self.warnings: list[str] = []

    def wants(self, handle) -> bool:
        if self.disabled or handle is None:
            return False
        return self.handles is None or handle in self.handles

    def record(self, event) -> None:
        if not self.wants(event.handle):
            return
        try:
            fh = self._files.get(event.handle)
            if fh is None:
                self.log_dir.mkdir(parents=True, exist_ok=True)
                name = sanitize_handle(event.handle) + AUDIT_SUFFIX
                fh = open(self.log_dir / name, "a", encoding="utf-8")
                self._files[event.handle] = fh
            fh.write(format_event(event) + "\n")
        except OSError as exc:
            self.disabled = True
            self.warnings.append("audit logging disabled: %s" % exc)

    def close(self) -> None:
        for fh in self._files.values():
            try:
                fh.close()
            except OSError:
                pass
        self._files.clear()


# --- run report --------------------------------------------------------------------

@dataclass
class RunReport:
    total: int = 0
    matched: int = 0
    unmatched: int = 0
    emitted: int = 0
    removed: int = 0
    duration_seconds: float = 0.0
    field_fires: dict = None
    validation_failures: list = None
    warnings: list = None


def _minutes_seconds(seconds: float) -> tuple[int, int]:
    whole = int(seconds)
    return whole // 60, whole % 60


def make_report_dir(base_dir: Path, when=None) -> Path:
    """Create <base>/data-report/<stamp>/ (suffixing on a stamp collision)."""
    when = when or datetime.datetime.now()
    root = Path(base_dir) / REPORT_DIR
    stamp = when.strftime(_STAMP)
    dest = root / stamp
    n = 1
    while dest.exists():
        n += 1
        dest = root / ("%s-%d" % (stamp, n))
    dest.mkdir(parents=True)
    return dest


def write_summary(dest: Path, report: RunReport, when=None) -> Path:
    when = when or datetime.datetime.now()
    mins, secs = _minutes_seconds(report.duration_seconds)
    lines = [
        "Curation Report",
        "Run: %s" % when.isoformat(timespec="seconds"),
        "Total #:%d" % report.total,
        "Matched #:%d UnMatched #:%d" % (report.matched, report.unmatched),
        "Emitted #:%d" % report.emitted,
        "Removed #:%d" % report.removed,
        "Total Processing Time %d mins %d seconds." % (mins, secs),
    ]
    fires = report.field_fires or {}
    if fires:
        lines.append("")
        lines.append("Rule fires by field:")
        for f in sorted(fires):
            lines.append("  %s: %d" % (f, fires[f]))
    failures = report.validation_failures or []
    if failures:
        lines.append("")
        lines.append("Validation failures #:%d" % len(failures))
        for handle, f, value, reason in failures:
            lines.append("  %s\t%s\t%r\t%s" % (handle, f, value, reason))
    warnings = report.warnings or []
    if warnings:
        lines.append("")
        lines.append("Warnings #:%d" % len(warnings))
        for w in warnings:
            lines.append("  %s" % w)
    (dest / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return dest


def write_report(base_dir: Path, report: RunReport, when=None) -> Path:
    """Create the stamped report directory and write its summary."""
    when = when or datetime.datetime.now()
    return write_summary(make_report_dir(base_dir, when), report, when)
