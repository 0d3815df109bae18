"""Metadata records, staged assignments and the commit step.

A record is an ordered field -> values multimap. Curation never mutates a
record in place: actions stage assignments and deletions into an
AssignmentBuffer, and commit() folds the buffer into a new record.

Commit is a delta: deletions remove base pairs first, staged assignments
land afterwards (so re-staging a deleted pair keeps it), and fields the
buffer never touched are carried over byte-for-byte. With an empty buffer
commit is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from adct.errors import ValidationFailure
from adct.schema import DEFAULT_PROPS, validate_value

HANDLE_FIELD = "Handle_ID"


class MetadataRecord:
    """Ordered multimap of (field, value) pairs.

    Field order follows first occurrence, values keep insertion order within
    a field. The handle is the first Handle_ID value, if any.
    """

    __slots__ = ("_values", "_order")

    def __init__(self, pairs=()):
        self._values: dict[str, list[str]] = {}
        self._order: list[str] = []
        for f, v in pairs:
            self.append(f, v)

    @classmethod
    def from_mapping(cls, mapping) -> "MetadataRecord":
        rec = cls()
        for f, vals in mapping.items():
            if isinstance(vals, str):
                vals = [vals]
            for v in vals:
                rec.append(f, v)
        return rec

    def append(self, field: str, value: str) -> None:
        if field not in self._values:
            self._values[field] = []
            self._order.append(field)
        self._values[field].append(value)

    def prepend_field(self, field: str, value: str) -> None:
        """Insert a new single-valued field at the front (handle assignment)."""
        if field in self._values:
            self._values[field].insert(0, value)
            return
        self._values[field] = [value]
        self._order.insert(0, field)

    def fields(self) -> list[str]:
        return list(self._order)

    def values(self, field: str) -> list[str]:
        return list(self._values.get(field, ()))

    def first(self, field: str) -> str | None:
        vals = self._values.get(field)
        return vals[0] if vals else None

    def has(self, field: str) -> bool:
        return bool(self._values.get(field))

    def entries(self) -> list[tuple[str, str]]:
        return [(f, v) for f in self._order for v in self._values[f]]

    def to_mapping(self) -> dict[str, list[str]]:
        return {f: list(self._values[f]) for f in self._order}

    @property
    def handle(self) -> str | None:
        return self.first(HANDLE_FIELD)

    def __len__(self):
        return sum(len(v) for v in self._values.values())

    def __eq__(self, other):
        if not isinstance(other, MetadataRecord):
            return NotImplemented
        return self._order == other._order and self._values == other._values

    def __repr__(self):
        return "MetadataRecord(%r)" % (self.entries(),)


@dataclass(frozen=True)
class RuleRef:
    """Where an assignment came from, for lineage logs."""

    action: str
    file: str | None = None
    row: int | None = None

    def label(self) -> str:
        if self.file is not None:
            return "%s:%s" % (self.file, self.row if self.row is not None else "?")
        return self.action


@dataclass(frozen=True)
class Assignment:
    field: str
    value: str
    source_field: str
    origin: RuleRef | None = None


class AssignmentBuffer:
    """Staged record changes: additions, pair deletions, field deletions."""

    def __init__(self):
        self.staged: list[Assignment] = []
        self.deletions: list[tuple[str, str]] = []
        self.field_deletions: list[str] = []
        self._deleted_pairs: set[tuple[str, str]] = set()
        self._deleted_fields: set[str] = set()

    def stage(self, assignment: Assignment) -> None:
        self.staged.append(assignment)

    def delete_pair(self, field: str, value: str) -> None:
        pair = (field, value)
        if pair not in self._deleted_pairs:
            self._deleted_pairs.add(pair)
            self.deletions.append(pair)

    def delete_field(self, field: str) -> None:
        if field not in self._deleted_fields:
            self._deleted_fields.add(field)
            self.field_deletions.append(field)

    def absorb(self, assignments=(), deletions=(), field_deletions=()) -> None:
        """Merge one rule application's output.

        Staging and deleting the same (field, value) pair is coherent:
        the deletion removes the base copy, the staged one survives.
        """
        for a in assignments:
            self.stage(a)
        for f, v in deletions:
            self.delete_pair(f, v)
        for f in field_deletions:
            self.delete_field(f)

    def is_empty(self) -> bool:
        return not (self.staged or self.deletions or self.field_deletions)

    def touched_fields(self) -> set[str]:
        out = {a.field for a in self.staged}
        out.update(f for f, _ in self.deletions)
        out.update(self.field_deletions)
        return out


@dataclass
class CommitCounts:
    """Partition of every value commit looked at; see conservation test."""

    staged_total: int = 0
    staged_kept: int = 0
    staged_validation_dropped: int = 0
    staged_pruned: int = 0
    base_total: int = 0
    base_kept: int = 0
    base_deleted: int = 0
    base_validation_dropped: int = 0
    base_pruned: int = 0


@dataclass
class CommitResult:
    record: MetadataRecord
    validation_failures: list = dc_field(default_factory=list)  # (field, value, reason)
    counts: CommitCounts = dc_field(default_factory=CommitCounts)
    normalizer_warnings: list = dc_field(default_factory=list)


@dataclass(frozen=True)
class _Candidate:
    value: str
    source_field: str
    is_base: bool


def commit(
    buffer: AssignmentBuffer,
    record: MetadataRecord,
    props_for=None,
    priorities=None,
    normalizer=None,
) -> CommitResult:
    """Fold staged changes into a new record.

    Per touched field, in order: deletions are applied to the base pairs,
    staged values join the survivors, a multiValued=false field keeps one
    value by sourcePriority (first listed source wins, base values count as
    coming from the field itself, ties keep arrival order), validation
    drops or canonicalises values, the optional normalizer runs, and exact
    duplicate pairs collapse to one. Untouched fields are carried over
    byte-for-byte.
    """
    props_for = props_for or (lambda f: DEFAULT_PROPS)
    priorities = priorities or {}
    result = CommitResult(MetadataRecord())
    counts = result.counts
    counts.base_total = len(record)
    counts.staged_total = len(buffer.staged)

    touched = buffer.touched_fields()
    deleted_pairs = set(buffer.deletions)
    deleted_fields = set(buffer.field_deletions)

    staged_by_field: dict[str, list[Assignment]] = {}
    for a in buffer.staged:
        staged_by_field.setdefault(a.field, []).append(a)

    field_order = record.fields()
    known = set(field_order)
    for f in staged_by_field:
        if f not in known:
            field_order.append(f)
            known.add(f)

    out = result.record
    for f in field_order:
        base_values = record.values(f)
        if f not in touched:
            for v in base_values:
                out.append(f, v)
            counts.base_kept += len(base_values)
            continue

        candidates: list[_Candidate] = []
        for v in base_values:
            if f in deleted_fields or (f, v) in deleted_pairs:
                counts.base_deleted += 1
            else:
                candidates.append(_Candidate(v, f, True))
        for a in staged_by_field.get(f, ()):
            candidates.append(_Candidate(a.value, a.source_field, False))

        props = props_for(f)

        priority = priorities.get(f)
        if priority:
            rank = {s: i for i, s in enumerate(priority)}
            unlisted = len(priority)
            candidates.sort(key=lambda c: rank.get(c.source_field, unlisted))

        if not props.multi_valued and len(candidates) > 1:
            for c in candidates[1:]:
                _count_pruned(counts, c)
            candidates = candidates[:1]

        if props.validation:
            kept = []
            for c in candidates:
                try:
                    canonical = validate_value(props, c.value)
                except ValidationFailure as fail:
                    result.validation_failures.append((f, c.value, fail.reason))
                    if c.is_base:
                        counts.base_validation_dropped += 1
                    else:
                        counts.staged_validation_dropped += 1
                    continue
                kept.append(_Candidate(canonical, c.source_field, c.is_base))
            candidates = kept

        if normalizer is not None and candidates:
            values, warning = normalizer(f, props, [c.value for c in candidates])
            if warning:
                result.normalizer_warnings.append((f, warning))
            if len(values) == len(candidates):
                candidates = [
                    _Candidate(v, c.source_field, c.is_base)
                    for v, c in zip(values, candidates)
                ]

        seen: set[str] = set()
        for c in candidates:
            if c.value in seen:
                _count_pruned(counts, c)
                continue
            seen.add(c.value)
            out.append(f, c.value)
            if c.is_base:
                counts.base_kept += 1
            else:
                counts.staged_kept += 1

    return result


def _count_pruned(counts: CommitCounts, candidate: _Candidate) -> None:
    if candidate.is_base:
        counts.base_pruned += 1
    else:
        counts.staged_pruned += 1
