"""Per-record curation pipelines.

Collection mode walks each record's fields in dependency order. A field
with no translation block (or a property-only block) is carried over
verbatim. A field with actions sends every one of its values through the
action container: continuing actions stage output and pass the value on,
the first matching halting action stages its output and consumes the
value, and a value no action consumed is dropped. Either way the base pair
is deleted from the record and only staged assignments survive, which is
what makes a trailing copyData the "keep the original" idiom.

Assignments targeting a field whose turn is still to come join that
field's inputs; assignments to already-processed fields (or fields outside
the order) go straight to the commit buffer.

Handle-id mode applies one rule table keyed by handle; everything the
table does not address is copied verbatim.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from adct.errors import ConfigFileMissing, NormalizeFailure
from adct.logic import (
    ActionDescriptor,
    ActionKind,
    CurationPlan,
    FilterSpec,
    HidKind,
    HidPlan,
    FIELD_LEVEL,
    iter_descriptors,
    order_fields,
)
from adct.record import (
    Assignment,
    AssignmentBuffer,
    MetadataRecord,
    RuleRef,
    commit,
)
from adct.rules import (
    LookUpIndex,
    MoveFieldIndex,
    SRC_CONTAINS,
    SRC_COUNT,
    SRC_MATCHES,
    TGT_MOVE,
    TGT_REGXREPLACE,
    TGT_REMOVE,
    TGT_REPLACE,
    TGT_SPLIT,
    parse_attach_rules,
    parse_lookup_rules,
    parse_movefield_rules,
    parse_usemap_rules,
    read_table,
)
from adct.schema import EMPTY_SCHEMA, effective_props
from adct.sources import Asset, ItemPackage

# --- token substitution ---------------------------------------------------------

_TOKEN_RE = re.compile(r"\$([^$]+)\$")
_COPY_TOKEN_RE = re.compile(r"\$([^$]+)\$|\bvalue\b")


@dataclass(frozen=True)
class SubstitutionContext:
    """Bindings for $value$ and $<field-name>$ tokens.

    The record is the original source record; a token naming an absent
    field expands to the empty string, a lone $ stays as it is.
    """

    value: str
    record: MetadataRecord


def substitute_tokens(template: str, ctx: SubstitutionContext) -> str:
    if "$" not in template:
        return template

    def repl(m):
        name = m.group(1)
        if name == "value":
            return ctx.value
        return ctx.record.first(name) or ""

    return _TOKEN_RE.sub(repl, template)


def _copydata_template(template: str, ctx: SubstitutionContext) -> str:
    """copyData also honours the bare word `value` in its targetValue."""

    def repl(m):
        name = m.group(1)
        if name is None or name == "value":
            return ctx.value
        return ctx.record.first(name) or ""

    return _COPY_TOKEN_RE.sub(repl, template)


def split_parts(text: str, delimiter: str | None) -> list[str]:
    """Delimiter split for staged values; empty parts are discarded."""
    if not delimiter:
        return [text]
    return [p for p in text.split(delimiter) if p != ""]


# --- action application ---------------------------------------------------------

@dataclass
class ActionResult:
    consumed: bool = False
    assignments: list[Assignment] = dc_field(default_factory=list)
    deletions: list[tuple[str, str]] = dc_field(default_factory=list)
    field_deletions: list[str] = dc_field(default_factory=list)
    # assignments that joined a later field's pipeline instead of the
    # commit buffer; split off by the engine after application
    routed: list[Assignment] = dc_field(default_factory=list)

    @property
    def fired(self) -> bool:
        return self.consumed or bool(
            self.assignments or self.routed or self.deletions or self.field_deletions
        )


def apply_usemap(index, field, value, ctx, delimiter=None, nested_runner=None) -> ActionResult:
    """Byte-exact (sourceField, sourceValue) mapping; every matching row fires."""
    matched = index.match(field, value)
    res = ActionResult()
    if not matched:
        return res
    res.consumed = True
    for r in matched:
        if r.is_remove:
            res.deletions.append((field, value))
            continue
        ref = RuleRef("useMap", index.file, r.row)
        out = substitute_tokens(r.target_value, ctx)
        produced = [
            Assignment(r.target_field, part, field, ref)
            for part in split_parts(out, delimiter)
        ]
        if nested_runner is not None:
            produced = nested_runner(produced)
        res.assignments.extend(produced)
    return res


def apply_lookup(index, field, value, ctx) -> ActionResult:
    """Continuing rule lookup: stages targets, never consumes the value."""
    res = ActionResult()
    for r in index.match(field):
        hit = value == r.source_value if r.match_type == "equals" else r.source_value in value
        if not hit:
            continue
        if r.is_remove:
            res.deletions.append((field, value))
        else:
            res.assignments.append(
                Assignment(
                    r.target_field,
                    substitute_tokens(r.target_value, ctx),
                    field,
                    RuleRef("lookUp", index.file, r.row),
                )
            )
    return res


def apply_copydata(field, value, ctx, target_fields=(), target_values=None, delimiter=None) -> ActionResult:
    """Unconditional copy; the `keep this value` workhorse."""
    res = ActionResult(consumed=True)
    targets = target_fields or (field,)
    ref = RuleRef("copyData")
    outs = [value] if target_values is None else [
        _copydata_template(tv, ctx) for tv in target_values
    ]
    for tf in targets:
        for out in outs:
            for part in split_parts(out, delimiter):
                res.assignments.append(Assignment(tf, part, field, ref))
    return res


def apply_add(field, ctx, target_fields=(), target_values=None, delimiter=None) -> ActionResult:
    """Field-level constant injection; continuing, runs once per field."""
    res = ActionResult()
    if target_values is None:
        return res
    targets = target_fields or (field,)
    ref = RuleRef("add")
    for tf in targets:
        for tv in target_values:
            out = substitute_tokens(tv, ctx)
            for part in split_parts(out, delimiter):
                res.assignments.append(Assignment(tf, part, field, ref))
    return res


def apply_delete_field(field, has_values: bool) -> ActionResult:
    res = ActionResult(consumed=has_values)
    res.field_deletions.append(field)
    return res


def _mf_matches(rule, value: str) -> bool:
    if rule.src_expr_type == SRC_MATCHES:
        return re.fullmatch(rule.src_expression, value) is not None
    if rule.src_expr_type == SRC_CONTAINS:
        return rule.src_expression in value
    if rule.src_expr_type == SRC_COUNT:
        return value.count(rule.src_expression) == rule.count
    return False


def _mf_transform(rule, value: str):
    """Returns (outputs, removed)."""
    t = rule.tgt_expr_type
    if t == TGT_MOVE:
        return [value], False
    if t == TGT_SPLIT:
        return [p for p in value.split(rule.tgt_expression) if p != ""], False
    if t == TGT_REMOVE:
        return [], True
    if t == TGT_REPLACE:
        return [value.replace(rule.tgt_expression, rule.tgt_string_value)], False
    if t == TGT_REGXREPLACE:
        repl = rule.tgt_string_value.replace("\\", "\\\\")
        repl = re.sub(r"\$(\d+)", r"\\\1", repl)
        return [re.sub(rule.tgt_expression, repl, value)], False
    return [value], False


def apply_movefield(index, field, value, ctx) -> ActionResult:
    """Pattern-driven moves.

    Rules with an empty matchGroup fire independently on the original
    value; rules sharing a matchGroup chain in file order, each consuming
    the previous output. A chained value that matched at least one rule is
    staged to the last matching rule's targetField.
    """
    rules = index.match(field)
    res = ActionResult()
    if not rules:
        return res

    groups: dict[str, list] = {}
    for r in rules:
        groups.setdefault(r.match_group, []).append(r)

    for gid, grules in groups.items():
        if gid == "":
            for r in grules:
                if not _mf_matches(r, value):
                    continue
                res.consumed = True
                outs, removed = _mf_transform(r, value)
                if removed:
                    res.deletions.append((field, value))
                    continue
                ref = RuleRef("moveField", index.file, r.row)
                res.assignments.extend(Assignment(r.target_field, o, field, ref) for o in outs)
            continue

        current = [(value, None, None)]  # (value, targetField, ref)
        fired = False
        removed_any = False
        for r in grules:
            ref = RuleRef("moveField", index.file, r.row)
            nxt = []
            for v, tgt, vref in current:
                if not _mf_matches(r, v):
                    nxt.append((v, tgt, vref))
                    continue
                fired = True
                outs, removed = _mf_transform(r, v)
                if removed:
                    removed_any = True
                    continue
                nxt.extend((o, r.target_field, ref) for o in outs)
            current = nxt
        if fired:
            res.consumed = True
            if removed_any:
                res.deletions.append((field, value))
            for v, tgt, vref in current:
                if tgt is not None:
                    res.assignments.append(Assignment(tgt, v, field, vref))
    return res


def filter_matches(spec: FilterSpec, record: MetadataRecord) -> bool:
    for v in record.values(spec.field):
        if spec.match_type == "equals" and v == spec.value:
            return True
        if spec.match_type == "contains" and spec.value in v:
            return True
        if spec.match_type == "matches" and re.fullmatch(spec.value, v):
            return True
    return False


@dataclass(frozen=True)
class EffectiveAction:
    """A descriptor after filter routing for one record."""

    input_file: str | None
    delimiter: str | None
    skipped: bool = False


def select_filter_config(desc: ActionDescriptor, record: MetadataRecord) -> EffectiveAction:
    """Pick the rule file an action uses for this record.

    The first matching filter wins; with no match the descriptor's own
    configuration applies when it has one, otherwise the action is a no-op
    for this record.
    """
    if not desc.filters:
        return EffectiveAction(desc.input_file, desc.delimiter)
    for f in desc.filters:
        if filter_matches(f, record):
            return EffectiveAction(f.input_file, f.delimiter if f.delimiter is not None else desc.delimiter)
    if desc.has_own_config():
        return EffectiveAction(desc.input_file, desc.delimiter)
    return EffectiveAction(None, None, skipped=True)


# --- rule file loading -----------------------------------------------------------

class RuleEnvironment:
    """Loads and caches rule tables from the config directory."""

    def __init__(self, config_dir: Path | str, field_sep: str = ","):
        self.config_dir = Path(config_dir)
        self.field_sep = field_sep
        self._cache: dict[tuple[str, str], object] = {}

    def _load(self, kind: str, name: str, parser):
        key = (kind, name)
        if key not in self._cache:
            path = self.config_dir / name
            if not path.is_file():
                raise ConfigFileMissing(path)
            self._cache[key] = parser(read_table(path, self.field_sep), name)
        return self._cache[key]

    def usemap(self, name: str):
        return self._load("useMap", name, parse_usemap_rules)

    def movefield(self, name: str):
        return self._load("moveField", name, parse_movefield_rules)

    def lookup(self, name: str):
        return self._load("lookUp", name, parse_lookup_rules)

    def attach(self, name: str):
        return self._load("attach", name, parse_attach_rules)

    def load_for(self, desc: ActionDescriptor):
        loader = {
            ActionKind.USE_MAP: self.usemap,
            ActionKind.MOVE_FIELD: self.movefield,
            ActionKind.LOOK_UP: self.lookup,
            ActionKind.ATTACH: self.attach,
        }.get(desc.kind)
        if loader is None:
            return
        for name in {desc.input_file, *(f.input_file for f in desc.filters)}:
            if name:
                loader(name)


# --- events and stats ------------------------------------------------------------

@dataclass(frozen=True)
class CurationEvent:
    """One observable pipeline step, the unit of the audit log.

    `assignments`, `deletions` and `field_deletions` are the buffer
    operations the step performed; replaying them in order rebuilds the
    record. `routed` values went into another field's pipeline instead of
    the buffer, so they are informational only.
    """

    handle: str | None
    field: str
    action: str
    rule: str
    input: str
    assignments: tuple = ()  # (field, value, source_field) triples
    deletions: tuple = ()  # (field, value) pairs
    field_deletions: tuple = ()
    routed: tuple = ()  # (field, value, source_field) triples
    note: str = ""


@dataclass
class EngineStats:
    total: int = 0
    emitted: int = 0
    removed: int = 0
    matched: int = 0
    unmatched: int = 0
    field_fires: Counter = dc_field(default_factory=Counter)
    validation_failures: list = dc_field(default_factory=list)
    warnings: list = dc_field(default_factory=list)


def _event_for(handle, field, action, res: ActionResult, value, rule="-", note="") -> CurationEvent:
    return CurationEvent(
        handle=handle,
        field=field,
        action=action,
        rule=rule,
        input=value,
        assignments=tuple((a.field, a.value, a.source_field) for a in res.assignments),
        deletions=tuple(res.deletions),
        field_deletions=tuple(res.field_deletions),
        routed=tuple((a.field, a.value, a.source_field) for a in res.routed),
        note=note,
    )


# --- the engine --------------------------------------------------------------------

class CurationEngine:
    """Applies a curation plan (or handle-id plan) to item packages."""

    def __init__(
        self,
        rule_env: RuleEnvironment,
        plan: CurationPlan | None = None,
        hid_plan: HidPlan | None = None,
        schema=EMPTY_SCHEMA,
        normalizer=None,
        audit_sink=None,
    ):
        self.rule_env = rule_env
        self.plan = plan
        self.hid_plan = hid_plan
        self.schema = schema
        self.normalizer = normalizer
        self.audit_sink = audit_sink
        self.stats = EngineStats()
        if plan is not None:
            self._overrides = {f: ftb.props_dict() for f, ftb in plan.ftbs.items()}
            self._priorities = plan.priorities()
        else:
            self._overrides = {}
            self._priorities = {}

    # -- setup

    def preload_rules(self) -> None:
        """Load every referenced rule table up front so missing files fail
        the run before any output is written."""
        if self.plan is not None:
            for desc in iter_descriptors(self.plan):
                self.rule_env.load_for(desc)

    def props_for(self, field):
        return effective_props(self.schema, self._overrides.get(field), field)

    # -- record level

    def curate_package(self, pkg: ItemPackage) -> ItemPackage | None:
        self.stats.total += 1
        if self.hid_plan is not None:
            out = self._curate_hid(pkg)
        else:
            out = self._curate_collection(pkg)
        if out is None:
            self.stats.removed += 1
        else:
            self.stats.emitted += 1
        return out

    def run(self, packages):
        """Curate a package stream, dropping removed items."""
        for pkg in packages:
            out = self.curate_package(pkg)
            if out is not None:
                yield out

    # -- collection mode

    def _curate_collection(self, pkg: ItemPackage) -> ItemPackage:
        record = pkg.record
        plan = self.plan
        handle = pkg.handle
        buffer = AssignmentBuffer()
        events: list[CurationEvent] = []
        matched = False
        new_assets: list[Asset] = []

        order = order_fields(plan, extra=record.fields())
        pending = set(order)
        arrivals: dict[str, list[Assignment]] = {}

        for f in order:
            pending.discard(f)
            ftb = plan.ftbs.get(f)
            base_values = record.values(f)
            incoming = arrivals.pop(f, [])

            if ftb is None or not ftb.actions:
                # verbatim: the base pairs stay put, routed arrivals stage
                # with their provenance intact
                for a in incoming:
                    buffer.stage(a)
                    events.append(
                        CurationEvent(
                            handle, f, "carry", "-", a.value,
                            assignments=((a.field, a.value, a.source_field),),
                        )
                    )
                continue

            effective = {
                id(d): select_filter_config(d, record) for d in ftb.actions
            }
            per_value = [d for d in ftb.actions if d.kind not in FIELD_LEVEL]

            fired_here = self._run_field_level(
                ftb, f, record, handle, effective, buffer, arrivals, pending, events,
                has_values=bool(base_values or incoming), new_assets=new_assets,
            )
            matched = matched or fired_here

            inputs = [(v, f, None, True) for v in base_values]
            inputs += [(a.value, a.source_field, a.origin, False) for a in incoming]

            for value, src, origin, is_base in inputs:
                consumed = False
                ctx = SubstitutionContext(value, record)
                for d in per_value:
                    eff = effective[id(d)]
                    if eff.skipped:
                        continue
                    res = self._apply_per_value(d, eff, f, value, ctx, record)
                    if res.fired:
                        matched = True
                        self.stats.field_fires[f] += 1
                        self._absorb(res, f, buffer, arrivals, pending)
                        events.append(
                            _event_for(handle, f, d.kind.value, res, value,
                                       rule=self._rule_label(d, eff))
                        )
                    if d.halting and res.consumed:
                        consumed = True
                        break
                if is_base:
                    # base pairs survive an action container only by being
                    # staged back; record the deletion either way
                    drop = ActionResult()
                    drop.deletions.append((f, value))
                    buffer.delete_pair(f, value)
                    events.append(
                        _event_for(handle, f, "consume" if consumed else "drop",
                                   drop, value)
                    )

        result = commit(
            buffer,
            record,
            props_for=self.props_for,
            priorities=self._priorities,
            normalizer=self._normalize_hook,
        )
        self._finish(result, handle, events, matched)
        assets = list(pkg.assets) + new_assets
        return ItemPackage(record=result.record, assets=assets, handle=pkg.handle)

    def _run_field_level(
        self, ftb, f, record, handle, effective, buffer, arrivals, pending, events,
        has_values, new_assets,
    ) -> bool:
        matched = False
        for d in ftb.actions:
            eff = effective[id(d)]
            if d.kind is ActionKind.ADD:
                if eff.skipped:
                    continue
                ctx = SubstitutionContext("", record)
                res = apply_add(
                    f, ctx,
                    target_fields=d.target_fields,
                    target_values=d.target_values,
                    delimiter=d.delimiter,
                )
                if res.fired:
                    matched = True
                    self.stats.field_fires[f] += 1
                    self._absorb(res, f, buffer, arrivals, pending)
                    events.append(_event_for(handle, f, "add", res, ""))
            elif d.kind is ActionKind.ATTACH:
                if eff.skipped:
                    continue
                fired = self._run_attach(d, eff, f, handle, events, new_assets)
                matched = matched or fired
            elif d.kind is ActionKind.DELETE_FIELD:
                res = apply_delete_field(f, has_values)
                buffer.delete_field(f)
                if res.consumed:
                    matched = True
                    self.stats.field_fires[f] += 1
                events.append(_event_for(handle, f, "deleteField", res, ""))
        return matched

    def _run_attach(self, d, eff, f, handle, events, new_assets) -> bool:
        if handle is None:
            self.stats.warnings.append("attach: record without Handle_ID skipped")
            return False
        index = self.rule_env.attach(eff.input_file)
        fired = False
        for rule in index.match(handle):
            src = self.rule_env.config_dir / rule.asset_path
            res = ActionResult(consumed=True)
            if not src.is_file():
                self.stats.warnings.append(
                    "attach: asset file missing: %s (%s:%d)" % (src, index.file, rule.row)
                )
                events.append(
                    _event_for(handle, f, "attach", ActionResult(), rule.asset_path,
                               rule="%s:%d" % (index.file, rule.row),
                               note="asset file missing")
                )
                continue
            new_assets.append(Asset("assets/%s" % rule.asset_name, path=src))
            fired = True
            self.stats.field_fires[f] += 1
            events.append(
                _event_for(handle, f, "attach", res, rule.asset_path,
                           rule="%s:%d" % (index.file, rule.row),
                           note="attached %s" % rule.asset_name)
            )
        return fired

    def _apply_per_value(self, d, eff, f, value, ctx, record) -> ActionResult:
        kind = d.kind
        if kind is ActionKind.USE_MAP:
            index = self.rule_env.usemap(eff.input_file)
            nested = None
            if d.nested:
                nested = lambda produced: self._run_nested(d.nested, produced, record)
            return apply_usemap(index, f, value, ctx, delimiter=eff.delimiter, nested_runner=nested)
        if kind is ActionKind.LOOK_UP:
            return apply_lookup(self.rule_env.lookup(eff.input_file), f, value, ctx)
        if kind is ActionKind.MOVE_FIELD:
            return apply_movefield(self.rule_env.movefield(eff.input_file), f, value, ctx)
        if kind is ActionKind.COPY_DATA:
            return apply_copydata(
                f, value, ctx,
                target_fields=d.target_fields,
                target_values=d.target_values,
                delimiter=d.delimiter,
            )
        if kind is ActionKind.DELETE_FIELD:
            # always-matching halting action with no output
            return ActionResult(consumed=True)
        return ActionResult()

    def _run_nested(self, nested_descs, produced, record) -> list[Assignment]:
        """Run a nested action chain over freshly produced assignments.

        Continuing actions add side outputs; the first matching halting
        action's outputs replace the in-flight assignment. Unconsumed
        assignments stage as originally produced. Nested deletions drop the
        in-flight value without touching the record.
        """
        in_flight = list(produced)
        outputs: list[Assignment] = []
        for d in nested_descs:
            survivors: list[Assignment] = []
            for a in in_flight:
                ctx = SubstitutionContext(a.value, record)
                eff = select_filter_config(d, record)
                if eff.skipped:
                    survivors.append(a)
                    continue
                res = self._apply_per_value(d, eff, a.field, a.value, ctx, record)
                if d.kind in FIELD_LEVEL:
                    res = ActionResult()  # field-level actions have no nested meaning
                if d.halting and res.consumed:
                    outputs.extend(res.assignments)
                else:
                    outputs.extend(res.assignments)
                    survivors.append(a)
            in_flight = survivors
        return in_flight + outputs

    def _rule_label(self, d, eff) -> str:
        return eff.input_file if eff.input_file else d.kind.value

    def _absorb(self, res: ActionResult, current_field, buffer, arrivals, pending) -> None:
        """Apply one result: route assignments aimed at a field still to be
        processed into that field's pipeline, stage the rest. The split is
        kept on the result so audit events mirror real buffer operations."""
        staged: list[Assignment] = []
        routed: list[Assignment] = []
        for a in res.assignments:
            if a.field in pending and a.field != current_field:
                arrivals.setdefault(a.field, []).append(a)
                routed.append(a)
            else:
                buffer.stage(a)
                staged.append(a)
        res.assignments = staged
        res.routed = routed
        for pair in res.deletions:
            buffer.delete_pair(*pair)
        for fd in res.field_deletions:
            buffer.delete_field(fd)

    # -- handle-id mode

    def _curate_hid(self, pkg: ItemPackage) -> ItemPackage | None:
        record = pkg.record
        plan = self.hid_plan
        handle = record.handle or pkg.handle
        events: list[CurationEvent] = []

        if plan.kind is HidKind.ITEMS_REMOVE:
            if handle is not None and handle in plan.handles:
                self.stats.matched += 1
                ev = CurationEvent(handle, "", "removeItem", plan.file, handle or "")
                self._emit(events + [ev])
                return None
            self.stats.unmatched += 1
            return pkg

        rows = plan.rows_for(handle)
        if not rows:
            self.stats.unmatched += 1
            return pkg

        buffer = AssignmentBuffer()
        matched = False

        if plan.kind is HidKind.USE_MAP:
            matched = self._hid_usemap(rows, record, handle, buffer, events)
        elif plan.kind is HidKind.MOVE_FIELD:
            matched = self._hid_movefield(rows, record, handle, buffer, events)
        elif plan.kind is HidKind.LOOK_UP:
            matched = self._hid_lookup(rows, record, handle, buffer, events)
        elif plan.kind is HidKind.ADD_COALESCE:
            matched = self._hid_add(rows, record, handle, buffer, events)
        elif plan.kind is HidKind.DELETE_FIELD:
            matched = self._hid_delete(rows, record, handle, buffer, events)

        if buffer.is_empty():
            self._finish_plain(handle, events, matched)
            return pkg

        result = commit(
            buffer, record,
            props_for=self.props_for,
            priorities={},
            normalizer=self._normalize_hook,
        )
        self._finish(result, handle, events, matched)
        return ItemPackage(record=result.record, assets=list(pkg.assets), handle=pkg.handle)

    def _hid_usemap(self, rows, record, handle, buffer, events) -> bool:
        by_key: dict[tuple[str, str], list] = {}
        for r in rows:
            by_key.setdefault((r.source_field, r.source_value), []).append(r)
        matched = False
        for f in record.fields():
            for value in record.values(f):
                hits = by_key.get((f, value))
                if not hits:
                    continue
                matched = True
                self.stats.field_fires[f] += 1
                res = ActionResult(consumed=True)
                ctx = SubstitutionContext(value, record)
                for r in hits:
                    if r.is_remove:
                        continue
                    res.assignments.append(
                        Assignment(
                            r.target_field,
                            substitute_tokens(r.target_value, ctx),
                            f,
                            RuleRef("useMap", r.file, r.row),
                        )
                    )
                res.deletions.append((f, value))
                for a in res.assignments:
                    buffer.stage(a)
                buffer.delete_pair(f, value)
                events.append(_event_for(handle, f, "useMap", res, value, rule=hits[0].file))
        return matched

    def _hid_movefield(self, rows, record, handle, buffer, events) -> bool:
        index = MoveFieldIndex(list(rows), rows[0].file)
        matched = False
        for f in record.fields():
            if f not in index.by_field:
                continue
            for value in record.values(f):
                ctx = SubstitutionContext(value, record)
                res = apply_movefield(index, f, value, ctx)
                if not res.fired:
                    continue
                matched = True
                self.stats.field_fires[f] += 1
                if res.consumed:
                    res.deletions.append((f, value))
                for a in res.assignments:
                    buffer.stage(a)
                for pair in res.deletions:
                    buffer.delete_pair(*pair)
                events.append(_event_for(handle, f, "moveField", res, value, rule=index.file))
        return matched

    def _hid_lookup(self, rows, record, handle, buffer, events) -> bool:
        index = LookUpIndex(list(rows), rows[0].file)
        matched = False
        for f in record.fields():
            if f not in index.by_field:
                continue
            for value in record.values(f):
                ctx = SubstitutionContext(value, record)
                res = apply_lookup(index, f, value, ctx)
                if not res.fired:
                    continue
                matched = True
                self.stats.field_fires[f] += 1
                for a in res.assignments:
                    buffer.stage(a)
                for pair in res.deletions:
                    buffer.delete_pair(*pair)
                events.append(_event_for(handle, f, "lookUp", res, value, rule=index.file))
        return matched

    def _hid_add(self, rows, record, handle, buffer, events) -> bool:
        matched = False
        for r in rows:
            if r.mode == "coalesce" and record.has(r.target_field):
                continue
            matched = True
            res = ActionResult()
            parts = split_parts(r.target_value, r.mul_sep or None)
            ref = RuleRef(r.mode, r.file, r.row)
            for part in parts:
                res.assignments.append(Assignment(r.target_field, part, r.target_field, ref))
            self.stats.field_fires[r.target_field] += 1
            for a in res.assignments:
                buffer.stage(a)
            events.append(
                _event_for(handle, r.target_field, r.mode, res, "", rule="%s:%d" % (r.file, r.row))
            )
        return matched

    def _hid_delete(self, rows, record, handle, buffer, events) -> bool:
        matched = False
        for r in rows:
            res = apply_delete_field(r.field, record.has(r.field))
            buffer.delete_field(r.field)
            if res.consumed:
                matched = True
                self.stats.field_fires[r.field] += 1
            events.append(
                _event_for(handle, r.field, "deleteField", res, "", rule="%s:%d" % (r.file, r.row))
            )
        return matched

    # -- shared tail

    def _normalize_hook(self, field, props, values):
        if self.normalizer is None:
            return values, None
        if not props.validation or props.datatype.lower() in ("", "text"):
            return values, None
        try:
            return self.normalizer.normalize(field, props.datatype, values), None
        except NormalizeFailure as exc:
            return values, str(exc)

    def _finish(self, result, handle, events, matched) -> None:
        for f, value, reason in result.validation_failures:
            self.stats.validation_failures.append((handle, f, value, reason))
            events.append(
                CurationEvent(handle, f, "validate", "-", value, note=reason)
            )
        for f, warning in result.normalizer_warnings:
            self.stats.warnings.append("normalize %s: %s" % (f, warning))
            events.append(CurationEvent(handle, f, "normalize", "-", "", note=warning))
        self._finish_plain(handle, events, matched)

    def _finish_plain(self, handle, events, matched) -> None:
        if matched:
            self.stats.matched += 1
        else:
            self.stats.unmatched += 1
        self._emit(events)

    def _emit(self, events) -> None:
        if self.audit_sink is None:
            return
        for e in events:
            self.audit_sink.record(e)
