"""Command line front end.

Wires a run-properties file to the pipeline: parse configuration, ask the
operator the Yes/No questions the run raises, stream source packages
through the engine into the target, then report. Prompts and progress go
to stderr and never touch the produced data; stdin answers the prompts.

Exit codes: 0 success, 1 configuration problem or a declined prompt
(before any output exists), 2 broken data mid-stream.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

from adct.audit import AuditSink, RunReport, make_report_dir, write_summary
from adct.engine import CurationEngine, RuleEnvironment
from adct.errors import (
    ConfigFileMissing,
    LogicError,
    RuleError,
    RunConfigError,
    SchemaError,
    SourceError,
)
from adct.logic import parse_logic_collection, parse_logic_hid
from adct.normalize import HttpNormalizer
from adct.runconfig import RunMode, parse_run_properties, resolve_paths
from adct.schema import EMPTY_SCHEMA, parse_schema
from adct.sources import read_source, read_written_target, write_csv, write_target

USAGE = "usage: adct (-c|-h) <file.run.properties> [--yes] [--quiet]"

PROGRESS_EVERY = 10000

PROMPT_HANDLE = (
    "Handle_ID format not specified. Program will terminate if no Handle_ID"
    " found during curation.",
    "Do you still want to run curation [Yes/No]",
)
PROMPT_SCHEMA = (
    "Schema file and type are not defined in run.properties. System shall"
    " process with the default general schema.",
    "Do you agree?[Yes/No]",
)
PROMPT_NO_LOGIC = (
    "No Logic definition found. Data will be copied over from source to"
    " target. Continue?[Yes/No]"
)
PROMPT_EXPORT = "Do you want a CSV of the data?"


class UsageError(Exception):
    pass


class Declined(Exception):
    """The operator answered No; the run stops before producing output."""


@dataclass
class CliArgs:
    mode: RunMode
    runfile: Path
    yes: bool = False
    quiet: bool = False


def parse_args(argv) -> CliArgs:
    mode = None
    runfile = None
    yes = quiet = False
    for arg in argv:
        if arg == "-c":
            new = RunMode.COLLECTION
        elif arg == "-h":
            new = RunMode.HANDLE_ID
        elif arg == "--yes":
            yes = True
            continue
        elif arg == "--quiet":
            quiet = True
            continue
        elif arg == "--help":
            raise UsageError("help")
        elif arg.startswith("-"):
            raise UsageError("unknown option: %s" % arg)
        else:
            if runfile is not None:
                raise UsageError("unexpected argument: %s" % arg)
            runfile = Path(arg)
            continue
        if mode is not None and mode is not new:
            raise UsageError("options -c and -h are mutually exclusive")
        mode = new
    if mode is None:
        raise UsageError("one of -c or -h is required")
    if runfile is None:
        raise UsageError("missing run.properties path")
    return CliArgs(mode=mode, runfile=runfile, yes=yes, quiet=quiet)


class Console:
    """Prompt/progress plumbing around the three standard streams."""

    def __init__(self, stdin, stderr, yes=False, quiet=False):
        self.stdin = stdin
        self.stderr = stderr
        self.yes = yes
        self.quiet = quiet

    def say(self, text: str) -> None:
        print(text, file=self.stderr)

    def info(self, text: str) -> None:
        if not self.quiet:
            print(text, file=self.stderr)

    def confirm(self, *lines: str) -> bool:
        if self.yes:
            return True
        for line in lines:
            self.say(line)
        answer = self.stdin.readline()
        if not answer:
            return False
        return answer.strip().lower() in ("y", "yes")

    def require(self, *lines: str) -> None:
        if not self.confirm(*lines):
            raise Declined()


def fmt_duration(seconds: float) -> str:
    whole = int(seconds)
    mins, secs = whole // 60, whole % 60
    if mins:
        return "%d mins %d seconds" % (mins, secs)
    return "%d seconds" % secs


def _walk_descriptors(descs):
    for d in descs:
        yield d
        yield from _walk_descriptors(d.nested)


def _confirm_plan(plan, console: Console) -> None:
    """Per-field parse acknowledgements plus the questions a plan raises:
    defaulted rule files and fields that will copy verbatim."""
    confirmed: set[str] = set()
    warned_no_logic = False
    for f, ftb in plan.ftbs.items():
        console.info("Parsing %s logic..." % f)
        for d in _walk_descriptors(ftb.actions):
            if not d.input_file_defaulted or d.input_file in confirmed:
                continue
            confirmed.add(d.input_file)
            console.require(
                "%s configuration file not specified. Default file %s shall"
                " be used. Continue?[Yes/No]" % (d.kind.value, d.input_file)
            )
        if not ftb.actions and not warned_no_logic:
            warned_no_logic = True
            console.require(PROMPT_NO_LOGIC)
    if not plan.ftbs and not warned_no_logic:
        console.require(PROMPT_NO_LOGIC)


def _tick(stream, console: Console, start: float, counter: dict, template):
    for n, pkg in enumerate(stream, 1):
        counter["n"] = n
        if n % PROGRESS_EVERY == 0:
            console.info(template(n, time.monotonic() - start))
        yield pkg


def run(argv, stdin=None, stderr=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stderr = stderr if stderr is not None else sys.stderr

    try:
        args = parse_args(argv)
    except UsageError as exc:
        if str(exc) == "help":
            print(USAGE, file=stderr)
            return 0
        print("error: %s" % exc, file=stderr)
        print(USAGE, file=stderr)
        return 1

    console = Console(stdin, stderr, yes=args.yes, quiet=args.quiet)
    started = time.monotonic()

    try:
        return _run_configured(args, console, started)
    except Declined:
        print("Aborted.", file=stderr)
        return 1
    except (RunConfigError, SchemaError, LogicError, RuleError, ConfigFileMissing) as exc:
        print("error: %s" % exc, file=stderr)
        return 1
    except (SourceError, OSError) as exc:
        print("error: %s" % exc, file=stderr)
        return 2


def _run_configured(args: CliArgs, console: Console, started: float) -> int:
    try:
        text = args.runfile.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunConfigError("cannot read %s: %s" % (args.runfile, exc)) from None

    props = parse_run_properties(text, args.mode)
    cfg = resolve_paths(props, args.runfile.resolve().parent, args.mode)

    if props.handle_id_format is None:
        console.require(*PROMPT_HANDLE)

    schema = EMPTY_SCHEMA
    if cfg.schema_path is None:
        console.require(*PROMPT_SCHEMA)
    else:
        try:
            schema = parse_schema(cfg.schema_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise RunConfigError("cannot read schema: %s" % exc) from None

    try:
        logic_text = cfg.logic_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunConfigError("cannot read logic: %s" % exc) from None

    plan = hid_plan = None
    if args.mode is RunMode.COLLECTION:
        plan = parse_logic_collection(logic_text)
        _confirm_plan(plan, console)
    else:
        hid_plan = parse_logic_hid(logic_text, file=cfg.logic_path.name)
        if hid_plan.is_empty():
            console.require(PROMPT_NO_LOGIC)

    sink = None
    if props.audit_handles:
        sink = AuditSink(cfg.log_dir, handles=props.audit_handles)
    normalizer = HttpNormalizer(props.service_ip) if props.service_ip else None

    engine = CurationEngine(
        RuleEnvironment(cfg.config_dir),
        plan=plan,
        hid_plan=hid_plan,
        schema=schema,
        normalizer=normalizer,
        audit_sink=sink,
    )
    engine.preload_rules()

    counter = {"n": 0}
    template = lambda n, dt: "Processed %d records in %s." % (n, fmt_duration(dt))
    try:
        stream = _tick(read_source(cfg), console, started, counter, template)
        write_target(engine.run(stream), cfg)
    finally:
        if sink is not None:
            sink.close()

    total = engine.stats.total
    if total % PROGRESS_EVERY != 0 or total == 0:
        console.info(template(total, time.monotonic() - started))

    report_dir = make_report_dir(cfg.report_base)
    if engine.stats.emitted > 0 and console.confirm(PROMPT_EXPORT):
        _export_csv(cfg, console, report_dir)

    elapsed = time.monotonic() - started
    stats = engine.stats
    warnings = list(props.warnings)
    if plan is not None:
        warnings += list(plan.warnings)
    warnings += list(schema.warnings) + list(stats.warnings)
    if sink is not None:
        warnings += sink.warnings
    report = RunReport(
        total=stats.total,
        matched=stats.matched,
        unmatched=stats.unmatched,
        emitted=stats.emitted,
        removed=stats.removed,
        duration_seconds=elapsed,
        field_fires=dict(stats.field_fires),
        validation_failures=list(stats.validation_failures),
        warnings=warnings,
    )
    write_summary(report_dir, report)

    console.say("Matched #:%d UnMatched #:%d" % (stats.matched, stats.unmatched))
    console.say("Report Destination: %s" % report_dir)
    console.say("Total Processing Time %s." % fmt_duration(elapsed))
    return 0


def _export_csv(cfg, console: Console, report_dir: Path) -> None:
    name = cfg.target_path.name
    export_start = time.monotonic()
    counter = {"n": 0}
    template = lambda n, dt: "Processed (%s: %d) Total: %d records in %s." % (
        name, n, n, fmt_duration(dt)
    )
    stream = _tick(read_written_target(cfg), console, export_start, counter, template)
    count = write_csv(
        stream,
        report_dir / "export.csv",
        field_sep=cfg.props.csv_field_sep,
        multi_sep=cfg.props.csv_multi_value_sep,
    )
    if count % PROGRESS_EVERY != 0 or count == 0:
        console.info(template(count, time.monotonic() - export_start))


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
