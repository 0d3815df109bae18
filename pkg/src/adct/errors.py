"""Exception hierarchy shared across the package.

Configuration-time problems (bad run.properties, schema, logic, or rule
tables) and data-time problems (broken items, missing handles) are kept on
separate branches so the command line can map them to distinct exit codes.
"""

from __future__ import annotations


class AdctError(Exception):
    """Base class for every error raised by this package."""


# --- run.properties ---------------------------------------------------------

class RunConfigError(AdctError):
    """Invalid or incomplete run.properties input."""


class MissingMandatory(RunConfigError):
    def __init__(self, keys):
        self.keys = tuple(keys)
        super().__init__("missing mandatory key(s): %s" % ", ".join(self.keys))


class DuplicateKey(RunConfigError):
    def __init__(self, key):
        self.key = key
        super().__init__("duplicate key: %s" % key)


class BadSourceType(RunConfigError):
    def __init__(self, value):
        self.value = value
        super().__init__(
            "unsupported sourceType %r (expected SIP-TAR, SIP-FOLDER or CSV)" % value
        )


class LogicExtensionMismatch(RunConfigError):
    def __init__(self, mode, filename):
        self.mode = mode
        self.filename = filename
        super().__init__("logic file %r does not match run mode %s" % (filename, mode))


class ConfigDirMissing(RunConfigError):
    def __init__(self, path):
        self.path = path
        super().__init__("configPath does not exist: %s" % path)


class SourceFileMissing(RunConfigError):
    def __init__(self, path):
        self.path = path
        super().__init__("sourceData does not exist: %s" % path)


# --- schema -----------------------------------------------------------------

class SchemaError(AdctError):
    """Invalid schema document."""


class NonBooleanProperty(SchemaError):
    def __init__(self, field, key, value):
        self.field = field
        self.key = key
        self.value = value
        super().__init__(
            "schema entry %r: %s must be boolean, got %r" % (field, key, value)
        )


class ValidationFailure(AdctError):
    """A value did not satisfy its field's datatype rules.

    Raised by validate_value and caught at commit time; a failure drops the
    value and is logged, it never aborts a run.
    """

    def __init__(self, datatype, value, reason=""):
        self.datatype = datatype
        self.value = value
        self.reason = reason or "not a valid %s" % datatype
        super().__init__("%r: %s" % (value, self.reason))


# --- logic files ------------------------------------------------------------

class LogicError(AdctError):
    """Invalid curation logic document."""


class MalformedDocument(LogicError, SchemaError):
    """Structurally broken JSON/CSV input (shared by schema and logic)."""


class MissingFieldsKey(LogicError):
    def __init__(self):
        super().__init__('logic document has no top-level "Fields" object')


class UnknownAction(LogicError):
    def __init__(self, field, name):
        self.field = field
        self.name = name
        super().__init__("field %r lists unknown action %r" % (field, name))


class EmptyDescriptor(LogicError):
    def __init__(self, field, name):
        self.field = field
        self.name = name
        super().__init__("field %r: action descriptor %r is present but empty" % (field, name))


class DependencyCycle(LogicError):
    def __init__(self, fields):
        self.fields = tuple(fields)
        super().__init__("dependency cycle among: %s" % ", ".join(self.fields))


class UnknownHeaderSignature(LogicError):
    def __init__(self, header):
        self.header = tuple(header)
        super().__init__("rule CSV header matches no known layout: %r" % (header,))


class BadMode(LogicError):
    def __init__(self, file, row, value):
        self.file = file
        self.row = row
        self.value = value
        super().__init__("%s:%d: mode must be add or coalesce, got %r" % (file, row, value))


# --- rule tables ------------------------------------------------------------

class RuleError(AdctError):
    """Invalid rule table content."""

    def __init__(self, file, row, message):
        self.file = file
        self.row = row
        super().__init__("%s:%s: %s" % (file, row if row is not None else "?", message))


class HeaderOrderMismatch(RuleError):
    def __init__(self, file, got, want):
        self.got = tuple(got)
        self.want = tuple(want)
        RuleError.__init__(self, file, 1, "header %r does not match expected %r" % (got, want))


class HalfRemoveRow(RuleError):
    def __init__(self, file, row):
        RuleError.__init__(
            self, file, row, 'targetField and targetValue must both be "remove" or neither'
        )


class BadMatchType(RuleError):
    def __init__(self, file, row, value):
        RuleError.__init__(self, file, row, "matchType must be equals or contains, got %r" % value)


class BadTargetValueType(RuleError):
    def __init__(self, file, row, value):
        RuleError.__init__(self, file, row, 'targetValueType must be "value", got %r' % value)


class BadExprType(RuleError):
    def __init__(self, file, row, value):
        RuleError.__init__(self, file, row, "unsupported expression type %r" % value)


class BadCountExpr(RuleError):
    def __init__(self, file, row, value):
        RuleError.__init__(self, file, row, "malformed count expression %r" % value)


class BadRegex(RuleError):
    def __init__(self, file, row, detail):
        RuleError.__init__(self, file, row, "bad regular expression: %s" % detail)


class MalformedRow(RuleError):
    pass


# --- sources ----------------------------------------------------------------

class SourceError(AdctError):
    """Broken source data encountered while streaming records."""


class MalformedItem(SourceError):
    def __init__(self, path, detail=""):
        self.path = str(path)
        msg = "malformed item: %s" % path
        if detail:
            msg += " (%s)" % detail
        super().__init__(msg)


class MissingHandleNoFormat(SourceError):
    def __init__(self, where):
        super().__init__(
            "no Handle_ID present at %s and no handleIdFormat configured" % where
        )


class EmptyHandleAfterExpansion(SourceError):
    def __init__(self, template):
        self.template = template
        super().__init__("handleIdFormat %r expanded to an empty handle" % template)


# --- engine -----------------------------------------------------------------

class EngineError(AdctError):
    """Curation pipeline failure."""


class ConfigFileMissing(EngineError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__("rule input file not found: %s" % path)


class NormalizeFailure(EngineError):
    """The normalisation service failed; values pass through unchanged."""
