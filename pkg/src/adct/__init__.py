"""Batch metadata curation for SIP collections.

The package reads a collection of metadata records (SIP tar, SIP folder, or
CSV), runs each record through per-field curation pipelines described by a
logic file plus tabular rule files, and writes the curated collection back
out together with an activity report and optional per-handle audit logs.
"""

from adct.record import MetadataRecord, Assignment, AssignmentBuffer, commit
from adct.schema import FieldProps, FieldSchema, parse_schema, validate_value
from adct.logic import ActionKind, CurationPlan, parse_logic_collection, parse_logic_hid
from adct.engine import CurationEngine

__version__ = "0.1.0"

__all__ = [
    "MetadataRecord",
    "Assignment",
    "AssignmentBuffer",
    "commit",
    "FieldProps",
    "FieldSchema",
    "parse_schema",
    "validate_value",
    "ActionKind",
    "CurationPlan",
    "parse_logic_collection",
    "parse_logic_hid",
    "CurationEngine",
    "__version__",
]
