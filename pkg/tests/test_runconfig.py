import pytest

from adct.errors import (
    BadSourceType,
    ConfigDirMissing,
    DuplicateKey,
    LogicExtensionMismatch,
    MissingMandatory,
    RunConfigError,
    SourceFileMissing,
)
from adct.runconfig import (
    RunMode,
    SourceType,
    parse_run_properties,
    render_run_properties,
    resolve_paths,
)

MINIMAL = (
    "sourceData=in.tar.gz\n"
    "sourceType=SIP-TAR\n"
    "targetData=out.tar.gz\n"
    "logic=logic.json\n"
)


def test_minimal_collection_defaults():
    props = parse_run_properties(MINIMAL, RunMode.COLLECTION)
    assert props.source_data == "in.tar.gz"
    assert props.source_type is SourceType.SIP_TAR
    assert props.target_data == "out.tar.gz"
    assert props.logic == "logic.json"
    assert props.audit_handles == ()
    assert props.schema_type == "general"
    assert props.csv_field_sep == ","
    assert props.csv_multi_value_sep == ";"
    assert props.handle_id_format is None
    assert props.warnings == ()


def test_key_spelling_variants_collapse():
    text = (
        "source_data=in.tar.gz\n"
        "Source-Type=sip-tar\n"
        "TARGET DATA=out.tar.gz\n"
        "LOGIC=logic.json\n"
    )
    props = parse_run_properties(text, RunMode.COLLECTION)
    assert props.source_data == "in.tar.gz"
    assert props.source_type is SourceType.SIP_TAR
    assert props.target_data == "out.tar.gz"


def test_comments_and_blank_lines_ignored():
    text = "# a comment\n\n" + MINIMAL + "\n# trailing\n"
    props = parse_run_properties(text, RunMode.COLLECTION)
    assert props.logic == "logic.json"


def test_values_keep_internal_spaces_but_trim_ends():
    text = MINIMAL + "handleIdFormat=  prefix/suffix with space  \n"
    props = parse_run_properties(text, RunMode.COLLECTION)
    assert props.handle_id_format == "prefix/suffix with space"


def test_missing_mandatory_lists_every_absent_key():
    with pytest.raises(MissingMandatory) as exc:
        parse_run_properties("sourceData=x\nsourceType=CSV\n", RunMode.COLLECTION)
    msg = str(exc.value)
    assert "targetData" in msg and "logic" in msg
    assert "sourceData" not in msg


def test_empty_mandatory_value_counts_as_missing():
    text = MINIMAL.replace("targetData=out.tar.gz", "targetData=")
    with pytest.raises(MissingMandatory) as exc:
        parse_run_properties(text, RunMode.COLLECTION)
    assert "targetData" in str(exc.value)


def test_duplicate_key_rejected_even_across_spellings():
    text = MINIMAL + "SOURCE_DATA=again.tar.gz\n"
    with pytest.raises(DuplicateKey) as exc:
        parse_run_properties(text, RunMode.COLLECTION)
    assert "sourceData" in str(exc.value)


def test_unknown_keys_warn_and_are_ignored():
    props = parse_run_properties(MINIMAL + "frobnicate=9\n", RunMode.COLLECTION)
    assert len(props.warnings) == 1
    assert "frobnicate" in props.warnings[0]


def test_non_key_value_line_rejected():
    with pytest.raises(RunConfigError):
        parse_run_properties("just some text\n" + MINIMAL, RunMode.COLLECTION)


def test_source_type_case_insensitive_and_validated():
    text = MINIMAL.replace("SIP-TAR", "sip-folder")
    assert (
        parse_run_properties(text, RunMode.COLLECTION).source_type
        is SourceType.SIP_FOLDER
    )
    with pytest.raises(BadSourceType):
        parse_run_properties(
            MINIMAL.replace("SIP-TAR", "zip"), RunMode.COLLECTION
        )


def test_logic_extension_must_match_mode():
    with pytest.raises(LogicExtensionMismatch):
        parse_run_properties(
            MINIMAL.replace("logic.json", "logic.csv"), RunMode.COLLECTION
        )
    with pytest.raises(LogicExtensionMismatch):
        parse_run_properties(MINIMAL, RunMode.HANDLE_ID)
    props = parse_run_properties(
        MINIMAL.replace("logic.json", "Hid_useMap.csv"), RunMode.HANDLE_ID
    )
    assert props.logic == "Hid_useMap.csv"


def test_audit_handles_split_and_trimmed():
    text = MINIMAL + "auditHandle= h/1 , h/2,,h/3  \n"
    props = parse_run_properties(text, RunMode.COLLECTION)
    assert props.audit_handles == ("h/1", "h/2", "h/3")


def test_render_parse_round_trip():
    text = (
        MINIMAL
        + "auditHandle=a,b\nlogPath=logs\nconfigPath=conf\n"
        + "handleIdFormat=col/$item$\nserviceIP=10.0.0.5:8080\n"
        + "csvFieldSep=;\ncsvMultiValueSep=|\n"
    )
    props = parse_run_properties(text, RunMode.COLLECTION)
    again = parse_run_properties(render_run_properties(props), RunMode.COLLECTION)
    assert again == props


def test_resolve_paths_anchors_and_creates(tmp_path):
    (tmp_path / "conf").mkdir()
    (tmp_path / "in.tar.gz").write_bytes(b"")
    text = MINIMAL + "configPath=conf\nlogPath=logs/run\n"
    props = parse_run_properties(text, RunMode.COLLECTION)
    cfg = resolve_paths(props, tmp_path, RunMode.COLLECTION)
    assert cfg.config_dir == tmp_path / "conf"
    assert cfg.logic_path == tmp_path / "conf" / "logic.json"
    assert cfg.log_dir == tmp_path / "logs" / "run"
    assert cfg.log_dir.is_dir()
    assert cfg.source_path == tmp_path / "in.tar.gz"
    assert cfg.target_path == tmp_path / "out.tar.gz"
    assert cfg.report_base == tmp_path


def test_resolve_paths_missing_config_dir(tmp_path):
    (tmp_path / "in.tar.gz").write_bytes(b"")
    props = parse_run_properties(MINIMAL + "configPath=nope\n", RunMode.COLLECTION)
    with pytest.raises(ConfigDirMissing):
        resolve_paths(props, tmp_path, RunMode.COLLECTION)


def test_resolve_paths_missing_source(tmp_path):
    props = parse_run_properties(MINIMAL, RunMode.COLLECTION)
    with pytest.raises(SourceFileMissing):
        resolve_paths(props, tmp_path, RunMode.COLLECTION)


def test_resolve_paths_absolute_target_wins(tmp_path):
    (tmp_path / "in.tar.gz").write_bytes(b"")
    elsewhere = tmp_path / "elsewhere" / "out.tar.gz"
    text = MINIMAL.replace("targetData=out.tar.gz", "targetData=%s" % elsewhere)
    props = parse_run_properties(text, RunMode.COLLECTION)
    cfg = resolve_paths(props, tmp_path, RunMode.COLLECTION)
    assert cfg.target_path == elsewhere
    assert cfg.report_base == elsewhere.parent
