import pytest

from adct.errors import MalformedDocument, NonBooleanProperty, ValidationFailure
from adct.schema import (
    DEFAULT_PROPS,
    FieldProps,
    FieldSchema,
    coerce_bool,
    effective_props,
    parse_schema,
    validate_value,
)


def test_defaults_are_text_multivalued_validated():
    assert DEFAULT_PROPS == FieldProps(
        datatype="text", multi_valued=True, controlled=False, validation=True
    )


def test_lookup_falls_back_to_defaults():
    schema = parse_schema('{"dc.date": {"datatype": "date"}}')
    assert schema.lookup("dc.date").datatype == "date"
    assert schema.lookup("never.seen") == DEFAULT_PROPS
    assert "dc.date" in schema
    assert "never.seen" not in schema


def test_parse_partial_entry_keeps_other_defaults():
    schema = parse_schema('{"f": {"multiValued": false}}')
    props = schema.lookup("f")
    assert props.multi_valued is False
    assert props.datatype == "text"
    assert props.validation is True


def test_bool_properties_accept_strings_either_case():
    schema = parse_schema(
        '{"a": {"controlled": "TRUE"}, "b": {"validation": "False"}}'
    )
    assert schema.lookup("a").controlled is True
    assert schema.lookup("b").validation is False


def test_non_boolean_property_rejected():
    with pytest.raises(NonBooleanProperty):
        parse_schema('{"f": {"multiValued": "maybe"}}')
    with pytest.raises(NonBooleanProperty):
        coerce_bool("f", "controlled", 1)


def test_duplicate_entry_last_wins_with_warning():
    schema = parse_schema(
        '{"f": {"datatype": "date"}, "f": {"datatype": "integer"}}'
    )
    assert schema.lookup("f").datatype == "integer"
    assert any("duplicate" in w for w in schema.warnings)


def test_unknown_property_warns():
    schema = parse_schema('{"f": {"sortable": true}}')
    assert schema.lookup("f") == DEFAULT_PROPS
    assert any("sortable" in w for w in schema.warnings)


def test_malformed_documents_rejected():
    with pytest.raises(MalformedDocument):
        parse_schema("not json")
    with pytest.raises(MalformedDocument):
        parse_schema("[1, 2]")
    with pytest.raises(MalformedDocument):
        parse_schema('{"f": "date"}')
    with pytest.raises(MalformedDocument):
        parse_schema('{"f": {"datatype": 7}}')


def test_effective_props_layering():
    schema = FieldSchema({"f": FieldProps(datatype="date", multi_valued=False)})
    assert effective_props(schema, None, "f").datatype == "date"
    layered = effective_props(schema, {"multi_valued": True}, "f")
    assert layered.multi_valued is True
    assert layered.datatype == "date"
    assert effective_props(schema, {"datatype": "person"}, "other").datatype == "person"


# value validation -----------------------------------------------------------

INT = FieldProps(datatype="integer")
DATE = FieldProps(datatype="date")
PERSON = FieldProps(datatype="person")


@pytest.mark.parametrize(
    "raw, canonical",
    [("7", "7"), ("07", "7"), (" +12 ", "12"), ("-3", "-3"), ("0", "0")],
)
def test_integer_canonicalisation(raw, canonical):
    assert validate_value(INT, raw) == canonical


@pytest.mark.parametrize("raw", ["", "1.5", "12a", "a12", "1 2"])
def test_integer_rejects_non_integers(raw):
    with pytest.raises(ValidationFailure):
        validate_value(INT, raw)


@pytest.mark.parametrize(
    "raw, canonical",
    [
        ("1982", "1982"),
        ("1982-3-4", "1982-03-04"),
        ("1982/03/04", "1982-03-04"),
        ("4/3/1982", "1982-03-04"),
        ("04-03-1982", "1982-03-04"),
        ("September 28, 1892", "1892-09-28"),
        ("sep 28, 1892", "1892-09-28"),
        ("Sep. 28, 1892", "1892-09-28"),
        ("December 14, 1887", "1887-12-14"),
        ("October 3, 1894", "1894-10-03"),
        ("  1982  ", "1982"),
    ],
)
def test_date_canonicalisation(raw, canonical):
    assert validate_value(DATE, raw) == canonical


@pytest.mark.parametrize(
    "raw", ["then", "1982-13-01", "Febtober 3, 1894", "1982-03", "28/1982"]
)
def test_date_rejects_unparseable(raw):
    with pytest.raises(ValidationFailure):
        validate_value(DATE, raw)


def test_person_trims_and_text_passes_through():
    assert validate_value(PERSON, "  Moore, Robert ") == "Moore, Robert"
    assert validate_value(DEFAULT_PROPS, "  anything ") == "  anything "
    assert validate_value(FieldProps(datatype="mystery"), "x") == "x"


def test_validation_failure_message_names_the_datatype():
    with pytest.raises(ValidationFailure) as exc:
        validate_value(DATE, "then")
    assert "date" in str(exc.value)
    assert "then" in str(exc.value)
