import json

import pytest
from hypothesis import given, settings, strategies as st

from autostory.errors import LayoutParseError
from autostory.layout_parser import CLAMP_EPSILON, parse_layout_document
from autostory.model import SceneLayout, validate_scene_layout

CANONICAL = json.dumps(
    {
        "global_prompt": "a dog chases a cat in a park, photo",
        "objects": [
            {"prompt": "a brown dog running", "box": [0.05, 0.45, 0.45, 0.95], "subject": "dog"},
            {"prompt": "a grey cat leaping", "box": [0.55, 0.40, 0.90, 0.90], "subject": "cat"},
        ],
    }
)


def test_parses_canonical_document():
    layout = parse_layout_document(CANONICAL)
    assert layout.global_prompt == "a dog chases a cat in a park, photo"
    assert layout.panel_index == 1
    assert [b.subject_ref for b in layout.bindings] == ["dog", "cat"]
    assert layout.bindings[0].box.to_list() == [0.05, 0.45, 0.45, 0.95]
    assert validate_scene_layout(layout).ok


def test_subject_field_is_optional():
    doc = '{"global_prompt": "g", "objects": [{"prompt": "a tree", "box": [0, 0, 1, 1]}]}'
    assert parse_layout_document(doc).bindings[0].subject_ref is None


def test_clamps_coordinates_within_epsilon():
    doc = json.dumps(
        {
            "global_prompt": "g",
            "objects": [{"prompt": "a tree", "box": [-CLAMP_EPSILON / 2, 0.0, 1.0, 1.0 + CLAMP_EPSILON / 2]}],
        }
    )
    box = parse_layout_document(doc).bindings[0].box
    assert box.to_list() == [0.0, 0.0, 1.0, 1.0]


def err(doc, **kwargs) -> LayoutParseError:
    with pytest.raises(LayoutParseError) as excinfo:
        parse_layout_document(doc, **kwargs)
    return excinfo.value


def test_rejects_empty_and_non_json():
    assert "empty" in str(err(""))
    assert "invalid JSON" in str(err("not json at all"))


def test_rejects_duplicate_keys():
    doc = '{"global_prompt": "g", "global_prompt": "h", "objects": []}'
    assert "duplicate" in str(err(doc))


def test_rejects_nan_and_infinity_tokens():
    doc = '{"global_prompt": "g", "objects": [{"prompt": "p", "box": [NaN, 0, 1, 1]}]}'
    assert err(doc) is not None
    doc = '{"global_prompt": "g", "objects": [{"prompt": "p", "box": [Infinity, 0, 1, 1]}]}'
    assert err(doc) is not None


def test_rejects_trailing_prose_with_position():
    doc = CANONICAL + "\nHope that helps!"
    error = err(doc)
    assert "trailing" in str(error)
    assert error.line == 2 and error.col == 1


def test_leading_whitespace_is_fine():
    assert isinstance(parse_layout_document("\n  " + CANONICAL), SceneLayout)


def test_rejects_unknown_fields_at_both_levels():
    assert err('{"global_prompt": "g", "objects": [], "style": "x"}').path == "style"
    doc = '{"global_prompt": "g", "objects": [{"prompt": "p", "box": [0, 0, 1, 1], "color": "red"}]}'
    assert "color" in str(err(doc))


def test_object_count_violations_carry_codes():
    assert err('{"global_prompt": "g", "objects": []}').violation == "NO_BINDINGS"
    objects = [{"prompt": "p", "box": [0, 0, 1, 1]}] * 7
    doc = json.dumps({"global_prompt": "g", "objects": objects})
    assert err(doc).violation == "TOO_MANY_SUBJECTS"
    assert parse_layout_document(doc, max_objects=7).bindings[0].local_prompt == "p"


def test_value_violations_carry_codes():
    doc = '{"global_prompt": "g", "objects": [{"prompt": "p", "box": [0, 0, 2, 1]}]}'
    assert err(doc).violation == "BOX_OUT_OF_RANGE"
    doc = '{"global_prompt": "g", "objects": [{"prompt": "p", "box": [0.5, 0, 0.5, 1]}]}'
    assert err(doc).violation == "BOX_DEGENERATE"
    doc = '{"global_prompt": "g", "objects": [{"prompt": "  ", "box": [0, 0, 1, 1]}]}'
    assert err(doc).violation == "EMPTY_PROMPT"


@pytest.mark.parametrize(
    "box",
    [[0, 0, 1], [0, 0, 1, 1, 1], ["a", 0, 1, 1], [True, 0, 1, 1], None, "0,0,1,1"],
)
def test_rejects_malformed_boxes(box):
    doc = json.dumps({"global_prompt": "g", "objects": [{"prompt": "p", "box": box}]})
    assert err(doc).code == "PARSE_FAILED"


def test_error_positions_are_one_based():
    error = err('   {"bad json')
    assert error.line >= 1 and error.col >= 1


# Totality: any input either parses to a layout that passes validation apart
# from subject-count limits, or raises LayoutParseError. Nothing else.
@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_is_total_on_arbitrary_text(raw):
    try:
        layout = parse_layout_document(raw)
    except LayoutParseError:
        return
    report = validate_scene_layout(layout, pronouns=())
    assert all(v.code in ("PRONOUN_IN_PROMPT",) for v in report.violations)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(
        st.fixed_dictionaries(
            {
                "prompt": st.text(min_size=1, max_size=20),
                "box": st.lists(st.floats(-0.5, 1.5, allow_nan=False), min_size=4, max_size=4),
            }
        ),
        min_size=1,
        max_size=6,
    ),
    st.text(max_size=40),
)
def test_parser_is_total_on_plausible_documents(objects, prompt):
    raw = json.dumps({"global_prompt": prompt, "objects": objects})
    try:
        layout = parse_layout_document(raw)
    except LayoutParseError:
        return
    # whatever came back satisfies every box and prompt invariant
    report = validate_scene_layout(layout, pronouns=())
    assert report.ok
