"""Layout parsing, annotation parsing, canonical serialization, corpus loading."""

from __future__ import annotations

import json
import logging
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diagraph.ingest import (
    DuplicateId,
    MalformedDocument,
    ManifestNotFound,
    MissingCoordinates,
    SchemaViolation,
    CorpusManifest,
    ManifestEntry,
    load_corpus,
    parse_ai2d,
    parse_ai2drst,
    read_manifest,
    serialize,
    skeleton_diagram,
    write_manifest,
)
from diagraph.model import ElementKind, Nuclearity
from diagraph.validation import validate_diagram

from .fixtures import (
    INVALID_DOCUMENTS,
    doc_bytes,
    doc_layout,
    face_diagram,
    food_web_diagram,
    minimal_annotation_doc,
    write_corpus,
)
from .gen_diagrams import random_diagram


AI2D_DOC = {
    "id": "274",
    "text": {"T0": {"rectangle": [[10, 10], [60, 22]], "value": "Gray wolf"}},
    "blobs": {"B0": {"polygon": [[0, 0], [30, 0], [30, 30], [0, 30]]}},
    "arrows": {"A0": {"polygon": [[40, 40], [45, 45], [50, 40]]}},
    "arrowheads": {"H0": {"rectangle": [[48, 38], [52, 42]]}},
    "imageConstants": {"I0": {}},
    "relationships": [
        {"id": "RL0", "category": "intraObjectLabel",
         "origin": "T0", "destination": "B0"}
    ],
    "imageDimensions": {"width": 320, "height": 240},
}


def ai2d_bytes(doc) -> bytes:
    return json.dumps(doc).encode("utf-8")


# ---------------------------------------------------------------------------
# parse_ai2d
# ---------------------------------------------------------------------------

def test_parse_minimal_text_only():
    doc = {"text": {"T0": {"rectangle": [[0, 0], [10, 10]], "value": "hi"}}}
    layout = parse_ai2d(ai2d_bytes(doc))
    assert len(layout.elements) == 1
    assert layout.elements[0].kind is ElementKind.TEXT
    assert layout.elements[0].text_content == "hi"
    assert layout.dpg_relationships == ()


def test_parse_all_five_kinds():
    layout = parse_ai2d(ai2d_bytes(AI2D_DOC))
    kinds = {e.kind for e in layout.elements}
    assert kinds == set(ElementKind)
    assert layout.image_width == 320 and layout.image_height == 240
    # image constant without coordinates covers the whole image
    i0 = layout.element("I0")
    assert i0.outline == ((0, 0), (320, 240))
    assert layout.dpg_relationships[0].category == "intraObjectLabel"


def test_parse_alias_section_names():
    doc = dict(AI2D_DOC)
    doc["arrowHeads"] = doc.pop("arrowheads")
    doc["imageConsts"] = doc.pop("imageConstants")
    layout = parse_ai2d(ai2d_bytes(doc))
    assert {e.kind for e in layout.elements} == set(ElementKind)


def test_parse_dangling_relationship_names_id():
    doc = dict(AI2D_DOC)
    doc["relationships"] = [
        {"id": "RL0", "category": "x", "origin": "T9", "destination": "B0"}
    ]
    with pytest.raises(MalformedDocument, match="T9"):
        parse_ai2d(ai2d_bytes(doc))


def test_parse_duplicate_id():
    doc = {
        "text": {"T0": {"rectangle": [[0, 0], [1, 1]]}},
        "blobs": {"T0": {"polygon": [[0, 0], [1, 0], [1, 1]]}},
    }
    with pytest.raises((DuplicateId, MalformedDocument)):
        parse_ai2d(ai2d_bytes(doc))


def test_parse_kind_prefix_mismatch():
    doc = {"blobs": {"T0": {"polygon": [[0, 0], [1, 0], [1, 1]]}}}
    with pytest.raises(MalformedDocument):
        parse_ai2d(ai2d_bytes(doc))


def test_parse_blob_needs_three_points():
    doc = {"blobs": {"B0": {"polygon": [[0, 0], [1, 1]]}}}
    with pytest.raises(MissingCoordinates):
        parse_ai2d(ai2d_bytes(doc))


def test_unknown_top_level_field_warns(caplog):
    doc = dict(AI2D_DOC)
    doc["containers"] = {}
    with caplog.at_level(logging.WARNING, logger="diagraph.ingest"):
        parse_ai2d(ai2d_bytes(doc))
    assert any("containers" in r.message for r in caplog.records)


def test_parse_not_json():
    with pytest.raises(MalformedDocument):
        parse_ai2d(b"]{")


# ---------------------------------------------------------------------------
# parse_ai2drst
# ---------------------------------------------------------------------------

def test_parse_wellformed_minimal_document():
    d = parse_ai2drst(doc_bytes(minimal_annotation_doc()), doc_layout())
    assert d.grouping.nodes == frozenset({"I0", "B0", "T0", "A0"})
    assert validate_diagram(d).ok


def test_parse_food_web_shape():
    doc = json.loads(serialize(food_web_diagram()).decode("utf-8"))
    d = parse_ai2drst(doc_bytes(doc), food_web_diagram().layout)
    groups = d.grouping.group_ids()
    assert len(groups) == 12
    parent = d.grouping.parent_map()
    assert all(parent[g] == "I0" for g in groups)


@pytest.mark.parametrize("name", sorted(INVALID_DOCUMENTS))
def test_invalid_documents_fail_with_expected_code(name):
    doc, expected_code = INVALID_DOCUMENTS[name]
    with pytest.raises(SchemaViolation) as excinfo:
        parse_ai2drst(doc_bytes(doc), doc_layout())
    assert excinfo.value.code == expected_code


def test_parse_is_atomic_on_garbage():
    with pytest.raises(SchemaViolation) as excinfo:
        parse_ai2drst(b"{not json", doc_layout())
    assert excinfo.value.code == "MALFORMED"


# ---------------------------------------------------------------------------
# serialize
# ---------------------------------------------------------------------------

def test_serialize_roundtrip_preserves_structure():
    d = face_diagram()
    payload = serialize(d)
    d2 = parse_ai2drst(payload, d.layout)
    assert d2.grouping.nodes == d.grouping.nodes
    assert set(d2.grouping.edges) == set(d.grouping.edges)
    assert d2.grouping.macro_labels == d.grouping.macro_labels
    assert set(d2.connectivity.edges) == set(d.connectivity.edges)
    assert set(d2.rst.participants) == set(d.rst.participants)
    assert set(d2.rst.relations) == set(d.rst.relations)
    assert set(d2.rst.edges) == set(d.rst.edges)


def test_serialize_deterministic_bytes():
    d = food_web_diagram()
    assert serialize(d) == serialize(d)


def test_serialize_canonicalizes_input_order():
    doc = minimal_annotation_doc()
    shuffled = json.loads(json.dumps(doc))
    shuffled["grouping"]["nodes"].reverse()
    shuffled["grouping"]["edges"].reverse()
    a = parse_ai2drst(doc_bytes(doc), doc_layout())
    b = parse_ai2drst(doc_bytes(shuffled), doc_layout())
    assert serialize(a) == serialize(b)


def test_split_nodes_carry_original_id_in_output():
    d = face_diagram()
    d, first = d.split_node("T5")
    d, second = d.split_node("T5")
    assert (first, second) == ("T5.1", "T5.2")
    doc = json.loads(serialize(d).decode("utf-8"))
    split_nodes = [n for n in doc["rst"]["nodes"] if "." in n["id"]]
    assert len(split_nodes) == 2
    assert all(n["originalId"] == n["id"].split(".")[0] for n in split_nodes)


def test_serialize_ends_with_newline_and_is_utf8():
    payload = serialize(face_diagram())
    assert payload.endswith(b"\n")
    payload.decode("utf-8")


def test_empty_layout_roundtrips():
    from diagraph.model import LayoutSegmentation

    layout = LayoutSegmentation("bare", 0, 0, ())
    d = skeleton_diagram(layout)
    assert d.grouping.nodes == frozenset({"I0"})
    payload = serialize(d)
    restored = parse_ai2drst(payload, layout)
    assert serialize(restored) == payload
    assert validate_diagram(restored).ok


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_roundtrip(seed):
    d = random_diagram(random.Random(seed))
    payload = serialize(d)
    d2 = parse_ai2drst(payload, d.layout)
    assert serialize(d2) == payload


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_fuzzed_documents_never_parse_to_invalid_diagrams(seed):
    """Mutate valid documents; whatever still parses must validate clean."""
    rng = random.Random(seed)
    d = random_diagram(rng)
    doc = json.loads(serialize(d).decode("utf-8"))
    for _ in range(rng.randint(1, 4)):
        section = rng.choice(["grouping", "connectivity", "rst"])
        part = doc[section]
        tweak = rng.random()
        if tweak < 0.3 and part.get("nodes"):
            part["nodes"].pop(rng.randrange(len(part["nodes"])))
        elif tweak < 0.6 and part.get("edges"):
            part["edges"].pop(rng.randrange(len(part["edges"])))
        elif part.get("edges"):
            edge = rng.choice(part["edges"])
            victim = "B999"
            if isinstance(edge, list):
                edge[rng.randrange(2)] = victim
            elif "source" in edge:
                edge["source"] = victim
            else:
                edge["child"] = victim
    try:
        mutated = parse_ai2drst(json.dumps(doc).encode(), d.layout)
    except SchemaViolation:
        return
    assert not validate_diagram(mutated).errors


# ---------------------------------------------------------------------------
# corpus loading
# ---------------------------------------------------------------------------

def test_load_empty_corpus(tmp_path):
    write_manifest(CorpusManifest(tmp_path, ()))
    manifest = read_manifest(tmp_path)
    diagrams, report = load_corpus(manifest)
    assert diagrams == [] and report.ok


def test_load_partial_failure(tmp_path):
    rng = random.Random(5)
    diagrams = [random_diagram(rng, f"d{i}") for i in range(3)]
    write_corpus(tmp_path, diagrams, corrupt_ids={"d1"})
    manifest = read_manifest(tmp_path)
    loaded, report = load_corpus(manifest)
    assert [d.diagram_id for d in loaded] == ["d0", "d2"]
    assert len(report.failures) == 1
    assert report.failures[0].diagram_id == "d1"


def test_manifest_not_found(tmp_path):
    with pytest.raises(ManifestNotFound):
        read_manifest(tmp_path / "nowhere")


# ---------------------------------------------------------------------------
# published-release converter stub
# ---------------------------------------------------------------------------

def node_link_export() -> dict:
    """A plausible node-link style dump of the face-shaped annotation."""
    return {
        "id": "face",
        "grouping": {
            "directed": False,
            "nodes": [
                {"id": "I0", "kind": "imageConstant", "macro_group": "cut-out"},
                {"id": "B0", "kind": "blob"},
                *[{"id": f"T{i}", "kind": "text"} for i in range(6)],
            ],
            "links": [
                {"source": "I0", "target": "B0"},
                *[{"source": f"T{i}", "target": "I0"} for i in range(6)],
            ],
        },
        "connectivity": {"nodes": [], "links": []},
        "rst": {
            "nodes": [
                {"id": "B0", "kind": "blob"},
                {"id": "T0", "kind": "text"},
                {"id": "R1", "kind": "relation", "rel_name": "identification"},
            ],
            "links": [
                {"source": "B0", "target": "R1", "nuclearity": "nucleus"},
                {"source": "T0", "target": "R1", "nuclearity": "satellite"},
            ],
        },
    }


def test_convert_published_maps_node_link_export():
    from diagraph.ingest import convert_published_annotation
    from diagraph.model import MacroGroup

    layout = face_diagram().layout
    d = convert_published_annotation(node_link_export(), layout)
    assert d.grouping.macro_labels == {"I0": MacroGroup.CUT_OUT}
    # undirected grouping links get oriented towards the parent side
    assert d.grouping.parent_map()["T4"] == "I0"
    assert d.rst.relations[0].name == "identification"
    assert {e.nuclearity.value for e in d.rst.edges} == {"nucleus", "satellite"}


def test_convert_published_names_unmappable_fields():
    from diagraph.ingest import convert_published_annotation

    broken = node_link_export()
    broken["grouping"]["nodes"][0]["macro_group"] = "möbius"
    with pytest.raises(MalformedDocument, match="macro-group"):
        convert_published_annotation(broken, face_diagram().layout)


def test_convert_published_rejects_invalid_structure():
    from diagraph.ingest import convert_published_annotation

    broken = node_link_export()
    broken["grouping"]["links"] = broken["grouping"]["links"][1:]  # B0 floats
    with pytest.raises(MalformedDocument, match="GROUPING_NOT_TREE"):
        convert_published_annotation(broken, face_diagram().layout)
