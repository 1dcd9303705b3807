"""Hand-built diagrams and documents reused across the test modules."""

from __future__ import annotations

import json

from diagraph.ingest import (
    CorpusManifest,
    ManifestEntry,
    serialize,
    skeleton_diagram,
    write_manifest,
)
from diagraph.model import (
    ConnectionKind,
    Diagram,
    DiagramElement,
    ElementKind,
    LayoutSegmentation,
    MacroGroup,
)

RECT = ((0, 0), (10, 10))
TRI = ((0, 0), (10, 0), (5, 8))


def layout_from_ids(diagram_id: str, ids: list[str]) -> LayoutSegmentation:
    kinds = {
        "B": ElementKind.BLOB, "T": ElementKind.TEXT, "A": ElementKind.ARROW,
        "H": ElementKind.ARROWHEAD, "I": ElementKind.IMAGE_CONSTANT,
    }
    elements = []
    for eid in ids:
        kind = kinds[eid[0]]
        outline = TRI if kind in (ElementKind.BLOB, ElementKind.ARROW) else RECT
        text = f"text {eid}" if kind is ElementKind.TEXT else None
        elements.append(DiagramElement(eid, kind, outline, text))
    return LayoutSegmentation(diagram_id, 200, 200, tuple(elements))


def face_diagram() -> Diagram:
    """The anatomy-poster shape: five part labels joined and elaborating an
    illustration, a title preparing the whole. Built through the public ops,
    so relation ids are R0 (joint), R1 (elaboration), R2 (preparation)."""
    layout = layout_from_ids("face", ["B0", "T0", "T1", "T2", "T3", "T4", "T5", "I0"])
    d = skeleton_diagram(layout)
    d, r_joint = d.add_relation("joint", ["T0", "T1", "T2", "T4", "T5"])
    d, r_elab = d.add_relation("elaboration", ["B0"], [r_joint])
    d, r_prep = d.add_relation("preparation", [r_elab], ["T3"])
    return d


def food_web_diagram() -> Diagram:
    """A network-shaped diagram: twelve illustration+label groups under the
    root, independent arrows, one directed connection between two groups."""
    ids = [f"B{i}" for i in range(12)] + [f"T{i}" for i in range(12)]
    ids += [f"A{i}" for i in range(4)] + ["I0"]
    layout = layout_from_ids("food-web", ids)
    d = skeleton_diagram(layout)
    groups = []
    for i in range(12):
        d, gid = d.add_group([f"B{i}", f"T{i}"])
        groups.append(gid)
    d = d.set_macro_label("I0", MacroGroup.NETWORK)
    d = d.add_connection(groups[0], groups[1], ConnectionKind.DIRECTED)
    return d


def two_label_diagram() -> Diagram:
    """Small cut-out: one blob described by two labels via identification."""
    layout = layout_from_ids("cutout", ["B0", "T0", "T1", "I0"])
    d = skeleton_diagram(layout)
    d, _ = d.add_group(["B0", "T0"])
    d = d.set_macro_label("I0", MacroGroup.CUT_OUT)
    d, _ = d.add_relation("identification", ["B0"], ["T0", "T1"])
    return d


def minimal_annotation_doc(**overrides) -> dict:
    """A well-formed canonical annotation document for a 3-element layout
    (B0, T0, A0 plus the image constant). Tests mutate copies of it."""
    doc = {
        "id": "doc0",
        "grouping": {
            "nodes": [
                {"id": "I0", "kind": "imageConstant"},
                {"id": "B0", "kind": "blob"},
                {"id": "T0", "kind": "text"},
                {"id": "A0", "kind": "arrow"},
            ],
            "edges": [["I0", "B0"], ["I0", "T0"], ["I0", "A0"]],
            "macro": [],
        },
        "connectivity": {"nodes": [], "edges": []},
        "rst": {"nodes": [], "edges": []},
    }
    doc.update(overrides)
    return doc


def doc_layout() -> LayoutSegmentation:
    return layout_from_ids("doc0", ["B0", "T0", "A0", "I0"])


def doc_bytes(doc: dict) -> bytes:
    return json.dumps(doc).encode("utf-8")


def layout_to_ai2d_doc(layout: LayoutSegmentation) -> dict:
    """Render a layout back into the upstream document format."""
    return {
        "id": layout.diagram_id,
        "text": {
            e.id: {"rectangle": [list(p) for p in e.outline],
                   "value": e.text_content or ""}
            for e in layout.elements if e.kind is ElementKind.TEXT
        },
        "blobs": {
            e.id: {"polygon": [list(p) for p in e.outline]}
            for e in layout.elements if e.kind is ElementKind.BLOB
        },
        "arrows": {
            e.id: {"polygon": [list(p) for p in e.outline]}
            for e in layout.elements if e.kind is ElementKind.ARROW
        },
        "arrowheads": {
            e.id: {"rectangle": [list(p) for p in e.outline]}
            for e in layout.elements if e.kind is ElementKind.ARROWHEAD
        },
        "imageConstants": {
            e.id: {} for e in layout.elements
            if e.kind is ElementKind.IMAGE_CONSTANT
        },
        "imageDimensions": {
            "width": layout.image_width, "height": layout.image_height
        },
    }


def write_corpus(root, diagrams, corrupt_ids=(), annotation_overrides=None):
    """Materialize diagrams as an on-disk corpus with a manifest."""
    (root / "ai2d").mkdir(exist_ok=True)
    (root / "annotations").mkdir(exist_ok=True)
    entries = []
    for d in diagrams:
        (root / "ai2d" / f"{d.diagram_id}.json").write_text(
            json.dumps(layout_to_ai2d_doc(d.layout))
        )
        annotation = serialize(d)
        if d.diagram_id in corrupt_ids:
            annotation = b'{"grouping": {"nodes": [{"id": "G0", "kind": "group"}]}}'
        if annotation_overrides and d.diagram_id in annotation_overrides:
            annotation = annotation_overrides[d.diagram_id]
        (root / "annotations" / f"{d.diagram_id}.json").write_bytes(annotation)
        entries.append(ManifestEntry(
            diagram_id=d.diagram_id,
            ai2d_path=f"ai2d/{d.diagram_id}.json",
            annotation_path=f"annotations/{d.diagram_id}.json",
        ))
    manifest = CorpusManifest(root, tuple(entries))
    write_manifest(manifest)
    return manifest


def _doc(mutate) -> dict:
    doc = minimal_annotation_doc()
    mutate(doc)
    return doc


def _grouping_cycle(doc):
    doc["grouping"]["nodes"] += [
        {"id": "G1", "kind": "group"}, {"id": "G2", "kind": "group"},
    ]
    doc["grouping"]["edges"] = [
        ["I0", "G1"], ["G1", "G2"], ["G2", "I0"], ["G1", "B0"], ["G2", "T0"],
        ["I0", "A0"],
    ]


def _singleton_group(doc):
    doc["grouping"]["nodes"].append({"id": "G0", "kind": "group"})
    doc["grouping"]["edges"] = [["I0", "G0"], ["G0", "B0"], ["I0", "T0"], ["I0", "A0"]]


def _unknown_macro(doc):
    doc["grouping"]["macro"] = [{"node": "I0", "label": "spiral"}]


def _macro_on_leaf(doc):
    doc["grouping"]["macro"] = [{"node": "T0", "label": "cycle"}]


def _dangling_connectivity(doc):
    doc["connectivity"]["edges"] = [
        {"source": "B0", "target": "B9", "kind": "directed"}
    ]


def _dangling_grouping(doc):
    doc["grouping"]["nodes"].append({"id": "B7", "kind": "blob"})
    doc["grouping"]["edges"].append(["I0", "B7"])


def _missing_root(doc):
    doc["grouping"]["nodes"] = [
        {"id": "B0", "kind": "blob"}, {"id": "T0", "kind": "text"},
    ]
    doc["grouping"]["edges"] = []


def _disconnected_node(doc):
    doc["grouping"]["edges"] = [["I0", "T0"], ["I0", "A0"]]  # B0 left floating


def _arrowhead_in_grouping(doc):
    doc["grouping"]["nodes"].append({"id": "H0", "kind": "arrowhead"})
    doc["grouping"]["edges"].append(["I0", "H0"])


def _split_in_grouping(doc):
    doc["grouping"]["nodes"].append({"id": "T0.1", "kind": "text"})
    doc["grouping"]["edges"].append(["I0", "T0.1"])


def _split_in_connectivity(doc):
    doc["connectivity"]["edges"] = [
        {"source": "T0.1", "target": "B0", "kind": "undirected"}
    ]


def _bad_connection_kind(doc):
    doc["connectivity"]["edges"] = [
        {"source": "B0", "target": "T0", "kind": "dashed"}
    ]


def _self_loop(doc):
    doc["connectivity"]["edges"] = [
        {"source": "B0", "target": "B0", "kind": "undirected"}
    ]


def _duplicate_connection(doc):
    edge = {"source": "B0", "target": "T0", "kind": "directed"}
    doc["connectivity"]["edges"] = [edge, dict(edge)]


def _rst_double_parent(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "A0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "joint"},
        {"id": "R1", "kind": "relation", "name": "joint"},
    ]
    doc["rst"]["edges"] = [
        {"child": "T0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "B0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "T0", "parent": "R1", "nuclearity": "nucleus"},
        {"child": "A0", "parent": "R1", "nuclearity": "nucleus"},
    ]


def _rst_cycle(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "joint"},
        {"id": "R1", "kind": "relation", "name": "joint"},
    ]
    doc["rst"]["edges"] = [
        {"child": "R1", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "T0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "R0", "parent": "R1", "nuclearity": "nucleus"},
        {"child": "B0", "parent": "R1", "nuclearity": "nucleus"},
    ]


def _multinuclear_with_satellite(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "A0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "joint"},
    ]
    doc["rst"]["edges"] = [
        {"child": "T0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "B0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "A0", "parent": "R0", "nuclearity": "satellite"},
    ]


def _mononuclear_without_satellite(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "elaboration"},
    ]
    doc["rst"]["edges"] = [
        {"child": "T0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "B0", "parent": "R0", "nuclearity": "nucleus"},
    ]


def _bad_nuclearity_label(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "identification"},
    ]
    doc["rst"]["edges"] = [
        {"child": "B0", "parent": "R0", "nuclearity": "primary"},
        {"child": "T0", "parent": "R0", "nuclearity": "satellite"},
    ]


def _unknown_relation(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "B0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "decorates"},
    ]
    doc["rst"]["edges"] = [
        {"child": "B0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "T0", "parent": "R0", "nuclearity": "satellite"},
    ]


def _rst_dangling_participant(doc):
    doc["rst"]["nodes"] = [
        {"id": "B9", "kind": "participant"},
        {"id": "T0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "joint"},
    ]
    doc["rst"]["edges"] = [
        {"child": "B9", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "T0", "parent": "R0", "nuclearity": "nucleus"},
    ]


def _malformed_identifier(doc):
    doc["grouping"]["nodes"].append({"id": "T1.2.3", "kind": "text"})
    doc["grouping"]["edges"].append(["I0", "T1.2.3"])


def _bad_split_bookkeeping(doc):
    doc["rst"]["nodes"] = [
        {"id": "T0", "kind": "participant"},
        {"id": "T0.1", "kind": "participant", "originalId": "B0"},
        {"id": "B0", "kind": "participant"},
        {"id": "R0", "kind": "relation", "name": "identification"},
    ]
    doc["rst"]["edges"] = [
        {"child": "B0", "parent": "R0", "nuclearity": "nucleus"},
        {"child": "T0.1", "parent": "R0", "nuclearity": "satellite"},
    ]


# name -> (document, expected SchemaViolation code)
INVALID_DOCUMENTS: dict[str, tuple[dict, str]] = {
    "grouping_cycle": (_doc(_grouping_cycle), "GROUPING_NOT_TREE"),
    "singleton_group": (_doc(_singleton_group), "GROUP_ARITY"),
    "unknown_macro": (_doc(_unknown_macro), "UNKNOWN_MACRO"),
    "macro_on_leaf": (_doc(_macro_on_leaf), "MACRO_ON_NON_GROUP"),
    "dangling_connectivity_id": (_doc(_dangling_connectivity), "DANGLING_ID"),
    "dangling_grouping_id": (_doc(_dangling_grouping), "DANGLING_ID"),
    "missing_root": (_doc(_missing_root), "GROUPING_NOT_TREE"),
    "disconnected_node": (_doc(_disconnected_node), "GROUPING_NOT_TREE"),
    "arrowhead_in_grouping": (_doc(_arrowhead_in_grouping), "ARROWHEAD_IN_GROUPING"),
    "split_in_grouping": (_doc(_split_in_grouping), "SPLIT_OUTSIDE_RST"),
    "split_in_connectivity": (_doc(_split_in_connectivity), "SPLIT_OUTSIDE_RST"),
    "bad_connection_kind": (_doc(_bad_connection_kind), "BAD_CONNECTION_KIND"),
    "self_loop": (_doc(_self_loop), "SELF_LOOP"),
    "duplicate_connection": (_doc(_duplicate_connection), "DUPLICATE_EDGE"),
    "rst_double_parent": (_doc(_rst_double_parent), "RST_NOT_TREE"),
    "rst_cycle": (_doc(_rst_cycle), "RST_NOT_TREE"),
    "multinuclear_with_satellite": (
        _doc(_multinuclear_with_satellite), "NUCLEARITY_VIOLATION"),
    "mononuclear_without_satellite": (
        _doc(_mononuclear_without_satellite), "NUCLEARITY_VIOLATION"),
    "bad_nuclearity_label": (_doc(_bad_nuclearity_label), "NUCLEARITY_VIOLATION"),
    "unknown_relation": (_doc(_unknown_relation), "UNKNOWN_RELATION"),
    "rst_dangling_participant": (_doc(_rst_dangling_participant), "DANGLING_ID"),
    "bad_split_bookkeeping": (_doc(_bad_split_bookkeeping), "BAD_SPLIT"),
    "malformed_identifier": (_doc(_malformed_identifier), "BAD_ID"),
}
