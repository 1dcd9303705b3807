"""Parsing and serialization of layout segmentations and annotation documents.

Two document families are handled:

* the upstream layout-segmentation JSON (element sections for text, blobs,
  arrows, arrowheads and image constants plus an opaque relationships
  section), and
* the canonical annotation document defined by this toolkit: a JSON object
  with one section per annotation layer, serialized in a bit-stable
  canonical form (sorted keys, id-sorted node and edge lists, UTF-8,
  newline-terminated).

Parsing an annotation document is strict: the in-memory diagram is built
permissively, then every structural invariant is checked, and the first
error-severity finding aborts the parse.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    IMAGE_CONSTANT_ID,
    DEFAULT_RELATIONS,
    Connection,
    ConnectionKind,
    ConnectivityGraph,
    Diagram,
    DiagramElement,
    DpgRelationship,
    ElementKind,
    GroupingGraph,
    KIND_BY_PREFIX,
    LayoutSegmentation,
    MacroGroup,
    Nuclearity,
    RelationVocabulary,
    RstEdge,
    RstGraph,
    RstParticipant,
    RstRelation,
    id_prefix,
    id_sort_key,
    is_group_id,
)
from .validation import validate_diagram

logger = logging.getLogger(__name__)

CORPUS_ROOT_ENV = "DIAGRAPH_CORPUS_ROOT"
MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = "1"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class IngestError(Exception):
    pass


class MalformedDocument(IngestError):
    pass


class MissingCoordinates(MalformedDocument):
    pass


class DuplicateId(MalformedDocument):
    pass


class SchemaViolation(IngestError):
    """An annotation document violated the canonical schema.

    ``code`` matches the validator's finding codes; ``path`` points at the
    offending document location.
    """

    def __init__(self, code: str, path: str, message: str = ""):
        self.code = code
        self.path = path
        super().__init__(f"{code} at {path}" + (f": {message}" if message else ""))


class ManifestNotFound(IngestError):
    pass


# ---------------------------------------------------------------------------
# Layout segmentation parsing
# ---------------------------------------------------------------------------

# canonical section name -> (aliases, element kind)
_SECTIONS: dict[str, tuple[tuple[str, ...], ElementKind]] = {
    "text": (("text",), ElementKind.TEXT),
    "blobs": (("blobs",), ElementKind.BLOB),
    "arrows": (("arrows",), ElementKind.ARROW),
    "arrowheads": (("arrowheads", "arrowHeads"), ElementKind.ARROWHEAD),
    "imageConstants": (("imageConstants", "imageConsts"), ElementKind.IMAGE_CONSTANT),
}

_KNOWN_TOP_LEVEL = {
    alias for aliases, _ in _SECTIONS.values() for alias in aliases
} | {"relationships", "imageDimensions", "id", "semanticCategory", "imageURL"}


def _as_points(value) -> tuple[tuple[int, int], ...]:
    points = []
    for pt in value:
        if not isinstance(pt, (list, tuple)) or len(pt) != 2:
            raise ValueError("not a coordinate pair")
        points.append((int(pt[0]), int(pt[1])))
    return tuple(points)


def _element_outline(entry, element_id: str) -> tuple[tuple[int, int], ...]:
    if isinstance(entry, (list, tuple)):
        coords = entry
    elif isinstance(entry, dict):
        coords = entry.get("polygon") or entry.get("rectangle") or entry.get("rect")
    else:
        coords = None
    if not coords:
        raise MissingCoordinates(f"element {element_id} has no outline coordinates")
    try:
        return _as_points(coords)
    except (TypeError, ValueError) as exc:
        raise MissingCoordinates(f"element {element_id}: {exc}") from exc


def parse_ai2d(data: bytes | str, diagram_id: str | None = None) -> LayoutSegmentation:
    """Parse an upstream layout-segmentation document.

    Unknown top-level fields are ignored with a warning; the dataset has
    grown fields over time and they carry nothing we model.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top level must be a JSON object")

    for key in doc:
        if key not in _KNOWN_TOP_LEVEL:
            logger.warning("ignoring unknown layout field %r", key)

    elements: list[DiagramElement] = []
    seen: set[str] = set()
    for canonical, (aliases, kind) in _SECTIONS.items():
        section = {}
        for alias in aliases:
            if alias in doc:
                section = doc[alias]
                break
        if not isinstance(section, dict):
            raise MalformedDocument(f"section {canonical!r} must map ids to elements")
        for element_id in sorted(section, key=id_sort_key):
            entry = section[element_id]
            if element_id in seen:
                raise DuplicateId(f"element id declared twice: {element_id}")
            seen.add(element_id)
            expected = KIND_BY_PREFIX.get(id_prefix(element_id))
            if expected is not kind:
                raise MalformedDocument(
                    f"element {element_id} sits in the {canonical} section "
                    f"but its prefix says {expected.value if expected else 'nothing'}"
                )
            if kind is ElementKind.IMAGE_CONSTANT:
                try:
                    outline = _element_outline(entry, element_id)
                except MissingCoordinates:
                    outline = ((0, 0), (0, 0))  # patched to image bounds below
            else:
                outline = _element_outline(entry, element_id)
            if kind in (ElementKind.BLOB, ElementKind.ARROW) and len(outline) < 3:
                raise MissingCoordinates(
                    f"element {element_id} needs a polygon of at least 3 points"
                )
            if len(outline) < 2:
                raise MissingCoordinates(
                    f"element {element_id} needs at least 2 corner points"
                )
            text = None
            if kind is ElementKind.TEXT and isinstance(entry, dict):
                text = entry.get("value") or entry.get("text") or entry.get(
                    "replacementText"
                )
            elements.append(DiagramElement(element_id, kind, outline, text))

    dims = doc.get("imageDimensions")
    if isinstance(dims, dict) and "width" in dims and "height" in dims:
        width, height = int(dims["width"]), int(dims["height"])
    else:
        xs = [x for e in elements for x, _ in e.outline]
        ys = [y for e in elements for _, y in e.outline]
        width, height = (max(xs) if xs else 0), (max(ys) if ys else 0)

    patched = []
    for e in elements:
        if e.kind is ElementKind.IMAGE_CONSTANT and e.outline == ((0, 0), (0, 0)):
            e = DiagramElement(e.id, e.kind, ((0, 0), (width, height)), e.text_content)
        patched.append(e)
    elements = patched

    relationships = []
    raw_rels = doc.get("relationships", {})
    if isinstance(raw_rels, dict):
        items = [dict(entry, id=rel_id) if isinstance(entry, dict) else entry
                 for rel_id, entry in sorted(raw_rels.items())]
    elif isinstance(raw_rels, list):
        items = raw_rels
    else:
        raise MalformedDocument("relationships must be a mapping or a list")
    for entry in items:
        if not isinstance(entry, dict):
            raise MalformedDocument("relationship entries must be objects")
        origin = entry.get("origin")
        destination = entry.get("destination")
        for endpoint in (origin, destination):
            if endpoint not in seen:
                raise MalformedDocument(
                    f"relationship endpoint {endpoint!r} is not a declared element"
                )
        relationships.append(
            DpgRelationship(
                str(entry.get("id", f"DPG{len(relationships)}")),
                str(entry.get("category", "")),
                origin,
                destination,
            )
        )

    return LayoutSegmentation(
        diagram_id=str(doc.get("id", diagram_id or "")),
        image_width=width,
        image_height=height,
        elements=tuple(elements),
        dpg_relationships=tuple(relationships),
    )


# ---------------------------------------------------------------------------
# Annotation document parsing
# ---------------------------------------------------------------------------

_GROUPING_KINDS = {
    "blob": "B", "text": "T", "arrow": "A", "group": "G", "imageConstant": "I",
    "arrowhead": "H",  # accepted at parse so the validator can reject it precisely
}


def _require(cond: bool, code: str, path: str, message: str) -> None:
    if not cond:
        raise SchemaViolation(code, path, message)


def parse_ai2drst(
    data: bytes | str,
    layout: LayoutSegmentation,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> Diagram:
    """Parse a canonical annotation document against its layout.

    The parse is atomic: the first violated invariant raises
    :class:`SchemaViolation` and nothing is returned.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("MALFORMED", "$", f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "MALFORMED", "$", "top level must be an object")

    grouping_doc = doc.get("grouping", {})
    _require(isinstance(grouping_doc, dict), "MALFORMED", "grouping",
             "grouping section must be an object")
    nodes: set[str] = set()
    for i, node in enumerate(grouping_doc.get("nodes", [])):
        path = f"grouping.nodes[{i}]"
        _require(isinstance(node, dict) and "id" in node, "MALFORMED", path,
                 "grouping nodes are objects with id and kind")
        node_id = str(node["id"])
        kind = node.get("kind")
        _require(kind in _GROUPING_KINDS, "MALFORMED", path,
                 f"unknown node kind {kind!r}")
        _require(id_prefix(node_id) == _GROUPING_KINDS[kind], "MALFORMED", path,
                 f"kind {kind!r} contradicts the id prefix of {node_id}")
        _require(node_id not in nodes, "DUPLICATE_ID", path,
                 f"node {node_id} declared twice")
        nodes.add(node_id)

    edges: list[tuple[str, str]] = []
    for i, edge in enumerate(grouping_doc.get("edges", [])):
        path = f"grouping.edges[{i}]"
        _require(
            isinstance(edge, (list, tuple)) and len(edge) == 2,
            "MALFORMED", path, "grouping edges are [parent, child] pairs",
        )
        edges.append((str(edge[0]), str(edge[1])))

    macro: dict[str, MacroGroup] = {}
    for i, entry in enumerate(grouping_doc.get("macro", [])):
        path = f"grouping.macro[{i}]"
        _require(isinstance(entry, dict) and "node" in entry and "label" in entry,
                 "MALFORMED", path, "macro entries carry node and label")
        try:
            label = MacroGroup(entry["label"])
        except ValueError:
            raise SchemaViolation(
                "UNKNOWN_MACRO", path,
                f"{entry['label']!r} is not a macro-group category",
            ) from None
        macro[str(entry["node"])] = label

    grouping = GroupingGraph(frozenset(nodes), tuple(edges), macro)

    conn_doc = doc.get("connectivity", {})
    _require(isinstance(conn_doc, dict), "MALFORMED", "connectivity",
             "connectivity section must be an object")
    conn_edges: list[Connection] = []
    for i, edge in enumerate(conn_doc.get("edges", [])):
        path = f"connectivity.edges[{i}]"
        _require(
            isinstance(edge, dict) and {"source", "target", "kind"} <= set(edge),
            "MALFORMED", path, "connections carry source, target and kind",
        )
        try:
            kind = ConnectionKind(edge["kind"])
        except ValueError:
            raise SchemaViolation(
                "BAD_CONNECTION_KIND", path,
                f"{edge['kind']!r} is not a connection kind",
            ) from None
        conn_edges.append(Connection(str(edge["source"]), str(edge["target"]), kind))
    declared = {str(n) for n in conn_doc.get("nodes", [])}
    incident = {e.source for e in conn_edges} | {e.target for e in conn_edges}
    connectivity = ConnectivityGraph(frozenset(declared | incident), tuple(conn_edges))

    rst_doc = doc.get("rst", {})
    _require(isinstance(rst_doc, dict), "MALFORMED", "rst",
             "rst section must be an object")
    participants: list[RstParticipant] = []
    relations: list[RstRelation] = []
    for i, node in enumerate(rst_doc.get("nodes", [])):
        path = f"rst.nodes[{i}]"
        _require(isinstance(node, dict) and "id" in node and "kind" in node,
                 "MALFORMED", path, "rst nodes carry id and kind")
        node_id = str(node["id"])
        kind = node["kind"]
        if kind == "relation":
            _require("name" in node, "MALFORMED", path,
                     f"relation {node_id} has no name")
            relations.append(RstRelation(node_id, str(node["name"])))
        elif kind == "participant":
            original = node.get("originalId")
            participants.append(
                RstParticipant(node_id, str(original) if original is not None else None)
            )
        else:
            raise SchemaViolation("MALFORMED", path, f"unknown rst node kind {kind!r}")

    rst_edges: list[RstEdge] = []
    for i, edge in enumerate(rst_doc.get("edges", [])):
        path = f"rst.edges[{i}]"
        _require(
            isinstance(edge, dict) and {"child", "parent", "nuclearity"} <= set(edge),
            "MALFORMED", path, "rst edges carry child, parent and nuclearity",
        )
        try:
            nuclearity = Nuclearity(edge["nuclearity"])
        except ValueError:
            raise SchemaViolation(
                "NUCLEARITY_VIOLATION", path,
                f"{edge['nuclearity']!r} is neither nucleus nor satellite",
            ) from None
        rst_edges.append(RstEdge(str(edge["child"]), str(edge["parent"]), nuclearity))

    rst = RstGraph(tuple(participants), tuple(relations), tuple(rst_edges))

    diagram = Diagram(
        diagram_id=str(doc.get("id", layout.diagram_id)),
        layout=layout,
        grouping=grouping,
        connectivity=connectivity,
        rst=rst,
        semantic_category=doc.get("semanticCategory"),
    )
    report = validate_diagram(diagram, vocabulary)
    if report.errors:
        first = report.errors[0]
        raise SchemaViolation(first.code, first.path, first.message)
    return diagram


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def _grouping_node_kind(node_id: str) -> str:
    return {
        "B": "blob", "T": "text", "A": "arrow", "H": "arrowhead",
        "G": "group", "I": "imageConstant",
    }[id_prefix(node_id)]


def serialize(d: Diagram) -> bytes:
    """Canonical annotation document: sorted keys, id-sorted lists, UTF-8,
    newline-terminated. Equal diagrams serialize to identical bytes."""
    doc: dict = {
        "id": d.diagram_id,
        "grouping": {
            "nodes": [
                {"id": n, "kind": _grouping_node_kind(n)}
                for n in sorted(d.grouping.nodes, key=id_sort_key)
            ],
            "edges": [
                [p, c]
                for p, c in sorted(
                    d.grouping.edges,
                    key=lambda e: (id_sort_key(e[0]), id_sort_key(e[1])),
                )
            ],
            "macro": [
                {"node": n, "label": d.grouping.macro_labels[n].value}
                for n in sorted(d.grouping.macro_labels, key=id_sort_key)
            ],
        },
        "connectivity": {
            "nodes": sorted(d.connectivity.nodes, key=id_sort_key),
            "edges": [
                {"source": e.source, "target": e.target, "kind": e.kind.value}
                for e in sorted(
                    d.connectivity.edges,
                    key=lambda e: (
                        id_sort_key(e.source), id_sort_key(e.target), e.kind.value
                    ),
                )
            ],
        },
        "rst": {
            "nodes": (
                [
                    dict(
                        {"id": p.id, "kind": "participant"},
                        **({"originalId": p.original_id} if p.original_id else {}),
                    )
                    for p in sorted(
                        d.rst.participants, key=lambda p: id_sort_key(p.id)
                    )
                ]
                + [
                    {"id": r.id, "kind": "relation", "name": r.name}
                    for r in sorted(d.rst.relations, key=lambda r: id_sort_key(r.id))
                ]
            ),
            "edges": [
                {"child": e.child, "parent": e.parent, "nuclearity": e.nuclearity.value}
                for e in sorted(
                    d.rst.edges,
                    key=lambda e: (id_sort_key(e.child), id_sort_key(e.parent)),
                )
            ],
        },
    }
    if d.semantic_category is not None:
        doc["semanticCategory"] = d.semantic_category
    text = json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True)
    return (text + "\n").encode("utf-8")


def skeleton_diagram(layout: LayoutSegmentation, diagram_id: str | None = None) -> Diagram:
    """Fresh annotation state: a flat grouping tree and empty other layers."""
    return Diagram(
        diagram_id=diagram_id or layout.diagram_id,
        layout=layout,
        grouping=GroupingGraph.initial(layout.element_ids()),
    )


# ---------------------------------------------------------------------------
# Corpus manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    diagram_id: str
    ai2d_path: str
    annotation_path: str
    image_path: str | None = None
    semantic_category: str | None = None


@dataclass(frozen=True)
class CorpusManifest:
    corpus_root: Path
    entries: tuple[ManifestEntry, ...]
    schema_version: str = SCHEMA_VERSION

    def resolve(self, relative: str) -> Path:
        return self.corpus_root / relative


@dataclass
class LoadFailure:
    diagram_id: str
    path: str
    error: str


@dataclass
class LoadReport:
    failures: list[LoadFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def default_corpus_root() -> Path | None:
    root = os.environ.get(CORPUS_ROOT_ENV)
    return Path(root) if root else None


def read_manifest(corpus_root: str | Path) -> CorpusManifest:
    root = Path(corpus_root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ManifestNotFound(f"no {MANIFEST_NAME} under {root}")
    try:
        doc = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestNotFound(f"unreadable manifest: {exc}") from exc
    entries = []
    seen = set()
    for entry in doc.get("diagrams", []):
        diagram_id = str(entry["id"])
        if diagram_id in seen:
            raise ManifestNotFound(f"duplicate diagram id in manifest: {diagram_id}")
        seen.add(diagram_id)
        entries.append(
            ManifestEntry(
                diagram_id=diagram_id,
                ai2d_path=entry["ai2d"],
                annotation_path=entry["annotation"],
                image_path=entry.get("image"),
                semantic_category=entry.get("semanticCategory"),
            )
        )
    return CorpusManifest(
        corpus_root=root,
        entries=tuple(entries),
        schema_version=str(doc.get("schemaVersion", SCHEMA_VERSION)),
    )


def write_manifest(manifest: CorpusManifest) -> None:
    doc = {
        "schemaVersion": manifest.schema_version,
        "diagrams": [
            {
                "id": e.diagram_id,
                "ai2d": e.ai2d_path,
                "annotation": e.annotation_path,
                **({"image": e.image_path} if e.image_path else {}),
                **(
                    {"semanticCategory": e.semantic_category}
                    if e.semantic_category
                    else {}
                ),
            }
            for e in manifest.entries
        ],
    }
    path = manifest.corpus_root / MANIFEST_NAME
    path.write_text(
        json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True) + "\n", "utf-8"
    )


def load_diagram(
    manifest: CorpusManifest,
    entry: ManifestEntry,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> Diagram:
    layout = parse_ai2d(
        manifest.resolve(entry.ai2d_path).read_bytes(), diagram_id=entry.diagram_id
    )
    diagram = parse_ai2drst(
        manifest.resolve(entry.annotation_path).read_bytes(), layout, vocabulary
    )
    if entry.semantic_category and diagram.semantic_category is None:
        diagram = Diagram(
            diagram.diagram_id, diagram.layout, diagram.grouping,
            diagram.connectivity, diagram.rst, entry.semantic_category,
        )
    return diagram


def load_corpus(
    manifest: CorpusManifest,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> tuple[list[Diagram], LoadReport]:
    """Load every diagram the manifest lists; per-file failures are
    collected and never abort the batch. Returned order follows the
    manifest."""
    diagrams: list[Diagram] = []
    report = LoadReport()
    for entry in manifest.entries:
        try:
            diagrams.append(load_diagram(manifest, entry, vocabulary))
        except (IngestError, OSError, ValueError) as exc:
            report.failures.append(
                LoadFailure(entry.diagram_id, entry.annotation_path, str(exc))
            )
    return diagrams, report


# ---------------------------------------------------------------------------
# Published-corpus converter (best effort)
# ---------------------------------------------------------------------------

def convert_published_annotation(
    doc: dict,
    layout: LayoutSegmentation,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> Diagram:
    """Map a published node-link style annotation export onto the canonical
    model.

    The released corpus stores each layer as a node-link graph dump; field
    names there are not under our control, so this mapper does a
    documented best effort: node kinds from id prefixes, macro labels from
    a ``macro_group``/``macro-group`` node attribute, relation names from
    ``name``/``rel_name``/``relation_type``, nuclearity from an edge
    attribute or from ``nuclei``/``satellites`` lists on relation nodes.
    Anything unmapped raises MalformedDocument naming the field.
    """
    def graph_section(*names):
        for name in names:
            if name in doc and isinstance(doc[name], dict):
                return doc[name]
        return None

    grouping_doc = graph_section("grouping", "layout")
    if grouping_doc is None:
        raise MalformedDocument("no grouping section found (tried: grouping, layout)")

    def node_entries(section):
        return section.get("nodes", [])

    def link_entries(section):
        return section.get("links", section.get("edges", []))

    nodes: set[str] = set()
    macro: dict[str, MacroGroup] = {}
    for node in node_entries(grouping_doc):
        node_id = str(node.get("id"))
        if id_prefix(node_id) == "H":
            continue  # some early exports kept arrowheads around
        nodes.add(node_id)
        raw_label = node.get("macro_group") or node.get("macro-group")
        if raw_label:
            try:
                macro[node_id] = MacroGroup(_normalize_macro(str(raw_label)))
            except ValueError as exc:
                raise MalformedDocument(
                    f"unmappable macro-group label {raw_label!r} on {node_id}"
                ) from exc
    edges = []
    parent_hint = {IMAGE_CONSTANT_ID} | {n for n in nodes if is_group_id(n)}
    for link in link_entries(grouping_doc):
        a, b = str(link.get("source")), str(link.get("target"))
        # node-link dumps of undirected trees do not orient edges; prefer
        # the endpoint that can actually parent something
        if a in parent_hint:
            edges.append((a, b))
        elif b in parent_hint:
            edges.append((b, a))
        else:
            raise MalformedDocument(f"cannot orient grouping edge {a}-{b}")

    conn_doc = graph_section("connectivity")
    conn_edges = []
    if conn_doc:
        for link in link_entries(conn_doc):
            kind_raw = str(link.get("kind", link.get("connection_type", "")))
            try:
                kind = ConnectionKind(kind_raw)
            except ValueError as exc:
                raise MalformedDocument(
                    f"unmappable connection kind {kind_raw!r}"
                ) from exc
            conn_edges.append(
                Connection(str(link.get("source")), str(link.get("target")), kind)
            )

    rst_doc = graph_section("rst", "discourse")
    participants: list[RstParticipant] = []
    relations: list[RstRelation] = []
    rst_edges: list[RstEdge] = []
    if rst_doc:
        for node in node_entries(rst_doc):
            node_id = str(node.get("id"))
            if id_prefix(node_id) == "R":
                name = node.get("name") or node.get("rel_name") or node.get(
                    "relation_type"
                )
                if not name:
                    raise MalformedDocument(f"relation {node_id} has no name field")
                relations.append(RstRelation(node_id, str(name)))
            else:
                original = node.get("originalId") or node.get("original_id")
                if original is None and "." in node_id:
                    original = node_id.split(".", 1)[0]
                participants.append(
                    RstParticipant(node_id, str(original) if original else None)
                )
        for link in link_entries(rst_doc):
            raw = str(link.get("nuclearity", link.get("kind", ""))).lower()
            if raw.startswith("n"):
                nuclearity = Nuclearity.NUCLEUS
            elif raw.startswith("s"):
                nuclearity = Nuclearity.SATELLITE
            else:
                raise MalformedDocument(f"unmappable nuclearity {raw!r}")
            rst_edges.append(
                RstEdge(str(link.get("source")), str(link.get("target")), nuclearity)
            )

    diagram = Diagram(
        diagram_id=str(doc.get("id", layout.diagram_id)),
        layout=layout,
        grouping=GroupingGraph(frozenset(nodes), tuple(edges), macro),
        connectivity=ConnectivityGraph(
            frozenset(
                {e.source for e in conn_edges} | {e.target for e in conn_edges}
            ),
            tuple(conn_edges),
        ),
        rst=RstGraph(tuple(participants), tuple(relations), tuple(rst_edges)),
    )
    report = validate_diagram(diagram, vocabulary)
    if report.errors:
        first = report.errors[0]
        raise MalformedDocument(
            f"converted diagram is structurally invalid: {first.code} at {first.path}"
        )
    return diagram


def _normalize_macro(label: str) -> str:
    cleaned = label.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
    return {"cutout": "cutOut"}.get(cleaned, cleaned)
