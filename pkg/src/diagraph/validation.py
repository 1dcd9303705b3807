"""Structural re-validation of diagrams and corpora.

The validator accepts any structurally complete diagram, including ones
assembled by permissive constructors, and reports one finding per violated
invariant. Error findings mark states that must never be persisted;
warning findings mark legal but suspicious states (incomplete analyses,
unreferenced elements, redundant connection pairs).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .model import (
    IMAGE_CONSTANT_ID,
    DEFAULT_RELATIONS,
    Diagram,
    Nuclearity,
    RelationVocabulary,
    id_prefix,
    id_sort_key,
    is_group_id,
    is_relation_id,
    is_split_id,
    is_valid_id,
    split_base,
)

ERROR = "error"
WARNING = "warning"

_LAYER_ORDER = {"layout": 0, "grouping": 1, "connectivity": 2, "rst": 3, "cross": 4}


@dataclass(frozen=True)
class Finding:
    severity: str
    code: str
    path: str
    message: str
    layer: str = "cross"


@dataclass
class ValidationReport:
    diagram_id: str
    findings: list[Finding] = field(default_factory=list)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == ERROR]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == WARNING]

    @property
    def ok(self) -> bool:
        """True when no error-severity finding is present."""
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "diagramId": self.diagram_id,
            "valid": self.ok,
            "findings": [
                {
                    "severity": f.severity,
                    "code": f.code,
                    "path": f.path,
                    "message": f.message,
                }
                for f in self.findings
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1, sort_keys=True)

    def to_text(self) -> str:
        if not self.findings:
            return f"{self.diagram_id}: ok"
        lines = [f"{self.diagram_id}: {len(self.errors)} error(s), "
                 f"{len(self.warnings)} warning(s)"]
        lines.extend(
            f"  [{f.severity}] {f.code} at {f.path}: {f.message}"
            for f in self.findings
        )
        return "\n".join(lines)


def _sorted_findings(findings: list[Finding]) -> list[Finding]:
    return sorted(findings, key=lambda f: (_LAYER_ORDER[f.layer], f.code, f.path))


def validate_diagram(
    d: Diagram, vocabulary: RelationVocabulary = DEFAULT_RELATIONS
) -> ValidationReport:
    """Check every structural invariant; findings are deterministic and
    stably ordered by (layer, code, path)."""
    findings: list[Finding] = []

    def err(layer: str, code: str, path: str, message: str) -> None:
        findings.append(Finding(ERROR, code, path, message, layer))

    def warn(layer: str, code: str, path: str, message: str) -> None:
        findings.append(Finding(WARNING, code, path, message, layer))

    layout_ids = d.layout.element_ids()
    seen_layout: set[str] = set()
    for e in d.layout.elements:
        if e.id in seen_layout:
            err("layout", "DUPLICATE_ID", f"layout.elements[{e.id}]",
                "element id declared twice")
        seen_layout.add(e.id)

    # -- grouping -----------------------------------------------------------
    g = d.grouping
    parents: dict[str, list[str]] = {}
    for parent, child in g.edges:
        parents.setdefault(child, []).append(parent)

    for node in sorted(g.nodes, key=id_sort_key):
        path = f"grouping.nodes[{node}]"
        if not is_valid_id(node):
            err("grouping", "BAD_ID", path, "identifier does not match the grammar")
            continue
        prefix = id_prefix(node)
        if prefix == "H":
            err("grouping", "ARROWHEAD_IN_GROUPING", path,
                "arrowheads are layout-only and never enter the grouping layer")
        if prefix == "R":
            err("grouping", "BAD_ID", path, "relation ids are rst-only")
        if is_split_id(node):
            err("grouping", "SPLIT_OUTSIDE_RST", path,
                "split copies are only legal inside the rst layer")
        if prefix in "BTA" and split_base(node) not in layout_ids:
            err("grouping", "DANGLING_ID", path,
                "element is not declared in the layout segmentation")
        if prefix == "I" and node != IMAGE_CONSTANT_ID:
            err("grouping", "GROUPING_NOT_TREE", path,
                "the only image constant allowed is I0")

    if IMAGE_CONSTANT_ID not in g.nodes:
        err("grouping", "GROUPING_NOT_TREE", "grouping.nodes",
            "missing the image-constant root I0")
    else:
        if IMAGE_CONSTANT_ID in parents:
            err("grouping", "GROUPING_NOT_TREE", f"grouping.nodes[{IMAGE_CONSTANT_ID}]",
                "the image constant must be the root")
        for node in sorted(g.nodes, key=id_sort_key):
            if node == IMAGE_CONSTANT_ID:
                continue
            nparents = len(parents.get(node, []))
            if nparents == 0:
                err("grouping", "GROUPING_NOT_TREE", f"grouping.nodes[{node}]",
                    "node is disconnected from the root")
            elif nparents > 1:
                err("grouping", "GROUPING_NOT_TREE", f"grouping.nodes[{node}]",
                    "node has more than one parent")

    for i, (parent, child) in enumerate(g.edges):
        path = f"grouping.edges[{i}]"
        for endpoint in (parent, child):
            if endpoint not in g.nodes:
                err("grouping", "DANGLING_ID", path,
                    f"edge endpoint {endpoint} is not a declared node")
        if parent in g.nodes and not (parent == IMAGE_CONSTANT_ID or is_group_id(parent)):
            err("grouping", "GROUPING_NOT_TREE", path,
                f"{parent} is a leaf element and cannot have children")

    # cycle check over the child->parent chains
    state: dict[str, int] = {}
    parent_of = {child: ps[0] for child, ps in parents.items() if len(ps) == 1}
    for node in sorted(g.nodes, key=id_sort_key):
        chain = []
        cur = node
        while cur is not None and state.get(cur, 0) == 0:
            state[cur] = 1
            chain.append(cur)
            cur = parent_of.get(cur)
        if cur is not None and state.get(cur) == 1:
            err("grouping", "GROUPING_NOT_TREE", f"grouping.nodes[{cur}]",
                "parent chain forms a cycle")
        for n in chain:
            state[n] = 2

    child_counts = Counter(parent for parent, _ in g.edges)
    for gid in sorted(g.group_ids(), key=id_sort_key):
        if child_counts.get(gid, 0) < 2:
            err("grouping", "GROUP_ARITY", f"grouping.nodes[{gid}]",
                f"group has {child_counts.get(gid, 0)} children, needs at least 2")

    for node in sorted(g.macro_labels, key=id_sort_key):
        path = f"grouping.macro[{node}]"
        if node not in g.nodes:
            err("grouping", "DANGLING_ID", path,
                "macro label on a node that is not in the grouping graph")
        elif node != IMAGE_CONSTANT_ID and not is_group_id(node):
            err("grouping", "MACRO_ON_NON_GROUP", path,
                "macro labels belong on I0 or group nodes")

    # -- connectivity ---------------------------------------------------------
    c = d.connectivity
    for node in sorted(c.nodes, key=id_sort_key):
        path = f"connectivity.nodes[{node}]"
        if is_split_id(node):
            err("connectivity", "SPLIT_OUTSIDE_RST", path,
                "split copies are only legal inside the rst layer")
        elif node not in g.nodes:
            err("connectivity", "DANGLING_ID", path,
                "node does not resolve through the grouping layer")

    seen_edges: set[tuple[str, str, str]] = set()
    seen_pairs: dict[frozenset[str], list[int]] = {}
    for i, conn in enumerate(c.edges):
        path = f"connectivity.edges[{i}]"
        if conn.source == conn.target:
            err("connectivity", "SELF_LOOP", path,
                f"connection from {conn.source} to itself")
        for endpoint in (conn.source, conn.target):
            if endpoint not in c.nodes:
                err("connectivity", "DANGLING_ID", path,
                    f"edge endpoint {endpoint} is not a declared node")
        key = (conn.source, conn.target, conn.kind.value)
        if key in seen_edges:
            err("connectivity", "DUPLICATE_EDGE", path,
                f"duplicate connection {conn.source}->{conn.target} ({conn.kind.value})")
        seen_edges.add(key)
        seen_pairs.setdefault(frozenset((conn.source, conn.target)), []).append(i)
    for pair, idxs in seen_pairs.items():
        if len(idxs) > 1:
            warn("connectivity", "DUPLICATE_PAIR", f"connectivity.edges[{idxs[1]}]",
                 f"several connections between {sorted(pair)}; check directionality")

    # -- rst ------------------------------------------------------------------
    r = d.rst
    rel_ids = r.relation_ids()
    part_ids = r.participant_ids()
    overlap = rel_ids & part_ids
    for node in sorted(overlap, key=id_sort_key):
        err("rst", "DUPLICATE_ID", f"rst.nodes[{node}]",
            "id declared as both participant and relation")

    for p in sorted(r.participants, key=lambda p: id_sort_key(p.id)):
        path = f"rst.nodes[{p.id}]"
        if not is_valid_id(p.id):
            err("rst", "BAD_ID", path, "identifier does not match the grammar")
            continue
        if is_relation_id(p.id):
            err("rst", "BAD_ID", path, "participants cannot carry the R prefix")
            continue
        base = split_base(p.id)
        if is_split_id(p.id):
            if p.original_id != base:
                err("rst", "BAD_SPLIT", path,
                    f"split copy must record originalId {base}, has {p.original_id!r}")
        elif p.original_id is not None:
            err("rst", "BAD_SPLIT", path,
                "only split copies carry an originalId")
        if base != IMAGE_CONSTANT_ID and base not in g.nodes:
            err("rst", "DANGLING_ID", path,
                "participant does not resolve through the grouping layer")

    for rel in sorted(r.relations, key=lambda rel: id_sort_key(rel.id)):
        path = f"rst.nodes[{rel.id}]"
        if not is_valid_id(rel.id) or not is_relation_id(rel.id) or is_split_id(rel.id):
            err("rst", "BAD_ID", path, "relation ids are plain R-prefixed identifiers")
        if rel.name not in vocabulary.names:
            err("rst", "UNKNOWN_RELATION", path,
                f"relation name not in vocabulary: {rel.name!r}")

    all_rst_ids = rel_ids | part_ids
    seen_children: set[str] = set()
    for i, e in enumerate(r.edges):
        path = f"rst.edges[{i}]"
        if e.parent not in rel_ids:
            err("rst", "RST_NOT_TREE", path,
                f"edge parent {e.parent} is not a relation node")
        if e.child not in all_rst_ids:
            err("rst", "DANGLING_ID", path,
                f"edge child {e.child} is not a declared rst node")
        if e.child in seen_children:
            err("rst", "RST_NOT_TREE", f"rst.nodes[{e.child}]",
                "node has more than one parent relation")
        seen_children.add(e.child)

    # cycles along child->parent chains (only meaningful on single-parent graphs)
    rst_parent = {}
    for e in r.edges:
        rst_parent.setdefault(e.child, e.parent)
    state = {}
    for node in sorted(all_rst_ids, key=id_sort_key):
        chain = []
        cur: str | None = node
        while cur is not None and state.get(cur, 0) == 0:
            state[cur] = 1
            chain.append(cur)
            cur = rst_parent.get(cur)
        if cur is not None and state.get(cur) == 1:
            err("rst", "RST_NOT_TREE", f"rst.nodes[{cur}]",
                "parent chain forms a cycle")
        for n in chain:
            state[n] = 2

    for rel in sorted(r.relations, key=lambda rel: id_sort_key(rel.id)):
        if rel.name not in vocabulary.names:
            continue  # already reported; no policy to check against
        nuclei = [e for e in r.children_of(rel.id) if e.nuclearity == Nuclearity.NUCLEUS]
        sats = [e for e in r.children_of(rel.id) if e.nuclearity == Nuclearity.SATELLITE]
        path = f"rst.nodes[{rel.id}]"
        if rel.name in vocabulary.multinuclear:
            if len(nuclei) < 2 or sats:
                err("rst", "NUCLEARITY_VIOLATION", path,
                    f"{rel.name} is multinuclear: needs >=2 nuclei and no satellites, "
                    f"has {len(nuclei)} nuclei and {len(sats)} satellites")
        else:
            if len(nuclei) != 1 or not sats:
                err("rst", "NUCLEARITY_VIOLATION", path,
                    f"{rel.name} is mononuclear: needs exactly 1 nucleus and >=1 "
                    f"satellite, has {len(nuclei)} nuclei and {len(sats)} satellites")

    roots = r.relation_roots()
    if len(roots) > 1:
        warn("rst", "RST_MULTIPLE_ROOTS", f"rst.nodes[{roots[1]}]",
             f"analysis has {len(roots)} top-level relations; expected a single root "
             "once annotation is complete")

    # -- cross-layer ----------------------------------------------------------
    referenced = set(g.nodes) | set(c.nodes) | {split_base(p.id) for p in r.participants}
    for e in d.layout.elements:
        if e.kind.value in ("arrowhead", "imageConstant"):
            continue
        if e.id not in referenced:
            warn("cross", "UNREFERENCED_ELEMENT", f"layout.elements[{e.id}]",
                 "element appears in no annotation layer")

    return ValidationReport(d.diagram_id, _sorted_findings(findings))


def validate_corpus(
    diagrams: list[Diagram], vocabulary: RelationVocabulary = DEFAULT_RELATIONS
) -> tuple[list[ValidationReport], dict[str, int]]:
    """Per-diagram reports plus aggregate finding counts per code."""
    reports = [validate_diagram(d, vocabulary) for d in diagrams]
    summary: Counter[str] = Counter()
    for report in reports:
        summary.update(f.code for f in report.findings)
    return reports, dict(summary)
