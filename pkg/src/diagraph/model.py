"""Core data model for multi-layer diagram annotation.

A diagram carries a pixel-space layout segmentation plus three stand-off
annotation layers that reference layout elements by shared identifiers:

* grouping: an undirected tree of visual groups rooted at the image
  constant ``I0``, optionally carrying macro-group labels,
* connectivity: a cyclic mixed graph of visually explicit connections,
* rst: a directed tree of discourse relations whose edges are labelled
  nucleus or satellite.

All types are immutable values; mutating operations return new graphs and
never touch their input. Identifiers encode the node kind in their prefix
letter (B/T/A/H for elements, I for the image constant, G for groups,
R for relations) and may carry a decimal suffix marking a split copy,
which is only legal inside the rst layer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

ID_PATTERN = re.compile(r"^([BTAHIGR])([0-9]+)(?:\.([0-9]+))?$")

IMAGE_CONSTANT_ID = "I0"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class CoreError(Exception):
    """Base class for structural mutation errors.

    ``code`` is a stable machine-readable token, reused verbatim by the
    annotation server in rejection payloads.
    """

    code = "CoreError"


class UnknownNode(CoreError):
    code = "UnknownNode"


class ArityTooSmall(CoreError):
    code = "ArityTooSmall"


class WouldBreakTree(CoreError):
    code = "WouldBreakTree"


class NotAGroupNode(CoreError):
    code = "NotAGroupNode"


class SelfLoop(CoreError):
    code = "SelfLoop"


class DuplicateEdge(CoreError):
    code = "DuplicateEdge"


class UnknownEdge(CoreError):
    code = "UnknownEdge"


class NuclearityViolation(CoreError):
    code = "NuclearityViolation"


class ParticipantAlreadyBound(CoreError):
    code = "ParticipantAlreadyBound"


class UnknownRelation(CoreError):
    code = "UnknownRelation"


class CannotSplitRelationNode(CoreError):
    code = "CannotSplitRelationNode"


class NotARelationNode(CoreError):
    code = "NotARelationNode"


# ---------------------------------------------------------------------------
# Identifier helpers
# ---------------------------------------------------------------------------

def check_id(node_id: str) -> None:
    """Raise UnknownNode if ``node_id`` does not match the identifier grammar."""
    if not ID_PATTERN.match(node_id):
        raise UnknownNode(f"malformed identifier: {node_id!r}")


def is_valid_id(node_id: str) -> bool:
    return bool(ID_PATTERN.match(node_id))


def id_prefix(node_id: str) -> str:
    return node_id[0] if node_id else ""


def is_group_id(node_id: str) -> bool:
    return node_id.startswith("G")


def is_relation_id(node_id: str) -> bool:
    return node_id.startswith("R")


def is_split_id(node_id: str) -> bool:
    return "." in node_id


def split_base(node_id: str) -> str:
    """T7.2 -> T7; identifiers without a decimal suffix pass through."""
    return node_id.split(".", 1)[0]


def id_sort_key(node_id: str) -> tuple[str, int, int]:
    """Canonical ordering: prefix letter, then numeric index, then split copy."""
    m = ID_PATTERN.match(node_id)
    if not m:
        return (node_id, -1, -1)
    prefix, index, dec = m.groups()
    return (prefix, int(index), int(dec) if dec is not None else -1)


def smallest_unused(prefix: str, used: Iterable[str]) -> str:
    """Allocate the smallest free index for ``prefix`` among ``used`` ids."""
    taken = set()
    for node_id in used:
        m = ID_PATTERN.match(node_id)
        if m and m.group(1) == prefix:
            taken.add(int(m.group(2)))
    i = 0
    while i in taken:
        i += 1
    return f"{prefix}{i}"


# ---------------------------------------------------------------------------
# Vocabularies
# ---------------------------------------------------------------------------

class ElementKind(str, Enum):
    BLOB = "blob"
    TEXT = "text"
    ARROW = "arrow"
    ARROWHEAD = "arrowhead"
    IMAGE_CONSTANT = "imageConstant"


KIND_BY_PREFIX: dict[str, ElementKind] = {
    "B": ElementKind.BLOB,
    "T": ElementKind.TEXT,
    "A": ElementKind.ARROW,
    "H": ElementKind.ARROWHEAD,
    "I": ElementKind.IMAGE_CONSTANT,
}


class MacroGroup(str, Enum):
    """Terminal macro-group categories; a closed vocabulary."""

    NETWORK = "network"
    CYCLE = "cycle"
    CUT_OUT = "cutOut"
    SLICE = "slice"
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    TABLE = "table"
    DIAGRAMMATIC = "diagrammatic"
    ILLUSTRATION = "illustration"
    PHOTOGRAPH = "photograph"


class ConnectionKind(str, Enum):
    UNDIRECTED = "undirected"
    DIRECTED = "directed"
    BIDIRECTIONAL = "bidirectional"


class Nuclearity(str, Enum):
    NUCLEUS = "nucleus"
    SATELLITE = "satellite"


@dataclass(frozen=True)
class RelationVocabulary:
    """Named discourse relations plus their nuclearity policy.

    Multinuclear relations take two or more nuclei and no satellites;
    mononuclear relations take exactly one nucleus and at least one
    satellite. The vocabulary is configuration: new names can be added
    with :meth:`with_relation`.
    """

    names: frozenset[str]
    multinuclear: frozenset[str]

    def __post_init__(self) -> None:
        unknown = self.multinuclear - self.names
        if unknown:
            raise ValueError(f"multinuclear names not in vocabulary: {sorted(unknown)}")

    def check(self, name: str) -> None:
        if name not in self.names:
            raise UnknownRelation(f"relation name not in vocabulary: {name!r}")

    def is_multinuclear(self, name: str) -> bool:
        self.check(name)
        return name in self.multinuclear

    def with_relation(self, name: str, multinuclear: bool = False) -> "RelationVocabulary":
        multi = self.multinuclear | {name} if multinuclear else self.multinuclear
        return RelationVocabulary(self.names | {name}, multi)


DEFAULT_RELATIONS = RelationVocabulary(
    names=frozenset({
        "cyclic sequence",
        "preparation",
        "property-ascription",
        "joint",
        "identification",
        "connected",
        "sequence",
        "elaboration",
        "circumstance",
        "contrast",
        "class-ascription",
        "conjunction",
        "disjunction",
        "list",
        "nonvolitional cause",
        "nonvolitional result",
        "means",
        "condition",
        "purpose",
        "restatement",
    }),
    multinuclear=frozenset({
        "joint",
        "sequence",
        "cyclic sequence",
        "contrast",
        "conjunction",
        "disjunction",
        "list",
        "connected",
        "restatement",
    }),
)


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagramElement:
    """One segmented element: identifier, kind, pixel outline, optional text."""

    id: str
    kind: ElementKind
    outline: tuple[tuple[int, int], ...]
    text_content: str | None = None


@dataclass(frozen=True)
class DpgRelationship:
    """An upstream diagram-parse-graph relationship, kept opaque."""

    id: str
    category: str
    origin: str
    destination: str


@dataclass(frozen=True)
class LayoutSegmentation:
    diagram_id: str
    image_width: int
    image_height: int
    elements: tuple[DiagramElement, ...]
    dpg_relationships: tuple[DpgRelationship, ...] = ()

    def element_ids(self) -> set[str]:
        return {e.id for e in self.elements}

    def element(self, element_id: str) -> DiagramElement:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(element_id)

    def kind_counts(self) -> dict[ElementKind, int]:
        counts = {kind: 0 for kind in ElementKind}
        for e in self.elements:
            counts[e.kind] += 1
        return counts


# ---------------------------------------------------------------------------
# Grouping layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupingGraph:
    """Undirected acyclic tree of visual groups rooted at the image constant.

    Edges are stored as (parent, child) pairs with the root ``I0`` at the
    top; group nodes ``G*`` collect two or more children; macro-group
    labels sit on the root or on group nodes.
    """

    nodes: frozenset[str] = frozenset({IMAGE_CONSTANT_ID})
    edges: tuple[tuple[str, str], ...] = ()
    macro_labels: Mapping[str, MacroGroup] = field(default_factory=dict)

    @classmethod
    def initial(cls, element_ids: Iterable[str]) -> "GroupingGraph":
        """Flat tree: every groupable element is a direct child of I0.

        Arrowheads are layout-only and are skipped; this is the skeleton
        state a fresh annotation starts from.
        """
        children = sorted(
            (e for e in element_ids if id_prefix(e) in "BTA"), key=id_sort_key
        )
        return cls(
            nodes=frozenset(children) | {IMAGE_CONSTANT_ID},
            edges=tuple((IMAGE_CONSTANT_ID, c) for c in children),
        )

    # -- queries ------------------------------------------------------------

    def parent_map(self) -> dict[str, str]:
        return {child: parent for parent, child in self.edges}

    def children_map(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for parent, child in self.edges:
            out.setdefault(parent, []).append(child)
        return out

    def group_ids(self) -> set[str]:
        return {n for n in self.nodes if is_group_id(n)}

    def ancestors(self, node: str) -> list[str]:
        """Chain of parents from ``node`` up to the root, nearest first."""
        parents = self.parent_map()
        chain = []
        seen = {node}
        cur = node
        while cur in parents:
            cur = parents[cur]
            if cur in seen:  # defensive against cyclic input
                break
            seen.add(cur)
            chain.append(cur)
        return chain

    # -- mutations ----------------------------------------------------------

    def add_group(self, children: Sequence[str]) -> tuple["GroupingGraph", str]:
        """Insert a new group node over ``children``, reparenting them.

        The new node is attached under the deepest common ancestor of the
        children and receives the smallest unused G index.
        """
        uniq = list(dict.fromkeys(children))
        if len(uniq) < 2:
            raise ArityTooSmall(f"a group needs at least 2 children, got {len(uniq)}")
        for c in uniq:
            if c not in self.nodes:
                raise UnknownNode(f"not in grouping graph: {c}")
        if IMAGE_CONSTANT_ID in uniq:
            raise WouldBreakTree("the image constant cannot be grouped")

        ancestor_sets = {c: set(self.ancestors(c)) for c in uniq}
        for c in uniq:
            if any(c in ancestor_sets[other] for other in uniq if other != c):
                raise WouldBreakTree(f"{c} is an ancestor of another chosen child")

        # deepest common ancestor: first ancestor of the first child shared by all
        attach = None
        for candidate in self.ancestors(uniq[0]):
            if all(candidate in ancestor_sets[c] for c in uniq[1:]):
                attach = candidate
                break
        if attach is None:
            raise WouldBreakTree("children have no common ancestor")

        new_id = smallest_unused("G", self.nodes)
        taken = set(uniq)
        new_edges = [
            (p, c) for p, c in self.edges if c not in taken
        ]
        new_edges.append((attach, new_id))
        new_edges.extend((new_id, c) for c in uniq)

        counts: dict[str, int] = {}
        for p, _ in new_edges:
            counts[p] = counts.get(p, 0) + 1
        for g in self.group_ids():
            if counts.get(g, 0) < 2:
                raise WouldBreakTree(f"group {g} would be left with fewer than 2 children")

        return replace(
            self, nodes=self.nodes | {new_id}, edges=tuple(new_edges)
        ), new_id

    def dissolve_group(self, group_id: str) -> "GroupingGraph":
        """Remove a group node, lifting its children to its parent."""
        if group_id not in self.nodes:
            raise UnknownNode(f"not in grouping graph: {group_id}")
        if not is_group_id(group_id):
            raise NotAGroupNode(f"only G nodes can be dissolved: {group_id}")
        parent = self.parent_map().get(group_id)
        if parent is None:
            raise WouldBreakTree(f"group {group_id} has no parent")
        new_edges = []
        for p, c in self.edges:
            if c == group_id:
                continue
            if p == group_id:
                new_edges.append((parent, c))
            else:
                new_edges.append((p, c))
        labels = {n: l for n, l in self.macro_labels.items() if n != group_id}
        return replace(
            self,
            nodes=self.nodes - {group_id},
            edges=tuple(new_edges),
            macro_labels=labels,
        )

    def set_macro_label(self, node: str, label: MacroGroup) -> "GroupingGraph":
        """Attach a macro-group label; overwriting an existing label is fine."""
        if node not in self.nodes:
            raise UnknownNode(f"not in grouping graph: {node}")
        if node != IMAGE_CONSTANT_ID and not is_group_id(node):
            raise NotAGroupNode(f"macro labels go on I0 or G nodes, not {node}")
        labels = dict(self.macro_labels)
        labels[node] = label
        return replace(self, macro_labels=labels)


# ---------------------------------------------------------------------------
# Connectivity layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Connection:
    source: str
    target: str
    kind: ConnectionKind


@dataclass(frozen=True)
class ConnectivityGraph:
    """Cyclic mixed graph of visually explicit connections.

    Nodes resolve against the companion grouping layer (elements or
    groups). Self-loops are forbidden; duplicate identical edges are
    rejected; nodes may be left isolated by edge removal.
    """

    nodes: frozenset[str] = frozenset()
    edges: tuple[Connection, ...] = ()

    def add_connection(
        self,
        source: str,
        target: str,
        kind: ConnectionKind,
        grouping: GroupingGraph | None = None,
    ) -> "ConnectivityGraph":
        if source == target:
            raise SelfLoop(f"connection from {source} to itself")
        for node in (source, target):
            if is_split_id(node):
                raise UnknownNode(f"split copies are rst-only: {node}")
            if grouping is not None and node not in grouping.nodes:
                raise UnknownNode(f"not resolvable in grouping layer: {node}")
        conn = Connection(source, target, kind)
        if conn in self.edges:
            raise DuplicateEdge(f"{source}->{target} ({kind.value}) already present")
        return replace(
            self,
            nodes=self.nodes | {source, target},
            edges=self.edges + (conn,),
        )

    def remove_connection(
        self, source: str, target: str, kind: ConnectionKind
    ) -> "ConnectivityGraph":
        conn = Connection(source, target, kind)
        if conn not in self.edges:
            raise UnknownEdge(f"no such connection: {source}->{target} ({kind.value})")
        return replace(self, edges=tuple(e for e in self.edges if e != conn))

    def kind_counts(self) -> dict[ConnectionKind, int]:
        counts = {kind: 0 for kind in ConnectionKind}
        for e in self.edges:
            counts[e.kind] += 1
        return counts


# ---------------------------------------------------------------------------
# Discourse structure layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RstParticipant:
    """A discourse unit: an element, a group, or a split copy of either."""

    id: str
    original_id: str | None = None


@dataclass(frozen=True)
class RstRelation:
    id: str
    name: str


@dataclass(frozen=True)
class RstEdge:
    child: str
    parent: str
    nuclearity: Nuclearity


@dataclass(frozen=True)
class RstGraph:
    """Directed acyclic tree of discourse relations.

    Relations are nodes (R*); edges point from a child unit to its parent
    relation and carry the child's nuclearity. A unit that must serve in
    several relations is split into decimal-suffixed copies that remember
    their original identifier, which keeps the graph a tree while staying
    convertible to the cyclic form.
    """

    participants: tuple[RstParticipant, ...] = ()
    relations: tuple[RstRelation, ...] = ()
    edges: tuple[RstEdge, ...] = ()

    # -- queries ------------------------------------------------------------

    def participant_ids(self) -> set[str]:
        return {p.id for p in self.participants}

    def relation_ids(self) -> set[str]:
        return {r.id for r in self.relations}

    def node_ids(self) -> set[str]:
        return self.participant_ids() | self.relation_ids()

    def parent_of(self, node: str) -> str | None:
        for e in self.edges:
            if e.child == node:
                return e.parent
        return None

    def relation_roots(self) -> list[str]:
        return sorted(
            (r.id for r in self.relations if self.parent_of(r.id) is None),
            key=id_sort_key,
        )

    def children_of(self, relation_id: str) -> list[RstEdge]:
        return [e for e in self.edges if e.parent == relation_id]

    def hop_depth(self, relation_id: str) -> int:
        """Longest chain of relation nodes below ``relation_id``.

        A relation with only element children sits at hop 0; each further
        relation nested under it adds one hop.
        """
        if relation_id not in self.relation_ids():
            raise UnknownNode(f"not a relation in this graph: {relation_id}")
        children: dict[str, list[str]] = {}
        rel_ids = self.relation_ids()
        for e in self.edges:
            if e.child in rel_ids:
                children.setdefault(e.parent, []).append(e.child)
        memo: dict[str, int] = {}

        def depth(rid: str) -> int:
            if rid in memo:
                return memo[rid]
            below = children.get(rid, [])
            memo[rid] = 0 if not below else 1 + max(depth(c) for c in below)
            return memo[rid]

        return depth(relation_id)

    def collapsed_edges(self) -> list[tuple[str, str, Nuclearity]]:
        """Edges with split copies folded back onto their original ids.

        The result is the cyclic form of the analysis: a unit that was
        split gains one in-edge per relation it participates in.
        """
        base = {p.id: (p.original_id or p.id) for p in self.participants}
        return [
            (base.get(e.child, e.child), base.get(e.parent, e.parent), e.nuclearity)
            for e in self.edges
        ]

    # -- mutations ----------------------------------------------------------

    def add_relation(
        self,
        name: str,
        nuclei: Sequence[str],
        satellites: Sequence[str] = (),
        vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
        grouping: GroupingGraph | None = None,
    ) -> tuple["RstGraph", str]:
        """Create a relation node over currently parentless units."""
        vocabulary.check(name)
        nuclei = list(nuclei)
        satellites = list(satellites)
        if vocabulary.is_multinuclear(name):
            if len(nuclei) < 2 or satellites:
                raise NuclearityViolation(
                    f"{name} is multinuclear: needs >=2 nuclei and no satellites"
                )
        else:
            if len(nuclei) != 1 or not satellites:
                raise NuclearityViolation(
                    f"{name} is mononuclear: needs exactly 1 nucleus and >=1 satellite"
                )
        members = nuclei + satellites
        if len(set(members)) != len(members):
            raise ParticipantAlreadyBound("a unit may join a relation only once")

        node_ids = self.node_ids()
        new_participants = list(self.participants)
        for unit in members:
            if unit in node_ids:
                if self.parent_of(unit) is not None:
                    raise ParticipantAlreadyBound(
                        f"{unit} already has a parent relation; split it first"
                    )
            else:
                if is_relation_id(unit):
                    raise UnknownNode(f"relation {unit} does not exist")
                if is_split_id(unit):
                    raise UnknownNode(
                        f"split copy {unit} must be created with split_node first"
                    )
                if grouping is not None and unit not in grouping.nodes:
                    raise UnknownNode(f"not resolvable in grouping layer: {unit}")
                if not is_valid_id(unit):
                    raise UnknownNode(f"malformed identifier: {unit!r}")
                new_participants.append(RstParticipant(unit))

        rid = smallest_unused("R", self.relation_ids())
        new_edges = list(self.edges)
        new_edges.extend(RstEdge(u, rid, Nuclearity.NUCLEUS) for u in nuclei)
        new_edges.extend(RstEdge(u, rid, Nuclearity.SATELLITE) for u in satellites)
        return replace(
            self,
            participants=tuple(new_participants),
            relations=self.relations + (RstRelation(rid, name),),
            edges=tuple(new_edges),
        ), rid

    def split_node(self, node: str) -> tuple["RstGraph", str]:
        """Copy a participant so it can join one more relation.

        The copy gets the next free decimal suffix on the original
        identifier and starts parentless.
        """
        if is_relation_id(node):
            raise CannotSplitRelationNode(f"relation nodes cannot be split: {node}")
        by_id = {p.id: p for p in self.participants}
        if node not in by_id:
            raise UnknownNode(f"not a participant in this graph: {node}")
        base = by_id[node].original_id or split_base(node)
        taken = set()
        for p in self.participants:
            m = ID_PATTERN.match(p.id)
            if m and split_base(p.id) == base and m.group(3) is not None:
                taken.add(int(m.group(3)))
        k = 1
        while k in taken:
            k += 1
        copy_id = f"{base}.{k}"
        return replace(
            self,
            participants=self.participants + (RstParticipant(copy_id, original_id=base),),
        ), copy_id

    def remove_relation(self, relation_id: str) -> "RstGraph":
        """Delete a relation node and every edge touching it."""
        if relation_id in self.participant_ids():
            raise NotARelationNode(f"{relation_id} is a participant, not a relation")
        if relation_id not in self.relation_ids():
            raise UnknownNode(f"not a relation in this graph: {relation_id}")
        return replace(
            self,
            relations=tuple(r for r in self.relations if r.id != relation_id),
            edges=tuple(
                e for e in self.edges
                if e.parent != relation_id and e.child != relation_id
            ),
        )


# ---------------------------------------------------------------------------
# Diagram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagram:
    """A layout segmentation plus its three annotation layers."""

    diagram_id: str
    layout: LayoutSegmentation
    grouping: GroupingGraph
    connectivity: ConnectivityGraph = ConnectivityGraph()
    rst: RstGraph = RstGraph()
    semantic_category: str | None = None

    # Layer mutations, with cross-layer resolution wired in.

    def add_group(self, children: Sequence[str]) -> tuple["Diagram", str]:
        grouping, gid = self.grouping.add_group(children)
        return replace(self, grouping=grouping), gid

    def dissolve_group(self, group_id: str) -> "Diagram":
        return replace(self, grouping=self.grouping.dissolve_group(group_id))

    def set_macro_label(self, node: str, label: MacroGroup) -> "Diagram":
        return replace(self, grouping=self.grouping.set_macro_label(node, label))

    def add_connection(
        self, source: str, target: str, kind: ConnectionKind
    ) -> "Diagram":
        conn = self.connectivity.add_connection(source, target, kind, self.grouping)
        return replace(self, connectivity=conn)

    def remove_connection(
        self, source: str, target: str, kind: ConnectionKind
    ) -> "Diagram":
        conn = self.connectivity.remove_connection(source, target, kind)
        return replace(self, connectivity=conn)

    def add_relation(
        self,
        name: str,
        nuclei: Sequence[str],
        satellites: Sequence[str] = (),
        vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
    ) -> tuple["Diagram", str]:
        rst, rid = self.rst.add_relation(
            name, nuclei, satellites, vocabulary, self.grouping
        )
        return replace(self, rst=rst), rid

    def split_node(self, node: str) -> tuple["Diagram", str]:
        rst, copy_id = self.rst.split_node(node)
        return replace(self, rst=rst), copy_id

    def remove_relation(self, relation_id: str) -> "Diagram":
        return replace(self, rst=self.rst.remove_relation(relation_id))
