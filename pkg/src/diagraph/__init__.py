"""Toolkit for multi-layer diagram annotation corpora.

Parsing, validation, reliability statistics, feature extraction, and an
annotation service over diagrams described by a grouping tree, a
connectivity graph and a discourse-structure tree.
"""

from .model import (
    ConnectionKind,
    ConnectivityGraph,
    Diagram,
    DiagramElement,
    DEFAULT_RELATIONS,
    ElementKind,
    GroupingGraph,
    LayoutSegmentation,
    MacroGroup,
    Nuclearity,
    RelationVocabulary,
    RstGraph,
)
from .ingest import (
    CorpusManifest,
    load_corpus,
    parse_ai2d,
    parse_ai2drst,
    read_manifest,
    serialize,
    skeleton_diagram,
)
from .validation import ValidationReport, validate_corpus, validate_diagram

__all__ = [
    "ConnectionKind",
    "ConnectivityGraph",
    "CorpusManifest",
    "DEFAULT_RELATIONS",
    "Diagram",
    "DiagramElement",
    "ElementKind",
    "GroupingGraph",
    "LayoutSegmentation",
    "MacroGroup",
    "Nuclearity",
    "RelationVocabulary",
    "RstGraph",
    "ValidationReport",
    "load_corpus",
    "parse_ai2d",
    "parse_ai2drst",
    "read_manifest",
    "serialize",
    "skeleton_diagram",
    "validate_corpus",
    "validate_diagram",
]

__version__ = "0.1.0"
