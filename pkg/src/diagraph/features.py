"""Count-based corpus features, normalization and 2-D projection.

Each diagram is summarised by counting element kinds in the layout,
macro-group labels, discourse relation names, nucleus and satellite
edges, and connection kinds, then appending the connectivity-graph
density. The dimension list is owned by a versioned schema: its length
follows the configured relation vocabulary rather than being a fixed
constant.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import (
    ConnectionKind,
    ConnectivityGraph,
    Diagram,
    ElementKind,
    MacroGroup,
    RelationVocabulary,
    DEFAULT_RELATIONS,
)


class FeatureError(Exception):
    pass


class SchemaMismatch(FeatureError):
    pass


class TooFewVectors(FeatureError):
    pass


class RankDeficient(FeatureError):
    pass


# ---------------------------------------------------------------------------
# Schema and extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, named feature dimensions plus a version tag.

    Dimension order is fixed for a given version; matrices produced under
    different versions are not comparable.
    """

    dimensions: tuple[str, ...]
    relation_names: tuple[str, ...]
    version: str

    def __post_init__(self) -> None:
        if len(set(self.dimensions)) != len(self.dimensions):
            raise ValueError("dimension names must be unique")

    def __len__(self) -> int:
        return len(self.dimensions)

    @classmethod
    def default(
        cls, vocabulary: RelationVocabulary = DEFAULT_RELATIONS
    ) -> "FeatureSchema":
        relations = tuple(sorted(vocabulary.names))
        dims = (
            tuple(f"element:{k.value}" for k in ElementKind)
            + tuple(f"macro:{m.value}" for m in MacroGroup)
            + tuple(f"relation:{name}" for name in relations)
            + ("nucleusCount", "satelliteCount")
            + tuple(f"connection:{k.value}" for k in ConnectionKind)
            + ("density",)
        )
        return cls(
            dimensions=dims,
            relation_names=relations,
            version=f"1:{len(dims)}d",
        )

    def index(self, name: str) -> int:
        return self.dimensions.index(name)


@dataclass(frozen=True)
class FeatureVector:
    diagram_id: str
    values: tuple[float, ...]


def connectivity_density(c: ConnectivityGraph) -> float:
    """Share of realized ordered node pairs.

    Every stored edge is expanded to ordered pairs: a directed edge covers
    one pair, undirected and bidirectional edges cover both. A pair covered
    by several edges counts once, keeping the value a true proportion.
    Nodes are all declared nodes, including isolated ones; with fewer than
    two nodes the density is defined as 0.
    """
    n = len(c.nodes)
    if n < 2:
        return 0.0
    pairs: set[tuple[str, str]] = set()
    for e in c.edges:
        pairs.add((e.source, e.target))
        if e.kind is not ConnectionKind.DIRECTED:
            pairs.add((e.target, e.source))
    return len(pairs) / (n * (n - 1))


def extract_features(d: Diagram, schema: FeatureSchema | None = None) -> FeatureVector:
    """Raw (unnormalized) feature vector for one diagram."""
    schema = schema or FeatureSchema.default()
    values = dict.fromkeys(schema.dimensions, 0.0)

    for kind, count in d.layout.kind_counts().items():
        values[f"element:{kind.value}"] = float(count)
    for label in d.grouping.macro_labels.values():
        values[f"macro:{label.value}"] += 1.0
    for rel in d.rst.relations:
        key = f"relation:{rel.name}"
        if key not in values:
            raise SchemaMismatch(
                f"relation {rel.name!r} is outside the schema vocabulary"
            )
        values[key] += 1.0
    for e in d.rst.edges:
        if e.nuclearity.value == "nucleus":
            values["nucleusCount"] += 1.0
        else:
            values["satelliteCount"] += 1.0
    for kind, count in d.connectivity.kind_counts().items():
        values[f"connection:{kind.value}"] = float(count)
    values["density"] = connectivity_density(d.connectivity)

    return FeatureVector(d.diagram_id, tuple(values[name] for name in schema.dimensions))


def feature_matrix(
    diagrams: Sequence[Diagram], schema: FeatureSchema | None = None
) -> tuple[np.ndarray, list[str]]:
    schema = schema or FeatureSchema.default()
    vectors = [extract_features(d, schema) for d in diagrams]
    matrix = np.array([v.values for v in vectors], dtype=float)
    return matrix, [v.diagram_id for v in vectors]


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def zscore_normalize(matrix: np.ndarray) -> np.ndarray:
    """Center and scale each column to mean 0, population std 1.

    Columns with zero variance carry no information and map to all zeros.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise TooFewVectors("need at least 2 feature vectors to normalize")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population std
    out = np.zeros_like(matrix)
    nonzero = std > 0
    out[:, nonzero] = (matrix[:, nonzero] - mean[nonzero]) / std[nonzero]
    return out


# ---------------------------------------------------------------------------
# Corpus frequency tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyTable:
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def frequencies(self) -> dict[str, float]:
        total = self.total
        if total == 0:
            return {}
        return {label: count / total for label, count in self.counts.items()}


def corpus_frequencies(diagrams: Sequence[Diagram]) -> dict[str, FrequencyTable]:
    """Relative frequencies of macro-groups, relation names and connection
    kinds over a whole corpus; observed categories only."""
    macro: dict[str, int] = {}
    relations: dict[str, int] = {}
    connections: dict[str, int] = {}
    for d in diagrams:
        for label in d.grouping.macro_labels.values():
            macro[label.value] = macro.get(label.value, 0) + 1
        for rel in d.rst.relations:
            relations[rel.name] = relations.get(rel.name, 0) + 1
        for e in d.connectivity.edges:
            connections[e.kind.value] = connections.get(e.kind.value, 0) + 1
    return {
        "macroGroups": FrequencyTable(dict(sorted(macro.items()))),
        "relations": FrequencyTable(dict(sorted(relations.items()))),
        "connections": FrequencyTable(dict(sorted(connections.items()))),
    }


# ---------------------------------------------------------------------------
# 2-D projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Projection:
    coords: np.ndarray        # (N, 2)
    components: np.ndarray    # (2, d)
    mean: np.ndarray          # (d,)

    def reconstruct(self) -> np.ndarray:
        return self.coords @ self.components + self.mean


def pca_project(matrix: np.ndarray) -> Projection:
    """Deterministic projection onto the top two principal components.

    Works on the column-space covariance so the result does not depend on
    row order; the sign of each component is fixed by making its
    largest-magnitude loading positive.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise RankDeficient("need at least 2 vectors to project")
    nonconstant = int(np.sum(matrix.std(axis=0) > 0))
    if nonconstant < 2:
        raise RankDeficient(
            f"only {nonconstant} non-constant dimension(s); need at least 2"
        )
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    top = eigvals[order[:2]]
    scale = float(eigvals[order[0]])
    if scale <= 0 or float(top[1]) <= scale * 1e-12:
        raise RankDeficient("data has rank below 2 after centering")
    components = eigvecs[:, order[:2]].T  # (2, d)
    for i in range(2):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    coords = centered @ components.T
    return Projection(coords=coords, components=components, mean=mean)


def load_external_embedding(
    source: str | Path | io.TextIOBase, diagram_ids: Sequence[str]
) -> np.ndarray:
    """Read a sidecar ``diagram,x,y`` CSV, returning coordinates aligned
    with ``diagram_ids``."""
    if isinstance(source, (str, Path)):
        handle: io.TextIOBase = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle, close = source, False
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["diagram", "x", "y"]:
            raise FeatureError("sidecar header must be diagram,x,y")
        table = {}
        for row in reader:
            if len(row) < 3:
                continue
            table[row[0].strip()] = (float(row[1]), float(row[2]))
    finally:
        if close:
            handle.close()
    missing = [d for d in diagram_ids if d not in table]
    if missing:
        raise FeatureError(f"sidecar is missing coordinates for {missing[:5]}")
    return np.array([table[d] for d in diagram_ids], dtype=float)


def project_2d(
    matrix: np.ndarray,
    method: str = "pca",
    diagram_ids: Sequence[str] | None = None,
    sidecar: str | Path | None = None,
) -> np.ndarray:
    """Per-diagram (x, y) coordinates from the normalized feature matrix.

    ``pca`` is the reproducible reference backend; ``external`` reads
    coordinates computed out of process (for stochastic embeddings) from
    the sidecar file.
    """
    if method == "pca":
        return pca_project(matrix).coords
    if method == "external":
        if diagram_ids is None or sidecar is None:
            raise FeatureError("external projection needs diagram ids and a sidecar")
        return load_external_embedding(sidecar, diagram_ids)
    raise ValueError(f"unknown projection method {method!r}")


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_feature_csv(
    path: str | Path,
    matrix: np.ndarray,
    diagram_ids: Sequence[str],
    schema: FeatureSchema,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["diagram", *schema.dimensions])
        for diagram_id, row in zip(diagram_ids, matrix):
            writer.writerow([diagram_id, *(_format_number(v) for v in row)])


def write_embedding_csv(
    path: str | Path, coords: np.ndarray, diagram_ids: Sequence[str]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["diagram", "x", "y"])
        for diagram_id, (x, y) in zip(diagram_ids, coords):
            writer.writerow([diagram_id, repr(float(x)), repr(float(y))])


def write_frequency_csv(path: str | Path, table: FrequencyTable) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["category", "count", "frequency"])
        for label, count in table.counts.items():
            writer.writerow([label, count, repr(table.frequencies[label])])


def _format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))
