"""Inter-annotator reliability statistics and agreement-task sampling.

Implements multi-rater chance-corrected agreement in two flavours:

* marginal kappa, where expected agreement comes from the observed
  category marginals (Fleiss 1971),
* uniform kappa, where expected agreement is fixed at 1/k under a uniform
  distribution over the k categories (Randolph 2005),

plus class-wise marginal kappa with a normal-approximation z under the
no-agreement null, stratified agreement by discourse-tree hop depth, an
EM competence model for annotators, and the sampling procedures that pick
agreement-task units out of an annotated corpus.

Notation: N items, n annotators per item, k categories, ``n_ij`` the
number of annotators who assigned category j to item i.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    ConnectionKind,
    Diagram,
    MacroGroup,
    RelationVocabulary,
    DEFAULT_RELATIONS,
    id_sort_key,
    is_group_id,
)

MARGINAL = "marginal"
UNIFORM = "uniform"

METADATA_COLUMNS = ("layer", "diagram", "hop")

# Follow-up choices for grouping tasks: Gestalt principles plus the two
# schema-level answers.
GROUPING_CHOICES = (
    "Guideline",
    "Proximity",
    "Closure",
    "Similarity",
    "Continuity",
    "Connectedness",
    "Symmetry",
    "No-group",
)

CONNECTIVITY_CHOICES = ("directed", "undirected", "bidirectional", "none")


class AgreementError(Exception):
    pass


class SeedRequired(AgreementError):
    pass


class MissingDepth(AgreementError):
    pass


class EmptyPopulation(AgreementError):
    pass


class MalformedCsv(AgreementError):
    pass


# ---------------------------------------------------------------------------
# Annotation matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationMatrix:
    """Complete items x annotators table of categorical labels.

    Every cell must be filled, at least two annotators and two declared
    categories are required. ``metadata`` carries optional per-item fields
    (layer, diagram, hop depth) used by stratified statistics.
    """

    items: tuple[str, ...]
    annotators: tuple[str, ...]
    labels: tuple[tuple[str, ...], ...]
    categories: tuple[str, ...]
    metadata: tuple[Mapping[str, str], ...] = ()

    def __post_init__(self) -> None:
        if len(self.annotators) < 2:
            raise ValueError("need at least 2 annotators")
        if len(self.categories) < 2:
            raise ValueError("need at least 2 categories")
        if len(self.labels) != len(self.items):
            raise ValueError("one label row per item required")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("categories must be unique")
        cats = set(self.categories)
        for i, row in enumerate(self.labels):
            if len(row) != len(self.annotators):
                raise ValueError(f"row {i} has {len(row)} cells, "
                                 f"expected {len(self.annotators)}")
            for cell in row:
                if cell not in cats:
                    raise ValueError(f"label {cell!r} outside declared categories")
        if self.metadata and len(self.metadata) != len(self.items):
            raise ValueError("metadata must align with items")

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[str]],
        annotators: Sequence[str] | None = None,
        items: Sequence[str] | None = None,
        categories: Sequence[str] | None = None,
        metadata: Sequence[Mapping[str, str]] | None = None,
    ) -> "AnnotationMatrix":
        if not rows:
            raise ValueError("empty annotation matrix")
        n = len(rows[0])
        annotators = tuple(annotators) if annotators else tuple(
            f"annotator_{j + 1}" for j in range(n)
        )
        items = tuple(items) if items else tuple(str(i) for i in range(len(rows)))
        if categories is None:
            categories = sorted({cell for row in rows for cell in row})
        return cls(
            items=items,
            annotators=annotators,
            labels=tuple(tuple(row) for row in rows),
            categories=tuple(categories),
            metadata=tuple(metadata) if metadata else (),
        )

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_annotators(self) -> int:
        return len(self.annotators)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def counts(self) -> np.ndarray:
        """N x k matrix of per-item category counts."""
        index = {c: j for j, c in enumerate(self.categories)}
        out = np.zeros((self.n_items, self.n_categories), dtype=np.int64)
        for i, row in enumerate(self.labels):
            for cell in row:
                out[i, index[cell]] += 1
        return out

    def label_indices(self) -> np.ndarray:
        """N x n matrix of category indices, for the competence model."""
        index = {c: j for j, c in enumerate(self.categories)}
        return np.array(
            [[index[cell] for cell in row] for row in self.labels], dtype=np.int64
        )

    def subset(self, item_indices: Sequence[int]) -> "AnnotationMatrix":
        idx = list(item_indices)
        return AnnotationMatrix(
            items=tuple(self.items[i] for i in idx),
            annotators=self.annotators,
            labels=tuple(self.labels[i] for i in idx),
            categories=self.categories,
            metadata=tuple(self.metadata[i] for i in idx) if self.metadata else (),
        )


def read_annotation_csv(
    source: str | Path | io.TextIOBase,
    categories: Sequence[str] | None = None,
) -> AnnotationMatrix:
    """Read the raw-annotation CSV format.

    Header: ``item,<annotator columns...>[,layer,diagram,hop]``; one row
    per item; labels are plain strings. Any column that is not ``item``
    and not one of the metadata names counts as an annotator column.
    """
    if isinstance(source, (str, Path)):
        handle: io.TextIOBase = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle, close = source, False
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty file") from None
        if not header or header[0].strip() != "item":
            raise MalformedCsv("first column must be 'item'")
        meta_cols = {
            name: i for i, name in enumerate(header) if name in METADATA_COLUMNS
        }
        annotator_cols = [
            (name, i) for i, name in enumerate(header)
            if i > 0 and name not in METADATA_COLUMNS
        ]
        if len(annotator_cols) < 2:
            raise MalformedCsv("need at least 2 annotator columns")
        items, rows, metadata = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise MalformedCsv(f"line {line_no}: expected {len(header)} cells")
            labels = [row[i].strip() for _, i in annotator_cols]
            if any(not cell for cell in labels):
                raise MalformedCsv(f"line {line_no}: missing annotation cell")
            items.append(row[0].strip())
            rows.append(labels)
            metadata.append(
                {name: row[i].strip() for name, i in meta_cols.items() if row[i].strip()}
            )
        if not rows:
            raise MalformedCsv("no annotation rows")
        return AnnotationMatrix.from_rows(
            rows,
            annotators=[name for name, _ in annotator_cols],
            items=items,
            categories=categories,
            metadata=metadata,
        )
    finally:
        if close:
            handle.close()


# ---------------------------------------------------------------------------
# Kappa statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryResult:
    kappa: float
    z: float
    p: float
    proportion: float
    undefined: bool = False


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    z: float
    p: float
    variant: str
    degenerate: bool = False
    per_category: Mapping[str, CategoryResult] | None = None


def _two_tailed_p(z: float) -> float:
    if math.isnan(z):
        return float("nan")
    return math.erfc(abs(z) / math.sqrt(2.0))


def _observed_agreement(counts: np.ndarray, n: int) -> float:
    # mean over items of sum_j n_ij (n_ij - 1) / (n (n - 1))
    per_item = (np.sum(counts * counts, axis=1) - n) / (n * (n - 1))
    return float(np.mean(per_item))


def fleiss_kappa(m: AnnotationMatrix) -> KappaResult:
    """Marginal kappa: chance agreement from observed category marginals.

    ``kappa = (P_bar - P_e) / (1 - P_e)`` with ``P_e = sum_j p_j^2`` and
    ``p_j`` the share of all ratings landing on category j. The aggregate
    z uses Fleiss' (1971) large-sample variance under the no-agreement
    null. When a single category soaks up every rating, ``P_e = 1`` and
    kappa is undefined; the result is flagged degenerate.
    """
    counts = m.counts()
    big_n, n, _ = m.n_items, m.n_annotators, m.n_categories
    p_bar = _observed_agreement(counts, n)
    p_j = np.sum(counts, axis=0) / (big_n * n)
    p_e = float(np.sum(p_j * p_j))
    if p_e >= 1.0:
        return KappaResult(float("nan"), float("nan"), float("nan"),
                           MARGINAL, degenerate=True)
    kappa = (p_bar - p_e) / (1.0 - p_e)

    q_j = 1.0 - p_j
    pq = p_j * q_j
    sum_pq = float(np.sum(pq))
    var = (2.0 / (big_n * n * (n - 1))) * (
        (sum_pq ** 2 - float(np.sum(pq * (q_j - p_j)))) / (sum_pq ** 2)
    )
    z = kappa / math.sqrt(var) if var > 0 else float("nan")
    return KappaResult(kappa, z, _two_tailed_p(z), MARGINAL)


def randolph_kappa(m: AnnotationMatrix) -> KappaResult:
    """Uniform (free-marginal) kappa: chance agreement fixed at 1/k.

    Always at least the marginal kappa whenever observed agreement is
    imperfect, with equality exactly when the category marginals are
    uniform.
    """
    counts = m.counts()
    big_n, n, k = m.n_items, m.n_annotators, m.n_categories
    p_bar = _observed_agreement(counts, n)
    p_e = 1.0 / k
    kappa = (p_bar - p_e) / (1.0 - p_e)
    # Fleiss' aggregate variance evaluated at uniform marginals
    var = 2.0 / ((k - 1) * big_n * n * (n - 1))
    z = kappa / math.sqrt(var)
    return KappaResult(kappa, z, _two_tailed_p(z), UNIFORM)


def classwise_kappa(m: AnnotationMatrix) -> dict[str, CategoryResult]:
    """Per-category marginal kappa with z under the no-agreement null.

    ``kappa_j = 1 - sum_i n_ij (n - n_ij) / (N n (n-1) p_j q_j)`` and
    ``z_j = kappa_j / sqrt(2 / (N n (n-1)))``; a category that no
    annotator used (or that every rating landed on) has no defined
    class-wise kappa and is flagged instead.
    """
    counts = m.counts()
    big_n, n, _ = m.n_items, m.n_annotators, m.n_categories
    p_j = np.sum(counts, axis=0) / (big_n * n)
    se = math.sqrt(2.0 / (big_n * n * (n - 1)))
    out: dict[str, CategoryResult] = {}
    for j, category in enumerate(m.categories):
        pj = float(p_j[j])
        if pj <= 0.0 or pj >= 1.0:
            out[category] = CategoryResult(
                float("nan"), float("nan"), float("nan"), pj, undefined=True
            )
            continue
        disagree = float(np.sum(counts[:, j] * (n - counts[:, j])))
        kappa_j = 1.0 - disagree / (big_n * n * (n - 1) * pj * (1.0 - pj))
        z_j = kappa_j / se
        out[category] = CategoryResult(kappa_j, z_j, _two_tailed_p(z_j), pj)
    return out


@dataclass(frozen=True)
class HopAgreement:
    marginal: KappaResult | None
    uniform: KappaResult | None
    count: int
    insufficient: bool


def kappa_by_hop(m: AnnotationMatrix) -> dict[int, HopAgreement]:
    """Both kappas per hop-depth stratum of the items.

    Requires every item to carry a ``hop`` metadata value; strata with
    fewer than two items are flagged insufficient instead of computed.
    """
    if not m.metadata:
        raise MissingDepth("matrix carries no item metadata")
    strata: dict[int, list[int]] = {}
    for i, meta in enumerate(m.metadata):
        if "hop" not in meta:
            raise MissingDepth(f"item {m.items[i]} has no hop depth")
        strata.setdefault(int(meta["hop"]), []).append(i)
    out: dict[int, HopAgreement] = {}
    for hop in sorted(strata):
        idx = strata[hop]
        if len(idx) < 2:
            out[hop] = HopAgreement(None, None, len(idx), insufficient=True)
            continue
        sub = m.subset(idx)
        out[hop] = HopAgreement(
            fleiss_kappa(sub), randolph_kappa(sub), len(idx), insufficient=False
        )
    return out


# ---------------------------------------------------------------------------
# Annotator competence model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaceConfig:
    restarts: int = 10
    iterations: int = 50
    smoothing: float | None = None  # defaults to 0.1 / k
    seed: int | None = None


@dataclass
class MaceResult:
    """EM estimates for the spammer-detection generative model.

    ``competence`` maps each annotator to the probability of answering
    dutifully. ``posteriors`` holds one row per item over the declared
    categories. ``trace`` records, per restart, the penalized objective
    (data log-likelihood plus the smoothing prior) after every EM step;
    this is the quantity EM provably never decreases. The winning restart
    also reports the plain data log-likelihood.
    """

    competence: dict[str, float]
    posteriors: np.ndarray
    categories: tuple[str, ...]
    items: tuple[str, ...]
    trace: list[list[float]]
    log_likelihood: float
    best_restart: int
    config: MaceConfig


def mace(m: AnnotationMatrix, config: MaceConfig | None = None) -> MaceResult:
    """Estimate annotator competence by treating true labels as latent.

    Generative story per item: a true label is drawn uniformly; each
    annotator then flips a coin with competence theta_j, copying the true
    label on heads and drawing from a private spamming distribution on
    tails. EM alternates posterior inference over (true label, spam
    indicators) with smoothed re-estimation of the coin and the spamming
    multinomials. Multiple random restarts guard against local optima;
    the best restart by final objective wins.
    """
    config = config or MaceConfig()
    if config.restarts > 1 and config.seed is None:
        raise SeedRequired("restarts > 1 needs an explicit seed for reproducibility")
    seed = 0 if config.seed is None else config.seed
    labels = m.label_indices()
    big_n, n = labels.shape
    k = m.n_categories
    delta = config.smoothing if config.smoothing is not None else 0.1 / k

    one_hot = np.zeros((big_n, n, k))
    rows = np.arange(big_n)[:, None]
    cols = np.arange(n)[None, :]
    one_hot[rows, cols, labels] = 1.0

    seed_seq = np.random.SeedSequence(seed)
    child_seqs = seed_seq.spawn(config.restarts)

    best: tuple[float, int] | None = None
    best_state: tuple[np.ndarray, np.ndarray] | None = None
    traces: list[list[float]] = []

    for restart, child in enumerate(child_seqs):
        rng = np.random.default_rng(child)
        theta = rng.uniform(0.3, 0.9, size=n)
        # label-symmetric start keeps the pipeline equivariant under
        # category relabeling
        xi = np.full((n, k), 1.0 / k)
        trace: list[float] = []

        def e_step(theta, xi):
            # per (item, annotator, candidate-truth) likelihood
            spam_part = (1.0 - theta)[None, :, None] * xi[
                np.arange(n)[None, :], labels
            ][:, :, None]
            copy_part = theta[None, :, None] * one_hot
            member = copy_part + spam_part  # (N, n, k)
            log_item = np.sum(np.log(member), axis=1) - math.log(k)
            shift = np.max(log_item, axis=1, keepdims=True)
            weights = np.exp(log_item - shift)
            norm = np.sum(weights, axis=1, keepdims=True)
            post = weights / norm
            data_ll = float(np.sum(np.log(norm) + shift))
            # P(not spam | truth = observed label) summed over the posterior
            obs_member = np.take_along_axis(
                member, labels[:, :, None], axis=2
            )[:, :, 0]
            post_obs = np.take_along_axis(post, labels, axis=1)
            not_spam = post_obs * theta[None, :] / obs_member
            return post, data_ll, not_spam

        def objective(data_ll, theta, xi):
            prior = delta * float(
                np.sum(np.log(theta)) + np.sum(np.log(1.0 - theta))
                + np.sum(np.log(xi))
            )
            return data_ll + prior

        post, data_ll, not_spam = e_step(theta, xi)
        trace.append(objective(data_ll, theta, xi))
        for _ in range(config.iterations):
            # M-step with additive smoothing
            theta = (np.sum(not_spam, axis=0) + delta) / (big_n + 2.0 * delta)
            spam = 1.0 - not_spam
            spam_counts = np.einsum("ij,ijc->jc", spam, one_hot)
            xi = (spam_counts + delta) / (
                np.sum(spam_counts, axis=1, keepdims=True) + k * delta
            )
            post, data_ll, not_spam = e_step(theta, xi)
            trace.append(objective(data_ll, theta, xi))
        traces.append(trace)
        if best is None or trace[-1] > best[0]:
            best = (trace[-1], restart)
            best_state = (theta.copy(), post.copy())
            best_data_ll = data_ll

    assert best is not None and best_state is not None
    theta, post = best_state
    return MaceResult(
        competence={a: float(theta[j]) for j, a in enumerate(m.annotators)},
        posteriors=post,
        categories=m.categories,
        items=m.items,
        trace=traces,
        log_likelihood=best_data_ll,
        best_restart=best[1],
        config=config,
    )


# ---------------------------------------------------------------------------
# Agreement-task sampling
# ---------------------------------------------------------------------------

LAYERS = ("grouping", "macro", "connectivity", "rst")


@dataclass(frozen=True)
class AgreementTask:
    id: str
    layer: str
    diagram_id: str
    unit: str
    highlight: tuple[str, ...]
    question: str
    choices: tuple[str, ...]
    hop_depth: int | None = None


def _leaf_groups(d: Diagram) -> list[tuple[str, tuple[str, ...]]]:
    """Groups whose children are all plain elements; nested groups are not
    eligible agreement units."""
    children = d.grouping.children_map()
    out = []
    for gid in sorted(d.grouping.group_ids(), key=id_sort_key):
        kids = children.get(gid, [])
        if kids and not any(is_group_id(c) for c in kids):
            out.append((gid, tuple(kids)))
    return out


def eligible_units(diagrams: Sequence[Diagram], layer: str,
                   vocabulary: RelationVocabulary = DEFAULT_RELATIONS
                   ) -> list[AgreementTask]:
    """The full unit population for one layer, in deterministic order."""
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}, expected one of {LAYERS}")
    units: list[AgreementTask] = []
    relation_choices = tuple(sorted(vocabulary.names))
    for d in diagrams:
        if layer == "grouping":
            for gid, members in _leaf_groups(d):
                units.append(AgreementTask(
                    id=f"{d.diagram_id}:{gid}",
                    layer=layer,
                    diagram_id=d.diagram_id,
                    unit=gid,
                    highlight=members,
                    question="Do the highlighted elements form a visual group?",
                    choices=GROUPING_CHOICES,
                ))
        elif layer == "macro":
            for node in sorted(d.grouping.macro_labels, key=id_sort_key):
                units.append(AgreementTask(
                    id=f"{d.diagram_id}:{node}",
                    layer=layer,
                    diagram_id=d.diagram_id,
                    unit=node,
                    highlight=(node,),
                    question="Which macro-group does the highlighted node organise?",
                    choices=tuple(m.value for m in MacroGroup),
                ))
        elif layer == "connectivity":
            for i, e in enumerate(d.connectivity.edges):
                units.append(AgreementTask(
                    id=f"{d.diagram_id}:conn{i}:{e.source}-{e.target}",
                    layer=layer,
                    diagram_id=d.diagram_id,
                    unit=f"{e.source}->{e.target}",
                    highlight=(e.source, e.target),
                    question="How are the highlighted units connected?",
                    choices=CONNECTIVITY_CHOICES,
                ))
        else:  # rst
            for rel in sorted(d.rst.relations, key=lambda r: id_sort_key(r.id)):
                members = tuple(e.child for e in d.rst.children_of(rel.id))
                units.append(AgreementTask(
                    id=f"{d.diagram_id}:{rel.id}",
                    layer=layer,
                    diagram_id=d.diagram_id,
                    unit=rel.id,
                    highlight=members,
                    question="Which discourse relation holds between the "
                             "highlighted units?",
                    choices=relation_choices,
                    hop_depth=d.rst.hop_depth(rel.id),
                ))
    return units


def sample_agreement_tasks(
    diagrams: Sequence[Diagram],
    layer: str,
    fraction: float,
    seed: int,
    vocabulary: RelationVocabulary = DEFAULT_RELATIONS,
) -> list[AgreementTask]:
    """Simple random sample, without replacement, of the eligible units.

    The sample size is ``floor(fraction * population)`` with a minimum of
    one unit; a fixed seed makes the draw reproducible.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    population = eligible_units(diagrams, layer, vocabulary)
    if not population:
        raise EmptyPopulation(f"no eligible {layer} units in the corpus")
    count = max(1, int(math.floor(fraction * len(population))))
    import random as _random

    rng = _random.Random(seed)
    picked = rng.sample(range(len(population)), count)
    return [population[i] for i in sorted(picked)]
