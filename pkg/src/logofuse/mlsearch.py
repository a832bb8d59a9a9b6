"""Exact weighted nearest-neighbor retrieval and multi-label classifiers.

The index is an immutable column store: one (N, dim) matrix per
characteristic, scanned exhaustively for every query.  Distance ties
are broken by ascending logo id so rankings are reproducible across
runs, platforms, and implementations.

Three classification routes share the index:

  * ``knn_label_scores``   -- neighbor vote fractions per label
  * ``brknn_classify``     -- one independent binary vote per label
                              (numerically identical to the former by
                              construction; both ship because they are
                              distinct protocols with distinct code)
  * label powerset         -- every distinct labelset becomes one class
                              of a random forest over the fused vector
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import FeatureBlock, FeatureError, FusedFeature, QueryWeights
from .forest import RandomForest, Tree
from .metrics import RankEvaluation
from .taxonomy import KIND_ORDER, CharacteristicKind

DEFAULT_K = 9
DEFAULT_TREES = 100

Annotations = Mapping[int, Mapping[CharacteristicKind, frozenset[int] | set[int]]]


class SearchIndexError(ValueError):
    """Index construction or query contract violation."""


@dataclass(frozen=True)
class SearchConfig:
    weights: QueryWeights
    k: int = DEFAULT_K
    trees: int = DEFAULT_TREES
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise SearchIndexError("k must be >= 1")
        if self.trees < 1:
            raise SearchIndexError("tree count must be >= 1")


@dataclass(frozen=True)
class RankedResult:
    """Hits ordered by non-decreasing distance, id-ascending on ties."""

    hits: tuple[tuple[int, float], ...]
    requested_k: int
    corpus_size: int

    @property
    def truncated(self) -> bool:
        return len(self.hits) < self.corpus_size

    def ids(self) -> list[int]:
        return [i for i, _ in self.hits]


@dataclass(frozen=True)
class LabelScores:
    kind: CharacteristicKind
    scores: np.ndarray  # (n_labels,) confidences in [0, 1]

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if not np.isfinite(s).all():
            raise SearchIndexError("label scores must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def top(self, floor: float = 0.0) -> list[tuple[int, float]]:
        """(label_id, confidence) sorted by descending confidence, then
        ascending label id, keeping entries strictly above ``floor``."""
        order = np.lexsort((np.arange(self.scores.size), -self.scores))
        return [(int(i), float(self.scores[i])) for i in order if self.scores[i] > floor]


class SearchIndex:
    """Immutable searchable collection of fused features."""

    def __init__(
        self,
        schema: Mapping[CharacteristicKind, int],
        ids: np.ndarray,
        matrices: Mapping[CharacteristicKind, np.ndarray],
        annotations: Annotations,
        label_counts: Mapping[CharacteristicKind, int] | None = None,
    ):
        self.schema = {k: int(schema[k]) for k in KIND_ORDER if k in schema}
        self.ids = ids
        self.matrices = {k: matrices[k] for k in self.schema}
        self.annotations = {
            int(i): {k: frozenset(v) for k, v in kinds.items()}
            for i, kinds in annotations.items()
        }
        self._label_counts = dict(label_counts or {})
        self._row_by_id = {int(i): row for row, i in enumerate(ids)}

    def __len__(self) -> int:
        return self.ids.size

    def has_id(self, logo_id: int) -> bool:
        return logo_id in self._row_by_id

    def feature(self, logo_id: int) -> FusedFeature:
        try:
            row = self._row_by_id[logo_id]
        except KeyError:
            raise SearchIndexError(f"unknown logo id {logo_id}") from None
        return FusedFeature(
            {k: FeatureBlock(k, self.matrices[k][row]) for k in self.schema}
        )

    def labels_of(self, logo_id: int, kind: CharacteristicKind) -> frozenset[int]:
        return self.annotations.get(logo_id, {}).get(kind, frozenset())

    def label_count(self, kind: CharacteristicKind) -> int:
        if kind in self._label_counts:
            return self._label_counts[kind]
        highest = -1
        for kinds in self.annotations.values():
            for label in kinds.get(kind, ()):
                highest = max(highest, label)
        if highest < 0:
            raise SearchIndexError(f"no annotations for kind {kind.token}")
        return highest + 1


def build_index(
    records: Sequence[tuple[int, FusedFeature]],
    annotations: Annotations,
    schema: Mapping[CharacteristicKind, int],
    label_counts: Mapping[CharacteristicKind, int] | None = None,
) -> SearchIndex:
    """Validate and freeze records into a searchable index.

    Every record must carry exactly the schema kinds at the declared
    dims, with unit-norm (or all-zero) blocks.  Duplicate ids and
    schema violations fail the build by name.
    """
    if not records:
        raise SearchIndexError("cannot build an empty index")
    schema = {k: int(d) for k, d in schema.items()}
    ids = np.zeros(len(records), dtype=np.uint64)
    matrices = {k: np.zeros((len(records), d)) for k, d in schema.items()}
    seen: set[int] = set()
    for row, (logo_id, feature) in enumerate(records):
        logo_id = int(logo_id)
        if logo_id in seen:
            raise SearchIndexError(f"duplicate logo id {logo_id}")
        seen.add(logo_id)
        ids[row] = logo_id
        for kind, dim in schema.items():
            block = feature.blocks.get(kind)
            if block is None:
                raise SearchIndexError(f"record {logo_id}: missing {kind.token} block")
            if block.dim != dim:
                raise SearchIndexError(
                    f"record {logo_id}: {kind.token} dim {block.dim} != schema dim {dim}"
                )
            if not block.is_normalized():
                raise SearchIndexError(
                    f"record {logo_id}: {kind.token} block is not L2-normalized"
                )
            matrices[kind][row] = block.values
        extra = set(feature.blocks) - set(schema)
        if extra:
            raise SearchIndexError(
                f"record {logo_id}: blocks outside the schema: "
                + ", ".join(k.token for k in sorted(extra, key=lambda k: k.value))
            )
    return SearchIndex(schema, ids, matrices, annotations, label_counts)


def _scan_distances(index: SearchIndex, query: FusedFeature, weights: QueryWeights) -> np.ndarray:
    """Weighted distance from the query to every record (full scan)."""
    num = np.zeros(len(index))
    den = 0.0
    for kind in weights.positive_kinds():
        w = weights.get(kind)
        if kind not in index.schema:
            raise SearchIndexError(f"index has no {kind.token} blocks but weight > 0")
        q = query.block(kind)  # raises FeatureError when absent
        if q.dim != index.schema[kind]:
            raise FeatureError(
                f"query {kind.token} dim {q.dim} != index dim {index.schema[kind]}"
            )
        diff = index.matrices[kind] - q.values
        num += w * np.sqrt(np.sum(diff * diff, axis=1))
        den += w
    return num / den


def query_knn(index: SearchIndex, query: FusedFeature, cfg: SearchConfig) -> RankedResult:
    """Exact top-k by weighted distance; ties ordered by ascending id."""
    distances = _scan_distances(index, query, cfg.weights)
    order = np.lexsort((index.ids, distances))
    top = order[: cfg.k]
    hits = tuple((int(index.ids[i]), float(distances[i])) for i in top)
    return RankedResult(hits=hits, requested_k=cfg.k, corpus_size=len(index))


def knn_label_scores(
    index: SearchIndex, query: FusedFeature, cfg: SearchConfig, kind: CharacteristicKind
) -> LabelScores:
    """Vote fraction of the k nearest neighbors per label."""
    neighbors = query_knn(index, query, cfg).ids()
    n_labels = index.label_count(kind)
    votes = np.zeros(n_labels)
    for logo_id in neighbors:
        for label in index.labels_of(logo_id, kind):
            votes[label] += 1.0
    return LabelScores(kind, votes / len(neighbors))


def brknn_classify(
    index: SearchIndex, query: FusedFeature, cfg: SearchConfig, kind: CharacteristicKind
) -> LabelScores:
    """Binary-relevance kNN: one independent one-against-all decision
    per label over the shared neighbor set."""
    neighbors = query_knn(index, query, cfg).ids()
    n_labels = index.label_count(kind)
    scores = np.zeros(n_labels)
    for label in range(n_labels):
        positive = sum(1 for logo_id in neighbors if label in index.labels_of(logo_id, kind))
        scores[label] = positive / len(neighbors)
    return LabelScores(kind, scores)


# -- label powerset over a random forest -------------------------------------

MODEL_FORMAT = "logofuse-lp"
MODEL_VERSION = 1


@dataclass
class LabelPowersetModel:
    kind: CharacteristicKind
    n_labels: int
    classes: tuple[frozenset[int], ...]
    forest: RandomForest
    dim: int

    @property
    def seed(self) -> int:
        return self.forest.seed

    @property
    def n_trees(self) -> int:
        return self.forest.n_trees


def labelpowerset_train(
    features: np.ndarray,
    labelsets: Sequence[Iterable[int]],
    cfg: SearchConfig,
    kind: CharacteristicKind,
    n_labels: int,
) -> LabelPowersetModel:
    """Treat each distinct labelset as an atomic class and fit a forest."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SearchIndexError("training features must be a non-empty 2-D array")
    if len(labelsets) != X.shape[0]:
        raise SearchIndexError("one labelset per training row is required")
    classes: list[frozenset[int]] = []
    class_of: dict[frozenset[int], int] = {}
    y = np.zeros(X.shape[0], dtype=np.int64)
    for i, labels in enumerate(labelsets):
        labelset = frozenset(int(l) for l in labels)
        if not labelset:
            raise SearchIndexError(f"training row {i} has an empty labelset")
        if labelset not in class_of:
            class_of[labelset] = len(classes)
            classes.append(labelset)
        y[i] = class_of[labelset]
    forest = RandomForest(n_trees=cfg.trees, seed=cfg.seed).fit(X, y)
    return LabelPowersetModel(
        kind=kind, n_labels=n_labels, classes=tuple(classes), forest=forest, dim=X.shape[1]
    )


def labelpowerset_predict(model: LabelPowersetModel, vector: np.ndarray) -> LabelScores:
    """Sum the forest's per-class vote mass into per-label confidences."""
    v = np.asarray(vector, dtype=np.float64).ravel()
    if v.size != model.dim:
        raise SearchIndexError(f"query dim {v.size} != training dim {model.dim}")
    shares = model.forest.vote_shares(v)[0]
    scores = np.zeros(model.n_labels)
    for class_id, labelset in enumerate(model.classes):
        for label in labelset:
            scores[label] += shares[class_id]
    return LabelScores(model.kind, scores)


def save_model(model: LabelPowersetModel, path: str | Path) -> None:
    """Versioned binary: a zip of the header and the flat tree arrays."""
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind.token,
        "n_labels": model.n_labels,
        "dim": model.dim,
        "seed": model.seed,
        "n_trees": model.n_trees,
        "hyperparameters": {
            "max_depth": None,
            "min_leaf": 1,
            "feature_subsample": "sqrt",
            "bootstrap": True,
            "split": "gini",
        },
        "classes": [sorted(c) for c in model.classes],
    }
    arrays = {}
    for t, tree in enumerate(model.forest.trees):
        arrays[f"t{t}_feature"] = tree.feature
        arrays[f"t{t}_threshold"] = tree.threshold
        arrays[f"t{t}_left"] = tree.left
        arrays[f"t{t}_right"] = tree.right
        arrays[f"t{t}_counts"] = tree.counts
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> LabelPowersetModel:
    with np.load(path) as bundle:
        header = json.loads(bytes(bundle["header"]).decode())
        if header.get("format") != MODEL_FORMAT:
            raise SearchIndexError(f"{path}: not a label-powerset model file")
        if header.get("version") != MODEL_VERSION:
            raise SearchIndexError(f"{path}: unsupported model version {header.get('version')}")
        forest = RandomForest(n_trees=header["n_trees"], seed=header["seed"])
        forest.n_features = header["dim"]
        forest.n_classes = len(header["classes"])
        forest.trees = [
            Tree(
                feature=bundle[f"t{t}_feature"],
                threshold=bundle[f"t{t}_threshold"],
                left=bundle[f"t{t}_left"],
                right=bundle[f"t{t}_right"],
                counts=bundle[f"t{t}_counts"],
            )
            for t in range(header["n_trees"])
        ]
    return LabelPowersetModel(
        kind=CharacteristicKind.from_token(header["kind"]),
        n_labels=header["n_labels"],
        classes=tuple(frozenset(c) for c in header["classes"]),
        forest=forest,
        dim=header["dim"],
    )


# -- retrieval evaluation (query injection) ----------------------------------


def nar_rank_evaluations(
    index: SearchIndex,
    groups: Mapping[int, Sequence[int]],
    weights: QueryWeights,
) -> list[tuple[int, RankEvaluation]]:
    """Rank every group member's peers with the member as the query.

    The query itself is removed from its ranking, so each evaluation
    covers a corpus of N-1 records with the remaining group members as
    the relevant set.  Returns (query id, evaluation) pairs.
    """
    results = []
    cfg_k = len(index)
    for group_id in sorted(groups):
        members = [int(m) for m in groups[group_id]]
        for query_id in members:
            ranking = query_knn(
                index, index.feature(query_id), SearchConfig(weights=weights, k=cfg_k)
            )
            relevant = set(members) - {query_id}
            ranks = []
            position = 0
            for logo_id, _ in ranking.hits:
                if logo_id == query_id:
                    continue
                position += 1
                if logo_id in relevant:
                    ranks.append(position)
            results.append(
                (query_id, RankEvaluation(corpus_size=len(index) - 1, ranks=tuple(ranks)))
            )
    return results
