"""Shared engine behind the CLI and the HTTP service.

Owns the on-disk index layout and the glue between modules: manifest in,
preprocessing + feature extraction, index build, label-powerset training,
query routing (by corpus id or by raw image), and metric evaluation.

Index directory layout::

    index.json            schema, label counts, build settings
    manifest.jsonl        the records behind the index
    nc_<kind>.ncf         one embedding store per characteristic
    lp_<kind>.lpm         optional label-powerset model per characteristic

Rebuilding from the same inputs reproduces the directory byte for byte.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import features as ft
from . import mlsearch as ms
from . import preprocess as pp
from .metrics import degenerate_sample_counts, lrap, lrl, nar
from .store import DatasetManifest, build_annotations, load_manifest, save_manifest
from .taxonomy import CharacteristicKind, LabelSpaces, build_label_spaces

INDEX_META = "index.json"

#: Kinds the image-based extractors can produce, with their dims.
BASELINE_SCHEMA = {
    CharacteristicKind.COLOR: 125,
    CharacteristicKind.SHAPE: 128,
    CharacteristicKind.TEXT: 2,
}

WEIGHT_PRESETS = {
    "color70_shape30": {CharacteristicKind.COLOR: 0.7, CharacteristicKind.SHAPE: 0.3},
    "color30_shape70": {CharacteristicKind.COLOR: 0.3, CharacteristicKind.SHAPE: 0.7},
}

CONFIDENCE_FLOOR = 0.02


class EngineError(ValueError):
    pass


def parse_weight_spec(text: str) -> dict[CharacteristicKind, float]:
    """Parse ``color=0.3,shape=0.7`` into a raw weight mapping."""
    if text in WEIGHT_PRESETS:
        return dict(WEIGHT_PRESETS[text])
    out: dict[CharacteristicKind, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise EngineError(f"weight entry {part!r} must look like kind=value")
        token, value = part.split("=", 1)
        kind = CharacteristicKind.from_token(token)
        try:
            out[kind] = float(value)
        except ValueError:
            raise EngineError(f"weight value {value!r} is not a number") from None
    if not out:
        raise EngineError("no weights given")
    return out


def preprocess_image(path_or_array, crop: bool = True) -> np.ndarray:
    img = pp.load_image(path_or_array) if isinstance(path_or_array, (str, Path)) else path_or_array
    if crop:
        img = pp.crop_uniform_border(img)
    return pp.resize_normalize(img)


def extract_baseline_blocks(
    normalized: np.ndarray, kinds: Iterable[CharacteristicKind]
) -> dict[CharacteristicKind, ft.FeatureBlock]:
    blocks = {}
    for kind in kinds:
        extractor = ft.BASELINE_EXTRACTORS.get(kind)
        if extractor is None:
            raise EngineError(f"no baseline extractor for kind {kind.token}")
        blocks[kind] = extractor(normalized)
    return blocks


def extract_manifest_features(
    manifest: DatasetManifest,
    kinds: Iterable[CharacteristicKind] = (CharacteristicKind.COLOR, CharacteristicKind.SHAPE),
    crop: bool = True,
) -> dict[CharacteristicKind, dict[int, ft.FeatureBlock]]:
    """Run the preprocessing + baseline extractors over every record."""
    kinds = tuple(kinds)
    out: dict[CharacteristicKind, dict[int, ft.FeatureBlock]] = {k: {} for k in kinds}
    for record in manifest.records:
        normalized = preprocess_image(manifest.image_path(record), crop=crop)
        for kind, block in extract_baseline_blocks(normalized, kinds).items():
            out[kind][record.logo_id] = block
    return out


@dataclass
class Engine:
    """An immutable snapshot: label spaces + index + trained models."""

    spaces: LabelSpaces
    manifest: DatasetManifest
    index: ms.SearchIndex
    models: dict[CharacteristicKind, ms.LabelPowersetModel] = field(default_factory=dict)

    # -- queries --------------------------------------------------------

    def feature_for_query(self, query: int | np.ndarray | str | Path) -> ft.FusedFeature:
        """Corpus ids hit the stored vectors; images run the baseline path."""
        if isinstance(query, (int, np.integer)):
            return self.index.feature(int(query))
        normalized = preprocess_image(query)
        kinds = [k for k in self.index.schema if k in BASELINE_SCHEMA]
        blocks = extract_baseline_blocks(normalized, kinds)
        return ft.FusedFeature(blocks)

    def search(
        self,
        query: int | np.ndarray | str | Path,
        raw_weights: Mapping[CharacteristicKind, float],
        k: int = ms.DEFAULT_K,
    ) -> tuple[ms.RankedResult, ft.QueryWeights]:
        weights = ft.QueryWeights.normalized(raw_weights)
        feature = self.feature_for_query(query)
        result = ms.query_knn(self.index, feature, ms.SearchConfig(weights=weights, k=k))
        return result, weights

    def classify(
        self,
        query: int | np.ndarray | str | Path,
        kind: CharacteristicKind,
        method: str = "knn",
        k: int = ms.DEFAULT_K,
        raw_weights: Mapping[CharacteristicKind, float] | None = None,
    ) -> ms.LabelScores:
        feature = self.feature_for_query(query)
        if method == "lp":
            model = self.models.get(kind)
            if model is None:
                raise EngineError(f"no label-powerset model trained for {kind.token}")
            return ms.labelpowerset_predict(model, feature.concatenated())
        weights = ft.QueryWeights.normalized(
            raw_weights if raw_weights else {k_: 1.0 for k_ in self.index.schema}
        )
        cfg = ms.SearchConfig(weights=weights, k=k)
        if method == "knn":
            return ms.knn_label_scores(self.index, feature, cfg, kind)
        if method == "brknn":
            return ms.brknn_classify(self.index, feature, cfg, kind)
        raise EngineError(f"unknown method {method!r} (expected knn, brknn, or lp)")

    def labels_payload(self, kind: CharacteristicKind) -> list[dict]:
        space = self.spaces.space(kind)
        return [{"id": lb.label_id, "name": lb.name} for lb in space.labels]

    def named_scores(
        self, scores: ms.LabelScores, floor: float = CONFIDENCE_FLOOR
    ) -> list[dict]:
        space = self.spaces.space(scores.kind)
        return [
            {"label_id": i, "name": space.label(i).name, "confidence": c}
            for i, c in scores.top(floor)
        ]

    # -- evaluation ------------------------------------------------------

    def evaluate_predictions(self, csv_path: str | Path, kind: CharacteristicKind) -> dict:
        """LRAP/LRL of a ``logo-id,label-id,score`` file against ground truth."""
        n_labels = len(self.spaces.space(kind))
        scores_by_id: dict[int, np.ndarray] = {}
        with open(csv_path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() in ("logo-id", "logo_id", "id"):
                    continue
                if len(row) != 3:
                    raise EngineError(f"prediction rows need 3 fields, got {row}")
                logo_id, label_id, score = int(row[0]), int(row[1]), float(row[2])
                if not 0 <= label_id < n_labels:
                    raise EngineError(f"label id {label_id} outside the {kind.token} space")
                scores_by_id.setdefault(logo_id, np.zeros(n_labels))[label_id] = score
        if not scores_by_id:
            raise EngineError(f"no prediction rows found in {csv_path}")
        ids = sorted(scores_by_id)
        f_hat = np.vstack([scores_by_id[i] for i in ids])
        y = np.zeros_like(f_hat, dtype=int)
        for row, logo_id in enumerate(ids):
            for label in self.index.labels_of(logo_id, kind):
                y[row, label] = 1
        counts = degenerate_sample_counts(y)
        return {
            "kind": kind.token,
            "n_samples": len(ids),
            "n_labels": n_labels,
            "lrap": lrap(y, f_hat),
            "lrl": lrl(y, f_hat),
            **counts,
        }

    def evaluate_retrieval(
        self, groups: Mapping[int, list[int]], raw_weights: Mapping[CharacteristicKind, float]
    ) -> dict:
        weights = ft.QueryWeights.normalized(raw_weights)
        evaluations = ms.nar_rank_evaluations(self.index, groups, weights)
        values = [nar(ev) for _, ev in evaluations]
        return {
            "weights": {k.token: weights.get(k) for k in weights.positive_kinds()},
            "n_queries": len(values),
            "nar_mean": float(np.mean(values)),
            "nar_max": float(np.max(values)),
            "per_query": [
                {"query": qid, "nar": nar(ev), "ranks": list(ev.ranks)}
                for qid, ev in evaluations
            ],
        }


def build_engine(
    manifest: DatasetManifest,
    spaces: LabelSpaces | None = None,
    embeddings: Mapping[CharacteristicKind, str | Path] | None = None,
    baseline_kinds: Iterable[CharacteristicKind] = (
        CharacteristicKind.COLOR,
        CharacteristicKind.SHAPE,
    ),
    train_powerset: bool = True,
    crop: bool = True,
    trees: int = ms.DEFAULT_TREES,
    seed: int = 0,
) -> Engine:
    """Extract (or import) features for a manifest and assemble an engine."""
    spaces = spaces or build_label_spaces()
    blocks_by_kind: dict[CharacteristicKind, dict[int, ft.FeatureBlock]] = {}
    if embeddings:
        for kind, path in embeddings.items():
            blocks = ft.read_neural_codes(path)
            if blocks and next(iter(blocks.values())).kind is not kind:
                raise EngineError(f"{path}: store kind does not match {kind.token}")
            blocks_by_kind[kind] = blocks
    missing = [k for k in baseline_kinds if k not in blocks_by_kind]
    if missing:
        blocks_by_kind.update(extract_manifest_features(manifest, missing, crop=crop))
    if not blocks_by_kind:
        raise EngineError("no feature source: give embeddings or baseline kinds")
    schema = {k: next(iter(v.values())).dim for k, v in blocks_by_kind.items() if v}
    records = []
    for record in manifest.records:
        blocks = {}
        for kind, by_id in blocks_by_kind.items():
            if record.logo_id not in by_id:
                raise EngineError(f"record {record.logo_id}: no {kind.token} vector")
            blocks[kind] = by_id[record.logo_id]
        records.append((record.logo_id, ft.FusedFeature(blocks)))
    annotations = build_annotations(manifest, spaces)
    index = ms.build_index(records, annotations, schema, spaces.label_counts())
    engine = Engine(spaces=spaces, manifest=manifest, index=index)
    if train_powerset:
        engine.models = _train_powerset_models(engine, trees=trees, seed=seed)
    return engine


def _train_powerset_models(
    engine: Engine, trees: int, seed: int
) -> dict[CharacteristicKind, ms.LabelPowersetModel]:
    """One model per kind over the training split's fused vectors."""
    train_records = engine.manifest.subset("train") or engine.manifest.records
    models = {}
    for kind in engine.spaces.kinds:
        rows = []
        labelsets = []
        for record in train_records:
            labels = engine.index.labels_of(record.logo_id, kind)
            if not labels:
                continue
            rows.append(engine.index.feature(record.logo_id).concatenated())
            labelsets.append(labels)
        if not rows:
            continue
        cfg = ms.SearchConfig(
            weights=ft.QueryWeights.normalized({k: 1.0 for k in engine.index.schema}),
            trees=trees,
            seed=seed,
        )
        models[kind] = ms.labelpowerset_train(
            np.vstack(rows), labelsets, cfg, kind, len(engine.spaces.space(kind))
        )
    return models


# -- persistence --------------------------------------------------------------


def save_engine(engine: Engine, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(engine.manifest, out_dir / "manifest.jsonl")
    for kind in engine.index.schema:
        vectors = {
            int(i): engine.index.matrices[kind][row].astype(np.float32)
            for row, i in enumerate(engine.index.ids.tolist())
        }
        ft.write_neural_codes(out_dir / f"nc_{kind.token}.ncf", kind, vectors, normalized=True)
    for kind, model in engine.models.items():
        ms.save_model(model, out_dir / f"lp_{kind.token}.lpm")
    meta = {
        "format": "logofuse-index",
        "version": 1,
        "schema": {k.token: d for k, d in engine.index.schema.items()},
        "records": len(engine.index),
        "models": sorted(k.token for k in engine.models),
        "inscriptions_as_text": engine.spaces.inscriptions_as_text,
        # record paths stay relative to the corpus they were built from
        "image_root": str(Path(engine.manifest.root).resolve()),
    }
    (out_dir / INDEX_META).write_text(json.dumps(meta, indent=2), "utf-8")


def load_engine(index_dir: str | Path) -> Engine:
    index_dir = Path(index_dir)
    meta_path = index_dir / INDEX_META
    if not meta_path.exists():
        raise EngineError(f"{index_dir} is not an index directory (missing {INDEX_META})")
    meta = json.loads(meta_path.read_text("utf-8"))
    if meta.get("format") != "logofuse-index":
        raise EngineError(f"{index_dir}: unrecognized index format")
    spaces = build_label_spaces(inscriptions_as_text=meta.get("inscriptions_as_text", True))
    manifest = load_manifest(index_dir / "manifest.jsonl")
    if "image_root" in meta:
        manifest = DatasetManifest(
            root=Path(meta["image_root"]), records=manifest.records,
            version=manifest.version, issues=manifest.issues,
        )
    blocks_by_kind = {}
    for token in meta["schema"]:
        kind = CharacteristicKind.from_token(token)
        blocks_by_kind[kind] = ft.read_neural_codes(index_dir / f"nc_{token}.ncf")
    schema = {k: next(iter(v.values())).dim for k, v in blocks_by_kind.items()}
    records = [
        (
            record.logo_id,
            ft.FusedFeature({k: v[record.logo_id] for k, v in blocks_by_kind.items()}),
        )
        for record in manifest.records
    ]
    annotations = build_annotations(manifest, spaces)
    index = ms.build_index(records, annotations, schema, spaces.label_counts())
    engine = Engine(spaces=spaces, manifest=manifest, index=index)
    for token in meta.get("models", []):
        kind = CharacteristicKind.from_token(token)
        engine.models[kind] = ms.load_model(index_dir / f"lp_{token}.lpm")
    return engine
