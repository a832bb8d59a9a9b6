"""Command-line interface.

Most subcommands operate on an index directory produced by ``index``;
set ``LOGOFUSE_DATA`` to change where data lands by default.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import engine as eng
from . import report as rp
from .mlsearch import DEFAULT_K, DEFAULT_TREES
from .store import (
    ManifestError,
    SyntheticSpec,
    generate_synthetic_corpus,
    load_groups,
    load_manifest,
    save_manifest,
    split_train_test,
)
from .taxonomy import CharacteristicKind, build_label_spaces, explain


def data_root() -> Path:
    return Path(os.environ.get("LOGOFUSE_DATA", "."))


def _parse_query(value: str) -> int | Path:
    if value.isdigit():
        return int(value)
    path = Path(value)
    if not path.exists():
        raise click.UsageError(f"query {value!r} is neither a logo id nor an image file")
    return path


def _load(index_dir: str) -> eng.Engine:
    try:
        return eng.load_engine(index_dir)
    except (eng.EngineError, ManifestError, OSError) as err:
        raise click.ClickException(str(err))


@click.group()
def main() -> None:
    """Multi-label logo classification and weighted similarity search."""


@main.group()
def taxonomy() -> None:
    """Inspect the grouped label spaces."""


@taxonomy.command("explain")
@click.argument("code")
def taxonomy_explain(code: str) -> None:
    """Show how one classification code maps into the label spaces."""
    try:
        click.echo(explain(code, build_label_spaces()))
    except ValueError as err:
        raise click.ClickException(str(err))


@main.command()
@click.argument("image", type=click.Path(exists=True))
@click.option("--crop/--no-crop", default=True, help="strip color-uniform borders")
@click.option("--fill-mask", type=click.Path(exists=True), help="text-mask PNG to blank out")
@click.option("--out", required=True, type=click.Path(), help="output image path")
def preprocess(image: str, crop: bool, fill_mask: str | None, out: str) -> None:
    """Crop borders and/or fill a text region of one image."""
    from . import preprocess as pp

    img = pp.load_image(image)
    if fill_mask:
        img = pp.fill_text_region(img, pp.load_mask(fill_mask))
    if crop:
        img = pp.crop_uniform_border(img)
    pp.save_image(img, out)
    click.echo(f"wrote {out} ({img.shape[1]}x{img.shape[0]})")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
def ingest(manifest: str) -> None:
    """Validate a manifest and print its issue report."""
    try:
        loaded = load_manifest(manifest)
    except ManifestError as err:
        click.echo(f"rejected: {err}", err=True)
        for issue in err.issues:
            click.echo(f"  line {issue.line}: {issue.message}", err=True)
        sys.exit(1)
    click.echo(f"{len(loaded.records)} valid record(s), {len(loaded.issues)} issue(s)")
    for issue in loaded.issues:
        click.echo(f"  line {issue.line}: {issue.message}")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="synthetic spec JSON")
@click.option("--n-logos", type=int, help="corpus size (ignored when --spec is given)")
@click.option("--groups", type=int, default=0, help="number of near-duplicate groups")
@click.option("--per-group", type=int, default=0, help="members per duplicate group")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None, help="output directory")
def synth(spec_path, n_logos, groups, per_group, seed, out) -> None:
    """Render a synthetic logo corpus with known ground truth."""
    if spec_path:
        spec = SyntheticSpec.from_json(spec_path)
    elif n_logos:
        spec = SyntheticSpec(
            n_logos=n_logos, duplicate_groups=groups, duplicates_per_group=per_group, seed=seed
        )
    else:
        raise click.UsageError("give --spec or --n-logos")
    out_dir = Path(out) if out else data_root() / "synth"
    manifest, group_map = generate_synthetic_corpus(spec, out_dir)
    click.echo(
        f"wrote {len(manifest.records)} logos to {out_dir} "
        f"({len(group_map)} duplicate group(s))"
    )


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--ratio", type=float, default=0.8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), help="where to write the split manifest")
def split(manifest: str, ratio: float, seed: int, out: str | None) -> None:
    """Assign train/test splits deterministically."""
    loaded = load_manifest(manifest)
    result = split_train_test(loaded, ratio, seed)
    target = Path(out) if out else Path(manifest)
    save_manifest(result, target)
    click.echo(
        f"{len(result.subset('train'))} train / {len(result.subset('test'))} test -> {target}"
    )


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), required=True, help="directory for .ncf stores")
@click.option("--kinds", default="color,shape", show_default=True)
@click.option("--crop/--no-crop", default=True)
def extract(manifest: str, out: str, kinds: str, crop: bool) -> None:
    """Run the baseline extractors and write embedding stores."""
    from .features import write_neural_codes

    wanted = [CharacteristicKind.from_token(t) for t in kinds.split(",") if t]
    loaded = load_manifest(manifest)
    blocks = eng.extract_manifest_features(loaded, wanted, crop=crop)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind, by_id in blocks.items():
        path = out_dir / f"nc_{kind.token}.ncf"
        write_neural_codes(path, kind, {i: b.values for i, b in by_id.items()}, normalized=True)
        click.echo(f"wrote {path} ({len(by_id)} vectors)")


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--embeddings", type=click.Path(exists=True), help="directory of nc_<kind>.ncf files")
@click.option("--out", type=click.Path(), default=None, help="index directory")
@click.option("--powerset/--no-powerset", default=True, help="train label-powerset models")
@click.option("--trees", type=int, default=DEFAULT_TREES, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--crop/--no-crop", default=True)
def index(manifest, embeddings, out, powerset, trees, seed, crop) -> None:
    """Build a searchable index (and models) from a manifest."""
    loaded = load_manifest(manifest)
    embedding_paths = None
    if embeddings:
        embedding_paths = {}
        for path in sorted(Path(embeddings).glob("nc_*.ncf")):
            token = path.stem[len("nc_"):]
            embedding_paths[CharacteristicKind.from_token(token)] = path
        if not embedding_paths:
            raise click.ClickException(f"no nc_<kind>.ncf files under {embeddings}")
    try:
        built = eng.build_engine(
            loaded,
            embeddings=embedding_paths,
            train_powerset=powerset,
            trees=trees,
            seed=seed,
            crop=crop,
        )
    except (eng.EngineError, ValueError) as err:
        raise click.ClickException(str(err))
    out_dir = Path(out) if out else data_root() / "index"
    eng.save_engine(built, out_dir)
    click.echo(
        f"indexed {len(built.index)} logos "
        f"({', '.join(k.token for k in built.index.schema)}) -> {out_dir}"
    )


@main.command()
@click.argument("query")
@click.option("--index", "index_dir", type=click.Path(exists=True), required=True)
@click.option("--weights", default="color=0.5,shape=0.5", show_default=True,
              help="kind=raw pairs or a preset name")
@click.option("--k", type=int, default=DEFAULT_K, show_default=True)
def search(query: str, index_dir: str, weights: str, k: int) -> None:
    """Rank the most similar logos for a logo id or image file."""
    engine = _load(index_dir)
    try:
        raw = eng.parse_weight_spec(weights)
        result, normalized = engine.search(_parse_query(query), raw, k=k)
    except (eng.EngineError, ValueError) as err:
        raise click.ClickException(str(err))
    used = ", ".join(f"{k_.token}={normalized.get(k_):.3f}" for k_ in normalized.positive_kinds())
    click.echo(f"weights: {used}")
    for rank, (logo_id, distance) in enumerate(result.hits, start=1):
        labels = []
        for kind in engine.spaces.kinds:
            ids = engine.index.labels_of(logo_id, kind)
            space = engine.spaces.space(kind)
            labels.extend(space.label(i).name for i in sorted(ids))
        click.echo(f"{rank:3d}. id={logo_id:<6d} d={distance:.6f}  {'; '.join(labels)}")


@main.command()
@click.argument("query")
@click.option("--index", "index_dir", type=click.Path(exists=True), required=True)
@click.option("--kind", default="color", show_default=True)
@click.option("--method", type=click.Choice(["knn", "brknn", "lp"]), default="knn",
              show_default=True)
@click.option("--k", type=int, default=DEFAULT_K, show_default=True)
@click.option("--weights", default=None, help="distance weights for knn/brknn")
@click.option("--floor", type=float, default=eng.CONFIDENCE_FLOOR, show_default=True)
def classify(query, index_dir, kind, method, k, weights, floor) -> None:
    """Suggest labels for one characteristic of a query logo."""
    engine = _load(index_dir)
    try:
        target = CharacteristicKind.from_token(kind)
        raw = eng.parse_weight_spec(weights) if weights else None
        scores = engine.classify(_parse_query(query), target, method=method, k=k, raw_weights=raw)
    except (eng.EngineError, ValueError) as err:
        raise click.ClickException(str(err))
    rows = engine.named_scores(scores, floor=floor)
    if not rows:
        click.echo(f"no {target.token} label above the {floor:.0%} floor")
    for row in rows:
        click.echo(f"{row['confidence']:6.2%}  {row['name']}")


@main.command()
@click.option("--index", "index_dir", type=click.Path(exists=True), required=True)
@click.option("--predictions", type=click.Path(exists=True), help="CSV: logo-id,label-id,score")
@click.option("--kind", default="color", show_default=True)
@click.option("--groups", "groups_path", type=click.Path(exists=True),
              help="groups.json for retrieval NAR")
@click.option("--weights", default="color30_shape70", show_default=True)
@click.option("--out-dir", type=click.Path(), help="write JSON/CSV/figures here")
def evaluate(index_dir, predictions, kind, groups_path, weights, out_dir) -> None:
    """Score predictions (LRAP/LRL) and/or retrieval quality (NAR)."""
    engine = _load(index_dir)
    if not predictions and not groups_path:
        raise click.UsageError("give --predictions and/or --groups")
    payload = {}
    both = bool(predictions and groups_path)
    try:
        if predictions:
            result = engine.evaluate_predictions(
                predictions, CharacteristicKind.from_token(kind)
            )
            payload.update({"lrap": result["lrap"], "lrl": result["lrl"]})
            click.echo(f"lrap={result['lrap']:.6f} lrl={result['lrl']:.6f}")
            if out_dir:
                target = Path(out_dir) / "predictions" if both else Path(out_dir)
                for path in rp.write_prediction_report(target, result):
                    click.echo(f"  wrote {path}")
        if groups_path:
            retrieval = engine.evaluate_retrieval(
                load_groups(groups_path), eng.parse_weight_spec(weights)
            )
            payload["nar"] = retrieval["nar_mean"]
            click.echo(f"nar={retrieval['nar_mean']:.6f} over {retrieval['n_queries']} queries")
            if out_dir:
                target = Path(out_dir) / "retrieval" if both else Path(out_dir)
                for path in rp.write_retrieval_report(target, retrieval):
                    click.echo(f"  wrote {path}")
    except (eng.EngineError, ValueError, OSError) as err:
        raise click.ClickException(str(err))
    if payload and not out_dir:
        click.echo(json.dumps(payload, sort_keys=True))


@main.command()
@click.option("--port", type=int, default=8070, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--index", "index_dir", type=click.Path(exists=True), default=None)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="static frontend bundle to mount at /ui")
def serve(port, host, index_dir, ui_dir) -> None:
    """Run the HTTP service."""
    from .service import serve as run

    run(index_dir, port=port, host=host, ui_dir=ui_dir)


if __name__ == "__main__":
    main()
