"""HTTP face of the engine: weighted search, label suggestion, evaluation.

Responses are rendered through a fixed JSON writer (insertion-ordered
keys, floats printed with 6 decimals) so identical requests against an
identical index return byte-identical bodies.  Queries read one engine
snapshot for their whole lifetime; ``/index/build`` prepares a new
engine off to the side and swaps the reference in one assignment.
"""
from __future__ import annotations

import base64
import io
import json
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse
from PIL import Image

from . import engine as eng
from .mlsearch import DEFAULT_K
from .store import ManifestError, load_groups, load_manifest
from .taxonomy import CharacteristicKind

MAX_K = 1000


def render_json(obj: Any) -> str:
    """Deterministic JSON: insertion-ordered keys, 6-decimal floats."""
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {render_json(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(render_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return f"{float(obj):.6f}"
    return json.dumps(obj)


def json_response(payload: Any, status_code: int = 200) -> Response:
    return Response(
        content=render_json(payload), status_code=status_code, media_type="application/json"
    )


def error_response(status_code: int, code: str, message: str, **extra) -> Response:
    body = {"error": {"code": code, "message": message, **extra}}
    return json_response(body, status_code=status_code)


def _decode_image_b64(data: str) -> np.ndarray:
    raw = base64.b64decode(data, validate=True)
    with Image.open(io.BytesIO(raw)) as im:
        return np.asarray(im.convert("RGB"))


class EngineHolder:
    """Mutable cell holding the current immutable engine snapshot."""

    def __init__(self, engine: eng.Engine | None = None):
        self.engine = engine

    def require(self) -> eng.Engine:
        if self.engine is None:
            raise LookupError("index not built")
        return self.engine


def _resolve_query(body: dict, engine: eng.Engine):
    if ("logo_id" in body) == ("image_b64" in body):
        raise ValueError("exactly one of logo_id or image_b64 is required")
    if "logo_id" in body:
        logo_id = int(body["logo_id"])
        if not engine.index.has_id(logo_id):
            raise KeyError(logo_id)
        return logo_id
    return _decode_image_b64(body["image_b64"])


def _parse_weights(body: dict) -> dict[CharacteristicKind, float]:
    raw = body.get("weights")
    if not isinstance(raw, dict) or not raw:
        raise ValueError("weights must be a non-empty object of kind -> raw weight")
    parsed = {}
    for token, value in raw.items():
        kind = CharacteristicKind.from_token(token)
        value = float(value)
        if value < 0 or not np.isfinite(value):
            raise ValueError(f"weight for {token} must be finite and >= 0")
        parsed[kind] = value
    if sum(parsed.values()) <= 0:
        raise ValueError("at least one weight must be positive")
    return parsed


def create_app(holder: EngineHolder | None = None) -> FastAPI:
    app = FastAPI(title="logofuse", docs_url=None, redoc_url=None)
    holder = holder if holder is not None else EngineHolder()
    app.state.holder = holder

    @app.get("/health")
    def health() -> Response:
        engine = holder.engine
        return json_response(
            {
                "status": "ok",
                "index_loaded": engine is not None,
                "records": len(engine.index) if engine else 0,
                "schema": {k.token: d for k, d in engine.index.schema.items()} if engine else {},
            }
        )

    @app.get("/labels")
    def labels(kind: str | None = None) -> Response:
        try:
            engine = holder.require()
        except LookupError:
            return error_response(409, "index_missing", "build or load an index first")
        if kind is not None:
            try:
                one = CharacteristicKind.from_token(kind)
            except ValueError as err:
                return error_response(400, "unknown_kind", str(err))
            return json_response({"kind": one.token, "labels": engine.labels_payload(one)})
        return json_response(
            {
                "spaces": [
                    {"kind": k.token, "labels": engine.labels_payload(k)}
                    for k in engine.spaces.kinds
                ]
            }
        )

    @app.get("/presets")
    def presets() -> Response:
        return json_response(
            {
                "presets": [
                    {"name": name, "weights": {k.token: w for k, w in weights.items()}}
                    for name, weights in eng.WEIGHT_PRESETS.items()
                ],
                "default_k": DEFAULT_K,
                "confidence_floor": eng.CONFIDENCE_FLOOR,
            }
        )

    @app.post("/search")
    async def search(request: Request) -> Response:
        try:
            engine = holder.require()
        except LookupError:
            return error_response(409, "index_missing", "build or load an index first")
        try:
            body = await request.json()
            raw_weights = _parse_weights(body)
            k = int(body.get("k", DEFAULT_K))
            if not 1 <= k <= MAX_K:
                raise ValueError(f"k must lie in [1, {MAX_K}]")
            query = _resolve_query(body, engine)
        except KeyError as err:
            return error_response(404, "unknown_logo", f"logo id {err.args[0]} is not indexed")
        except (ValueError, TypeError) as err:
            return error_response(400, "bad_request", str(err))
        try:
            result, weights = engine.search(query, raw_weights, k=k)
        except (eng.EngineError, ValueError) as err:
            return error_response(400, "bad_query", str(err))
        hits = []
        for logo_id, distance in result.hits:
            labels_by_kind = {
                kind.token: sorted(engine.index.labels_of(logo_id, kind))
                for kind in engine.spaces.kinds
                if engine.index.labels_of(logo_id, kind)
            }
            hits.append(
                {
                    "id": logo_id,
                    "distance": distance,
                    "thumbnail": f"/thumbs/{logo_id}.png",
                    "labels": labels_by_kind,
                }
            )
        return json_response(
            {
                "weights": {k_.token: weights.get(k_) for k_ in weights.positive_kinds()},
                "k": k,
                "truncated": result.truncated,
                "hits": hits,
            }
        )

    @app.post("/classify")
    async def classify(request: Request) -> Response:
        try:
            engine = holder.require()
        except LookupError:
            return error_response(409, "index_missing", "build or load an index first")
        try:
            body = await request.json()
            method = body.get("method", "knn")
            if method not in ("knn", "brknn", "lp"):
                raise ValueError(f"unknown method {method!r}")
            floor = float(body.get("floor", eng.CONFIDENCE_FLOOR))
            k = int(body.get("k", DEFAULT_K))
            tokens = body.get("kinds") or [k_.token for k_ in engine.spaces.kinds]
            kinds = [CharacteristicKind.from_token(t) for t in tokens]
            query = _resolve_query(body, engine)
        except KeyError as err:
            return error_response(404, "unknown_logo", f"logo id {err.args[0]} is not indexed")
        except (ValueError, TypeError) as err:
            return error_response(400, "bad_request", str(err))
        results = {}
        for kind in kinds:
            try:
                scores = engine.classify(query, kind, method=method, k=k)
            except eng.EngineError as err:
                return error_response(409, "model_missing", str(err))
            results[kind.token] = engine.named_scores(scores, floor=floor)
        return json_response({"method": method, "floor": floor, "results": results})

    @app.post("/index/build")
    async def index_build(request: Request) -> Response:
        try:
            body = await request.json()
            manifest_path = Path(body["manifest_path"])
        except (ValueError, KeyError, TypeError) as err:
            return error_response(400, "bad_request", f"manifest_path required: {err}")
        try:
            manifest = load_manifest(manifest_path)
        except ManifestError as err:
            return error_response(
                422, "bad_manifest", str(err), issues=[i.as_dict() for i in err.issues]
            )
        embeddings = {
            CharacteristicKind.from_token(token): path
            for token, path in (body.get("embeddings") or {}).items()
        }
        try:
            new_engine = eng.build_engine(
                manifest,
                embeddings=embeddings or None,
                train_powerset=bool(body.get("train_powerset", True)),
                trees=int(body.get("trees", 100)),
                seed=int(body.get("seed", 0)),
            )
        except (eng.EngineError, ValueError) as err:
            return error_response(422, "build_failed", str(err))
        holder.engine = new_engine  # atomic snapshot swap
        return json_response(
            {
                "records": len(new_engine.index),
                "schema": {k.token: d for k, d in new_engine.index.schema.items()},
                "models": sorted(k.token for k in new_engine.models),
                "issues": [i.as_dict() for i in manifest.issues],
            }
        )

    @app.post("/evaluate")
    async def evaluate(request: Request) -> Response:
        try:
            engine = holder.require()
        except LookupError:
            return error_response(409, "index_missing", "build or load an index first")
        try:
            body = await request.json()
            payload: dict[str, Any] = {"lrap": None, "lrl": None, "nar": None}
            if "predictions_path" in body:
                kind = CharacteristicKind.from_token(body.get("kind", "color"))
                pred = engine.evaluate_predictions(body["predictions_path"], kind)
                payload.update({"lrap": pred["lrap"], "lrl": pred["lrl"], "prediction": pred})
            if "groups_path" in body:
                raw = _parse_weights(body) if body.get("weights") else dict(
                    eng.WEIGHT_PRESETS["color30_shape70"]
                )
                retrieval = engine.evaluate_retrieval(load_groups(body["groups_path"]), raw)
                summary = {k: v for k, v in retrieval.items() if k != "per_query"}
                payload.update({"nar": retrieval["nar_mean"], "retrieval": summary})
            if payload["lrap"] is None and payload["nar"] is None:
                return error_response(
                    400, "bad_request", "give predictions_path and/or groups_path"
                )
        except (eng.EngineError, ManifestError, ValueError, OSError) as err:
            return error_response(400, "evaluation_failed", str(err))
        return json_response(payload)

    @app.get("/thumbs/{logo_id}.png")
    def thumbnail(logo_id: int):
        try:
            engine = holder.require()
        except LookupError:
            return error_response(409, "index_missing", "build or load an index first")
        record = engine.manifest.by_id().get(logo_id)
        if record is None:
            return error_response(404, "unknown_logo", f"logo id {logo_id} is not indexed")
        return FileResponse(engine.manifest.image_path(record))

    return app


def serve(index_dir: str | Path | None, port: int, host: str = "127.0.0.1",
          ui_dir: str | Path | None = None) -> None:
    """Boot the API (used by the CLI ``serve`` subcommand)."""
    import uvicorn

    holder = EngineHolder(eng.load_engine(index_dir) if index_dir else None)
    app = create_app(holder)
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="info")
