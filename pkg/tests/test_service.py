import base64
import json

import pytest
from fastapi.testclient import TestClient

from logofuse.service import EngineHolder, create_app, render_json
from logofuse.taxonomy import CharacteristicKind as K


@pytest.fixture(scope="module")
def client(small_engine):
    holder = EngineHolder(small_engine)
    return TestClient(create_app(holder))


def post(client, path, body):
    return client.post(path, content=json.dumps(body))


class TestRenderJson:
    def test_fixed_float_format(self):
        assert render_json({"x": 0.3}) == '{"x": 0.300000}'
        assert render_json([1, True, None, "a"]) == '[1, true, null, "a"]'

    def test_insertion_order(self):
        assert render_json({"b": 1, "a": 2}) == '{"b": 1, "a": 2}'


class TestHealthAndLabels:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["index_loaded"] is True
        assert body["schema"] == {"color": 125, "shape": 128}

    def test_labels_shape_has_seven(self, client):
        body = client.get("/labels", params={"kind": "shape"}).json()
        assert len(body["labels"]) == 7

    def test_labels_all_spaces(self, client):
        body = client.get("/labels").json()
        sizes = {s["kind"]: len(s["labels"]) for s in body["spaces"]}
        assert sizes == {
            "figurative_main": 25, "figurative_sub": 123, "color": 13,
            "shape": 7, "text": 2, "sector": 45,
        }

    def test_unknown_kind_is_400(self, client):
        assert client.get("/labels", params={"kind": "aura"}).status_code == 400

    def test_presets(self, client):
        body = client.get("/presets").json()
        names = {p["name"] for p in body["presets"]}
        assert {"color70_shape30", "color30_shape70"} <= names
        assert body["confidence_floor"] == pytest.approx(0.02)


class TestSearch:
    def test_normalized_weights_echoed(self, client):
        r = post(client, "/search", {"logo_id": 8, "weights": {"color": 70, "shape": 30}})
        assert r.status_code == 200
        assert '"color": 0.700000, "shape": 0.300000' in r.text
        body = r.json()
        assert body["weights"] == {"color": 0.7, "shape": 0.3}
        assert len(body["hits"]) == 9  # default k

    def test_all_zero_weights_is_400(self, client):
        r = post(client, "/search", {"logo_id": 8, "weights": {"color": 0, "shape": 0}})
        assert r.status_code == 400

    def test_unknown_logo_is_404(self, client):
        r = post(client, "/search", {"logo_id": 10_000, "weights": {"color": 1}})
        assert r.status_code == 404

    def test_k_larger_than_corpus(self, client, small_engine):
        r = post(client, "/search", {"logo_id": 8, "weights": {"color": 1}, "k": 999})
        body = r.json()
        assert body["truncated"] is False
        assert len(body["hits"]) == len(small_engine.index)

    def test_missing_index_is_409(self):
        empty = TestClient(create_app(EngineHolder(None)))
        r = post(empty, "/search", {"logo_id": 1, "weights": {"color": 1}})
        assert r.status_code == 409

    def test_byte_identical_responses(self, client):
        body = {"logo_id": 8, "weights": {"color": 3, "shape": 7}, "k": 10}
        first = post(client, "/search", body)
        second = post(client, "/search", body)
        assert first.content == second.content

    def test_image_query_roundtrip(self, client, small_corpus):
        _, manifest, _ = small_corpus
        record = manifest.records[9]
        data = base64.b64encode(manifest.image_path(record).read_bytes()).decode()
        r = post(client, "/search", {"image_b64": data, "weights": {"color": 1, "shape": 1}})
        assert r.status_code == 200
        assert r.json()["hits"][0]["id"] == record.logo_id

    def test_hits_carry_thumbnails_and_labels(self, client):
        r = post(client, "/search", {"logo_id": 8, "weights": {"color": 1}})
        hit = r.json()["hits"][0]
        assert hit["thumbnail"] == f"/thumbs/{hit['id']}.png"
        assert "color" in hit["labels"]
        thumb = client.get(hit["thumbnail"])
        assert thumb.status_code == 200
        assert thumb.content[:8] == b"\x89PNG\r\n\x1a\n"


class TestClassify:
    def test_default_floor_is_two_percent(self, client):
        r = post(client, "/classify", {"logo_id": 6, "kinds": ["color"], "method": "knn"})
        body = r.json()
        assert body["floor"] == pytest.approx(0.02)
        assert all(row["confidence"] > 0.02 for row in body["results"]["color"])

    def test_training_logo_with_k1_gives_full_confidence(self, client, small_engine):
        truth = small_engine.index.labels_of(6, K.COLOR)
        r = post(client, "/classify", {"logo_id": 6, "kinds": ["color"], "method": "knn", "k": 1})
        rows = r.json()["results"]["color"]
        top = {row["label_id"] for row in rows if row["confidence"] == 1.0}
        assert truth <= top

    def test_lp_on_untrained_kind_is_409(self, client):
        r = post(client, "/classify",
                 {"logo_id": 6, "kinds": ["figurative_main"], "method": "lp"})
        assert r.status_code == 409

    def test_unknown_kind_is_400(self, client):
        r = post(client, "/classify", {"logo_id": 6, "kinds": ["nope"], "method": "knn"})
        assert r.status_code == 400

    def test_sorted_descending(self, client):
        r = post(client, "/classify", {"logo_id": 17, "kinds": ["shape"], "method": "brknn"})
        rows = r.json()["results"]["shape"]
        confs = [row["confidence"] for row in rows]
        assert confs == sorted(confs, reverse=True)


class TestEvaluateAndBuild:
    def test_perfect_prediction_fixture(self, client, small_engine, tmp_path):
        lines = ["logo-id,label-id,score"]
        for logo_id in list(small_engine.index.ids)[:8]:
            truth = small_engine.index.labels_of(int(logo_id), K.COLOR)
            for label in range(13):
                lines.append(f"{int(logo_id)},{label},{1.0 if label in truth else 0.0}")
        path = tmp_path / "perfect.csv"
        path.write_text("\n".join(lines))
        r = post(client, "/evaluate", {"predictions_path": str(path), "kind": "color"})
        body = r.json()
        assert body["lrap"] == 1.0
        assert body["lrl"] == 0.0

    def test_retrieval_evaluation(self, client, small_corpus):
        corpus_dir, _, _ = small_corpus
        r = post(client, "/evaluate", {"groups_path": str(corpus_dir / "groups.json")})
        body = r.json()
        assert body["nar"] < 0.05

    def test_build_malformed_manifest_is_422(self, client, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": 0}\nnot json\n')
        r = post(client, "/index/build", {"manifest_path": str(bad)})
        assert r.status_code == 422
        assert r.json()["error"]["issues"]

    def test_build_swaps_snapshot(self, small_corpus, tmp_path):
        corpus_dir, _, _ = small_corpus
        holder = EngineHolder(None)
        local = TestClient(create_app(holder))
        r = post(local, "/index/build",
                 {"manifest_path": str(corpus_dir / "manifest.jsonl"),
                  "train_powerset": False})
        assert r.status_code == 200
        assert r.json()["records"] == 40
        assert holder.engine is not None
        after = post(local, "/search", {"logo_id": 8, "weights": {"color": 1}})
        assert after.status_code == 200
