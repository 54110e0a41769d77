import io
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from tileseek import search
from tileseek.search import fraction_k
from tileseek.service import ServiceConfig, SessionCache, CachedQuery, create_app

RAINFOREST_PROMPT = "a satellite image of a tropical rainforest"


@pytest.fixture(scope="module")
def client(small_corpus):
    app = create_app(
        ServiceConfig(encoder_mode="mock", raster_width=360, raster_height=180),
        corpus=small_corpus,
    )
    with TestClient(app) as c:
        yield c


def rainforest_query(k=5, fraction=0.025, model="farslip"):
    return {
        "model_id": model,
        "modality": "text",
        "payload": {"text": RAINFOREST_PROMPT},
        "k": k,
        "fraction": fraction,
    }


class TestModelsEndpoint:
    def test_default_registry_values(self, client):
        body = client.get("/api/models").json()
        assert len(body) == 4
        by_id = {m["id"]: m for m in body}
        assert by_id["dinov2"]["dim"] == 1024
        assert by_id["dinov2"]["dtype"] == "float32"
        assert by_id["farslip"]["dim"] == 512
        assert by_id["satclip"]["dim"] == 256
        assert by_id["siglip"]["dim"] == 1152
        assert by_id["siglip"]["input_size_px"] == 384
        assert [m["input_size_px"] for m in body].count(224) == 3
        assert sum(m["dtype"] == "float16" for m in body) == 3

    def test_custom_manifest_single_model(self, small_corpus, tmp_path):
        path = tmp_path / "reg.json"
        path.write_text(json.dumps([{
            "id": "farslip", "arch_label": "ViT-B/16", "dim": 512, "dtype": "float16",
            "modalities": ["text", "image"], "input_size_px": 224, "input_bands": "rgb",
        }]))
        app = create_app(ServiceConfig(registry_path=str(path)), corpus=small_corpus)
        with TestClient(app) as c:
            assert len(c.get("/api/models").json()) == 1


class TestQueryEndpoint:
    def test_raw_self_retrieval(self, client, small_corpus):
        table = small_corpus.table("farslip")
        target = table.block.cell_at(5)
        vec = search.l2_normalize(search.dequantize(table.block.vectors[5]))
        r = client.post("/api/query", json={
            "model_id": "farslip", "modality": "raw",
            "payload": {"values": [float(x) for x in vec]},
        })
        assert r.status_code == 200
        top = r.json()["results"][0]
        assert top["cell_id"] == f"R{target.row}C{target.col}"
        assert top["score"] == pytest.approx(1.0, abs=1e-6)
        assert top["rank"] == 1

    def test_text_query_shape(self, client, small_corpus):
        r = client.post("/api/query", json=rainforest_query())
        assert r.status_code == 200
        body = r.json()
        assert len(body["results"]) == 5
        assert body["mask_size"] == fraction_k(0.025, len(small_corpus.table("farslip")))
        assert body["map_ref"] == f"/api/map/{body['query_id']}.png"
        assert body["timing_ms"] > 0
        ranks = [x["rank"] for x in body["results"]]
        assert ranks == [1, 2, 3, 4, 5]
        scores = [x["score"] for x in body["results"]]
        assert scores == sorted(scores, reverse=True)

    def test_location_on_dinov2_rejected(self, client):
        r = client.post("/api/query", json={
            "model_id": "dinov2", "modality": "location",
            "payload": {"lat": -4.0, "lon": -63.0},
        })
        assert r.status_code == 400
        assert r.json()["code"] == "unsupported_modality"

    def test_idempotent_results_for_identical_requests(self, client):
        a = client.post("/api/query", json=rainforest_query()).json()
        b = client.post("/api/query", json=rainforest_query()).json()
        assert a["results"] == b["results"]
        assert a["mask_size"] == b["mask_size"]
        assert a["query_id"] != b["query_id"]

    def test_k_bigger_than_corpus(self, client, small_corpus):
        n = len(small_corpus.table("satclip"))
        r = client.post("/api/query", json={
            "model_id": "satclip", "modality": "location",
            "payload": {"lat": 0.0, "lon": 0.0}, "k": n + 50,
        })
        assert r.status_code == 200
        assert len(r.json()["results"]) == n

    @pytest.mark.parametrize(
        "body,status,code",
        [
            ({"model_id": "nope", "modality": "text", "payload": {"text": "x"}},
             400, "unknown_model"),
            ({"model_id": "farslip", "modality": "singing", "payload": {}},
             400, "invalid_request"),
            ({"model_id": "farslip", "modality": "text", "payload": {"prompt": "x"}},
             400, "invalid_request"),
            ({"model_id": "farslip", "modality": "text", "payload": {"text": " "}},
             400, "invalid_request"),
            ({"model_id": "farslip", "modality": "image_cell", "payload": {"cell_id": "xyz"}},
             400, "bad_cell_id"),
            ({"model_id": "farslip", "modality": "image_cell", "payload": {"cell_id": "R900C0"}},
             404, "unknown_cell"),
            ({"model_id": "farslip", "modality": "raw", "payload": {"values": [1.0] * 7}},
             422, "dim_mismatch"),
            ({"model_id": "farslip", "modality": "raw", "payload": {"values": [0.0] * 512}},
             422, "zero_norm"),
            ({"model_id": "farslip", "modality": "text", "payload": {"text": "x"}, "k": 0},
             400, "invalid_request"),
            ({"model_id": "farslip", "modality": "text", "payload": {"text": "x"},
              "fraction": 1.5}, 400, "invalid_request"),
        ],
    )
    def test_error_taxonomy(self, client, body, status, code):
        r = client.post("/api/query", json=body)
        assert r.status_code == status
        payload = r.json()
        assert set(payload) == {"error", "code"}
        assert payload["code"] == code

    def test_non_json_body(self, client):
        r = client.post("/api/query", content=b"{{{", headers={"Content-Type": "application/json"})
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_request"

    def test_image_upload_roundtrip(self, client):
        import base64

        payload = base64.b64encode(b"fake image bytes").decode()
        r = client.post("/api/query", json={
            "model_id": "dinov2", "modality": "image_upload",
            "payload": {"image_b64": payload},
        })
        assert r.status_code == 200
        assert len(r.json()["results"]) == 5

    def test_image_upload_bad_base64(self, client):
        r = client.post("/api/query", json={
            "model_id": "dinov2", "modality": "image_upload",
            "payload": {"image_b64": "!!!not-base64!!!"},
        })
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_request"

    def test_concurrent_identical_queries_agree(self, client):
        def run(_):
            r = client.post("/api/query", json=rainforest_query(model="siglip"))
            assert r.status_code == 200
            return r.json()["results"]

        with ThreadPoolExecutor(max_workers=32) as pool:
            outputs = list(pool.map(run, range(32)))
        assert all(out == outputs[0] for out in outputs)


class TestMapAndExport:
    def test_map_bytes_stable_and_typed(self, client):
        q = client.post("/api/query", json=rainforest_query()).json()
        r1 = client.get(q["map_ref"])
        r2 = client.get(q["map_ref"])
        assert r1.status_code == 200
        assert r1.headers["content-type"] == "image/png"
        assert r1.content == r2.content
        img = Image.open(io.BytesIO(r1.content))
        assert img.size == (360, 180)

    def test_export_features_match_results(self, client):
        q = client.post("/api/query", json=rainforest_query(k=5)).json()
        r = client.get(f"/api/export/{q['query_id']}.geojson")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("application/geo+json")
        doc = r.json()
        assert len(doc["features"]) == 5
        for feature, result in zip(doc["features"], q["results"]):
            assert feature["properties"]["cell_id"] == result["cell_id"]
            assert feature["properties"]["rank"] == result["rank"]
            assert feature["properties"]["score"] == pytest.approx(result["score"])

    def test_unknown_ids_404(self, client):
        assert client.get("/api/map/doesnotexist.png").status_code == 404
        assert client.get("/api/export/doesnotexist.geojson").status_code == 404
        assert client.get("/api/map/doesnotexist.png").json()["code"] == "unknown_query"

    def test_evicted_id_404(self, small_corpus):
        app = create_app(
            ServiceConfig(cache_capacity=2, raster_width=90, raster_height=45),
            corpus=small_corpus,
        )
        with TestClient(app) as c:
            first = c.post("/api/query", json=rainforest_query()).json()
            for _ in range(2):
                c.post("/api/query", json=rainforest_query(model="siglip"))
            assert c.get(first["map_ref"]).status_code == 404


class TestTileEndpoint:
    def test_present_cell_metadata(self, client, small_corpus):
        table = small_corpus.table("dinov2")
        cell = table.block.cell_at(9)
        r = client.get(f"/api/tile/R{cell.row}C{cell.col}")
        assert r.status_code == 200
        body = r.json()
        assert body["cell_id"] == f"R{cell.row}C{cell.col}"
        assert body["lat"] == pytest.approx(float(table.lat[9]))
        assert body["lon"] == pytest.approx(float(table.lon[9]))
        assert body["models_present"] == ["dinov2", "farslip", "satclip", "siglip"]
        assert body["source_product"]

    def test_absent_cell(self, client):
        r = client.get("/api/tile/R0C0")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_cell"

    def test_malformed_cell_id(self, client):
        r = client.get("/api/tile/C0R0")
        assert r.status_code == 400
        assert r.json()["code"] == "bad_cell_id"


class TestHealthz:
    def test_ready(self, client, small_corpus):
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert body["corpus"]["cells"] == sum(
            1 for _ in small_corpus.table("dinov2").index
        )
        assert body["corpus"]["cells"] == small_corpus.manifest.total_records["dinov2"]
        assert set(body["corpus"]["models"]) == {"dinov2", "farslip", "satclip", "siglip"}
        assert body["uptime_s"] >= 0

    def test_loading_before_corpus(self):
        app = create_app(ServiceConfig())
        with TestClient(app) as c:
            body = c.get("/healthz").json()
            assert body["status"] == "loading"
            r = c.post("/api/query", json=rainforest_query())
            assert r.status_code == 503
            assert r.json()["code"] == "corpus_not_loaded"


class TestSessionCache:
    def entry(self):
        return CachedQuery(results=[], png=b"x", geojson="{}", mask_size=1, model_id="m")

    def test_lru_eviction(self):
        cache = SessionCache(capacity=2, ttl_s=100)
        cache.put("a", self.entry())
        cache.put("b", self.entry())
        cache.get("a")  # refresh a; b becomes the eviction victim
        cache.put("c", self.entry())
        assert cache.get("b") is None
        assert cache.get("a") is not None and cache.get("c") is not None

    def test_ttl_expiry(self, monkeypatch):
        import tileseek.service as service_module

        clock = [0.0]
        monkeypatch.setattr(service_module.time, "monotonic", lambda: clock[0])
        cache = SessionCache(capacity=4, ttl_s=10)
        cache.put("a", self.entry())
        clock[0] = 5.0
        assert cache.get("a") is not None
        clock[0] = 11.0
        assert cache.get("a") is None

    def test_concurrent_put_get(self):
        cache = SessionCache(capacity=64, ttl_s=100)

        def worker(i):
            for j in range(50):
                cache.put(f"{i}-{j}", self.entry())
                cache.get(f"{i}-{j}")

        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(worker, range(8)))
        assert len(cache) <= 64
