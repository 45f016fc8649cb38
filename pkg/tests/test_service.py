import json
from datetime import datetime, timedelta

import numpy as np
import pytest
from fastapi.testclient import TestClient

from climagen.service.app import create_app

import synthworld


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc_world")
    data = root / "measured.csv"
    synthworld.write_measured_years(data, years=(2001,), seed=77)
    return {"data": str(data), "registry": str(root / "registry"), "root": root}


def site_payload():
    s = synthworld.SITE
    return {
        "name": s.name, "latitude": s.latitude, "longitude": s.longitude,
        "altitude": s.altitude, "utc_offset": s.utc_offset,
    }


class TestBasics:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_describe(self, client, world):
        r = client.post("/api/describe", json={
            "data": world["data"], "variable": "wind_speed",
            "criteria": {"months": [8]},
        })
        assert r.status_code == 200
        body = r.json()
        assert body["summary"]["count"] == 744
        assert body["cadence"] == "hourly"

    def test_bins(self, client, world):
        r = client.post("/api/bins", json={
            "data": world["data"], "variable": "wind_speed", "width": 1.0,
        })
        assert r.status_code == 200
        bins = r.json()["bins"]
        assert sum(b[1] for b in bins) == 744

    def test_data_error_maps_to_400(self, client, world):
        r = client.post("/api/describe", json={
            "data": world["data"], "variable": "nebulosity",
        })
        assert r.status_code == 400
        assert r.json()["category"] == "data"

    def test_malformed_request_422(self, client):
        r = client.post("/api/describe", json={"variable": "wind_speed"})
        assert r.status_code == 422


class TestFitAndGenerate:
    def test_full_pipeline_over_http(self, client, world, tmp_path):
        reg = world["registry"]
        r = client.post("/api/fit/arma", json={
            "data": world["data"], "variable": "wind_speed",
            "registry": reg, "criteria": {"months": [8]},
        })
        assert r.status_code == 200, r.text
        arma_body = r.json()
        assert arma_body["p"] >= 1

        r = client.post("/api/fit/dist", json={
            "data": world["data"], "variable": "clearness_index", "law": "saunier",
            "registry": reg, "criteria": {"months": [8]}, "site": site_payload(),
        })
        assert r.status_code == 200, r.text
        assert 0.0 < r.json()["params"]["kt_moy"] < 1.0

        r = client.post("/api/fit/nn", json={
            "data": world["data"], "variable": "dry_bulb_temp",
            "inputs": ["global_rad", "wind_speed"], "registry": reg,
            "criteria": {"months": [8]}, "seed": 1, "max_iter": 60,
        })
        assert r.status_code == 200, r.text

        r = client.post("/api/fit/nn", json={
            "data": world["data"], "variable": "rel_humidity",
            "registry": reg, "criteria": {"months": [8]}, "seed": 2, "max_iter": 60,
        })
        assert r.status_code == 200, r.text

        r = client.get("/api/health")  # keep-alive sanity between steps
        assert r.status_code == 200

        out = world["root"] / "gen.csv"
        plan = {
            "site": site_payload(),
            "variables": ["wind_speed", "global_rad", "dry_bulb_temp", "rel_humidity"],
            "start": "2002-08-01T00:00", "duration": 120, "cadence": "hourly",
            "criteria": {"months": [8]}, "seed": 11,
        }
        r = client.post("/api/generate", json={
            "plan": plan, "registry": reg, "out": str(out),
        })
        assert r.status_code == 200, r.text
        body = r.json()
        assert body["n_rows"] == 120
        assert out.exists()

        r = client.post("/api/validate", json={
            "generated": str(out), "reference": world["data"],
            "alpha": 0.05, "site": site_payload(),
        })
        assert r.status_code == 200, r.text
        assert "passed" in r.json()

        r = client.post("/api/registry/list", json={"registry": reg})
        assert r.status_code == 200
        kinds = {e["kind"] for e in r.json()["entries"]}
        assert {"arma", "saunier", "neural"} <= kinds

    def test_generate_without_models_400_with_hint(self, client, world, tmp_path):
        plan = {
            "site": site_payload(), "variables": ["wind_speed"],
            "start": "2002-08-01T00:00", "duration": 24,
            "criteria": {"months": [8]}, "seed": 0,
        }
        r = client.post("/api/generate", json={
            "plan": plan, "registry": str(tmp_path / "empty_reg"),
            "out": str(tmp_path / "x.csv"),
        })
        assert r.status_code == 400
        assert "fit arma" in r.json()["message"]

    def test_export_endpoint(self, client, world, tmp_path):
        ts = [datetime(2004, 8, 1) + timedelta(hours=i) for i in range(6)]
        src = tmp_path / "seq.csv"
        lines = ["timestamp,wind_speed"] + [f"{t.isoformat()},{3.0 + i}" for i, t in enumerate(ts)]
        src.write_text("\n".join(lines) + "\n")
        r = client.post("/api/export", json={
            "sequence": str(src), "format": "plotdata", "out": str(tmp_path / "plots"),
        })
        assert r.status_code == 200
        (path,) = r.json()["paths"]
        assert path.endswith("wind_speed.csv")
