import json
import os
import threading
import time

import pytest
from fastapi.testclient import TestClient

from emsim import pipeline, server

PROMPT = ("Place 10 conductors in a circle of radius 0.02 m and report "
          "the ohmic loss density of the first conductor.")


@pytest.fixture()
def client(tmp_path):
    app = server.create_app(str(tmp_path))
    with TestClient(app) as c:
        yield c


def wait_done(client, sid, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.get(f"/api/sessions/{sid}").json()["status"]
        if status in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise AssertionError("run did not finish in time")


def test_create_session(client):
    r1 = client.post("/api/sessions")
    r2 = client.post("/api/sessions")
    assert r1.status_code == 201
    assert r2.status_code == 201
    assert r1.json()["schema_version"] == 1
    assert r1.json()["id"] != r2.json()["id"]


def test_unknown_session_404(client):
    assert client.get("/api/sessions/nope").status_code == 404
    assert client.get("/api/sessions/nope/report").status_code == 404
    assert client.post("/api/sessions/nope/messages",
                       json={"text": "x"}).status_code == 404


def test_blank_text_rejected(client):
    sid = client.post("/api/sessions").json()["id"]
    assert client.post(f"/api/sessions/{sid}/messages",
                       json={"text": "  "}).status_code == 422
    assert client.post(f"/api/sessions/{sid}/messages",
                       json={}).status_code == 422
    assert client.post(f"/api/sessions/{sid}/messages",
                       json={"text": "x", "mode": "bogus"}).status_code == 422


def test_report_is_204_before_any_run(client):
    sid = client.post("/api/sessions").json()["id"]
    assert client.get(f"/api/sessions/{sid}/report").status_code == 204


def test_full_run_and_report(client):
    sid = client.post("/api/sessions").json()["id"]
    accepted = client.post(f"/api/sessions/{sid}/messages",
                           json={"text": PROMPT})
    assert accepted.status_code == 202
    assert accepted.json()["run_id"].startswith(sid)
    assert wait_done(client, sid) == "done"

    report = client.get(f"/api/sessions/{sid}/report")
    assert report.status_code == 200
    data = report.json()
    assert data["schema_version"] == 1
    statuses = {k: v["status"] for k, v in data["verdict"].items()}
    assert statuses["physics_semantics"] == "ok"
    assert statuses["summary_semantics"] == "needs_human"
    assert "skin" in data["summary"]


def test_field_endpoint_confines_current_to_conductors(client):
    sid = client.post("/api/sessions").json()["id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": PROMPT})
    wait_done(client, sid)

    resp = client.get(f"/api/sessions/{sid}/fields/Jz_abs")
    assert resp.status_code == 200
    data = resp.json()
    tris = data["triangles"]
    values = data["arrays"]["Jz_abs"]
    assert len(values) == len(tris)
    assert all(len(t) == 3 for t in tris)
    assert data["range"][0] == 0.0
    assert data["range"][1] > 0.0
    # insulator triangles carry exactly zero current density
    zeros = sum(1 for v in values if v == 0.0)
    assert 0 < zeros < len(values)


def test_unknown_field_404(client):
    sid = client.post("/api/sessions").json()["id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": PROMPT})
    wait_done(client, sid)
    assert client.get(f"/api/sessions/{sid}/fields/nope").status_code == 404


def test_field_endpoint_needs_solution(client):
    sid = client.post("/api/sessions").json()["id"]
    assert client.get(f"/api/sessions/{sid}/fields/Jz_abs").status_code == 404


def test_concurrent_run_rejected(tmp_path):
    release = threading.Event()

    def slow_runner(session, text, mode):
        release.wait(timeout=10)
        return pipeline.run_workflow(session, text, mode)

    app = server.create_app(str(tmp_path), runner=slow_runner)
    with TestClient(app) as client:
        sid = client.post("/api/sessions").json()["id"]
        first = client.post(f"/api/sessions/{sid}/messages",
                            json={"text": "Simulate one conductor at the "
                                          "origin.", "mode": "layout_only"})
        assert first.status_code == 202
        second = client.post(f"/api/sessions/{sid}/messages",
                             json={"text": "another"})
        assert second.status_code == 409
        # while running, the report endpoint signals "not yet"
        assert client.get(f"/api/sessions/{sid}/report").status_code == 204
        release.set()
        wait_done(client, sid)


def test_restart_reloads_sessions(tmp_path):
    app = server.create_app(str(tmp_path))
    with TestClient(app) as client:
        sid = client.post("/api/sessions").json()["id"]
        client.post(f"/api/sessions/{sid}/messages",
                    json={"text": "Simulate one conductor at the origin.",
                          "mode": "layout_only"})
        wait_done(client, sid)

    fresh = server.create_app(str(tmp_path))
    with TestClient(fresh) as client:
        status = client.get(f"/api/sessions/{sid}")
        assert status.status_code == 200
        assert status.json()["status"] == "done"
        assert client.get(f"/api/sessions/{sid}/report").status_code == 200


def test_storage_failure_507(tmp_path):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("")
    app = server.create_app(str(blocker / "below"))
    with TestClient(app) as client:
        assert client.post("/api/sessions").status_code == 507


def test_runner_exception_marks_failed(tmp_path):
    def exploding(session, text, mode):
        raise RuntimeError("boom")

    app = server.create_app(str(tmp_path), runner=exploding)
    with TestClient(app) as client:
        sid = client.post("/api/sessions").json()["id"]
        client.post(f"/api/sessions/{sid}/messages", json={"text": "x"})
        assert wait_done(client, sid) == "failed"
        # no report was produced, so the endpoint still says 204
        assert client.get(f"/api/sessions/{sid}/report").status_code == 204


def test_cors_headers(client):
    resp = client.post("/api/sessions", headers={"Origin": "http://web.test"})
    assert resp.headers.get("access-control-allow-origin") == "*"
