"""HTTP/websocket service wrapper around the gateway."""

import json

import pytest

pytest.importorskip("fastapi")
pytest.importorskip("httpx")

from fastapi.testclient import TestClient

import safemotion as sm
from safemotion.server import bundled_scenario_path, create_app


@pytest.fixture()
def blank_client():
    app = create_app()
    with TestClient(app) as c:
        yield c


def test_scenario_endpoint_reports_bootstrap(blank_client):
    r = blank_client.get("/api/scenario")
    assert r.status_code == 200
    info = r.json()
    assert info["name"] == "teach_blank"
    assert info["dim"] == 2
    assert info["protocol_version"] == 1
    assert info["barriers"] == []
    assert info["goals"] and len(info["goals"][0]) == 2


def test_index_serves_placeholder_without_console(monkeypatch):
    from safemotion import server as srv

    monkeypatch.setattr(srv, "_console_dir", lambda: None)
    with TestClient(srv.create_app()) as c:
        r = c.get("/")
    assert r.status_code == 200
    assert "websocket" in r.text


def test_index_serves_console_when_built(tmp_path, monkeypatch):
    (tmp_path / "index.html").write_text("<!doctype html><title>console</title>")
    monkeypatch.setenv("SAFEMOTION_CONSOLE_DIR", str(tmp_path))
    with TestClient(create_app()) as c:
        r = c.get("/")
    assert r.status_code == 200
    assert "console" in r.text


def test_websocket_streams_state(blank_client):
    with blank_client.websocket_connect("/ws") as ws:
        msg = ws.receive_json()
        assert msg["kind"] == "state"
        assert msg["v"] == 1
        assert set(msg["payload"]) >= {"x", "u", "h_values", "mode", "captures"}


def test_websocket_initial_barrier_burst():
    scenario = sm.load_scenario(bundled_scenario_path("stable_box"))
    app = create_app(scenario)
    with TestClient(app) as c:
        with c.websocket_connect("/ws") as ws:
            kinds = [ws.receive_json()["kind"] for _ in range(5)]
    assert kinds[:4] == ["barrier_added"] * 4
    assert kinds[4] == "state"


def test_websocket_teach_round_trip(blank_client):
    with blank_client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"v": 1, "kind": "grab", "t": 0.0, "payload": {}}))
        ws.send_text(json.dumps({"v": 1, "kind": "move", "t": 0.0,
                                 "payload": {"x": [0.0, 1.0]}}))
        # The server stamps messages with its own clock; wait out one
        # decimation period before the second sample.
        while True:
            msg = ws.receive_json()
            if msg["kind"] == "state" and msg["t"] >= 0.2:
                break
        ws.send_text(json.dumps({"v": 1, "kind": "move", "t": 0.0,
                                 "payload": {"x": [1.0, 1.0]}}))
        seen = []
        for _ in range(60):
            msg = ws.receive_json()
            seen.append(msg["kind"])
            if msg["kind"] == "barrier_added":
                barrier = msg["payload"]["barrier"]
                break
        else:
            pytest.fail(f"no barrier_added in {seen}")
    assert barrier["id"] == "b1"
    assert barrier["offset"] == pytest.approx(1.0, abs=1e-10)


def test_websocket_malformed_json_reports_error(blank_client):
    with blank_client.websocket_connect("/ws") as ws:
        ws.send_text("this is not json\n")
        for _ in range(20):
            msg = ws.receive_json()
            if msg["kind"] == "error":
                assert "malformed" in msg["payload"]["message"]
                return
        pytest.fail("no error reply to malformed input")
