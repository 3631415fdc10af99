"""Websocket service around the teaching-session state machine.

One session per connection. The server owns session time: it stamps every
incoming message with the session clock, logs it, and drives the tick loop;
all session logic lives in the gateway module. Static console assets are
served from the built frontend when present, with a plain status page as
fallback.
"""

from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse

from . import gateway
from .scenario import Scenario, load_scenario

_PLACEHOLDER = """<!doctype html>
<html><head><title>safemotion gateway</title></head>
<body style="font-family: sans-serif; max-width: 40em; margin: 3em auto;">
<h1>safemotion gateway</h1>
<p>The gateway is running and accepting websocket sessions at
<code>/ws</code>. The interactive console is not built; build the frontend
package and point SAFEMOTION_CONSOLE_DIR at its dist directory to serve it
here.</p>
</body></html>"""


def bundled_scenario_path(name: str) -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.yaml"


def _console_dir() -> Path | None:
    env = os.environ.get("SAFEMOTION_CONSOLE_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for cand in candidates:
        if cand and (cand / "index.html").is_file():
            return cand
    return None


def create_app(scenario: Scenario | None = None) -> FastAPI:
    if scenario is None:
        scenario = load_scenario(bundled_scenario_path("teach_blank"))
    app = FastAPI(title="safemotion gateway")
    app.state.scenario = scenario

    @app.get("/api/scenario")
    def scenario_info() -> JSONResponse:
        s: Scenario = app.state.scenario
        return JSONResponse({
            "name": s.name,
            "dim": s.system.dim,
            "system": s.system.kind,
            "goals": [list(g) for g in s.goals],
            "barriers": [
                {
                    "id": b.id,
                    "normal": [float(v) for v in b.normal],
                    "offset": float(b.offset),
                    "gain": float(b.gain),
                }
                for b in s.barriers
            ],
            "tick_hz": gateway.TICK_HZ,
            "protocol_version": gateway.PROTOCOL_VERSION,
        })

    @app.websocket("/ws")
    async def session_socket(ws: WebSocket) -> None:
        await ws.accept()
        st = gateway.new_session(app.state.scenario)
        inbox: asyncio.Queue = asyncio.Queue()

        async def reader() -> None:
            try:
                while True:
                    raw = await ws.receive_text()
                    for line in raw.splitlines():
                        line = line.strip()
                        if not line:
                            continue
                        try:
                            inbox.put_nowait(json.loads(line))
                        except json.JSONDecodeError:
                            inbox.put_nowait({"kind": "__malformed__"})
            except WebSocketDisconnect:
                inbox.put_nowait(None)
            except RuntimeError:
                inbox.put_nowait(None)

        read_task = asyncio.create_task(reader())
        try:
            # Announce the starting set so late-built consoles can render it.
            for b in st.aset:
                await ws.send_text(json.dumps(gateway.make_message(
                    "barrier_added", st.t, {"barrier": gateway._barrier_payload(b)})))
            closed = False
            while not closed:
                # Drain client messages, stamping them with session time.
                while not inbox.empty():
                    msg = inbox.get_nowait()
                    if msg is None:
                        closed = True
                        break
                    if msg.get("kind") == "__malformed__":
                        await ws.send_text(json.dumps(gateway.make_message(
                            "error", st.t, {"message": "malformed message"})))
                        continue
                    msg["t"] = st.t
                    st, replies = gateway.handle_message(st, msg)
                    for reply in replies:
                        await ws.send_text(json.dumps(reply))
                if closed:
                    break
                st, state_msg = gateway.tick(st)
                await ws.send_text(json.dumps(state_msg))
                await asyncio.sleep(st.dt)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            read_task.cancel()

    console = _console_dir()
    if console is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(console), html=True), name="console")
    else:
        @app.get("/")
        def index() -> HTMLResponse:
            return HTMLResponse(_PLACEHOLDER)

    return app


def serve(scenario_path: str | None = None, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    scenario = load_scenario(scenario_path) if scenario_path else None
    uvicorn.run(create_app(scenario), host=host, port=port, log_level="warning")
