"""HTTP/JSON service for sessions, workflow runs and field data.

The service is a thin shell over the pipeline: sessions are directories,
runs execute in a background thread (one per session at a time), and all
reads go through the JSON artifacts on disk. That makes the server
stateless over the session store: a restart reloads every completed
session. Responses all carry ``schema_version`` = 1. The report endpoint
returns 204 while a run is in flight; clients poll.
"""

from __future__ import annotations

import os
import threading

from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import pipeline

SCHEMA_VERSION = pipeline.SCHEMA_VERSION

FIELD_SOURCES = ("solution.json",)


class SessionStore:
    """Disk-backed session registry with per-session run locks."""

    def __init__(self, base_dir: str, config: pipeline.RunConfig | None = None,
                 runner=pipeline.run_workflow):
        self.base_dir = base_dir
        self.config = config or pipeline.RunConfig()
        self.runner = runner
        self._lock = threading.Lock()
        self._sessions: dict[str, dict] = {}
        self._reload()

    def _reload(self):
        root = os.path.join(self.base_dir, "session")
        if not os.path.isdir(root):
            return
        for name in sorted(os.listdir(root)):
            if not os.path.isdir(os.path.join(root, name)):
                continue
            session = pipeline.Session(self.base_dir, session_id=name,
                                       config=self.config)
            done = os.path.exists(os.path.join(session.dir, "report.json"))
            self._sessions[name] = {"session": session,
                                    "status": "done" if done else "idle",
                                    "runs": 0}
        self._counter = len(self._sessions)

    def create(self) -> str:
        session = pipeline.Session(self.base_dir, config=self.config)
        with self._lock:
            self._sessions[session.id] = {"session": session,
                                          "status": "idle", "runs": 0}
        return session.id

    def get(self, session_id: str) -> dict:
        entry = self._sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}")
        return entry

    def start_run(self, session_id: str, text: str, mode: str) -> str:
        entry = self.get(session_id)
        with self._lock:
            if entry["status"] == "running":
                raise HTTPException(status_code=409,
                                    detail="a run is already in progress")
            entry["status"] = "running"
            entry["runs"] += 1
            run_id = f"{session_id}-r{entry['runs']}"

        def work():
            try:
                self.runner(entry["session"], text, mode)
                entry["status"] = "done"
            except Exception:
                entry["status"] = "failed"

        thread = threading.Thread(target=work, daemon=True)
        entry["thread"] = thread
        thread.start()
        return run_id


def create_app(base_dir: str, config: pipeline.RunConfig | None = None,
               runner=pipeline.run_workflow) -> FastAPI:
    app = FastAPI(title="emsim", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(base_dir, config, runner)
    app.state.store = store

    @app.post("/api/sessions", status_code=201)
    def create_session():
        try:
            session_id = store.create()
        except OSError as exc:
            raise HTTPException(status_code=507,
                                detail=f"cannot create session: {exc}")
        return {"schema_version": SCHEMA_VERSION, "id": session_id}

    @app.post("/api/sessions/{session_id}/messages", status_code=202)
    def post_message(session_id: str, payload: dict = Body(...)):
        text = payload.get("text", "")
        mode = payload.get("mode", "with_post_and_summary")
        if not isinstance(text, str) or not text.strip():
            raise HTTPException(status_code=422, detail="text is blank")
        if mode not in pipeline.MODES:
            raise HTTPException(status_code=422,
                                detail=f"unknown mode {mode!r}")
        run_id = store.start_run(session_id, text, mode)
        return {"schema_version": SCHEMA_VERSION, "run_id": run_id}

    @app.get("/api/sessions/{session_id}/report")
    def get_report(session_id: str):
        entry = store.get(session_id)
        if entry["status"] == "running":
            return Response(status_code=204)
        report = entry["session"].read_json("report.json")
        if report is None:
            return Response(status_code=204)
        return JSONResponse(report)

    @app.get("/api/sessions/{session_id}/fields/{name}")
    def get_field(session_id: str, name: str):
        entry = store.get(session_id)
        session = entry["session"]
        solution = session.read_json("solution.json")
        mesh = session.read_json("mesh.json")
        if solution is None or mesh is None:
            raise HTTPException(status_code=404,
                                detail="no solved model in this session")
        fields = solution.get("fields", {})
        if name not in fields:
            raise HTTPException(status_code=404,
                                detail=f"unknown field {name!r}")
        values = fields[name]
        return {"schema_version": SCHEMA_VERSION,
                "name": name,
                "nodes": mesh["nodes"],
                "triangles": [tri[:3] for tri in mesh["triangles"]],
                "arrays": {name: values},
                "range": [min(values), max(values)]}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        entry = store.get(session_id)
        return {"schema_version": SCHEMA_VERSION, "id": session_id,
                "status": entry["status"]}

    return app
