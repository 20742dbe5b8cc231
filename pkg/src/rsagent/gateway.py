"""HTTP surface: sessions, uploads, messages with live step streaming, files.

One plan per session at a time (409 otherwise). Plans run on worker threads;
events stream out as server-sent events, with full replay for late
subscribers, so any file name a client sees is already fetchable.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml
from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .backends import make_backend_provider
from .core import UnknownFile
from .engine import Engine
from .planner import PlanEvent, PlannerLimits
from .registry import build_registry, default_toolspecs, load_toolspecs

TERMINAL_KINDS = {"final", "clarify", "error"}


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8750
    store_root: str = "./rsagent-store"
    backend: str = "mock:script.yaml"
    tool_server: Optional[str] = None
    tools_config: Optional[str] = None
    max_steps: int = 10
    tool_timeout: float = 30.0

    @classmethod
    def from_yaml(cls, path: Path | str, **overrides) -> "GatewayConfig":
        doc = yaml.safe_load(Path(path).read_text()) or {}
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        known.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**known)


def engine_from_config(config: GatewayConfig) -> Engine:
    if config.tools_config:
        specs = load_toolspecs(config.tools_config)
        if config.tool_server:
            from dataclasses import replace

            from .registry import RemoteExecution

            specs = [
                replace(s, execution=RemoteExecution(url=config.tool_server))
                if isinstance(s.execution, RemoteExecution)
                else s
                for s in specs
            ]
        registry = build_registry(specs)
    else:
        registry = build_registry(default_toolspecs(remote_url=config.tool_server))
    return Engine(
        registry=registry,
        backend_provider=make_backend_provider(config.backend),
        store_root=config.store_root,
        limits=PlannerLimits(max_steps=config.max_steps),
        tool_timeout=config.tool_timeout,
    )


class _MessageLog:
    """Events of one message: append-only, replayable, condition-signalled."""

    def __init__(self):
        self.events: list[dict] = []
        self.done = False
        self._cond = threading.Condition()

    def append(self, event: dict) -> None:
        with self._cond:
            self.events.append(event)
            self._cond.notify_all()

    def finish(self) -> None:
        with self._cond:
            self.done = True
            self._cond.notify_all()

    def iter_events(self):
        index = 0
        while True:
            with self._cond:
                while index >= len(self.events) and not self.done:
                    self._cond.wait(timeout=30.0)
                batch = self.events[index:]
                index = len(self.events)
                finished = self.done and index >= len(self.events)
            yield from batch
            if finished:
                return


def _event_to_dict(event: PlanEvent) -> dict:
    return {"kind": event.kind, "step": event.step, "payload": event.payload}


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="rsagent gateway")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    messages: dict[str, _MessageLog] = {}
    busy: set[str] = set()
    state_lock = threading.Lock()

    def session_or_404(session_id: str):
        session = engine.get_session(session_id)
        if session is None:
            return None
        return session

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/tools")
    def tools():
        return [
            {
                "name": spec.name,
                "description": spec.description.strip(),
                "categories": list(spec.categories),
                "inputs": [
                    {"name": i.name, "kind": i.kind, "required": i.required} for i in spec.inputs
                ],
                "outputs": [{"name": o.name, "kind": o.kind} for o in spec.outputs],
                "dependencies": list(spec.dependencies),
            }
            for spec in engine.registry
        ]

    @app.post("/api/sessions")
    def create_session():
        session = engine.new_session()
        return {"session_id": session.session_id}

    @app.post("/api/sessions/{session_id}/files")
    def upload_file(session_id: str, file: UploadFile):
        session = session_or_404(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        mime = file.content_type or "image/png"
        if mime not in ("image/png", "image/jpeg"):
            return JSONResponse({"detail": f"unsupported image type {mime}"}, status_code=400)
        with state_lock:
            if session_id in busy:
                return JSONResponse(
                    {"detail": "a plan is running for this session"}, status_code=409
                )
        data = file.file.read()
        if not data:
            return JSONResponse({"detail": "empty upload"}, status_code=400)
        stem = Path(file.filename or "input").stem or "input"
        try:
            ref, caption = engine.upload(session, data, mime, stem=stem)
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        return {"file_name": ref.name, "caption": caption}

    @app.post("/api/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request):
        session = session_or_404(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        try:
            body = await request.json()
            text = body["text"]
            if not isinstance(text, str) or not text.strip():
                raise ValueError
        except Exception:
            return JSONResponse({"detail": "body must be {\"text\": \"...\"}"}, status_code=400)
        with state_lock:
            if session_id in busy:
                return JSONResponse(
                    {"detail": "a plan is already running for this session"}, status_code=409
                )
            busy.add(session_id)
        message_id = uuid.uuid4().hex[:12]
        log = _MessageLog()
        messages[message_id] = log

        def worker():
            try:
                engine.ask(session, text, on_event=lambda e: log.append(_event_to_dict(e)))
            except Exception as exc:  # defensive: surface rather than hang the stream
                log.append(
                    {"kind": "error", "step": None, "payload": {"reason": "internal", "text": str(exc)}}
                )
            finally:
                with state_lock:
                    busy.discard(session_id)
                log.finish()

        threading.Thread(target=worker, daemon=True).start()
        return {"message_id": message_id}

    @app.get("/api/sessions/{session_id}/events")
    def stream_events(session_id: str, message_id: str):
        if session_or_404(session_id) is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        log = messages.get(message_id)
        if log is None:
            return JSONResponse({"detail": "unknown message"}, status_code=404)

        def sse():
            for i, event in enumerate(log.iter_events()):
                yield f"id: {i}\nevent: {event['kind']}\ndata: {json.dumps(event)}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.get("/api/files/{session_id}/{name}")
    def get_file(session_id: str, name: str):
        session = session_or_404(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        try:
            ref = session.resolve_file(name)
            return Response(content=session.read_file(name), media_type=ref.mime)
        except UnknownFile:
            pass
        # Palette sidecars are stored next to their mask but are not registry
        # entries; serve them when the base mask is registered.
        if name.endswith(".palette.json"):
            base = name[: -len(".palette.json")]
            try:
                session.resolve_file(base)
                data = session.store.get(session_id, name)
                return Response(content=data, media_type="application/json")
            except UnknownFile:
                pass
        return JSONResponse({"detail": "unknown file"}, status_code=404)

    return app
