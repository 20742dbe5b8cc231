"""Facade wiring registry, backends, executor, and sessions together."""
from __future__ import annotations

import uuid
from pathlib import Path
from typing import Optional

import httpx

from .backends import BackendProvider
from .core import FileRef, FileStore, Session
from .execution import ToolExecutor
from .planner import AgentTrace, EventCallback, PlannerLimits, ingest_image, run_plan
from .registry import ToolRegistry


class Engine:
    """One engine serves many independent sessions against a shared frozen registry.

    Each session gets its own backend from the provider (live backends are a
    shared stateless client; scripted backends fork so scripts start at turn
    zero per session).
    """

    def __init__(
        self,
        registry: ToolRegistry,
        backend_provider: BackendProvider,
        store_root: Path | str,
        limits: PlannerLimits = PlannerLimits(),
        tool_transport: Optional[httpx.BaseTransport] = None,
        tool_timeout: float = 30.0,
    ):
        self.registry = registry
        self.backend_provider = backend_provider
        self.store = FileStore(store_root)
        self.limits = limits
        self.executor = ToolExecutor(timeout=tool_timeout, transport=tool_transport)
        self.sessions: dict[str, Session] = {}
        self._backends: dict[str, object] = {}

    def new_session(self) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id=session_id, store=self.store)
        self.sessions[session_id] = session
        self._backends[session_id] = self.backend_provider()
        return session

    def get_session(self, session_id: str) -> Optional[Session]:
        return self.sessions.get(session_id)

    def upload(
        self, session: Session, data: bytes, mime: str, stem: str = "input"
    ) -> tuple[FileRef, str]:
        return ingest_image(session, data, mime, self.registry, self.executor, stem=stem)

    def ask(self, session: Session, text: str, on_event: Optional[EventCallback] = None) -> AgentTrace:
        backend = self._backends[session.session_id]
        return run_plan(
            session,
            text,
            self.registry,
            backend,
            limits=self.limits,
            executor=self.executor,
            on_event=on_event,
        )
