"""HTTP service: knowledge base browsing, retrieval, and consultation sessions.

Sessions are held in memory with a TTL and a per-session lock; concurrent
mutation of one session yields 409 for the loser.  The judge is pluggable:
scripted (from a file), keyword, or a remote chat-completions-style LLM
endpoint that must answer with a single ``VERDICT: <label>`` line.
"""

from __future__ import annotations

import json
import logging
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import engine, ieet, retrieval
from .engine import ScriptedJudge, Session, keyword_judge
from .model import Cgt, cgt_to_dict, load_kb

log = logging.getLogger(__name__)

DEFAULT_TTL = 3600.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    kb_dir: str = "."
    host: str = "127.0.0.1"
    port: int = 8000
    judge: str = "keyword"              # keyword | scripted | llm
    scripted_path: str | None = None
    llm_url: str | None = None
    llm_model: str | None = None
    llm_token_env: str | None = None
    llm_timeout: float = 30.0
    llm_retries: int = 2
    turn_limit: int = 20
    session_ttl: float = DEFAULT_TTL
    transcript_path: str | None = None
    ui_dir: str | None = None

    def check(self) -> None:
        if self.judge not in ("keyword", "scripted", "llm"):
            raise ValueError(f"unknown judge kind {self.judge!r}")
        if self.judge == "llm" and not (self.llm_url and self.llm_model):
            raise ValueError("judge kind 'llm' requires llm_url and llm_model")
        if self.judge == "scripted" and not self.scripted_path:
            raise ValueError("judge kind 'scripted' requires scripted_path")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls(**data)
        cfg.check()
        return cfg


class LlmJudge:
    """Adapter for a chat-completions endpoint; failures degrade to UNABLE."""

    def __init__(self, url: str, model: str, token_env: str | None = None,
                 timeout: float = 30.0, retries: int = 2,
                 transport: httpx.BaseTransport | None = None,
                 max_in_flight: int = 8):
        self.url = url
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.retries = retries
        self._gate = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def __call__(self, condition_text, branch_labels, complaint, history):
        prompt = engine.render_judge_prompt(condition_text, branch_labels, complaint, history)
        headers = {}
        if self.token_env and os.environ.get(self.token_env):
            headers["Authorization"] = f"Bearer {os.environ[self.token_env]}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        with self._gate:
            for attempt in range(self.retries + 1):
                try:
                    resp = self._client.post(self.url, json=body, headers=headers)
                    resp.raise_for_status()
                    data = resp.json()
                    reply = data["choices"][0]["message"]["content"]
                    return engine.parse_judge_reply(reply, branch_labels)
                except Exception as exc:
                    log.warning("LLM judge attempt %d failed: %s", attempt + 1, exc)
        return engine.UNABLE


class SessionStore:
    def __init__(self, ttl: float = DEFAULT_TTL):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._touched: dict[str, float] = {}

    @staticmethod
    def new_id() -> str:
        return secrets.token_hex(16)

    def put(self, session: Session) -> None:
        with self._lock:
            self._evict()
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
            self._touched[session.id] = time.monotonic()

    def get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._lock:
            self._evict()
            if session_id not in self._sessions:
                raise ApiError(404, "UNKNOWN_SESSION", f"no session {session_id!r}")
            self._touched[session_id] = time.monotonic()
            return self._sessions[session_id], self._locks[session_id]

    def _evict(self) -> None:
        now = time.monotonic()
        dead = [sid for sid, t in self._touched.items() if now - t > self.ttl]
        for sid in dead:
            self._sessions.pop(sid, None)
            self._locks.pop(sid, None)
            self._touched.pop(sid, None)


def make_judge(cfg: ServiceConfig) -> Callable:
    if cfg.judge == "keyword":
        return keyword_judge
    if cfg.judge == "scripted":
        script = json.loads(Path(cfg.scripted_path).read_text(encoding="utf-8"))
        return ScriptedJudge(script)
    return LlmJudge(cfg.llm_url, cfg.llm_model, cfg.llm_token_env,
                    cfg.llm_timeout, cfg.llm_retries)


class CreateSessionBody(BaseModel):
    complaint: str
    tree_id: str | None = None


class AnswerBody(BaseModel):
    text: str


class RetrieveBody(BaseModel):
    query: str
    k: int = 1


def session_view(session: Session) -> dict:
    return {
        "status": session.status.value,
        "tree_id": session.tree.id,
        "history": [{"role": t.role, "text": t.text, "turn": t.index}
                    for t in session.history],
        "path": [{"node_id": n, "label": l} for n, l in session.path],
    }


def create_app(
    config: ServiceConfig,
    kb: dict[str, Cgt] | None = None,
    judge: Callable | None = None,
) -> FastAPI:
    config.check()
    if kb is None:
        kb = load_kb(config.kb_dir)
    if not kb:
        raise ValueError(f"knowledge base at {config.kb_dir!r} is empty")
    if judge is None:
        judge = make_judge(config)
    index = retrieval.build_index(kb.values())
    store = SessionStore(ttl=config.session_ttl)

    app = FastAPI(title="guidance tree service")
    app.state.kb = kb
    app.state.judge = judge
    app.state.store = store
    app.state.index = index
    transcript_lock = threading.Lock()

    def record(session_id: str, payload: dict) -> None:
        if not config.transcript_path:
            return
        line = json.dumps({"session_id": session_id, "ts": time.time(), **payload},
                          ensure_ascii=False)
        with transcript_lock:
            with open(config.transcript_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/trees")
    def list_trees():
        return [
            {"id": t.id, "title": t.title, "kind": t.kind,
             "department": t.department, "node_count": len(t.nodes)}
            for t in sorted(kb.values(), key=lambda t: t.id)
        ]

    def get_tree(tree_id: str) -> Cgt:
        if tree_id not in kb:
            raise ApiError(404, "UNKNOWN_TREE", f"no tree {tree_id!r}")
        return kb[tree_id]

    @app.get("/api/trees/{tree_id}")
    def tree_json(tree_id: str):
        return cgt_to_dict(get_tree(tree_id))

    @app.get("/api/trees/{tree_id}/ieet")
    def tree_ieet(tree_id: str):
        return PlainTextResponse(ieet.serialize(get_tree(tree_id)).text)

    @app.post("/api/retrieve")
    def do_retrieve(body: RetrieveBody):
        if body.k < 1:
            raise ApiError(422, "INVALID_PARAM", "k must be >= 1")
        ranked = retrieval.retrieve(index, body.query, k=body.k)
        return [{"tree_id": tid, "score": score} for tid, score in ranked]

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody):
        if not body.complaint.strip():
            raise ApiError(422, "EMPTY_COMPLAINT", "complaint must not be empty")
        if body.tree_id is not None and body.tree_id not in kb:
            raise ApiError(404, "UNKNOWN_TREE", f"no tree {body.tree_id!r}")
        session, event = engine.start(
            kb, body.complaint, judge, tree_id=body.tree_id, index=index,
            turn_limit=config.turn_limit, session_id=SessionStore.new_id(),
        )
        store.put(session)
        payload = engine.event_to_dict(event)
        record(session.id, {"op": "create", "complaint": body.complaint, "event": payload})
        return {"session_id": session.id, "event": payload}

    @app.post("/api/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: AnswerBody):
        session, lock = store.get(session_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "SESSION_BUSY", "session is handling another request")
        try:
            if session.status is not engine.SessionStatus.AWAITING_ANSWER:
                raise ApiError(409, "WRONG_STATE",
                               f"session status is {session.status.value}")
            event = engine.answer(session, body.text, judge)
        finally:
            lock.release()
        payload = engine.event_to_dict(event)
        record(session_id, {"op": "answer", "text": body.text, "event": payload})
        return {"event": payload}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session, _ = store.get(session_id)
        return session_view(session)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:  # pragma: no cover
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
