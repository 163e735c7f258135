"""HTTP chat service exposing the engine.

JSON over HTTP, UTF-8.  Chat endpoints are public; /api/admin/* requires
the configured bearer token.  The (model, corpus) pair is held as one
immutable bundle that reloads swap atomically, so concurrent chats never
observe a half-updated engine, and a chat response is returned only after
its audit record is durable.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import yaml
from fastapi import Depends, FastAPI, Header, HTTPException, Response
from pydantic import BaseModel, Field

from .corpus import Corpus, CorpusError, load_corpus
from .dialogue import (
    EXPERIMENTAL,
    ChatEngine,
    Session,
    SessionClosed,
    SessionManager,
    UtteranceLibrary,
    default_library,
    load_library,
)
from .evalharness import FeedbackRecord, assign, compute_metrics
from .nlu import IntentModel, corpus_digest, load_model, save_model, train
from .paraphrase import paraphrase_corpus
from .safety import AuditLog, SafetyPolicy, UnknownSession, replay

logger = logging.getLogger(__name__)

USER_TOKEN_HEADER = "X-User-Token"


@dataclass
class ServiceConfig:
    bot_name: str
    state_label: str
    corpus_path: str
    audit_log_path: str
    feedback_path: str
    model_path: str | None = None
    library_path: str | None = None
    paraphrase_k: int = 3
    policy: SafetyPolicy = None  # type: ignore[assignment]
    rct_enabled: bool = False
    rct_seed: int = 0
    admin_token: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self):
        if self.policy is None:
            self.policy = SafetyPolicy()
        if not Path(self.corpus_path).exists():
            raise FileNotFoundError(f"corpus_path does not exist: {self.corpus_path}")
        if self.library_path and not Path(self.library_path).exists():
            raise FileNotFoundError(f"library_path does not exist: {self.library_path}")


def load_config(path: str | Path) -> ServiceConfig:
    """Read the YAML config; VOTEBOT_PORT and VOTEBOT_AUDIT_LOG override."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    policy_doc = doc.pop("policy", {}) or {}
    policy = SafetyPolicy(
        confidence_threshold=policy_doc.get("confidence_threshold", 0.7),
        dna_intents=frozenset(policy_doc.get("dna_intents", ())),
        dna_patterns=tuple(policy_doc["dna_patterns"]) if "dna_patterns" in policy_doc
        else SafetyPolicy().dna_patterns,
        deflection_templates=tuple(policy_doc["deflection_templates"])
        if "deflection_templates" in policy_doc else SafetyPolicy().deflection_templates,
        fallback_templates=tuple(policy_doc["fallback_templates"])
        if "fallback_templates" in policy_doc else SafetyPolicy().fallback_templates,
    )
    config = ServiceConfig(policy=policy, **doc)
    if os.environ.get("VOTEBOT_PORT"):
        config.port = int(os.environ["VOTEBOT_PORT"])
    if os.environ.get("VOTEBOT_AUDIT_LOG"):
        config.audit_log_path = os.environ["VOTEBOT_AUDIT_LOG"]
    return config


@dataclass(frozen=True)
class EngineBundle:
    """One immutable serving snapshot; reloads replace it wholesale."""

    corpus: Corpus
    model: IntentModel
    engine: ChatEngine


class ChatRequest(BaseModel):
    session_id: str
    utterance: str


class FeedbackRequest(BaseModel):
    session_id: str
    entry_id: str
    score: int = Field(ge=1, le=5)


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.library: UtteranceLibrary = (
            load_library(config.library_path) if config.library_path else default_library()
        )
        self.audit_log = AuditLog(config.audit_log_path)
        self.manager = SessionManager(self.library)
        self.sessions: dict[str, Session] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.feedback: list[FeedbackRecord] = []
        self.bundle: EngineBundle | None = None
        self._state_lock = threading.Lock()
        self._reload_lock = threading.Lock()
        self._load_feedback()

    def _load_feedback(self) -> None:
        path = Path(self.config.feedback_path)
        if not path.exists():
            return
        for line in path.read_text(encoding="utf-8").splitlines():
            if line:
                self.feedback.append(FeedbackRecord(**json.loads(line)))

    def persist_feedback(self, record: FeedbackRecord) -> None:
        with self._state_lock:
            self.feedback.append(record)
            with open(self.config.feedback_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")

    def build_bundle(self, corpus: Corpus) -> EngineBundle:
        model = self._model_for(corpus)
        engine = ChatEngine(
            model, corpus, self.config.policy, self.library, self.audit_log
        )
        return EngineBundle(corpus=corpus, model=model, engine=engine)

    def _model_for(self, corpus: Corpus) -> IntentModel:
        path = self.config.model_path
        if path and Path(path).exists():
            model = load_model(path)
            if model.corpus_hash == corpus_digest(corpus):
                return model
            logger.info("model at %s is stale; retraining", path)
        model = train(corpus, paraphrase_corpus(corpus, k=self.config.paraphrase_k))
        if path:
            save_model(model, path)
        return model

    def load(self) -> None:
        corpus = load_corpus(self.config.corpus_path, self.config.state_label)
        self.bundle = self.build_bundle(corpus)

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._state_lock:
            if session_id not in self.session_locks:
                self.session_locks[session_id] = threading.Lock()
            return self.session_locks[session_id]


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if state.bundle is None:
            state.load()
        yield

    app = FastAPI(title=config.bot_name, version="1.0", lifespan=lifespan)
    app.state.service = state

    def bundle_or_503() -> EngineBundle:
        bundle = state.bundle
        if bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return bundle

    def require_admin(authorization: str | None = Header(default=None)) -> None:
        token = config.admin_token
        if not token:
            raise HTTPException(status_code=403, detail="admin surface disabled")
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid admin token")

    @app.post("/api/session")
    def open_session(
        x_user_token: str | None = Header(default=None, alias=USER_TOKEN_HEADER),
    ) -> dict[str, Any]:
        bundle_or_503()
        user_id = x_user_token or uuid.uuid4().hex
        if config.rct_enabled:
            variant = assign(user_id, config.rct_seed).variant
        else:
            variant = EXPERIMENTAL
        session, greeting = state.manager.open_session(variant=variant, user_id=user_id)
        with state._state_lock:
            state.sessions[session.session_id] = session
        return {"session_id": session.session_id, "greeting": greeting, "variant": variant}

    @app.post("/api/chat")
    def chat(request: ChatRequest) -> dict[str, Any]:
        bundle = bundle_or_503()
        if not request.utterance.strip():
            raise HTTPException(status_code=422, detail="utterance must be non-empty")
        session = state.sessions.get(request.session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        with state.session_lock(request.session_id):
            try:
                response = bundle.engine.handle_turn(session, request.utterance)
            except SessionClosed:
                raise HTTPException(status_code=409, detail="session is closed") from None
        body: dict[str, Any] = {"text": response.text, "kind": response.kind}
        for key in ("source_url", "confidence", "entry_id", "feedback_prompt"):
            value = getattr(response, key)
            if value is not None:
                body[key] = value
        return body

    @app.post("/api/feedback", status_code=204)
    def feedback(request: FeedbackRequest) -> Response:
        bundle_or_503()
        session = state.sessions.get(request.session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        if request.entry_id not in session.answered_entries:
            raise HTTPException(
                status_code=409, detail="entry was not answered in this session"
            )
        record = FeedbackRecord(
            session_id=request.session_id,
            entry_id=request.entry_id,
            variant=session.variant,
            score=request.score,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        state.persist_feedback(record)
        return Response(status_code=204)

    @app.get("/api/transcript/{session_id}")
    def transcript(session_id: str) -> dict[str, Any]:
        bundle_or_503()
        try:
            turns = replay(state.audit_log, session_id)
        except UnknownSession:
            if session_id in state.sessions:
                return {"session_id": session_id, "turns": []}
            raise HTTPException(status_code=404, detail="unknown session") from None
        return {
            "session_id": session_id,
            "turns": [
                {"seq": t.seq, "utterance": t.utterance, "decision": t.decision}
                for t in turns
            ],
        }

    @app.get("/api/admin/metrics", dependencies=[Depends(require_admin)])
    def metrics() -> dict[str, Any]:
        bundle_or_503()
        with state._state_lock:
            sessions = list(state.sessions.values())
            feedback_records = list(state.feedback)
        result = compute_metrics(state.audit_log.records(), sessions, feedback_records)
        return asdict(result)

    @app.post("/api/admin/corpus/reload", status_code=202,
              dependencies=[Depends(require_admin)])
    def reload_corpus() -> dict[str, Any]:
        old_bundle = bundle_or_503()
        if not state._reload_lock.acquire(blocking=False):
            raise HTTPException(status_code=423, detail="reload already in progress")
        try:
            try:
                corpus = load_corpus(config.corpus_path, config.state_label)
            except CorpusError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            new_bundle = state.build_bundle(corpus)
            state.bundle = new_bundle  # atomic swap
            state.audit_log.append(
                session_id="-admin-",
                user_utterance="corpus reload",
                decision={
                    "kind": "reload",
                    "text": "corpus reload",
                    "old_corpus_hash": old_bundle.model.corpus_hash,
                    "new_corpus_hash": new_bundle.model.corpus_hash,
                },
                confidence=None,
                corpus_hash=new_bundle.model.corpus_hash,
            )
            return {
                "old_corpus_hash": old_bundle.model.corpus_hash,
                "new_corpus_hash": new_bundle.model.corpus_hash,
            }
        finally:
            state._reload_lock.release()

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
