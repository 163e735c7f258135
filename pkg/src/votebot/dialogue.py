"""Conversation state machine orchestrating one question/answer turn.

Sessions move along Opened -> Active -> (AwaitingFeedback -> Active)* ->
Closed.  Each non-closing turn runs classify -> guard, writes one audit
record, and returns a response whose text is always either a verbatim
corpus answer, a configured template, or a control-variant source link;
there is no free-text generation path.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import Corpus
from .nlu import IntentModel, classify
from .safety import (
    Answer,
    AuditLog,
    Deflect,
    SafetyPolicy,
    StorageFailure,
    decision_summary,
    guard,
)

logger = logging.getLogger(__name__)

DEFAULT_CLOSING_LEXICON = ("bye", "goodbye", "quit", "exit", "thanks, bye")

LINK_TEMPLATE = "You can find the answer on the official page: {url}"

EXPERIMENTAL = "experimental"
CONTROL = "control"


class SessionClosed(RuntimeError):
    """A turn arrived for a session that has already closed."""


class SessionState(Enum):
    OPENED = "opened"
    ACTIVE = "active"
    AWAITING_FEEDBACK = "awaiting_feedback"
    CLOSED = "closed"


@dataclass(frozen=True)
class UtteranceLibrary:
    """Reusable openings, closings, and feedback prompts."""

    openings: tuple[str, ...]
    closings: tuple[str, ...]
    feedback_prompts: tuple[str, ...]
    version: str = "unversioned"

    def __post_init__(self):
        for name in ("openings", "closings", "feedback_prompts"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")


def load_library(path: str | Path) -> UtteranceLibrary:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return UtteranceLibrary(
        openings=tuple(doc["openings"]),
        closings=tuple(doc["closings"]),
        feedback_prompts=tuple(doc["feedback_prompts"]),
        version=doc.get("version", "unversioned"),
    )


def default_library() -> UtteranceLibrary:
    text = resources.files("votebot.data").joinpath("utterances.json").read_text("utf-8")
    doc = json.loads(text)
    return UtteranceLibrary(
        openings=tuple(doc["openings"]),
        closings=tuple(doc["closings"]),
        feedback_prompts=tuple(doc["feedback_prompts"]),
        version=doc.get("version", "unversioned"),
    )


@dataclass
class Session:
    session_id: str
    state: SessionState = SessionState.OPENED
    turn_count: int = 0
    variant: str = EXPERIMENTAL
    created_at: str = ""
    user_id: str | None = None
    answered_entries: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class BotResponse:
    """What the bot serves for one turn."""

    text: str
    kind: str  # answer | deflect | fallback | closing | link
    source_url: str | None = None
    confidence: float | None = None
    entry_id: str | None = None
    feedback_prompt: str | None = None


class SessionManager:
    """Mints sessions and rotates greetings deterministically."""

    def __init__(self, library: UtteranceLibrary):
        self.library = library
        self._count = 0
        self._lock = threading.Lock()

    def open_session(self, variant: str = EXPERIMENTAL, user_id: str | None = None) -> tuple[Session, str]:
        with self._lock:
            greeting = self.library.openings[self._count % len(self.library.openings)]
            self._count += 1
        session = Session(
            session_id=uuid.uuid4().hex,
            variant=variant,
            created_at=datetime.now(timezone.utc).isoformat(),
            user_id=user_id,
        )
        return session, greeting


def open_session(library: UtteranceLibrary) -> tuple[Session, str]:
    """One-shot session open; persistent deployments use SessionManager."""
    return SessionManager(library).open_session()


def link_response_text(decision: Answer) -> str:
    """Control-variant rewrite: point at the source page, omit the answer body."""
    return LINK_TEMPLATE.format(url=decision.source_url)


def normalize_closing(utterance: str) -> str:
    collapsed = " ".join(utterance.lower().split())
    return collapsed.rstrip(".!?? ").strip()


class ChatEngine:
    """Runs turns against one (model, corpus, policy) snapshot."""

    def __init__(
        self,
        model: IntentModel,
        corpus: Corpus,
        policy: SafetyPolicy,
        library: UtteranceLibrary,
        audit_log: AuditLog,
        closing_lexicon: tuple[str, ...] = DEFAULT_CLOSING_LEXICON,
    ):
        self.model = model
        self.corpus = corpus
        self.policy = policy
        self.library = library
        self.audit_log = audit_log
        self.closing_lexicon = {normalize_closing(c) for c in closing_lexicon}

    def handle_turn(self, session: Session, utterance: str) -> BotResponse:
        """Serve one user turn; exactly one audit record per turn.

        Raises:
            SessionClosed: the session has already closed.
        """
        if session.state is SessionState.CLOSED:
            raise SessionClosed(session.session_id)

        if normalize_closing(utterance) in self.closing_lexicon:
            text = self.library.closings[session.turn_count % len(self.library.closings)]
            response = BotResponse(text=text, kind="closing")
            self._audit(session, utterance, {"kind": "closing", "text": text}, None)
            session.state = SessionState.CLOSED
            session.turn_count += 1
            return response

        if session.state in (SessionState.OPENED, SessionState.AWAITING_FEEDBACK):
            session.state = SessionState.ACTIVE

        classification = classify(self.model, utterance)
        decision = guard(
            classification,
            utterance,
            self.policy,
            self.corpus,
            seq=self.audit_log.next_seq(),
        )

        if isinstance(decision, Answer):
            entry_id = self.model.intents.get(decision.intent)
            prompt = self.library.feedback_prompts[
                session.turn_count % len(self.library.feedback_prompts)
            ]
            if session.variant == CONTROL:
                text = link_response_text(decision)
                summary = {
                    "kind": "link",
                    "intent": decision.intent,
                    "text": text,
                    "source_url": decision.source_url,
                }
                response = BotResponse(
                    text=text,
                    kind="link",
                    source_url=decision.source_url,
                    confidence=decision.confidence,
                    entry_id=entry_id,
                    feedback_prompt=prompt,
                )
            else:
                summary = decision_summary(decision)
                response = BotResponse(
                    text=decision.answer,
                    kind="answer",
                    source_url=decision.source_url,
                    confidence=decision.confidence,
                    entry_id=entry_id,
                    feedback_prompt=prompt,
                )
            self._audit(session, utterance, summary, decision.confidence)
            session.turn_count += 1
            if entry_id is not None:
                session.answered_entries.add(entry_id)
            session.state = SessionState.AWAITING_FEEDBACK
            return response

        summary = decision_summary(decision)
        confidence = None if isinstance(decision, Deflect) else decision.top_confidence
        response = BotResponse(text=summary["text"], kind=summary["kind"], confidence=confidence)
        self._audit(session, utterance, summary, confidence)
        session.turn_count += 1
        return response

    def _audit(self, session, utterance, summary, confidence) -> None:
        try:
            self.audit_log.append(
                session_id=session.session_id,
                user_utterance=utterance,
                decision=summary,
                confidence=confidence,
                corpus_hash=self.model.corpus_hash,
            )
        except StorageFailure:
            # the turn is still served; the gap is an operator incident
            logger.exception("audit append failed for session %s", session.session_id)
