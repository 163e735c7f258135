"""Answer guard and tamper-evident audit log.

The guard is the enforcement point of the system's safety contract: a turn
is answered only when the classifier is confident enough AND the answer is
a verbatim corpus entry; do-not-answer rules win over everything else; all
remaining turns get a fallback template.  The audit log is an append-only
JSON-lines file where each record's SHA-256 digest covers its predecessor's
digest, so any mutation of stored history is detectable.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Union

from .corpus import Corpus, intent_entries
from .nlu import Classification, tokenize

GENESIS_DIGEST = "0" * 64

DEFAULT_DEFLECTION_TEMPLATES = (
    "I can't help with that topic. I only share official election information.",
    "That question is outside what I'm able to discuss. I can answer official "
    "election FAQs, for example about registration, ballots, or polling places.",
)

DEFAULT_FALLBACK_TEMPLATES = (
    "I'm not sure I understood that. Could you rephrase your election question?",
    "Sorry, I don't have an official answer for that. Try asking about "
    "registration, absentee voting, or polling places.",
)

DEFAULT_DNA_PATTERNS = (
    "do you think",
    "current president",
    "who should i vote for",
    "best candidate",
    "your opinion",
)


class StorageFailure(RuntimeError):
    """The audit record could not be written durably."""


class UnreadableLog(RuntimeError):
    """The audit log file cannot be opened or read."""


class ChainBroken(RuntimeError):
    """The audit chain failed verification."""

    def __init__(self, seq: int):
        super().__init__(f"audit chain broken at seq {seq}")
        self.seq = seq


class UnknownSession(KeyError):
    """No audit records exist for the requested session."""


@dataclass(frozen=True)
class SafetyPolicy:
    """Deployment-configurable safety rules.

    ``dna_patterns`` are lowercase token sequences (space separated); a
    pattern matches when its tokens appear contiguously in the tokenized
    utterance.  ``dna_intents`` are matched against the classifier's top
    intent.  Either match deflects regardless of confidence.
    """

    confidence_threshold: float = 0.7
    dna_intents: frozenset[str] = frozenset()
    dna_patterns: tuple[str, ...] = DEFAULT_DNA_PATTERNS
    deflection_templates: tuple[str, ...] = DEFAULT_DEFLECTION_TEMPLATES
    fallback_templates: tuple[str, ...] = DEFAULT_FALLBACK_TEMPLATES

    def __post_init__(self):
        if not (0.0 < self.confidence_threshold <= 1.0):
            raise ValueError(
                f"confidence_threshold must be in (0, 1], got {self.confidence_threshold}"
            )
        if not self.deflection_templates:
            raise ValueError("deflection_templates must be non-empty")
        if not self.fallback_templates:
            raise ValueError("fallback_templates must be non-empty")


@dataclass(frozen=True)
class Answer:
    intent: str
    answer: str
    source_url: str
    confidence: float


@dataclass(frozen=True)
class Deflect:
    matched_rule: str
    template: str


@dataclass(frozen=True)
class Fallback:
    template: str
    top_confidence: float | None


Decision = Union[Answer, Deflect, Fallback]


def _contains_sequence(tokens: list[str], pattern: list[str]) -> bool:
    if not pattern or len(pattern) > len(tokens):
        return False
    for i in range(len(tokens) - len(pattern) + 1):
        if tokens[i:i + len(pattern)] == pattern:
            return True
    return False


def guard(
    classification: Classification,
    utterance: str,
    policy: SafetyPolicy,
    corpus: Corpus,
    seq: int = 0,
) -> Decision:
    """Decide the turn: Deflect, grounded Answer, or Fallback.

    Never raises; malformed inputs route to Fallback.  ``seq`` rotates
    deterministically through the deflection/fallback templates.
    """
    try:
        tokens = tokenize(utterance)
        for pattern in policy.dna_patterns:
            if _contains_sequence(tokens, pattern.split()):
                return Deflect(
                    matched_rule=f"pattern:{pattern}",
                    template=_rotate(policy.deflection_templates, seq),
                )
        top = classification.top if classification is not None else None
        if top is not None and top[0] in policy.dna_intents:
            return Deflect(
                matched_rule=f"intent:{top[0]}",
                template=_rotate(policy.deflection_templates, seq),
            )
        if top is not None and top[1] >= policy.confidence_threshold:
            entry = intent_entries(corpus).get(top[0])
            if entry is not None:
                return Answer(
                    intent=top[0],
                    answer=entry.answer,
                    source_url=entry.source_url,
                    confidence=top[1],
                )
        return Fallback(
            template=_rotate(policy.fallback_templates, seq),
            top_confidence=top[1] if top is not None else None,
        )
    except Exception:
        return Fallback(template=policy.fallback_templates[0], top_confidence=None)


def _rotate(templates: tuple[str, ...], seq: int) -> str:
    return templates[seq % len(templates)]


def decision_summary(decision: Decision) -> dict[str, Any]:
    """Canonical audit representation of a decision, including served text."""
    if isinstance(decision, Answer):
        return {
            "kind": "answer",
            "intent": decision.intent,
            "text": decision.answer,
            "source_url": decision.source_url,
        }
    if isinstance(decision, Deflect):
        return {
            "kind": "deflect",
            "matched_rule": decision.matched_rule,
            "text": decision.template,
        }
    return {"kind": "fallback", "text": decision.template}


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: str
    session_id: str
    user_utterance: str
    decision: dict[str, Any]
    confidence: float | None
    corpus_hash: str
    prev_digest: str
    digest: str


@dataclass(frozen=True)
class ChainReport:
    valid: bool
    broken_seq: int | None
    n_records: int


@dataclass(frozen=True)
class TranscriptTurn:
    seq: int
    utterance: str
    decision: dict[str, Any]


def _canonical_payload(record: dict[str, Any]) -> str:
    payload = {
        "seq": record["seq"],
        "timestamp": record["timestamp"],
        "session_id": record["session_id"],
        "user_utterance": record["user_utterance"],
        "decision": record["decision"],
        "confidence": record["confidence"],
        "corpus_hash": record["corpus_hash"],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _chain_digest(prev_digest: str, record: dict[str, Any]) -> str:
    material = prev_digest + _canonical_payload(record)
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class AuditLog:
    """Append-only hash-chained log; one record per JSON line.

    With a path, every append is flushed and fsynced before returning so a
    served response always has a durable record.  Without a path the log is
    kept in memory (used by simulations).  Appends are serialized through a
    single lock; reads parse a snapshot of the stored lines.
    """

    def __init__(self, path: str | Path | None = None, durable: bool = True):
        self.path = Path(path) if path is not None else None
        self.durable = durable and self.path is not None
        self._lock = threading.Lock()
        self._lines: list[str] = []
        self._last_seq = 0
        self._last_digest = GENESIS_DIGEST
        self._append_blocked = False
        if self.path is not None and self.path.exists():
            self._recover()

    def _recover(self) -> None:
        try:
            text = self.path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            raise UnreadableLog(str(exc)) from exc
        self._lines = [line for line in text.splitlines() if line]
        if self._lines:
            try:
                last = json.loads(self._lines[-1])
                self._last_seq = last["seq"]
                self._last_digest = last["digest"]
            except (json.JSONDecodeError, KeyError, TypeError):
                # tail unparseable: keep the log readable for verification
                # but refuse to extend a corrupt chain
                self._append_blocked = True

    def append(
        self,
        *,
        session_id: str,
        user_utterance: str,
        decision: dict[str, Any],
        confidence: float | None,
        corpus_hash: str,
    ) -> AuditRecord:
        """Write the next chained record; durable before returning."""
        with self._lock:
            if self._append_blocked:
                raise StorageFailure("log tail is unparseable; run verification")
            record = {
                "seq": self._last_seq + 1,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "session_id": session_id,
                "user_utterance": user_utterance,
                "decision": decision,
                "confidence": confidence,
                "corpus_hash": corpus_hash,
                "prev_digest": self._last_digest,
            }
            record["digest"] = _chain_digest(self._last_digest, record)
            line = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            if self.path is not None:
                try:
                    with self.path.open("a", encoding="utf-8") as fh:
                        fh.write(line + "\n")
                        fh.flush()
                        if self.durable:
                            os.fsync(fh.fileno())
                except OSError as exc:
                    raise StorageFailure(str(exc)) from exc
            self._lines.append(line)
            self._last_seq = record["seq"]
            self._last_digest = record["digest"]
            return AuditRecord(**record)

    def next_seq(self) -> int:
        return self._last_seq + 1

    def _snapshot(self) -> list[bytes]:
        with self._lock:
            if self.path is not None:
                if not self.path.exists():
                    return []
                try:
                    raw = self.path.read_bytes()
                except OSError as exc:
                    raise UnreadableLog(str(exc)) from exc
                return [line for line in raw.splitlines() if line]
            return [line.encode("utf-8") for line in self._lines]

    def records(self) -> list[AuditRecord]:
        """Parse all records, assuming (not verifying) an intact chain."""
        return [AuditRecord(**json.loads(line.decode("utf-8"))) for line in self._snapshot()]


def verify_chain(log: AuditLog) -> ChainReport:
    """Recompute every digest; report the first broken seq if any."""
    prev = GENESIS_DIGEST
    lines = log._snapshot()
    for i, line in enumerate(lines):
        seq = i + 1
        try:
            record = json.loads(line.decode("utf-8"))
            intact = (
                record.get("seq") == seq
                and record.get("prev_digest") == prev
                and record.get("digest") == _chain_digest(prev, record)
            )
        except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError, AttributeError):
            intact = False
        if not intact:
            return ChainReport(valid=False, broken_seq=seq, n_records=len(lines))
        prev = record["digest"]
    return ChainReport(valid=True, broken_seq=None, n_records=len(lines))


def replay(log: AuditLog, session_id: str) -> list[TranscriptTurn]:
    """Ordered (utterance, decision) pairs for one session, verified first.

    Raises:
        ChainBroken: the log failed verification.
        UnknownSession: no records for the session.
    """
    report = verify_chain(log)
    if not report.valid:
        raise ChainBroken(report.broken_seq)
    turns = [
        TranscriptTurn(seq=r.seq, utterance=r.user_utterance, decision=r.decision)
        for r in log.records()
        if r.session_id == session_id
    ]
    if not turns:
        raise UnknownSession(session_id)
    return turns
