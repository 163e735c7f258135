"""Randomized-trial machinery for evaluating the bot before deployment.

Users are split deterministically between an experimental bot (full
answers) and a control bot (source links only); per-question feedback is
compared with a Mann-Whitney rank test (exact permutation p-value on small
samples, normal approximation with tie correction otherwise), and the run
is summarized together with operational health metrics.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from itertools import combinations
from statistics import median
from typing import Iterable, Sequence

from .corpus import Corpus
from .dialogue import (
    CONTROL,
    EXPERIMENTAL,
    ChatEngine,
    Session,
    SessionManager,
    UtteranceLibrary,
    default_library,
    link_response_text,
)
from .nlu import IntentModel
from .safety import Answer, AuditLog, AuditRecord, SafetyPolicy

ALPHA = 0.05

QUESTION_KINDS = frozenset({"answer", "link", "deflect", "fallback"})


class EmptySample(ValueError):
    """A rank test sample is empty."""


class NotAnAnswer(ValueError):
    """control_response needs a grounded Answer decision."""


class InvalidSpec(ValueError):
    """The population spec cannot drive a simulation."""


@dataclass(frozen=True)
class Assignment:
    user_id: str
    variant: str
    seed: int | str


def assign(user_id: str, seed: int | str) -> Assignment:
    """Deterministic 50/50 split on the low bit of SHA-256(seed || user_id)."""
    digest = hashlib.sha256(f"{seed}{user_id}".encode("utf-8")).digest()
    variant = EXPERIMENTAL if digest[-1] & 1 == 0 else CONTROL
    return Assignment(user_id=user_id, variant=variant, seed=seed)


def control_response(decision, corpus: Corpus) -> str:
    """Placebo-arm rewrite: the source page link, never the answer body."""
    if not isinstance(decision, Answer):
        raise NotAnAnswer(f"expected an Answer decision, got {type(decision).__name__}")
    return link_response_text(decision)


@dataclass(frozen=True)
class FeedbackRecord:
    session_id: str
    entry_id: str
    variant: str
    score: int
    timestamp: str

    def __post_init__(self):
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"score must be 1..5, got {self.score}")


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def _u_min_from_ranks(rank_sum_a: float, n_a: int, n_b: int) -> float:
    u_a = rank_sum_a - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    return min(u_a, u_b)


def mann_whitney(sample_a: Sequence[float], sample_b: Sequence[float]) -> MannWhitneyResult:
    """Classic U = min(U_a, U_b) with midranks for ties, two-sided p.

    Exact permutation p when min(n_a, n_b) <= 8 and n_a + n_b <= 20,
    otherwise the normal approximation with tie correction.
    """
    n_a, n_b = len(sample_a), len(sample_b)
    if n_a == 0 or n_b == 0:
        raise EmptySample("both samples must be non-empty")
    combined = list(sample_a) + list(sample_b)
    ranks = _midranks(combined)
    observed = _u_min_from_ranks(sum(ranks[:n_a]), n_a, n_b)

    if min(n_a, n_b) <= 8 and n_a + n_b <= 20:
        total = 0
        as_extreme = 0
        for combo in combinations(range(n_a + n_b), n_a):
            stat = _u_min_from_ranks(sum(ranks[i] for i in combo), n_a, n_b)
            total += 1
            if stat <= observed + 1e-12:
                as_extreme += 1
        return MannWhitneyResult(u=observed, p_value=as_extreme / total)

    tie_factor = _tie_correction(ranks)
    if tie_factor == 0.0:
        return MannWhitneyResult(u=observed, p_value=1.0)
    n = n_a + n_b
    sd = math.sqrt(tie_factor * n_a * n_b * (n + 1) / 12.0)
    z = (observed - n_a * n_b / 2.0) / sd
    p = min(1.0, 2.0 * _norm_cdf(z))
    return MannWhitneyResult(u=observed, p_value=p)


def _tie_correction(ranks: Sequence[float]) -> float:
    n = len(ranks)
    if n < 2:
        return 1.0
    counts: dict[float, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    return 1.0 - sum(c ** 3 - c for c in counts.values()) / float(n ** 3 - n)


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class HealthMetrics:
    activation_rate: float
    fallback_rate: float
    retention_rate: float
    self_service_rate: float
    confusion_triggers: tuple[tuple[str, int], ...]
    undefined: tuple[str, ...] = ()


def compute_metrics(
    records: Iterable[AuditRecord],
    sessions: Iterable[Session],
    feedback: Iterable[FeedbackRecord] = (),
    top_k: int = 10,
) -> HealthMetrics:
    """Operational health rates from the audit trail.

    activation: sessions with at least one question turn / sessions opened;
    fallback: fallback turns / question turns; retention: users with >= 2
    sessions / users; self-service: among sessions with a question, the
    fraction with zero fallbacks.  Zero denominators yield rate 0 and the
    rate name in ``undefined``.  ``feedback`` is accepted for symmetry with
    the report pipeline; no current rate uses it.
    """
    sessions = list(sessions)
    question_turns = 0
    fallback_turns = 0
    by_session: dict[str, list[str]] = {}
    confusion: dict[str, int] = {}
    for record in records:
        kind = record.decision.get("kind")
        if kind not in QUESTION_KINDS:
            continue
        question_turns += 1
        by_session.setdefault(record.session_id, []).append(kind)
        if kind == "fallback":
            fallback_turns += 1
            confusion[record.user_utterance] = confusion.get(record.user_utterance, 0) + 1

    undefined = []
    n_sessions = len(sessions)
    engaged = [s for s in sessions if by_session.get(s.session_id)]
    if n_sessions:
        activation = len(engaged) / n_sessions
    else:
        activation = 0.0
        undefined.append("activation_rate")

    if question_turns:
        fallback_rate = fallback_turns / question_turns
    else:
        fallback_rate = 0.0
        undefined.append("fallback_rate")

    users: dict[str, set[str]] = {}
    for s in sessions:
        users.setdefault(s.user_id or s.session_id, set()).add(s.session_id)
    if users:
        retention = sum(1 for ids in users.values() if len(ids) >= 2) / len(users)
    else:
        retention = 0.0
        undefined.append("retention_rate")

    if engaged:
        clean = sum(1 for s in engaged if "fallback" not in by_session[s.session_id])
        self_service = clean / len(engaged)
    else:
        self_service = 0.0
        undefined.append("self_service_rate")

    triggers = tuple(
        sorted(confusion.items(), key=lambda item: (-item[1], item[0]))[:top_k]
    )
    return HealthMetrics(
        activation_rate=activation,
        fallback_rate=fallback_rate,
        retention_rate=retention,
        self_service_rate=self_service,
        confusion_triggers=triggers,
        undefined=tuple(undefined),
    )


@dataclass(frozen=True)
class QuestionStats:
    n_exp: int
    n_ctl: int
    median_exp: float | None
    median_ctl: float | None
    u_stat: float | None
    p_value: float | None
    control_exceeds: bool


@dataclass(frozen=True)
class PopulationSpec:
    """Synthetic population: per-variant feedback score pools, sampled uniformly."""

    n_users: int
    experimental_scores: tuple[int, ...]
    control_scores: tuple[int, ...]
    questions_per_user: int | None = None

    def __post_init__(self):
        if self.n_users < 1:
            raise InvalidSpec(f"n_users must be >= 1, got {self.n_users}")
        for name in ("experimental_scores", "control_scores"):
            pool = getattr(self, name)
            if not pool:
                raise InvalidSpec(f"{name} must be non-empty")
            if any(s not in (1, 2, 3, 4, 5) for s in pool):
                raise InvalidSpec(f"{name} must contain scores 1..5")
        if self.questions_per_user is not None and self.questions_per_user < 1:
            raise InvalidSpec("questions_per_user must be >= 1 when given")

    @classmethod
    def from_file(cls, path) -> "PopulationSpec":
        doc = json.loads(open(path, encoding="utf-8").read())
        try:
            return cls(
                n_users=doc["n_users"],
                experimental_scores=tuple(doc["experimental_scores"]),
                control_scores=tuple(doc["control_scores"]),
                questions_per_user=doc.get("questions_per_user"),
            )
        except KeyError as exc:
            raise InvalidSpec(f"missing spec field: {exc}") from exc


@dataclass(frozen=True)
class RctReport:
    seed: int | str
    n_users: int
    alpha: float
    per_question: dict[str, QuestionStats]
    verdict: str  # effective | not-justified
    metrics: HealthMetrics

    def to_json(self) -> str:
        """Stable serialization; identical seeds produce identical bytes."""
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def simulate_rct(
    corpus: Corpus,
    model: IntentModel,
    policy: SafetyPolicy,
    spec: PopulationSpec,
    seed: int | str,
    library: UtteranceLibrary | None = None,
    audit_log: AuditLog | None = None,
) -> RctReport:
    """Drive synthetic users through the real dialogue pipeline.

    Fully deterministic for a given seed: assignment, question choice and
    feedback scores all derive from it.
    """
    if not isinstance(spec, PopulationSpec):
        raise InvalidSpec(f"expected PopulationSpec, got {type(spec).__name__}")
    rng = random.Random(f"rct:{seed}")
    library = library or default_library()
    audit = audit_log if audit_log is not None else AuditLog()
    manager = SessionManager(library)
    engine = ChatEngine(model, corpus, policy, library, audit)

    sessions: list[Session] = []
    feedback: list[FeedbackRecord] = []
    for i in range(spec.n_users):
        user_id = f"user-{i:05d}"
        variant = assign(user_id, seed).variant
        session, _ = manager.open_session(variant=variant, user_id=user_id)
        sessions.append(session)
        if spec.questions_per_user is None:
            asked = list(corpus.entries)
        else:
            k = min(spec.questions_per_user, len(corpus.entries))
            asked = rng.sample(corpus.entries, k)
        for entry in asked:
            response = engine.handle_turn(session, entry.question)
            if response.kind in ("answer", "link") and response.entry_id is not None:
                pool = (
                    spec.experimental_scores
                    if variant == EXPERIMENTAL
                    else spec.control_scores
                )
                feedback.append(
                    FeedbackRecord(
                        session_id=session.session_id,
                        entry_id=response.entry_id,
                        variant=variant,
                        score=rng.choice(pool),
                        timestamp=datetime.now(timezone.utc).isoformat(),
                    )
                )
        engine.handle_turn(session, "bye")

    report = build_report(corpus, feedback, seed=seed, n_users=spec.n_users,
                          metrics=compute_metrics(audit.records(), sessions, feedback))
    return report


def build_report(
    corpus: Corpus,
    feedback: Iterable[FeedbackRecord],
    *,
    seed: int | str,
    n_users: int,
    metrics: HealthMetrics,
    alpha: float = ALPHA,
) -> RctReport:
    """Aggregate per-question feedback into the trial report."""
    scores: dict[str, dict[str, list[int]]] = {
        e.id: {EXPERIMENTAL: [], CONTROL: []} for e in corpus.entries
    }
    for record in feedback:
        if record.entry_id in scores:
            scores[record.entry_id][record.variant].append(record.score)

    per_question: dict[str, QuestionStats] = {}
    any_control_win = False
    for entry_id, pools in scores.items():
        exp, ctl = pools[EXPERIMENTAL], pools[CONTROL]
        if not exp or not ctl:
            per_question[entry_id] = QuestionStats(
                n_exp=len(exp), n_ctl=len(ctl),
                median_exp=median(exp) if exp else None,
                median_ctl=median(ctl) if ctl else None,
                u_stat=None, p_value=None, control_exceeds=False,
            )
            continue
        result = mann_whitney(exp, ctl)
        ranks = _midranks(list(exp) + list(ctl))
        mean_rank_exp = sum(ranks[: len(exp)]) / len(exp)
        mean_rank_ctl = sum(ranks[len(exp):]) / len(ctl)
        control_exceeds = result.p_value < alpha and mean_rank_ctl > mean_rank_exp
        any_control_win = any_control_win or control_exceeds
        per_question[entry_id] = QuestionStats(
            n_exp=len(exp), n_ctl=len(ctl),
            median_exp=median(exp), median_ctl=median(ctl),
            u_stat=result.u, p_value=result.p_value,
            control_exceeds=control_exceeds,
        )

    return RctReport(
        seed=seed,
        n_users=n_users,
        alpha=alpha,
        per_question=per_question,
        verdict="not-justified" if any_control_win else "effective",
        metrics=metrics,
    )
