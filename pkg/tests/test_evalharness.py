from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votebot.dialogue import CONTROL, EXPERIMENTAL, Session
from votebot.evalharness import (
    EmptySample,
    FeedbackRecord,
    HealthMetrics,
    InvalidSpec,
    NotAnAnswer,
    PopulationSpec,
    assign,
    compute_metrics,
    control_response,
    mann_whitney,
    simulate_rct,
)
from votebot.nlu import train
from votebot.paraphrase import paraphrase_corpus
from votebot.safety import Answer, AuditRecord, SafetyPolicy


# --- independent oracle: U by pairwise counting, exact p by enumerating
# --- every labeling of the pooled values

def oracle_u(sample_a, sample_b):
    wins = sum(1.0 for x in sample_a for y in sample_b if x > y)
    ties = sum(1.0 for x in sample_a for y in sample_b if x == y)
    u_a = wins + 0.5 * ties
    u_b = len(sample_a) * len(sample_b) - u_a
    return min(u_a, u_b)


def oracle_exact(sample_a, sample_b):
    observed = oracle_u(sample_a, sample_b)
    pooled = list(sample_a) + list(sample_b)
    n, n_a = len(pooled), len(sample_a)
    total = extreme = 0
    for chosen in combinations(range(n), n_a):
        chosen_set = set(chosen)
        side_a = [pooled[i] for i in chosen]
        side_b = [pooled[i] for i in range(n) if i not in chosen_set]
        total += 1
        if oracle_u(side_a, side_b) <= observed + 1e-12:
            extreme += 1
    return observed, extreme / total


class TestAssign:
    def test_deterministic(self):
        first = assign("alice", 42)
        second = assign("alice", 42)
        assert first == second

    def test_split_near_half(self):
        n = 10_000
        experimental = sum(
            1 for i in range(n) if assign(f"user-{i}", 42).variant == EXPERIMENTAL
        )
        assert 0.48 <= experimental / n <= 0.52

    def test_seed_can_flip_variant(self):
        variants = {assign("alice", seed).variant for seed in range(20)}
        assert variants == {EXPERIMENTAL, CONTROL}


class TestControlResponse:
    def test_link_without_body(self, tiny_corpus):
        decision = Answer(
            intent="register_vote",
            answer=tiny_corpus.entries[0].answer,
            source_url=tiny_corpus.entries[0].source_url,
            confidence=0.9,
        )
        text = control_response(decision, tiny_corpus)
        assert tiny_corpus.entries[0].source_url in text
        assert tiny_corpus.entries[0].answer not in text

    def test_not_an_answer(self, tiny_corpus):
        from votebot.safety import Fallback

        with pytest.raises(NotAnAnswer):
            control_response(Fallback(template="t", top_confidence=None), tiny_corpus)


class TestMannWhitney:
    def test_separated_samples(self):
        result = mann_whitney([1, 2, 3], [4, 5, 6])
        assert result.u == 0
        assert result.p_value == pytest.approx(0.1)

    def test_identical_samples(self):
        result = mann_whitney([3, 3, 3], [3, 3, 3])
        assert result.p_value == 1.0

    def test_four_vs_four_with_ties(self):
        result = mann_whitney([5, 5, 5, 5], [1, 1, 1, 1])
        assert result.u == 0
        assert result.p_value == pytest.approx(2 / 70, abs=1e-12)
        assert result.p_value == pytest.approx(0.0286, abs=5e-4)

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            mann_whitney([], [1])

    def test_against_enumeration_oracle(self):
        cases = [
            ([1, 2, 3], [4, 5, 6]),
            ([5, 5, 5, 5], [1, 1, 1, 1]),
            ([1, 5, 3], [2, 2, 4, 4]),
            ([2, 2, 2], [2, 2, 3]),
            ([1], [5]),
            ([4, 4, 5, 3], [4, 4, 5, 3]),
            ([1, 2, 2, 3, 5], [2, 3, 3, 4]),
        ]
        for a, b in cases:
            expected_u, expected_p = oracle_exact(a, b)
            result = mann_whitney(a, b)
            assert result.u == pytest.approx(expected_u, abs=1e-12), (a, b)
            assert result.p_value == pytest.approx(expected_p, abs=1e-12), (a, b)

    @given(
        st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=6),
        st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=6),
    )
    @settings(max_examples=60)
    def test_symmetry(self, a, b):
        assert mann_whitney(a, b).p_value == pytest.approx(mann_whitney(b, a).p_value)

    def test_large_sample_against_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        a = [1, 2, 2, 3, 3, 3, 4, 4, 5, 5, 2, 3] * 3
        b = [2, 2, 3, 4, 4, 4, 5, 5, 5, 1, 3, 4] * 3
        result = mann_whitney(a, b)
        reference = stats.mannwhitneyu(
            a, b, alternative="two-sided", method="asymptotic", use_continuity=False
        )
        assert result.p_value == pytest.approx(reference.pvalue, abs=1e-10)


def audit_stub(seq, session_id, kind, utterance="u"):
    return AuditRecord(
        seq=seq,
        timestamp="2026-01-01T00:00:00+00:00",
        session_id=session_id,
        user_utterance=utterance,
        decision={"kind": kind, "text": "t"},
        confidence=None,
        corpus_hash="c" * 64,
        prev_digest="0" * 64,
        digest="d" * 64,
    )


def session_stub(session_id, user_id=None):
    return Session(session_id=session_id, user_id=user_id)


class TestComputeMetrics:
    def test_activation(self):
        sessions = [session_stub(f"s{i}") for i in range(10)]
        records = [
            audit_stub(i + 1, f"s{i}", "answer") for i in range(8)
        ]
        metrics = compute_metrics(records, sessions)
        assert metrics.activation_rate == 0.8

    def test_fallback_rate(self):
        sessions = [session_stub("s0")]
        records = [
            audit_stub(i + 1, "s0", "fallback" if i < 7 else "answer")
            for i in range(100)
        ]
        metrics = compute_metrics(records, sessions)
        assert metrics.fallback_rate == 0.07

    def test_confusion_triggers(self):
        sessions = [session_stub("s0")]
        records = [
            audit_stub(i + 1, "s0", "fallback", utterance="ballott dedline")
            for i in range(5)
        ] + [audit_stub(6, "s0", "fallback", utterance="other thing")]
        metrics = compute_metrics(records, sessions)
        assert metrics.confusion_triggers[0] == ("ballott dedline", 5)

    def test_retention(self):
        sessions = [
            session_stub("s1", user_id="u1"),
            session_stub("s2", user_id="u1"),
            session_stub("s3", user_id="u2"),
            session_stub("s4", user_id="u3"),
        ]
        metrics = compute_metrics([], sessions)
        assert metrics.retention_rate == pytest.approx(1 / 3)

    def test_self_service(self):
        sessions = [session_stub("s1"), session_stub("s2"), session_stub("s3")]
        records = [
            audit_stub(1, "s1", "answer"),
            audit_stub(2, "s2", "answer"),
            audit_stub(3, "s2", "fallback"),
        ]
        metrics = compute_metrics(records, sessions)
        # s3 never asked; of the engaged pair, only s1 had no fallback
        assert metrics.self_service_rate == 0.5

    def test_empty_inputs_flagged(self):
        metrics = compute_metrics([], [])
        assert metrics.activation_rate == 0.0
        assert set(metrics.undefined) == {
            "activation_rate", "fallback_rate", "retention_rate", "self_service_rate",
        }

    def test_closing_turns_are_not_questions(self):
        sessions = [session_stub("s1")]
        records = [audit_stub(1, "s1", "closing")]
        metrics = compute_metrics(records, sessions)
        assert metrics.activation_rate == 0.0
        assert "fallback_rate" in metrics.undefined

    @given(st.lists(st.sampled_from(["answer", "link", "deflect", "fallback", "closing"]),
                    max_size=60))
    @settings(max_examples=40)
    def test_rates_bounded_fuzz(self, kinds):
        sessions = [session_stub(f"s{i % 7}", user_id=f"u{i % 3}") for i in range(7)]
        records = [
            audit_stub(i + 1, f"s{i % 7}", kind, utterance=f"utt {i % 5}")
            for i, kind in enumerate(kinds)
        ]
        metrics = compute_metrics(records, sessions)
        for rate in (metrics.activation_rate, metrics.fallback_rate,
                     metrics.retention_rate, metrics.self_service_rate):
            assert 0.0 <= rate <= 1.0


class TestFeedbackRecord:
    def test_score_range(self):
        with pytest.raises(ValueError):
            FeedbackRecord("s", "e", EXPERIMENTAL, 9, "t")

    def test_valid(self):
        record = FeedbackRecord("s", "e", CONTROL, 5, "t")
        assert record.score == 5


class TestPopulationSpec:
    def test_zero_users(self):
        with pytest.raises(InvalidSpec):
            PopulationSpec(n_users=0, experimental_scores=(4, 5), control_scores=(1, 2))

    def test_bad_scores(self):
        with pytest.raises(InvalidSpec):
            PopulationSpec(n_users=5, experimental_scores=(9,), control_scores=(1,))


class TestSimulateRct:
    def test_separated_distributions_flag_every_question(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        policy = SafetyPolicy()
        spec = PopulationSpec(n_users=60, experimental_scores=(4, 5), control_scores=(1, 2))
        report = simulate_rct(tiny_corpus, model, policy, spec, seed=7)
        assert report.verdict == "effective"
        for stats in report.per_question.values():
            assert stats.p_value is not None and stats.p_value < 0.05
            assert stats.median_exp > stats.median_ctl
            assert not stats.control_exceeds

    def test_reversed_distributions_not_justified(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        policy = SafetyPolicy()
        spec = PopulationSpec(n_users=60, experimental_scores=(1, 2), control_scores=(4, 5))
        report = simulate_rct(tiny_corpus, model, policy, spec, seed=7)
        assert report.verdict == "not-justified"

    def test_deterministic_per_seed(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        policy = SafetyPolicy()
        spec = PopulationSpec(n_users=30, experimental_scores=(3, 4, 5), control_scores=(2, 3, 4))
        first = simulate_rct(tiny_corpus, model, policy, spec, seed=11)
        second = simulate_rct(tiny_corpus, model, policy, spec, seed=11)
        assert first.to_json() == second.to_json()
        third = simulate_rct(tiny_corpus, model, policy, spec, seed=12)
        assert third.to_json() != first.to_json()

    def test_control_sessions_receive_no_answer_bodies(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        policy = SafetyPolicy()
        from votebot.safety import AuditLog

        audit = AuditLog()
        spec = PopulationSpec(n_users=40, experimental_scores=(4, 5), control_scores=(1, 2))
        simulate_rct(tiny_corpus, model, policy, spec, seed=3, audit_log=audit)
        control_sessions = {
            r.session_id for r in audit.records() if r.decision.get("kind") == "link"
        }
        bodies = [e.answer for e in tiny_corpus.entries]
        saw_link = False
        for record in audit.records():
            if record.session_id in control_sessions:
                saw_link = True
                for body in bodies:
                    assert body not in record.decision.get("text", "")
        assert saw_link

    def test_metrics_present(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        spec = PopulationSpec(n_users=10, experimental_scores=(5,), control_scores=(4,))
        report = simulate_rct(tiny_corpus, model, SafetyPolicy(), spec, seed=1)
        assert isinstance(report.metrics, HealthMetrics)
        assert report.metrics.activation_rate == 1.0
        assert report.metrics.fallback_rate == 0.0
