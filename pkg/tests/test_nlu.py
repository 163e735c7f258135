import math
import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from votebot.corpus import generate_intents
from votebot.nlu import (
    MissingParaphrases,
    UnknownIntent,
    classify,
    corpus_digest,
    load_model,
    save_model,
    select_response,
    tokenize,
    train,
)
from votebot.paraphrase import paraphrase_corpus

from conftest import make_corpus, make_entry


# --- Independent brute-force oracle: dense TF-IDF vectors over a sorted
# --- vocabulary, recomputed from the raw training texts.

def oracle_tokens(text):
    out = []
    for raw in text.lower().split():
        stripped = re.sub(r"^[^0-9a-z]+|[^0-9a-z]+$", "", raw)
        if stripped:
            out.append(stripped)
    return out


def oracle_confidences(train_texts, query):
    """train_texts: list of (utterance, intent). Returns {intent: confidence}."""
    docs = [oracle_tokens(text) for text, _ in train_texts]
    vocab = sorted({term for doc in docs for term in doc})
    n = len(docs)
    df = {term: sum(1 for doc in docs if term in doc) for term in vocab}

    def vector(tokens):
        return [tokens.count(term) * (math.log((1 + n) / (1 + df[term])) + 1.0)
                for term in vocab]

    def norm(vec):
        return math.sqrt(sum(x * x for x in vec))

    qvec = vector(oracle_tokens(query))
    qnorm = norm(qvec)
    best = {}
    for doc, (_, intent) in zip(docs, train_texts):
        dvec = vector(doc)
        dnorm = norm(dvec)
        if qnorm == 0.0 or dnorm == 0.0:
            sim = 0.0
        else:
            sim = sum(a * b for a, b in zip(qvec, dvec)) / (qnorm * dnorm)
        if sim > best.get(intent, 0.0):
            best[intent] = sim
    return {intent: sim for intent, sim in best.items() if sim > 0.0}


def training_texts(corpus, paraphrases):
    texts = []
    for entry, tag in zip(corpus.entries, generate_intents(corpus)):
        texts.append((entry.question, tag.name))
        for variant in paraphrases[entry.id].variants:
            texts.append((variant, tag.name))
    return texts


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Where do I VOTE?") == ["where", "do", "i", "vote"]

    def test_empty(self):
        assert tokenize("") == []

    def test_edge_punctuation_only(self):
        assert tokenize("absentee-ballot, please!") == ["absentee-ballot", "please"]

    def test_drops_pure_punctuation(self):
        assert tokenize("?? -- !!") == []


class TestTrain:
    def test_sc_counts(self, sc_corpus, sc_model):
        assert len(sc_model.intents) == 30
        assert sc_model.n_utterances == 120
        assert sc_model.corpus_hash == corpus_digest(sc_corpus)

    def test_single_entry_counts(self):
        corpus = make_corpus([make_entry("e1", "How do I register to vote?")])
        model = train(corpus, paraphrase_corpus(corpus, k=1))
        assert len(model.intents) == 1
        assert model.n_utterances == 2

    def test_missing_paraphrases(self, tiny_corpus):
        sets = paraphrase_corpus(tiny_corpus, k=2)
        del sets["t2"]
        with pytest.raises(MissingParaphrases) as exc:
            train(tiny_corpus, sets)
        assert exc.value.entry_id == "t2"

    def test_every_intent_has_indexed_utterances(self, sc_model):
        per_intent = {}
        for _, intent in sc_model.utterance_index:
            per_intent[intent] = per_intent.get(intent, 0) + 1
        assert set(per_intent) == set(sc_model.intents)
        assert all(count == 4 for count in per_intent.values())


class TestClassify:
    def test_training_utterance_is_exact_match(self, sc_corpus, sc_model):
        question = sc_corpus.entries[0].question
        result = classify(sc_model, question)
        intent, confidence = result.top
        assert sc_model.intents[intent] == "sc01"
        assert confidence >= 0.999

    def test_out_of_vocabulary(self, sc_model):
        result = classify(sc_model, "zzqx")
        assert result.ranked == ()
        assert result.top is None

    def test_held_out_rewording(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=3))
        result = classify(model, "register to vote today")
        assert result.top is not None
        assert model.intents[result.top[0]] == "t1"

    def test_confidences_sorted_and_bounded(self, sc_model):
        result = classify(sc_model, "when is the deadline to register for voting")
        confidences = [c for _, c in result.ranked]
        assert confidences == sorted(confidences, reverse=True)
        assert all(0.0 <= c <= 1.0 for c in confidences)

    def test_tie_break_by_intent_name(self):
        corpus = make_corpus([
            make_entry("a", "alpha beta"),
            make_entry("b", "alpha gamma"),
        ])

        class Fixed:
            name = "fixed"

            def generate(self, question, k):
                return [f"{question} extra"]

        model = train(corpus, paraphrase_corpus(corpus, k=1, provider=Fixed()))
        result = classify(model, "alpha")
        assert [intent for intent, _ in result.ranked] == sorted(model.intents)
        first, second = result.ranked
        assert first[1] == pytest.approx(second[1])


class TestOracleEquivalence:
    def test_tiny_corpus(self, tiny_corpus):
        paraphrases = paraphrase_corpus(tiny_corpus, k=3)
        model = train(tiny_corpus, paraphrases)
        texts = training_texts(tiny_corpus, paraphrases)
        queries = [text for text, _ in texts] + [
            "register to vote",
            "where is the polling place",
            "absentee ballot returned when",
            "complete gibberish zzz",
            "the the the vote",
        ]
        for query in queries:
            expected = oracle_confidences(texts, query)
            got = dict(classify(model, query).ranked)
            assert set(got) == set(expected), query
            for intent, confidence in expected.items():
                assert got[intent] == pytest.approx(confidence, abs=1e-9), (query, intent)

    def test_five_entry_corpus(self):
        corpus = make_corpus([
            make_entry("f1", "How do I register to vote?"),
            make_entry("f2", "Where is my polling place?"),
            make_entry("f3", "When must absentee ballots be returned?"),
            make_entry("f4", "What identification do I need to vote?"),
            make_entry("f5", "How do I report a voting problem?"),
        ])
        paraphrases = paraphrase_corpus(corpus, k=3)
        model = train(corpus, paraphrases)
        texts = training_texts(corpus, paraphrases)
        queries = [text for text, _ in texts] + [
            "do I need identification to register",
            "report a problem at my polling place",
            "when are ballots due",
        ]
        for query in queries:
            expected = oracle_confidences(texts, query)
            got = dict(classify(model, query).ranked)
            assert set(got) == set(expected), query
            for intent, confidence in expected.items():
                assert got[intent] == pytest.approx(confidence, abs=1e-9), (query, intent)


class TestSelectResponse:
    def test_verbatim_answer(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=2))
        answer, url = select_response(model, tiny_corpus, "register_vote")
        assert answer == "Registration is handled by the county office."
        assert url == "https://elections.example.org/faq#t1"

    def test_unknown_intent(self, tiny_corpus):
        model = train(tiny_corpus, paraphrase_corpus(tiny_corpus, k=2))
        with pytest.raises(UnknownIntent):
            select_response(model, tiny_corpus, "nonexistent")

    def test_every_sc_intent_answer_found_in_corpus(self, sc_corpus, sc_model):
        answers = {e.answer for e in sc_corpus.entries}
        urls = {e.source_url for e in sc_corpus.entries}
        for intent in sc_model.intents:
            answer, url = select_response(sc_model, sc_corpus, intent)
            assert answer in answers
            assert url in urls


class TestProperties:
    def test_self_recall(self, sc_corpus, sc_paraphrases, sc_model):
        for text, intent in training_texts(sc_corpus, sc_paraphrases):
            result = classify(sc_model, text)
            assert result.top is not None, text
            assert result.top[0] == intent, text
            assert result.top[1] >= 0.999, text

    def test_permutation_robustness(self, sc_corpus, sc_paraphrases, sc_model):
        shuffled_entries = list(sc_corpus.entries)
        random.Random(42).shuffle(shuffled_entries)
        shuffled = make_corpus(shuffled_entries, state_label=sc_corpus.state_label)
        shuffled_model = train(shuffled, paraphrase_corpus(shuffled, k=3))
        for text, _ in training_texts(sc_corpus, sc_paraphrases):
            original_top = classify(sc_model, text).top
            shuffled_top = classify(shuffled_model, text).top
            assert original_top is not None and shuffled_top is not None
            # top-1 must resolve to the same corpus entry
            assert (sc_model.intents[original_top[0]]
                    == shuffled_model.intents[shuffled_top[0]])

    @given(st.lists(st.sampled_from(
        "register vote absentee ballot polling place deadline zz qq county "
        "identification recount campaign results the is why".split()),
        min_size=1, max_size=12))
    def test_confidence_bounds_fuzz(self, sc_model, words):
        result = classify(sc_model, " ".join(words))
        for _, confidence in result.ranked:
            assert 0.0 <= confidence <= 1.0


class TestSerialization:
    def test_round_trip(self, sc_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(sc_model, path)
        loaded = load_model(path)
        assert loaded == sc_model

    def test_round_trip_classification_identical(self, sc_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(sc_model, path)
        loaded = load_model(path)
        for utterance in ("how do i register to vote", "zzqx", "recount margin"):
            assert classify(loaded, utterance) == classify(sc_model, utterance)

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}', encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)
