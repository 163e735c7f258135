"""Understanding pipeline built from first principles.

Tokenizer, TF-IDF featurizer, nearest-utterance intent classifier and
response selector.  Training indexes every official question plus its
paraphrases; classification scores an utterance by cosine similarity
against the indexed utterances and gives each intent the similarity of
its best-matching utterance.

Featurization is fixed so independent implementations agree bit-for-bit
at test tolerance: term frequency is the raw token count and
``idf(t) = ln((1 + N) / (1 + df(t))) + 1`` with N the number of training
utterances and df the number of utterances containing the term.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Corpus, FaqEntry, generate_intents
from .paraphrase import ParaphraseSet

MODEL_FORMAT_VERSION = 1


class UnknownIntent(KeyError):
    """The requested intent is not part of the model/corpus pair."""


class MissingParaphrases(ValueError):
    """An entry has no paraphrase set, so its intent cannot be trained."""

    def __init__(self, entry_id: str):
        super().__init__(f"no paraphrase set for entry {entry_id!r}")
        self.entry_id = entry_id


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with leading/trailing punctuation stripped.

    Stop-words are kept; removing them is a corpus-side concern.
    """
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and not raw[start].isalnum():
            start += 1
        while end > start and not raw[end - 1].isalnum():
            end -= 1
        if start < end:
            tokens.append(raw[start:end])
    return tokens


@dataclass(frozen=True)
class FeatureVector:
    """Sparse TF-IDF weights plus their Euclidean norm."""

    weights: dict[str, float]
    norm: float


@dataclass(frozen=True)
class Classification:
    """Intents ranked by confidence, best first; empty when nothing matches."""

    ranked: tuple[tuple[str, float], ...]

    @property
    def top(self) -> tuple[str, float] | None:
        return self.ranked[0] if self.ranked else None


@dataclass
class IntentModel:
    vocabulary: dict[str, int]  # term -> document frequency
    utterance_index: list[tuple[FeatureVector, str]]
    intents: dict[str, str]  # intent name -> entry id
    trained_at: str
    corpus_hash: str

    @property
    def n_utterances(self) -> int:
        return len(self.utterance_index)

    def idf(self, term: str) -> float:
        df = self.vocabulary.get(term)
        if df is None:
            return 0.0
        return math.log((1 + self.n_utterances) / (1 + df)) + 1.0


def corpus_digest(corpus: Corpus) -> str:
    """SHA-256 over a canonical serialization of the corpus entries."""
    payload = json.dumps(
        [
            [e.id, e.question, e.answer, e.topic, e.source_url, e.last_updated.isoformat()]
            for e in corpus.entries
        ],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _vectorize(tokens: list[str], model_vocab: dict[str, int], n_utterances: int) -> FeatureVector:
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    weights = {}
    for term, tf in counts.items():
        df = model_vocab.get(term)
        if df is None:
            continue  # out-of-vocabulary terms contribute nothing
        idf = math.log((1 + n_utterances) / (1 + df)) + 1.0
        weights[term] = tf * idf
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return FeatureVector(weights=weights, norm=norm)


def train(corpus: Corpus, paraphrases: dict[str, ParaphraseSet]) -> IntentModel:
    """Build the intent model from a corpus and one paraphrase set per entry.

    Raises:
        MissingParaphrases: an entry has no paraphrase set.
    """
    for entry in corpus.entries:
        if entry.id not in paraphrases:
            raise MissingParaphrases(entry.id)

    tags = generate_intents(corpus)
    texts: list[tuple[str, str]] = []  # (utterance, intent name)
    for entry, tag in zip(corpus.entries, tags):
        texts.append((entry.question, tag.name))
        for variant in paraphrases[entry.id].variants:
            texts.append((variant, tag.name))

    tokenized = [(tokenize(text), intent) for text, intent in texts]
    n = len(tokenized)
    vocabulary: dict[str, int] = {}
    for tokens, _ in tokenized:
        for term in set(tokens):
            vocabulary[term] = vocabulary.get(term, 0) + 1

    index = [
        (_vectorize(tokens, vocabulary, n), intent) for tokens, intent in tokenized
    ]
    return IntentModel(
        vocabulary=vocabulary,
        utterance_index=index,
        intents={tag.name: tag.entry_id for tag in tags},
        trained_at=datetime.now(timezone.utc).isoformat(),
        corpus_hash=corpus_digest(corpus),
    )


def _cosine(a: FeatureVector, b: FeatureVector) -> float:
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    small, large = (a.weights, b.weights) if len(a.weights) <= len(b.weights) else (b.weights, a.weights)
    dot = 0.0
    for term, weight in small.items():
        other = large.get(term)
        if other is not None:
            dot += weight * other
    return dot / (a.norm * b.norm)


def classify(model: IntentModel, utterance: str) -> Classification:
    """Rank intents by the cosine similarity of their closest indexed utterance."""
    query = _vectorize(tokenize(utterance), model.vocabulary, model.n_utterances)
    if query.norm == 0.0:
        return Classification(ranked=())
    best: dict[str, float] = {}
    for vector, intent in model.utterance_index:
        sim = _cosine(query, vector)
        if sim > best.get(intent, 0.0):
            best[intent] = sim
    ranked = sorted(
        ((intent, min(1.0, max(0.0, sim))) for intent, sim in best.items() if sim > 0.0),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return Classification(ranked=tuple(ranked))


def select_response(model: IntentModel, corpus: Corpus, intent: str) -> tuple[str, str]:
    """The owning entry's answer, byte-for-byte, with its source URL."""
    entry_id = model.intents.get(intent)
    if entry_id is None:
        raise UnknownIntent(intent)
    for entry in corpus.entries:
        if entry.id == entry_id:
            return entry.answer, entry.source_url
    raise UnknownIntent(f"{intent} maps to entry {entry_id!r} absent from the corpus")


def save_model(model: IntentModel, path: str | Path) -> None:
    """Write the model as a versioned JSON file with stable key order."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "trained_at": model.trained_at,
        "corpus_hash": model.corpus_hash,
        "vocabulary": model.vocabulary,
        "intents": model.intents,
        "index": [
            {"intent": intent, "weights": vec.weights, "norm": vec.norm}
            for vec, intent in model.utterance_index
        ],
    }
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1), encoding="utf-8"
    )


def load_model(path: str | Path) -> IntentModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {doc.get('format_version')!r}")
    index = [
        (FeatureVector(weights=item["weights"], norm=item["norm"]), item["intent"])
        for item in doc["index"]
    ]
    return IntentModel(
        vocabulary=doc["vocabulary"],
        utterance_index=index,
        intents=doc["intents"],
        trained_at=doc["trained_at"],
        corpus_hash=doc["corpus_hash"],
    )
