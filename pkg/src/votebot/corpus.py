"""Official FAQ corpus: loading, validation, statistics and intent tagging.

The corpus is the only permissible answer source for the bot.  Entries are
read from a CSV file with the fixed header
``id,question,answer,topic,source_url,last_updated`` and validated on load;
every downstream component works with the immutable :class:`Corpus` value
returned here.
"""

from __future__ import annotations

import csv
import string
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from urllib.parse import urlparse

REQUIRED_COLUMNS = ("id", "question", "answer", "topic", "source_url", "last_updated")

MAX_INTENT_TOKENS = 4

_INTENT_CHARS = frozenset(string.ascii_lowercase + string.digits)


class CorpusError(ValueError):
    """Base class for corpus validation failures."""


class MalformedRow(CorpusError):
    """A CSV record is missing a column or holds an invalid field value."""

    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class DuplicateId(CorpusError):
    """Two CSV records share the same entry id."""

    def __init__(self, entry_id: str, first_row: int, second_row: int):
        super().__init__(
            f"duplicate id {entry_id!r} on rows {first_row} and {second_row}"
        )
        self.entry_id = entry_id


class EmptyCorpus(CorpusError):
    """The corpus file contains no data rows."""


@dataclass(frozen=True)
class FaqEntry:
    """One official question/answer pair."""

    id: str
    question: str
    answer: str
    topic: str
    source_url: str
    last_updated: date


@dataclass
class Corpus:
    """Ordered, validated collection of FAQ entries for one region."""

    entries: list[FaqEntry]
    state_label: str
    stoplist_version: str
    _intent_cache: dict[str, FaqEntry] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def topics(self) -> set[str]:
        return {e.topic for e in self.entries}

    def entry(self, entry_id: str) -> FaqEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)


@dataclass(frozen=True)
class CorpusStats:
    """Aggregate corpus statistics; averages are exact arithmetic means."""

    n_pairs: int
    avg_question_len: float
    avg_answer_len: float
    n_topics: int


@dataclass(frozen=True)
class IntentTag:
    """Intent name owning exactly one FAQ entry."""

    name: str
    entry_id: str


_STOPWORDS: frozenset[str] | None = None
_STOPLIST_VERSION: str | None = None


def _load_stoplist() -> tuple[frozenset[str], str]:
    global _STOPWORDS, _STOPLIST_VERSION
    if _STOPWORDS is None:
        text = (
            resources.files("votebot.data").joinpath("stopwords_en.txt").read_text("utf-8")
        )
        words = set()
        version = "unversioned"
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                if line.lower().startswith("# version:"):
                    version = line.split(":", 1)[1].strip()
                continue
            if line:
                words.add(line.lower())
        _STOPWORDS = frozenset(words)
        _STOPLIST_VERSION = version
    return _STOPWORDS, _STOPLIST_VERSION


def stoplist_version() -> str:
    """Version identifier of the shipped stop-word list."""
    return _load_stoplist()[1]


def bundled_fixture(name: str) -> Path:
    """Path of a bundled fixture corpus: ``"sc"`` or ``"ms"``."""
    filename = {"sc": "sc_election_faq.csv", "ms": "ms_election_faq.csv"}[name]
    return Path(str(resources.files("votebot.data").joinpath("corpora").joinpath(filename)))


def remove_stopwords(text: str) -> list[str]:
    """Reduce text to its ordered content tokens.

    Tokens are lowercased, stripped of all punctuation (inner characters
    included, so intent names stay in ``[a-z0-9_]``) and filtered against
    the shipped stop-word list.  Idempotent on its own output.
    """
    stopwords, _ = _load_stoplist()
    out = []
    for raw in text.lower().split():
        tok = "".join(c for c in raw if c.isalnum())
        if tok and tok not in stopwords:
            out.append(tok)
    return out


def _word_count(text: str) -> int:
    # word = maximal run of non-whitespace
    return len(text.split())


def _validate_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


def load_corpus(path: str | Path, state_label: str) -> Corpus:
    """Load and validate a corpus CSV.

    Row numbers in errors count the header as row 1, so the first data
    record is row 2.

    Raises:
        MalformedRow: missing column or invalid field value.
        DuplicateId: repeated entry id.
        EmptyCorpus: no data rows.
    """
    path = Path(path)
    entries: list[FaqEntry] = []
    seen: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyCorpus(f"{path} is empty") from None
        if tuple(header) != REQUIRED_COLUMNS:
            raise MalformedRow(1, f"header must be {','.join(REQUIRED_COLUMNS)}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(REQUIRED_COLUMNS):
                raise MalformedRow(
                    row_no, f"expected {len(REQUIRED_COLUMNS)} columns, got {len(row)}"
                )
            entry_id, question, answer, topic, source_url, last_updated = row
            entry_id = entry_id.strip()
            if not entry_id:
                raise MalformedRow(row_no, "empty id")
            if entry_id in seen:
                raise DuplicateId(entry_id, seen[entry_id], row_no)
            seen[entry_id] = row_no
            if not question.strip():
                raise MalformedRow(row_no, "empty question")
            if not answer.strip():
                raise MalformedRow(row_no, "empty answer")
            if not topic.strip():
                raise MalformedRow(row_no, "empty topic")
            if not _validate_url(source_url):
                raise MalformedRow(row_no, f"invalid source_url {source_url!r}")
            try:
                updated = date.fromisoformat(last_updated.strip())
            except ValueError:
                raise MalformedRow(
                    row_no, f"invalid last_updated {last_updated!r}"
                ) from None
            entries.append(
                FaqEntry(
                    id=entry_id,
                    question=question,
                    answer=answer,
                    topic=topic,
                    source_url=source_url,
                    last_updated=updated,
                )
            )
    if not entries:
        raise EmptyCorpus(f"{path} has no data rows")
    return Corpus(entries=entries, state_label=state_label, stoplist_version=stoplist_version())


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to CSV; inverse of :func:`load_corpus`."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REQUIRED_COLUMNS)
        for e in corpus.entries:
            writer.writerow(
                [e.id, e.question, e.answer, e.topic, e.source_url, e.last_updated.isoformat()]
            )


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Exact mean question/answer lengths in words, pair and topic counts.

    Rounding is left to presentation.
    """
    if not corpus.entries:
        raise EmptyCorpus("cannot compute stats of an empty corpus")
    n = len(corpus.entries)
    q_words = sum(_word_count(e.question) for e in corpus.entries)
    a_words = sum(_word_count(e.answer) for e in corpus.entries)
    return CorpusStats(
        n_pairs=n,
        avg_question_len=q_words / n,
        avg_answer_len=a_words / n,
        n_topics=len(corpus.topics),
    )


def _intent_base(entry: FaqEntry) -> str:
    tokens = []
    for tok in remove_stopwords(entry.question)[:MAX_INTENT_TOKENS]:
        clean = "".join(c for c in tok if c in _INTENT_CHARS)
        if clean:
            tokens.append(clean)
    if tokens:
        return "_".join(tokens)
    fallback = "".join(c for c in entry.id.lower() if c in _INTENT_CHARS)
    return f"q_{fallback}"


def generate_intent(entry: FaqEntry) -> IntentTag:
    """Intent tag for a single entry, before corpus-level collision handling."""
    return IntentTag(name=_intent_base(entry), entry_id=entry.id)


def generate_intents(corpus: Corpus) -> list[IntentTag]:
    """One unique intent tag per entry, in corpus order.

    Colliding names get ``_2``, ``_3``, ... suffixes in the order entries
    appear, so the result is a bijection between entries and names.
    """
    assigned: set[str] = set()
    counts: dict[str, int] = {}
    tags = []
    for entry in corpus.entries:
        base = _intent_base(entry)
        counts[base] = counts.get(base, 0) + 1
        name = base if counts[base] == 1 else f"{base}_{counts[base]}"
        while name in assigned:
            counts[base] += 1
            name = f"{base}_{counts[base]}"
        assigned.add(name)
        tags.append(IntentTag(name=name, entry_id=entry.id))
    return tags


def intent_entries(corpus: Corpus) -> dict[str, FaqEntry]:
    """Mapping of intent name to owning entry; cached per corpus value."""
    if corpus._intent_cache is None:
        by_id = {e.id: e for e in corpus.entries}
        corpus._intent_cache = {
            tag.name: by_id[tag.entry_id] for tag in generate_intents(corpus)
        }
    return corpus._intent_cache
