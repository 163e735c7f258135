"""Question paraphrasing behind a provider interface.

Each official question is expanded into k reworded variants used as extra
training utterances.  The built-in provider is a deterministic rule engine
driven by two versioned data files (leading-pattern templates and a synonym
table), so the same input always yields the same variants and no model
weights are needed.  An external provider can implement the same interface;
if it fails, callers may fall back to the rule engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

from .corpus import FaqEntry, remove_stopwords


class ProviderFailure(RuntimeError):
    """The paraphrase provider could not produce the requested variants."""


@dataclass(frozen=True)
class ParaphraseSet:
    """Variants of one official question, tied to the owning entry only."""

    entry_id: str
    variants: tuple[str, ...]
    provider: str


class ParaphraseProvider(Protocol):
    name: str

    def generate(self, question: str, k: int) -> list[str]: ...


def _load_table(filename: str) -> dict:
    text = resources.files("votebot.data").joinpath(filename).read_text("utf-8")
    return json.loads(text)


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def _strip_token(raw: str) -> str:
    return "".join(c for c in raw if c.isalnum()).lower()


class RuleParaphraser:
    """Deterministic paraphraser: templates, synonyms, then padding rewrites."""

    def __init__(self) -> None:
        templates = _load_table("paraphrase_templates.json")
        synonyms = _load_table("paraphrase_synonyms.json")
        # longest prefix first so the most specific pattern leads
        self._rules = sorted(
            templates["rules"], key=lambda r: len(r["prefix"]), reverse=True
        )
        self._synonyms: dict[str, list[str]] = synonyms["synonyms"]
        self.name = f"rules:{templates['version']}+{synonyms['version']}"

    def generate(self, question: str, k: int) -> list[str]:
        question = question.strip()
        content = set(remove_stopwords(question))
        out: list[str] = []
        seen = {question.casefold()}

        def keep(candidate: str) -> None:
            candidate = candidate.strip()
            if not candidate or candidate.casefold() in seen:
                return
            # every variant must retain a content token of the original
            if content and not (set(remove_stopwords(candidate)) & content):
                return
            seen.add(candidate.casefold())
            out.append(candidate)

        for candidate in self._candidates(question):
            keep(candidate)
            if len(out) >= k:
                return out[:k]
        raise ProviderFailure(
            f"rule engine produced only {len(out)} of {k} variants for {question!r}"
        )

    def _candidates(self, question: str):
        lowered = question.lower()
        for rule in self._rules:
            if lowered.startswith(rule["prefix"]):
                rest = question[len(rule["prefix"]):]
                for rewrite in rule["rewrites"]:
                    yield _capitalize(rewrite.format(rest=rest))
        yield from self._synonym_rewrites(question)
        body = question.rstrip("?").rstrip()
        uncap = question[:1].lower() + question[1:]
        yield f"I would like to know: {uncap}"
        yield f"Quick question: {uncap}"
        yield f"Can you help me with this: {uncap}"
        # punctuation / article padding
        yield body if question.endswith("?") else f"{question}?"
        yield f"{body}, please?"
        for opener in ("Please,", "Kindly,", "Excuse me,", "Hello,", "Hi,", "Sorry,"):
            yield f"{opener} {uncap}"

    def _synonym_rewrites(self, question: str):
        words = question.split()
        for i, word in enumerate(words):
            key = _strip_token(word)
            if key not in self._synonyms:
                continue
            prefix_punct = word[: len(word) - len(word.lstrip("\"'("))]
            stripped = word.strip("\"'()[],.!?;:")
            suffix_punct = word[len(prefix_punct) + len(stripped):]
            for synonym in self._synonyms[key]:
                replacement = _capitalize(synonym) if stripped[:1].isupper() else synonym
                rebuilt = words.copy()
                rebuilt[i] = f"{prefix_punct}{replacement}{suffix_punct}"
                yield " ".join(rebuilt)


_default_provider: RuleParaphraser | None = None


def default_provider() -> RuleParaphraser:
    global _default_provider
    if _default_provider is None:
        _default_provider = RuleParaphraser()
    return _default_provider


def paraphrase(entry: FaqEntry, k: int = 3, provider: ParaphraseProvider | None = None) -> ParaphraseSet:
    """Produce exactly k distinct rewrites of the entry's question.

    Raises:
        ValueError: k < 1.
        ProviderFailure: the provider could not deliver k valid variants;
            with an external provider the caller may retry with the
            built-in one.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    engine = provider or default_provider()
    try:
        variants = engine.generate(entry.question, k)
    except ProviderFailure:
        raise
    except Exception as exc:
        raise ProviderFailure(f"provider {engine.name!r} failed: {exc}") from exc
    _validate(entry, variants, k)
    return ParaphraseSet(entry_id=entry.id, variants=tuple(variants), provider=engine.name)


def paraphrase_corpus(corpus, k: int = 3, provider: ParaphraseProvider | None = None) -> dict[str, ParaphraseSet]:
    """ParaphraseSet per entry, keyed by entry id."""
    return {e.id: paraphrase(e, k=k, provider=provider) for e in corpus.entries}


def _validate(entry: FaqEntry, variants: list[str], k: int) -> None:
    if len(variants) != k:
        raise ProviderFailure(f"provider returned {len(variants)} variants, wanted {k}")
    original = entry.question.casefold()
    seen = set()
    for v in variants:
        folded = v.casefold()
        if folded == original:
            raise ProviderFailure(f"variant equals the original question: {v!r}")
        if folded in seen:
            raise ProviderFailure(f"duplicate variant: {v!r}")
        seen.add(folded)
