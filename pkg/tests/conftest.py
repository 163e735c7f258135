from datetime import date

import pytest

from votebot.corpus import Corpus, FaqEntry, bundled_fixture, load_corpus
from votebot.nlu import train
from votebot.paraphrase import paraphrase_corpus


def make_entry(eid, question, answer="An official answer.", topic="general",
               url=None, updated=date(2022, 10, 25)):
    return FaqEntry(
        id=eid,
        question=question,
        answer=answer,
        topic=topic,
        source_url=url or f"https://elections.example.org/faq#{eid}",
        last_updated=updated,
    )


def make_corpus(entries, state_label="Testland"):
    return Corpus(entries=list(entries), state_label=state_label, stoplist_version="en-1.0")


@pytest.fixture(scope="session")
def sc_corpus():
    return load_corpus(bundled_fixture("sc"), "South Carolina")


@pytest.fixture(scope="session")
def ms_corpus():
    return load_corpus(bundled_fixture("ms"), "Mississippi")


@pytest.fixture(scope="session")
def sc_paraphrases(sc_corpus):
    return paraphrase_corpus(sc_corpus, k=3)


@pytest.fixture(scope="session")
def sc_model(sc_corpus, sc_paraphrases):
    return train(sc_corpus, sc_paraphrases)


@pytest.fixture(scope="session")
def ms_model(ms_corpus):
    return train(ms_corpus, paraphrase_corpus(ms_corpus, k=3))


@pytest.fixture
def tiny_corpus():
    return make_corpus([
        make_entry("t1", "How do I register to vote?",
                   "Registration is handled by the county office.", topic="registration"),
        make_entry("t2", "Where is my polling place located?",
                   "Use the precinct lookup tool to find it.", topic="polling"),
        make_entry("t3", "When must absentee ballots be returned?",
                   "Absentee ballots are due before the polls close.", topic="absentee"),
    ])
