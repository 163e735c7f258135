"""Command line interface for corpus tooling, training, audit and serving."""

from __future__ import annotations

import sys

import click

from . import __version__
from .corpus import CorpusError, compute_stats, load_corpus
from .evalharness import InvalidSpec, PopulationSpec, simulate_rct
from .nlu import classify, load_model, save_model, train
from .paraphrase import paraphrase_corpus
from .safety import AuditLog, SafetyPolicy, UnknownSession
from .safety import replay as replay_log
from .safety import verify_chain


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Safe, auditable FAQ chatbot for official election information."""


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.option("--state", required=True, help="Region label for the corpus.")
def ingest(file: str, state: str) -> None:
    """Load and validate a corpus CSV."""
    try:
        corpus = load_corpus(file, state)
    except CorpusError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        f"Loaded {len(corpus)} entries across {len(corpus.topics)} topics "
        f"for {corpus.state_label} (stoplist {corpus.stoplist_version})."
    )


@main.command()
@click.argument("file", type=click.Path(exists=True))
def stats(file: str) -> None:
    """Corpus statistics (lengths in words, rounded for display)."""
    corpus = load_corpus(file, "-")
    result = compute_stats(corpus)
    click.echo(f"Q/A pairs:           {result.n_pairs}")
    click.echo(f"Topics:              {result.n_topics}")
    click.echo(f"Avg question length: {round(result.avg_question_len, 2)}")
    click.echo(f"Avg answer length:   {round(result.avg_answer_len, 2)}")


@main.command()
@click.argument("corpus_file", type=click.Path(exists=True))
@click.option("-k", default=3, show_default=True, help="Variants per question.")
def paraphrase(corpus_file: str, k: int) -> None:
    """Emit paraphrase variants as CSV (entry_id,variant)."""
    import csv

    corpus = load_corpus(corpus_file, "-")
    writer = csv.writer(sys.stdout)
    writer.writerow(["entry_id", "variant"])
    for pset in paraphrase_corpus(corpus, k=k).values():
        for variant in pset.variants:
            writer.writerow([pset.entry_id, variant])


@main.command(name="train")
@click.argument("corpus_file", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Model output path.")
@click.option("--state", default="-", help="Region label for the corpus.")
@click.option("-k", default=3, show_default=True, help="Paraphrases per question.")
def train_command(corpus_file: str, out: str, state: str, k: int) -> None:
    """Train the intent model and write it to a file."""
    corpus = load_corpus(corpus_file, state)
    model = train(corpus, paraphrase_corpus(corpus, k=k))
    save_model(model, out)
    click.echo(
        f"Trained {len(model.intents)} intents over {model.n_utterances} "
        f"utterances; wrote {out}."
    )


@main.command()
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("utterance")
def ask(model_file: str, utterance: str) -> None:
    """Print ranked intents for an utterance."""
    model = load_model(model_file)
    result = classify(model, utterance)
    if not result.ranked:
        click.echo("no matching intent")
        return
    for intent, confidence in result.ranked:
        click.echo(f"{confidence:.4f}  {intent}")


@main.group()
def audit() -> None:
    """Audit log inspection."""


@audit.command()
@click.argument("log_file", type=click.Path(exists=True))
def verify(log_file: str) -> None:
    """Verify the audit chain; exit 1 when broken."""
    report = verify_chain(AuditLog(log_file, durable=False))
    if report.valid:
        click.echo(f"valid ({report.n_records} records)")
    else:
        click.echo(f"BROKEN at seq {report.broken_seq}")
        sys.exit(1)


@audit.command(name="replay")
@click.argument("log_file", type=click.Path(exists=True))
@click.option("--session", required=True, help="Session id to replay.")
def replay_command(log_file: str, session: str) -> None:
    """Print the transcript of one session."""
    try:
        turns = replay_log(AuditLog(log_file, durable=False), session)
    except UnknownSession:
        raise click.ClickException(f"unknown session {session!r}") from None
    for turn in turns:
        click.echo(f"[{turn.seq}] user: {turn.utterance}")
        click.echo(f"[{turn.seq}] bot({turn.decision.get('kind')}): {turn.decision.get('text')}")


@main.group(name="eval")
def eval_group() -> None:
    """Trial harness."""


@eval_group.command()
@click.option("--corpus", "corpus_file", required=True, type=click.Path(exists=True))
@click.option("--spec", "spec_file", required=True, type=click.Path(exists=True))
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--state", default="-", help="Region label for the corpus.")
@click.option("-k", default=3, show_default=True, help="Paraphrases per question.")
def rct(corpus_file: str, spec_file: str, seed: int, out: str, state: str, k: int) -> None:
    """Simulate a randomized controlled trial and write the report JSON."""
    corpus = load_corpus(corpus_file, state)
    try:
        spec = PopulationSpec.from_file(spec_file)
    except InvalidSpec as exc:
        raise click.ClickException(str(exc)) from exc
    model = train(corpus, paraphrase_corpus(corpus, k=k))
    report = simulate_rct(corpus, model, SafetyPolicy(), spec, seed=seed)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    click.echo(f"verdict: {report.verdict}; report written to {out}")


@main.command()
@click.option("--config", "config_file", required=True, type=click.Path(exists=True))
def serve(config_file: str) -> None:
    """Run the HTTP chat service."""
    from .service import load_config
    from .service import serve as run_service

    run_service(load_config(config_file))


if __name__ == "__main__":
    main()
