"""Command-line entry point binding every pipeline stage.

One binary, subcommands per stage:

    sentrank synth        generate the seeded synthetic dataset
    sentrank ingest       build and sanity-check a corpus index
    sentrank pretrain-u   pretrain the user-simulation head
    sentrank train        full offline training run
    sentrank eval         metrics for a ranking mode
    sentrank kfold        cross-validated metrics per mode
    sentrank bench-window sliding-window search benchmark CSV
    sentrank serve        HTTP session service
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import (
    CorpusError,
    ingest_corpus,
    load_qrels,
    load_queries,
)
from .augment import SynonymLexicon
from .policy import WindowStats, initial_u_ranking, sliding_window_rank
from .qnet import SlateAction, State, init_q_params, q_value
from .replay_state import FeedbackPool
from .synth import generate_synthetic_corpus, load_ranking_log, write_dataset
from .trainer import (
    TrainerConfig,
    evaluate,
    kfold_split,
    run_offline,
    write_traces,
)
from .user_model import generate_pretrain_pairs, pretrain, zero_user_params

log = logging.getLogger(__name__)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_config(config_path: str | None, seed: int | None) -> TrainerConfig:
    try:
        if config_path is not None:
            cfg = TrainerConfig.from_json(config_path)
        else:
            cfg = TrainerConfig()
    except (ValueError, OSError) as exc:
        _fail(f"--config: {exc}")
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    return cfg


def _load_dataset(corpus, queries, qrels):
    try:
        index = ingest_corpus(corpus)
        query_list = load_queries(queries)
        qrel_table = load_qrels(qrels)
    except (CorpusError, OSError) as exc:
        _fail(str(exc))
    return index, query_list, qrel_table


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Interactive search ranking pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Output directory for the dataset files.")
def synth(seed: int, out: str) -> None:
    """Generate the seeded synthetic corpus, queries, qrels and logs."""
    dataset = generate_synthetic_corpus(seed=seed)
    paths = write_dataset(dataset, out)
    for name, path in sorted(paths.items()):
        click.echo(f"{name}\t{path}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Where to write the index summary JSON (default stdout).")
def ingest(corpus: str, out: str | None) -> None:
    """Parse a JSONL corpus and report index statistics."""
    try:
        index = ingest_corpus(corpus)
    except CorpusError as exc:
        _fail(str(exc))
    summary = {
        "documents": len(index.documents),
        "terms": len(index.postings),
        "avg_doc_length": index.avg_doc_length,
    }
    text = json.dumps(summary, sort_keys=True)
    if out is None:
        click.echo(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


@main.command("pretrain-u")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def pretrain_u(corpus, queries, qrels, config_path, seed, out) -> None:
    """Pretrain the user-simulation head and save it as a checkpoint."""
    cfg = _load_config(config_path, seed)
    index, query_list, qrel_table = _load_dataset(corpus, queries, qrels)
    pairs = generate_pretrain_pairs(index, qrel_table, query_list, seed=cfg.seed)
    u_params, history = pretrain(
        zero_user_params(), pairs, cfg.pretrain_epochs, cfg.lr,
        cfg.pretrain_weight_decay,
    )
    ckpt = Checkpoint(
        u_pretrained=u_params, u_final=u_params,
        q_params=init_q_params(cfg.seed, cfg.slate_size),
    )
    save_checkpoint(ckpt, out)
    click.echo(json.dumps({
        "pairs": len(pairs),
        "final_loss": history[-1],
        "checkpoint": out,
    }, sort_keys=True))


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option("--ranking-log", type=click.Path(exists=True), required=True)
@click.option("--lexicon", type=click.Path(exists=True), default=None)
@click.option("--stopwords", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True,
              help="Directory for checkpoint, traces and pool files.")
def train(corpus, queries, qrels, ranking_log, lexicon, stopwords,
          config_path, seed, out) -> None:
    """Run offline training and write checkpoint, traces and pool."""
    cfg = _load_config(config_path, seed)
    index, query_list, qrel_table = _load_dataset(corpus, queries, qrels)
    log_table = load_ranking_log(ranking_log)
    lex = None
    if lexicon is not None:
        lex = SynonymLexicon.load(lexicon, stopwords)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    result = run_offline(cfg, index, query_list, qrel_table, log_table, lex)
    elapsed = time.time() - started
    save_checkpoint(
        Checkpoint(
            u_pretrained=result.u_pretrained,
            u_final=result.u_final,
            q_params=result.q_params,
        ),
        out_dir / "checkpoint.json",
    )
    write_traces(result.traces, out_dir / "traces.jsonl")
    result.pool.save(out_dir / "pool.jsonl")
    click.echo(json.dumps({
        "episodes": cfg.episodes,
        "seconds": round(elapsed, 1),
        "pool_size": len(result.pool),
        "out": str(out_dir),
    }, sort_keys=True))


@main.command("eval")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True),
              default=None, help="Required for modes other than bm25.")
@click.option("--mode", type=click.Choice(["bm25", "u_only", "dqrank"]),
              default="bm25", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
def eval_cmd(corpus, queries, qrels, checkpoint_path, mode,
             config_path, seed) -> None:
    """Print metric JSON for a ranking mode on a query set."""
    cfg = _load_config(config_path, seed)
    index, query_list, qrel_table = _load_dataset(corpus, queries, qrels)
    if mode == "bm25":
        u_pre = u_fin = zero_user_params()
        q_params = None
    else:
        if checkpoint_path is None:
            _fail("--checkpoint is required for mode " + mode)
        ckpt = load_checkpoint(checkpoint_path)
        u_pre, u_fin, q_params = ckpt.u_pretrained, ckpt.u_final, ckpt.q_params
    report = evaluate(
        u_pre, u_fin, q_params, index, query_list, qrel_table, mode, cfg
    )
    click.echo(json.dumps(report.to_dict(), sort_keys=True))


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option("--ranking-log", type=click.Path(exists=True), required=True)
@click.option("--lexicon", type=click.Path(exists=True), default=None)
@click.option("--stopwords", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--folds", type=int, default=5, show_default=True)
def kfold(corpus, queries, qrels, ranking_log, lexicon, stopwords,
          config_path, seed, folds) -> None:
    """Train per fold and print held-out metrics for every mode."""
    cfg = _load_config(config_path, seed)
    index, query_list, qrel_table = _load_dataset(corpus, queries, qrels)
    log_table = load_ranking_log(ranking_log)
    lex = None
    if lexicon is not None:
        lex = SynonymLexicon.load(lexicon, stopwords)
    try:
        splits = kfold_split(query_list, folds, cfg.seed)
    except ValueError as exc:
        _fail(f"--folds: {exc}")
    for fold_idx, (train_queries, test_queries) in enumerate(splits):
        result = run_offline(
            cfg, index, train_queries, qrel_table, log_table, lex
        )
        row = {"fold": fold_idx, "test_queries": len(test_queries)}
        for mode in ("bm25", "u_only", "dqrank"):
            report = evaluate(
                result.u_pretrained, result.u_final, result.q_params,
                index, test_queries, qrel_table, mode, cfg,
            )
            row[mode] = {"ndcg_at_10": report.ndcg_at_10, "mrr": report.mrr}
        click.echo(json.dumps(row, sort_keys=True))


@main.command("bench-window")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--g", "slate_sizes", type=int, multiple=True,
              default=(5, 8, 10), show_default=True,
              help="Slate sizes to benchmark (repeatable).")
@click.option("--m", "windows", type=int, multiple=True,
              default=(2, 3, 4), show_default=True,
              help="Window widths to benchmark (repeatable).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV output path (default stdout).")
def bench_window(corpus, queries, slate_sizes, windows, seed, out) -> None:
    """Benchmark the sliding-window search; exhaustive optimum for G <= 6."""
    index, query_list = _load_dataset_no_qrels(corpus, queries)
    cfg = TrainerConfig(seed=seed)
    rng = np.random.default_rng(seed)
    u_params = zero_user_params()
    documents = index.documents
    doc_ids = sorted(documents)
    rows = []
    for g in slate_sizes:
        for m in windows:
            if not 2 <= m <= g:
                continue
            q_params = init_q_params(seed, g)
            query = query_list[int(rng.integers(len(query_list)))]
            picked = list(rng.choice(doc_ids, size=g, replace=False))
            state = State(query=query)
            slate = initial_u_ranking(
                u_params, state, tuple(picked), g, documents, cfg.m_sentences
            )
            started = time.perf_counter()
            ranked, stats = sliding_window_rank(
                q_params, u_params, state, slate, m,
                documents, cfg.m_sentences,
            )
            elapsed = time.perf_counter() - started
            q_exhaustive = ""
            if g <= 6:
                best = -np.inf
                for perm in itertools.permutations(range(g)):
                    action = SlateAction(
                        doc_ids=tuple(slate.doc_ids[i] for i in perm),
                        rep_idx=tuple(slate.rep_idx[i] for i in perm),
                    )
                    best = max(best, q_value(
                        q_params, u_params, state, action,
                        documents, cfg.m_sentences,
                    ))
                q_exhaustive = f"{best:.6f}"
            rows.append({
                "G": g, "m": m,
                "evaluations": stats.evaluations,
                "Q_initial": f"{stats.q_initial:.6f}",
                "Q_window": f"{stats.q_final:.6f}",
                "Q_exhaustive": q_exhaustive,
                "seconds": f"{elapsed:.4f}",
            })
    fieldnames = ["G", "m", "evaluations", "Q_initial", "Q_window",
                  "Q_exhaustive", "seconds"]
    target = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    writer = csv.DictWriter(target, fieldnames=fieldnames)
    writer.writeheader()
    writer.writerows(rows)
    if out:
        target.close()


def _load_dataset_no_qrels(corpus, queries):
    try:
        return ingest_corpus(corpus), load_queries(queries)
    except (CorpusError, OSError) as exc:
        _fail(str(exc))


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True),
              required=True)
@click.option("--qrels", type=click.Path(exists=True), default=None)
@click.option("--pool", "pool_path", type=click.Path(dir_okay=False),
              default=None, help="Feedback pool file; created if missing.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(corpus, checkpoint_path, qrels, pool_path, config_path,
          host, port) -> None:
    """Serve the interactive search API over HTTP."""
    import uvicorn

    from .service import ServiceContext, create_app

    cfg = _load_config(config_path, None)
    try:
        index = ingest_corpus(corpus)
        ckpt = load_checkpoint(checkpoint_path)
    except (CorpusError, ValueError, OSError) as exc:
        _fail(str(exc))
    pool = FeedbackPool()
    if pool_path is not None and Path(pool_path).exists():
        pool = FeedbackPool.load(pool_path)
    qrel_table = load_qrels(qrels) if qrels is not None else None
    ctx = ServiceContext(
        index=index, u_params=ckpt.u_final, q_params=ckpt.q_params,
        config=cfg, pool=pool, pool_path=pool_path, qrels=qrel_table,
    )
    uvicorn.run(create_app(ctx), host=host, port=port)


if __name__ == "__main__":
    main()
