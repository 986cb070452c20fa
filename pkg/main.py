#!/usr/bin/env python3
"""
Legal Retrieval Toolkit — Entry Point
======================================

Batch subcommands; each reads the documented inputs, writes deterministic
outputs into the output directory plus ``summary_<command>.json``:

    python main.py normalize        --input raw.txt
    python main.py build-index      --corpus law.json
    python main.py search           --index out/index.joblib --questions q.json
    python main.py segment          --corpus law.json
    python main.py gen-pairs        --corpus law.json --questions train.json
    python main.py split            --pairs out/pairs.jsonl
    python main.py build-lm         --sentences legal.txt
    python main.py ppl              --lm out/lm.joblib --input general.txt
    python main.py select-indomain  --scored out/perplexity.tsv --threshold 200
    python main.py run-pipeline     --corpus law.json --questions test.json
    python main.py vote             --runs a.json b.json
    python main.py evaluate         --run out/submission.json --questions test.json
    python main.py filter-qa        --questions qa.json

Exit status: 0 on success, 2 on configuration errors (nothing is run),
1 on any other failure (partial outputs are removed).
"""

import argparse
import itertools
import json
import logging
import os
import shlex
import sys
import time
from logging.handlers import RotatingFileHandler
from typing import Any, BinaryIO, Callable, Dict, Iterator, List, Optional, Sequence

from config import RunConfig
from core.bm25_index import Bm25Index
from core.exceptions import ConfigError, DataLoadError, TextDecodeError, ToolkitError
from core.rerank_pipeline import (
    RerankPipeline,
    read_run,
    vote,
    write_submission,
)
from core.segmenter import segment
from core.text_normalizer import TextPipeline, clean_sentences, decode_text, split_sentences
from data.corpus_loader import Article, load_corpus, load_questions, read_json, write_json, write_questions
from data.pair_generator import (
    PairSource,
    generate_pairs_multi,
    pair_stats,
    read_pairs_jsonl,
    split_dev,
    tokenize_corpus,
    write_pairs_jsonl,
)
from data.qa_filter import filter_qa, split_qa
from ml.evaluation import evaluate_answers, evaluate_run, load_answers
from ml.indomain_selector import (
    filter_scored,
    filter_scored_tsv,
    iter_perplexities,
    write_scored_tsv,
)
from ml.ngram_lm import NGramLm, train_lm
from ml.scorers import ExternalScorer, LexicalScorer
from monitoring.run_summary import RunSummary

logger = logging.getLogger("main")

LOG_FORMAT = "%(asctime)s [%(levelname)-5s] %(name)s: %(message)s"


def setup_logging(config: RunConfig, verbose: bool = False):
    config.ensure_directories()
    level = logging.DEBUG if verbose else logging.INFO
    fmt = logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)

    # avoid duplicate handlers on re-entry
    if any(getattr(h, "_toolkit_handler", False) for h in root.handlers):
        return

    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(fmt)
    console._toolkit_handler = True
    root.addHandler(console)

    # Rotating file handler — 10 MB per file, keep 5 backups
    log_file = os.path.join(config.log_dir, "toolkit.log")
    file_handler = RotatingFileHandler(
        log_file, maxBytes=10 * 1024 * 1024, backupCount=5, encoding="utf-8"
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(fmt)
    file_handler._toolkit_handler = True
    root.addHandler(file_handler)


# ================================================================
# Shared helpers
# ================================================================


def _out(config: RunConfig, summary: RunSummary, given: Optional[str], default_name: str) -> str:
    path = given or os.path.join(config.output_dir, default_name)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return summary.register_output(path)


def _require(value: str, flag: str) -> str:
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def _read_lines(path: str) -> Iterator[str]:
    """Stream the nonblank lines of a UTF-8 file, whitespace collapsed; opens eagerly, reads lazily."""
    try:
        f = open(path, "rb")
    except OSError as exc:
        raise DataLoadError(f"Cannot read {path}: {exc}") from exc
    return _iter_lines(f, path)


def _iter_lines(f: BinaryIO, path: str) -> Iterator[str]:
    with f:
        offset = 0
        for raw in f:
            try:
                text = decode_text(raw)
            except TextDecodeError as exc:
                at = offset + exc.byte_offset
                raise TextDecodeError(f"{path}: invalid UTF-8 at byte offset {at}", byte_offset=at) from exc
            offset += len(raw)
            for line in text.splitlines():
                if line.strip():
                    yield " ".join(line.split())


def _open_index(config: RunConfig, corpus: Optional[List[Article]], pipeline: TextPipeline) -> Bm25Index:
    if config.index_path and os.path.exists(config.index_path):
        index = Bm25Index.load(config.index_path)
        logger.info(f"Loaded BM25 index ({index.n_docs} docs) from {config.index_path}")
        return index
    if corpus is None:
        raise ConfigError("an index file or a corpus is required")
    tokens = tokenize_corpus(corpus, pipeline, config.resolved_workers)
    return Bm25Index.build(tokens, config.bm25_params())


def _timed(summary: RunSummary, name: str, fn: Callable[[], Any]) -> Any:
    start = time.time()
    result = fn()
    summary.timing(name, time.time() - start)
    return result


# ================================================================
# Subcommands
# ================================================================


def cmd_normalize(args, config: RunConfig, summary: RunSummary):
    """One normalized, tokenized line per input line"""
    pipeline = config.lm_pipeline() if args.lm_side else config.text_pipeline()
    lines = _read_lines(_require(args.input, "--input"))
    out_path = _out(config, summary, args.output, "normalized.txt")
    n = 0
    with open(out_path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(pipeline.process(line).text + "\n")
            n += 1
    summary.count("lines", n)


def cmd_build_index(args, config: RunConfig, summary: RunSummary):
    corpus = load_corpus(_require(config.corpus_path, "--corpus"))
    pipeline = config.text_pipeline()
    tokens = _timed(summary, "tokenize_s", lambda: tokenize_corpus(corpus, pipeline, config.resolved_workers))
    index = _timed(summary, "build_s", lambda: Bm25Index.build(tokens, config.bm25_params()))
    out_path = _out(config, summary, config.index_path or None, "index.joblib")
    index.save(out_path)
    summary.count("documents", index.n_docs)
    summary.count("terms", len(index.postings))


def cmd_search(args, config: RunConfig, summary: RunSummary):
    pipeline = config.text_pipeline()
    corpus = load_corpus(config.corpus_path) if config.corpus_path else None
    index = _open_index(config, corpus, pipeline)

    if args.query:
        queries = [("query", args.query)]
    else:
        questions = load_questions(_require(config.questions_path, "--questions or --query"))
        queries = [(q.question_id, q.text) for q in sorted(questions, key=lambda q: q.question_id)]

    k = args.k or config.k_retrieve
    hits = index.top_k_many([pipeline.process(text) for _, text in queries], k, config.resolved_workers)
    out_path = _out(config, summary, args.output, "search.jsonl")
    with open(out_path, "w", encoding="utf-8") as f:
        for (qid, _), ranked in zip(queries, hits):
            record = {
                "question_id": qid,
                "hits": [
                    {"law_id": h.doc_id[0], "article_id": h.doc_id[1], "score": round(h.score, 6)}
                    for h in ranked
                ],
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            if args.query:
                for rank, h in enumerate(ranked, start=1):
                    print(f"{rank:>4d}  {h.score:9.4f}  {h.doc_id[0]} / {h.doc_id[1]}")
    summary.count("queries", len(queries))
    summary.count("hits", sum(len(h) for h in hits))


def cmd_segment(args, config: RunConfig, summary: RunSummary):
    corpus = load_corpus(_require(config.corpus_path, "--corpus"))
    tokens = tokenize_corpus(corpus, config.text_pipeline(), config.resolved_workers)
    seg = config.segmentation()
    out_path = _out(config, summary, args.output, "passages.jsonl")
    n_passages = 0
    with open(out_path, "w", encoding="utf-8") as f:
        for article in corpus:
            for p in segment(tokens[article.key], seg, article_id=article.key):
                record = {
                    "law_id": article.law_id,
                    "article_id": article.article_id,
                    "passage_index": p.passage_index,
                    "token_offset": p.token_offset,
                    "text": p.text,
                }
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
                n_passages += 1
    summary.count("articles", len(corpus))
    summary.count("passages", n_passages)


def cmd_gen_pairs(args, config: RunConfig, summary: RunSummary):
    pipeline = config.text_pipeline()
    workers = config.resolved_workers

    def make_source(name: str, corpus_path: str, questions_path: str, k: Optional[int]) -> PairSource:
        corpus = load_corpus(corpus_path)
        questions = load_questions(questions_path, corpus)
        tokens = tokenize_corpus(corpus, pipeline, workers)
        index = Bm25Index.build(tokens, config.bm25_params())
        k = k or config.pair_k_by_source.get(name, config.pair_k)
        return PairSource(name, questions, corpus, index, k, tokens)

    sources = [make_source(
        args.source,
        _require(config.corpus_path, "--corpus"),
        _require(config.questions_path, "--questions"),
        args.k,
    )]
    for name, corpus_path, questions_path in args.extra_source or []:
        for p in (corpus_path, questions_path):
            if not os.path.exists(p):
                raise ConfigError(f"--extra-source path does not exist: {p}")
        sources.append(make_source(name, corpus_path, questions_path, None))

    by_source = _timed(summary, "generate_s", lambda: generate_pairs_multi(
        sources, config.segmentation(), config.max_question_tokens, pipeline, workers,
    ))
    out_path = _out(config, summary, args.output, "pairs.jsonl")
    write_pairs_jsonl(out_path, (p for name in by_source for p in by_source[name]))

    for name, pairs in by_source.items():
        stats = pair_stats(pairs)
        summary.count(f"{name}.k", next(s.k for s in sources if s.name == name))
        for key, value in stats.items():
            summary.count(f"{name}.{key}", value)
    total = pair_stats(p for pairs in by_source.values() for p in pairs)
    for key, value in total.items():
        summary.count(key, value)


def cmd_split(args, config: RunConfig, summary: RunSummary):
    pairs = read_pairs_jsonl(_require(args.pairs, "--pairs"))
    extra = [p for path in args.extra_pairs or [] for p in read_pairs_jsonl(path)]
    fraction = args.fraction if args.fraction is not None else config.dev_fraction
    train, dev = split_dev(pairs, fraction, config.seed, extra, config.shuffle_train or args.shuffle)
    write_pairs_jsonl(_out(config, summary, args.train_out, "train.jsonl"), train)
    write_pairs_jsonl(_out(config, summary, args.dev_out, "dev.jsonl"), dev)
    summary.count("train_pairs", len(train))
    summary.count("dev_pairs", len(dev))
    summary.count("dev_questions", len({p.question_id for p in dev}))


def _iter_sentences(path: str, split: bool, clean: bool, min_ratio: float) -> Iterator[str]:
    lines = _read_lines(path)
    sentences: Iterator[str] = (s for line in lines for s in split_sentences(line)) if split else iter(lines)
    if clean:
        sentences = clean_sentences(sentences, min_ratio)
    return sentences


def cmd_build_lm(args, config: RunConfig, summary: RunSummary):
    pipeline = config.lm_pipeline()
    sentences = _iter_sentences(
        _require(args.sentences, "--sentences"), args.split_sentences, args.clean, config.vietnamese_min_ratio,
    )
    tokenized = [pipeline.process(s).tokens for s in sentences]
    tokenized = [t for t in tokenized if t]
    lm = _timed(summary, "train_s", lambda: train_lm(
        tokenized, config.lm_order, config.lm_discount, config.lm_unk_threshold,
    ))
    out_path = _out(config, summary, config.lm_path or None, "lm.joblib")
    lm.save(out_path)
    summary.count("sentences", len(tokenized))
    summary.count("vocab", len(lm.vocab))
    summary.count("contexts", len(lm.counts))


def _scored_sentences(args, config: RunConfig, lm: NGramLm) -> Iterator:
    """(line, PP) for every input line, input order."""
    pipeline = config.lm_pipeline()
    lines, to_score = itertools.tee(_read_lines(_require(args.input, "--input")))
    tokens = (pipeline.process(line).tokens for line in to_score)
    scored = iter_perplexities(lm, tokens, config.ppl_batch_size, config.resolved_workers)
    for line, (_, score) in zip(lines, scored):
        yield line, score


def cmd_ppl(args, config: RunConfig, summary: RunSummary):
    lm = NGramLm.load(_require(config.lm_path, "--lm"))
    out_path = _out(config, summary, args.output, "perplexity.tsv")
    with open(out_path, "w", encoding="utf-8") as f:
        n = write_scored_tsv(f, _scored_sentences(args, config, lm))
    summary.count("sentences", n)


def cmd_select_indomain(args, config: RunConfig, summary: RunSummary):
    cfg = config.selection_config()
    if args.scored:
        rows = filter_scored_tsv(args.scored, cfg)
    else:
        lm = NGramLm.load(_require(config.lm_path, "--lm or --scored"))
        rows = filter_scored(_scored_sentences(args, config, lm), cfg)
    out_path = _out(config, summary, args.output, "selected.tsv")
    with open(out_path, "w", encoding="utf-8") as f:
        kept = write_scored_tsv(f, rows)
    summary.count("kept", kept)
    summary.count("threshold", cfg.threshold)


def cmd_run_pipeline(args, config: RunConfig, summary: RunSummary):
    corpus = load_corpus(_require(config.corpus_path, "--corpus"))
    questions = load_questions(_require(config.questions_path, "--questions"))
    pipeline = config.text_pipeline()
    tokens = tokenize_corpus(corpus, pipeline, config.resolved_workers)
    if config.index_path and os.path.exists(config.index_path):
        index = Bm25Index.load(config.index_path)
    else:
        index = Bm25Index.build(tokens, config.bm25_params())

    if config.scorer == "external":
        scorer = ExternalScorer(config.scorer_command, config.scorer_timeout)
    else:
        scorer = LexicalScorer(pipeline, config.bm25_params())

    with scorer:
        runner = RerankPipeline(corpus, index, scorer, config.pipeline_config(), pipeline, tokens)
        run = _timed(summary, "pipeline_s", lambda: runner.run(questions))

    out_path = _out(config, summary, args.output, "submission.json")
    summary.register_output(out_path + ".meta.json")
    write_submission(out_path, run)
    summary.count("questions", len(run.predictions))
    summary.count("empty_predictions", sum(1 for v in run.predictions.values() if not v))
    summary.count("selected", sum(len(s) for s in run.selected.values()))


def cmd_vote(args, config: RunConfig, summary: RunSummary):
    runs = [read_run(p) for p in args.runs]
    voted = vote(runs, args.weights, config.selection_policy() if args.selection or args.tau is not None else None)
    out_path = _out(config, summary, args.output, "vote.json")
    summary.register_output(out_path + ".meta.json")
    write_submission(out_path, voted)
    summary.count("runs", len(runs))
    summary.count("questions", len(voted.predictions))


def cmd_evaluate(args, config: RunConfig, summary: RunSummary):
    gold = load_questions(_require(config.questions_path, "--questions"))
    run = read_run(_require(args.run, "--run"))
    report = evaluate_run(run, gold, config.beta)

    payload: Dict[str, Any] = report.to_dict()
    if args.answers:
        answers = load_answers(read_json(args.answers), args.answers)
        payload["answers"] = evaluate_answers(answers, gold)
        summary.count("answer_f1", round(payload["answers"]["macro_f1"], 6))

    write_json(_out(config, summary, args.output, "eval.json"), payload)
    table_path = _out(config, summary, None, "eval.txt")
    table = report.to_table()
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(table + "\n")
    print(table)

    for name, value in report.macro.items():
        summary.count(f"macro_{name}", round(value, 6))
    summary.count("questions", len(report.per_question))
    summary.count("empty_predictions", report.n_empty_prediction)


def cmd_filter_qa(args, config: RunConfig, summary: RunSummary):
    records = load_questions(_require(config.questions_path, "--questions"))
    kept = filter_qa(records, config.max_answer_words)
    write_questions(_out(config, summary, args.output, "qa_filtered.json"), kept)
    summary.count("records", len(records))
    summary.count("kept", len(kept))
    if args.split and len(kept) >= 2:
        train, dev = split_qa(kept, config.qa_dev_fraction, config.seed)
        write_questions(_out(config, summary, None, "qa_train.json"), train)
        write_questions(_out(config, summary, None, "qa_dev.json"), dev)
        summary.count("train", len(train))
        summary.count("dev", len(dev))


COMMANDS: Dict[str, Callable] = {
    "normalize": cmd_normalize,
    "build-index": cmd_build_index,
    "search": cmd_search,
    "segment": cmd_segment,
    "gen-pairs": cmd_gen_pairs,
    "split": cmd_split,
    "build-lm": cmd_build_lm,
    "ppl": cmd_ppl,
    "select-indomain": cmd_select_indomain,
    "run-pipeline": cmd_run_pipeline,
    "vote": cmd_vote,
    "evaluate": cmd_evaluate,
    "filter-qa": cmd_filter_qa,
}


# ================================================================
# Argument parsing
# ================================================================

# subcommand flag → RunConfig field
_FLAG_FIELDS = {
    "corpus": "corpus_path",
    "questions": "questions_path",
    "index": "index_path",
    "lm": "lm_path",
    "out": "output_dir",
    "seed": "seed",
    "workers": "workers",
    "k_retrieve": "k_retrieve",
    "window": "window",
    "stride": "stride",
    "max_question_tokens": "max_question_tokens",
    "order": "lm_order",
    "discount": "lm_discount",
    "unk_threshold": "lm_unk_threshold",
    "threshold": "ppl_threshold",
    "min_threshold": "ppl_min_threshold",
    "scorer": "scorer",
    "scorer_timeout": "scorer_timeout",
    "selection": "selection",
    "tau": "tau",
    "retrieval_unit": "retrieval_unit",
    "beta": "beta",
    "max_answer_words": "max_answer_words",
}


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands suppress defaults so flags given before the subcommand survive
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=default)
    common.add_argument("--workers", type=int, default=default, help="<= 0 uses every core")
    common.add_argument("--out", default=default, help="output directory")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Legal document retrieval toolkit", parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command")
    sub_common = _global_flags(True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, parents=[sub_common])

    p = add("normalize", "Normalize and tokenize a text file line by line")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--lm-side", action="store_true", help="use LM-side settings (keeps stopwords)")

    p = add("build-index", "Build an article-level BM25 index")
    p.add_argument("--corpus")
    p.add_argument("--index", help="index file to write")

    p = add("search", "BM25 top-k for a query or a questions file")
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--questions")
    p.add_argument("--query")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("--output", default=None)

    p = add("segment", "Split every article into passages")
    p.add_argument("--corpus")
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--output", default=None)

    p = add("gen-pairs", "Question/passage pairs with BM25 hard negatives")
    p.add_argument("--corpus")
    p.add_argument("--questions")
    p.add_argument("--source", default="official", help="name of the primary source")
    p.add_argument("-k", type=int, default=None, help="retrieval depth for the primary source")
    p.add_argument("--extra-source", nargs=3, action="append", metavar=("NAME", "CORPUS", "QUESTIONS"))
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--max-question-tokens", type=int)
    p.add_argument("--output", default=None)

    p = add("split", "Question-level train/dev split of a pairs file")
    p.add_argument("--pairs", required=True)
    p.add_argument("--extra-pairs", nargs="*", help="pairs that always go to train")
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--train-out", default=None)
    p.add_argument("--dev-out", default=None)

    p = add("build-lm", "Train the in-domain n-gram LM")
    p.add_argument("--sentences", required=True, help="text file, one sentence per line")
    p.add_argument("--lm", help="LM file to write")
    p.add_argument("--split-sentences", action="store_true")
    p.add_argument("--clean", action="store_true", help="drop duplicates and non-Vietnamese lines")
    p.add_argument("--order", type=int)
    p.add_argument("--discount", type=float)
    p.add_argument("--unk-threshold", type=int)

    p = add("ppl", "Perplexity of every line of a text file")
    p.add_argument("--lm")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)

    p = add("select-indomain", "Keep sentences within the perplexity threshold")
    p.add_argument("--lm")
    p.add_argument("--input", help="raw sentences to score")
    p.add_argument("--scored", help="pre-scored TSV (score<TAB>sentence)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-threshold", type=float)
    p.add_argument("--output", default=None)

    p = add("run-pipeline", "Retrieve, segment, score and select per question")
    p.add_argument("--corpus")
    p.add_argument("--questions")
    p.add_argument("--index")
    p.add_argument("--k-retrieve", type=int)
    p.add_argument("--retrieval-unit", choices=["article", "passage"])
    p.add_argument("--scorer", choices=["builtin", "external"])
    p.add_argument("--scorer-command", default=None, help="command line of an external scorer")
    p.add_argument("--scorer-timeout", type=float)
    p.add_argument("--selection", choices=["top1", "threshold"])
    p.add_argument("--tau", type=float)
    p.add_argument("--output", default=None)

    p = add("vote", "Score-level vote over several runs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--weights", nargs="+", type=float, default=None)
    p.add_argument("--selection", choices=["top1", "threshold"])
    p.add_argument("--tau", type=float)
    p.add_argument("--output", default=None)

    p = add("evaluate", "Precision / recall / F2 of a run against gold questions")
    p.add_argument("--run", required=True)
    p.add_argument("--questions")
    p.add_argument("--answers", default=None, help="predicted QA answers to score with token F1")
    p.add_argument("--beta", type=float)
    p.add_argument("--output", default=None)

    p = add("filter-qa", "Drop long and article-id-list answers")
    p.add_argument("--questions")
    p.add_argument("--max-answer-words", type=int)
    p.add_argument("--split", action="store_true", help="also write a question-level train/dev split")
    p.add_argument("--output", default=None)

    return parser


def load_config(args) -> RunConfig:
    """Defaults ← config file ← flags, then paths and invariants are checked."""
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        field_name: getattr(args, flag)
        for flag, field_name in _FLAG_FIELDS.items()
        if getattr(args, flag, None) is not None
    }
    if getattr(args, "scorer_command", None):
        overrides["scorer_command"] = shlex.split(args.scorer_command)
    config.apply_overrides(overrides)
    config.check_paths()
    config.validate()
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2

    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    setup_logging(config, verbose=args.verbose)
    summary = RunSummary(config.output_dir, args.command, config.config_hash())
    effective = os.path.join(config.output_dir, "effective_config.json")
    write_json(effective, config.effective_dict())
    summary.record_event("command_start")
    logger.info(f"{args.command}: output dir {os.path.abspath(config.output_dir)}")

    try:
        COMMANDS[args.command](args, config, summary)
    except ConfigError as exc:
        logger.error(f"{args.command} failed: {exc}")
        summary.discard_outputs()
        summary.write_summary("failed")
        return 2
    except (ToolkitError, OSError, ValueError) as exc:
        logger.error(f"{args.command} failed: {exc}", exc_info=args.verbose)
        summary.discard_outputs()
        summary.write_summary("failed")
        return 1

    path = summary.write_summary()
    logger.info(f"{args.command} completed, summary at {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
