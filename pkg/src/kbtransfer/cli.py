"""Command-line interface for the pipeline stages and the experiment harness."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .augment import AugmentConfig, augment_training_set
from .corpus import (
    DatasetError,
    build_kb,
    load_dataset,
    load_kb,
    load_visual_features,
    save_dataset,
    save_kb,
)
from .experiment import StageError, load_config, run_experiment
from .metrics import accuracy, compute_retrieval_metrics
from .reasoning import (
    FusionLayout,
    ReasonerHyper,
    ReasonerParams,
    load_reasoner,
    predict,
    save_reasoner,
    train_reasoning,
)
from .retrieval import (
    FeatureExtractor,
    QueryText,
    RetrievalHyper,
    ScorerParams,
    load_params,
    rank,
    save_params,
    train_retrieval,
    transfer_finetune,
)
from .report import (
    emit_report_table,
    load_reports,
    render_report_figures,
    save_report,
    write_reports_csv,
)
from .stats import DEFAULT_STOPWORDS, corpus_stats, render_stats_figures, write_stats_csv
from .tagging import load_gazetteer, tag_dataset
from .translate import translator_from_spec

_STRATEGY_ALIASES = {"appositive": "appositive", "mask-out": "mask_out", "hyphen": "hyphen"}
_FIELD_ALIASES = {"q": "question", "a": "answers", "k": "knowledge"}


def _parse_fields(spec: str) -> tuple[str, ...]:
    return tuple(_FIELD_ALIASES.get(f.strip(), f.strip()) for f in spec.split(",") if f.strip())


def _retrieval_hyper(args) -> RetrievalHyper:
    return RetrievalHyper(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        negatives=args.negatives,
        seed=args.seed,
    )


def cmd_ingest(args) -> int:
    dataset = load_dataset(args.infile, args.n_answers)
    print(f"OK: {len(dataset)} samples, {args.n_answers} answers each")
    return 0


def cmd_tag(args) -> int:
    gaz = load_gazetteer(args.gazetteer, case_sensitive=not args.case_insensitive)
    dataset = load_dataset(args.infile, args.n_answers)
    tagged = tag_dataset(dataset, gaz, _STRATEGY_ALIASES[args.strategy])
    save_dataset(tagged, args.outfile)
    print(f"tagged {len(tagged)} samples -> {args.outfile}")
    return 0


def cmd_augment(args) -> int:
    dataset = load_dataset(args.infile, args.n_answers)
    translator = translator_from_spec(args.translator, args.pivot)
    config = AugmentConfig(alpha=args.alpha, fields=_parse_fields(args.fields))
    augmented = augment_training_set(dataset, translator, config)
    save_dataset(augmented, args.outfile)
    print(
        f"{len(dataset)} originals + {len(augmented) - len(dataset)} augmented -> {args.outfile}"
    )
    return 0


def cmd_build_kb(args) -> int:
    dataset = load_dataset(args.infile, args.n_answers)
    kb, mapping = build_kb(dataset)
    save_kb(kb, args.outfile, mapping=mapping)
    print(f"KB with {len(kb)} entries -> {args.outfile}")
    return 0


def _load_train_and_kb(args):
    train = load_dataset(args.train, args.n_answers)
    if args.kb:
        kb = load_kb(args.kb)
    else:
        kb, _ = build_kb(train)
    return train, kb


def cmd_train_retrieval(args) -> int:
    train, kb = _load_train_and_kb(args)
    result = train_retrieval(ScorerParams.zeros(), train, kb, _retrieval_hyper(args))
    save_params(result.params, args.outfile)
    trace = ", ".join(f"{x:.4f}" for x in result.loss_trace)
    print(f"loss trace: [{trace}]")
    print(f"params -> {args.outfile}")
    return 0


def cmd_transfer(args) -> int:
    theta_pre = load_params(args.init)
    train, kb = _load_train_and_kb(args)
    result = transfer_finetune(theta_pre, train, kb, _retrieval_hyper(args))
    save_params(result.params, args.outfile)
    trace = ", ".join(f"{x:.4f}" for x in result.loss_trace)
    print(f"loss trace: [{trace}]")
    print(f"params -> {args.outfile}")
    return 0


def _rank_all(theta, dataset, kb):
    extractor = FeatureExtractor(kb)
    return [
        rank(
            theta,
            QueryText(s.question, s.answers),
            kb,
            gt_kb_id=kb.lookup(s.knowledge),
            extractor=extractor,
            query_id=s.sample_id,
        )
        for s in dataset
    ]


def cmd_rank(args) -> int:
    theta = load_params(args.params)
    dataset = load_dataset(args.infile, args.n_answers)
    kb = load_kb(args.kb)
    rankings = _rank_all(theta, dataset, kb)
    with open(args.outfile, "w", encoding="utf-8") as fd:
        for r in rankings:
            fd.write(
                json.dumps(
                    {
                        "query_id": r.query_id,
                        "ranking": [[i, s] for i, s in r.ranking[: args.k]],
                        "gt_rank": r.gt_rank,
                    }
                )
                + "\n"
            )
    print(f"{len(rankings)} rankings (top-{args.k}) -> {args.outfile}")
    return 0


def cmd_eval_retrieval(args) -> int:
    theta = load_params(args.params)
    dataset = load_dataset(args.infile, args.n_answers)
    kb = load_kb(args.kb)
    rankings = [r for r in _rank_all(theta, dataset, kb) if r.gt_rank is not None]
    metrics = compute_retrieval_metrics(rankings)
    doc = metrics.to_dict()
    print(json.dumps(doc, indent=2))
    if args.outfile:
        Path(args.outfile).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return 0


def _reasoning_inputs(args, dataset):
    features = load_visual_features(args.features) if args.features else {}
    kb = load_kb(args.kb) if args.kb else None
    rankings = None
    if args.knowledge == "retrieved":
        if not args.retrieval_params or kb is None:
            raise DatasetError("knowledge=retrieved needs --retrieval-params and --kb")
        theta = load_params(args.retrieval_params)
        rankings = {r.query_id: r for r in _rank_all(theta, dataset, kb)}
    return features, kb, rankings


def cmd_train_reasoning(args) -> int:
    train = load_dataset(args.train, args.n_answers)
    features, kb, rankings = _reasoning_inputs(args, train)
    if features:
        vf = next(iter(features.values()))
        layout = FusionLayout(d_img=vf.image_vec.shape[0], d_face=vf.facial_vec.shape[0])
    else:
        layout = FusionLayout()
    hyper = ReasonerHyper(epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed)
    result = train_reasoning(
        ReasonerParams.zeros(layout), train, rankings, kb, features, hyper,
        k=args.k, knowledge_mode=args.knowledge, vision=args.vision,
    )
    save_reasoner(result.params, args.outfile)
    trace = ", ".join(f"{x:.4f}" for x in result.loss_trace)
    print(f"loss trace: [{trace}]")
    print(f"params -> {args.outfile}")
    return 0


def cmd_eval_reasoning(args) -> int:
    dataset = load_dataset(args.infile, args.n_answers)
    params = load_reasoner(args.params)
    features, kb, rankings = _reasoning_inputs(args, dataset)
    predictions = [
        predict(
            s,
            (rankings or {}).get(s.sample_id),
            kb,
            features.get(s.clip_id),
            params,
            k=args.k,
            knowledge_mode=args.knowledge,
            vision=args.vision,
        )
        for s in dataset
    ]
    print(f"accuracy: {accuracy(predictions):.3f} over {len(predictions)} samples")
    return 0


def cmd_stats(args) -> int:
    dataset = load_dataset(args.infile, args.n_answers)
    stopwords = DEFAULT_STOPWORDS
    if args.stopwords:
        stopwords = frozenset(Path(args.stopwords).read_text(encoding="utf-8").split())
    stats = corpus_stats(dataset, stopwords)
    paths = write_stats_csv(stats, args.out_dir)
    if not args.no_figures:
        paths += render_stats_figures(stats, args.out_dir)
    for name, value in stats.avg_lengths.items():
        print(f"avg {name}: {value:.2f}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    report = run_experiment(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    save_report(report, report_path)
    if report.retrieval is not None:
        (out_dir / "retrieval_table.txt").write_text(
            emit_report_table([report], "retrieval"), encoding="utf-8"
        )
    if report.reasoning_accuracy is not None:
        (out_dir / "reasoning_table.txt").write_text(
            emit_report_table([report], "reasoning"), encoding="utf-8"
        )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print(f"report -> {report_path}")
    return 0


def cmd_report(args) -> int:
    reports = load_reports(args.infiles)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = emit_report_table(reports, args.layout)
    (out_dir / f"{args.layout}_table.txt").write_text(table, encoding="utf-8")
    write_reports_csv(reports, args.layout, out_dir / f"{args.layout}_table.csv")
    if not args.no_figures:
        render_report_figures(reports, args.layout, out_dir)
    print(table, end="")
    print(f"outputs -> {out_dir}")
    return 0


def _add_common_dataset_args(p, infile=True):
    if infile:
        p.add_argument("--in", dest="infile", required=True, help="input dataset (JSONL)")
    p.add_argument("--n-answers", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbtransfer",
        description="Knowledge-based QA transfer-learning toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a JSONL dataset file")
    _add_common_dataset_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tag", help="apply entity tagging to a dataset")
    _add_common_dataset_args(p)
    p.add_argument("--strategy", choices=sorted(_STRATEGY_ALIASES), required=True)
    p.add_argument("--gazetteer", required=True, help="TSV: surface<TAB>type_label")
    p.add_argument("--case-insensitive", action="store_true")
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("augment", help="back-translation augmentation")
    _add_common_dataset_args(p)
    p.add_argument("--alpha", type=float, default=AugmentConfig().alpha)
    p.add_argument("--pivot", default="de")
    p.add_argument("--fields", default="q,a", help="comma list of q,a,k")
    p.add_argument(
        "--translator", default="identity", help="identity | mock:<tsv> | http:<url>"
    )
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("build-kb", help="build a knowledge base from a dataset")
    _add_common_dataset_args(p)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_build_kb)

    for name, func, needs_init in (
        ("train-retrieval", cmd_train_retrieval, False),
        ("transfer", cmd_transfer, True),
    ):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} scorer training")
        p.add_argument("--train", required=True)
        p.add_argument("--kb", help="KB JSON; defaults to one built from the training set")
        p.add_argument("--n-answers", type=int, default=4)
        if needs_init:
            p.add_argument("--init", required=True, help="pre-trained params file")
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--learning-rate", type=float, default=0.5)
        p.add_argument("--negatives", type=int, default=15)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", dest="outfile", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("rank", help="rank the KB for every query")
    _add_common_dataset_args(p)
    p.add_argument("--params", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--k", type=int, default=10, help="entries kept per query in the output")
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval-retrieval", help="recall@k and median rank on a dataset")
    _add_common_dataset_args(p)
    p.add_argument("--params", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--out", dest="outfile")
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("train-reasoning", help="train the answer-prediction layer")
    p.add_argument("--train", required=True)
    p.add_argument("--n-answers", type=int, default=4)
    p.add_argument("--knowledge", choices=("retrieved", "gt", "none"), default="retrieved")
    p.add_argument("--retrieval-params")
    p.add_argument("--kb")
    p.add_argument("--features")
    p.add_argument("--vision", choices=("none", "image", "facial", "caption"), default="none")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_train_reasoning)

    p = sub.add_parser("eval-reasoning", help="answer accuracy on a dataset")
    _add_common_dataset_args(p)
    p.add_argument("--params", required=True)
    p.add_argument("--knowledge", choices=("retrieved", "gt", "none"), default="retrieved")
    p.add_argument("--retrieval-params")
    p.add_argument("--kb")
    p.add_argument("--features")
    p.add_argument("--vision", choices=("none", "image", "facial", "caption"), default="none")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_eval_reasoning)

    p = sub.add_parser("stats", help="corpus statistics with CSV and figures")
    _add_common_dataset_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stopwords", help="whitespace-separated stopword file")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run", help="run a full experiment from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="tabulate saved experiment reports")
    p.add_argument("--in", dest="infiles", nargs="+", required=True, help="report JSON files")
    p.add_argument("--layout", choices=("retrieval", "reasoning"), required=True)
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface domain errors as messages, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
