"""Command-line front-end (`cm`) driving the full workflow without the
service: import, dedup, frequencies, co-occurrence, LDA, topic queries,
classification and interchange, emitting files.

A `cm.toml` config file (cwd or --config) may preset any flag; explicit
flags win. Randomized commands echo their seed to stderr so runs can be
reproduced.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import classify, cooccurrence, interchange, pipeline, topics
from .corpus import (ImportMapping, deduplicate, import_csv,
                     import_text_files, read_gazetteer, tag_entities)
from .interchange import (corpus_csv_mapping, export_corpus_csv,
                          export_entities_json, load_entities_json,
                          read_labels_csv)
from .pipeline import AnalysisParams, build_dtm, build_vocabulary
from .topics import LdaConfig, fit_lda_restarts, load_model, save_model

DEFAULT_SEED = 13


def _echo_seed(seed: int):
    print(f"seed: {seed}", file=sys.stderr)


def _entities_sidecar(corpus_path) -> Path:
    p = Path(corpus_path)
    return p.with_name(p.stem + ".entities.json")


def load_corpus_file(path):
    docs, _ = import_csv(path, corpus_csv_mapping(path))
    sidecar = _entities_sidecar(path)
    if sidecar.exists():
        docs = load_entities_json(docs, sidecar)
    return docs


def add_params_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("preprocessing")
    g.add_argument("--params", metavar="JSON",
                   help="analysis params JSON file; flags override")
    g.add_argument("--ngram", type=int, choices=(1, 2), default=1)
    g.add_argument("--min-char", type=int, default=2)
    g.add_argument("--max-char", type=int, default=50)
    g.add_argument("--no-lowercase", action="store_true")
    g.add_argument("--stopwords", choices=("en", "de", "none"), default="none")
    g.add_argument("--remove-numbers", action="store_true")
    g.add_argument("--blacklist", metavar="FILE")
    g.add_argument("--whitelist", metavar="FILE")
    g.add_argument("--prune-min-df", type=float, default=0.0)
    g.add_argument("--prune-max-df", type=float, default=1.0)
    g.add_argument("--consolidate-entities", action="store_true")
    g.add_argument("--blacklist-entities", metavar="KINDS",
                   help="comma-separated entity kinds whose surfaces are "
                        "blacklisted (needs an entities sidecar)")


def params_from_args(args, corpus=None) -> AnalysisParams:
    if args.params:
        base = AnalysisParams.from_json(Path(args.params).read_text(encoding="utf-8"))
    else:
        base = AnalysisParams()
    params = replace(
        base,
        ngram=args.ngram,
        min_char=args.min_char,
        max_char=args.max_char,
        lowercase=not args.no_lowercase,
        remove_stopwords=args.stopwords != "none",
        stopword_language=args.stopwords if args.stopwords != "none" else "en",
        remove_numbers=args.remove_numbers,
        prune_min_df=args.prune_min_df,
        prune_max_df=args.prune_max_df,
        consolidate_entities=args.consolidate_entities,
    )
    blacklist = set(params.blacklist)
    if args.blacklist:
        blacklist |= pipeline.read_wordlist(args.blacklist)
    if args.blacklist_entities:
        if corpus is None:
            raise SystemExit("--blacklist-entities needs a corpus")
        kinds = {k.strip().upper() for k in args.blacklist_entities.split(",")}
        blacklist |= pipeline.blacklist_from_entities(corpus, kinds)
    if args.whitelist:
        params = replace(params, whitelist=pipeline.read_wordlist(args.whitelist))
    return replace(params, blacklist=frozenset(blacklist))


def corpus_dtm(args):
    corpus = load_corpus_file(args.corpus)
    params = params_from_args(args, corpus)
    vocab = build_vocabulary(corpus, params)
    return corpus, build_dtm(corpus, vocab)


def _write_or_print(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


# --------------------------------------------------------------------------
# subcommand handlers

def cmd_import(args):
    if args.format == "text":
        paths = sorted(Path(args.infile).glob("*.txt")) \
            if Path(args.infile).is_dir() else [Path(args.infile)]
        docs, report = import_text_files(paths)
    else:
        mapping_cols = {}
        for spec in args.map or []:
            if "=" not in spec:
                raise SystemExit(f"--map expects COL=TARGET, got {spec!r}")
            col, target = spec.split("=", 1)
            mapping_cols[col] = target
        delimiter = "\t" if args.format == "tsv" else ","
        mapping = ImportMapping(columns=mapping_cols,
                                date_format=args.date_format,
                                delimiter=delimiter)
        docs, report = import_csv(args.infile, mapping)
    if args.gazetteer:
        gaz = read_gazetteer(args.gazetteer)
        docs = [tag_entities(d, gaz) for d in docs]
    export_corpus_csv(docs, args.out)
    if any(d.entity_tags for d in docs):
        export_entities_json(docs, _entities_sidecar(args.out))
    print(report.to_json() if args.json else report.to_text())
    return 0


def cmd_dedup(args):
    corpus = load_corpus_file(args.corpus)
    groups = deduplicate(corpus, args.threshold)
    if args.json:
        payload = [{"representative": g.representative,
                    "members": list(g.members),
                    "similarity": g.similarity} for g in groups]
        _write_or_print(json.dumps(payload, indent=2), args.out)
    else:
        lines = ["representative,member,similarity"]
        for g in groups:
            for m in g.members:
                lines.append(f"{g.representative},{m},{g.similarity[m]:.6f}")
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_freq(args):
    _, dtm = corpus_dtm(args)
    rows = cooccurrence.term_frequencies(dtm, args.top_n)
    if args.json:
        payload = [{"term": t, "count": c, "df": d} for t, c, d in rows]
        _write_or_print(json.dumps(payload, indent=2), args.out)
    else:
        lines = ["term,count,df"] + [f"{t},{c},{d}" for t, c, d in rows]
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_cooc(args):
    corpus = load_corpus_file(args.corpus)
    params = params_from_args(args, corpus)
    vocab = build_vocabulary(corpus, params)
    result = cooccurrence.cooccurrences(
        corpus, vocab, args.unit.upper(), args.measure.upper(),
        min_pair_count=args.min_count, top_n=args.top_n)
    interchange.export_cooc_csv(result, args.out)
    if args.json:
        payload = [{"a": p.a, "b": p.b, "n_a": p.counts.n_a,
                    "n_b": p.counts.n_b, "n_ab": p.counts.n_ab,
                    "n": p.counts.n, "score": p.score} for p in result.pairs]
        print(json.dumps(payload, indent=2))
    return 0


def cmd_lda(args):
    _echo_seed(args.seed)
    corpus = load_corpus_file(args.corpus)
    params = params_from_args(args, corpus)
    vocab = build_vocabulary(corpus, params)
    dtm = build_dtm(corpus, vocab)
    config = LdaConfig(k=args.k, alpha=args.alpha, beta=args.beta,
                       iterations=args.iterations, burn_in=args.burn_in,
                       seed=args.seed)
    step = max(1, config.iterations // 10)

    def progress(sweep, total, ll):
        if sweep % step == 0 or sweep == total:
            print(f"sweep {sweep}/{total}  log-likelihood {ll:.1f}",
                  file=sys.stderr)

    model = fit_lda_restarts(dtm, config, restarts=args.restarts,
                             progress=progress)
    save_model(model, args.out_dir)
    print(f"model written to {args.out_dir} (K={config.k}, V={len(vocab)}, "
          f"D={len(dtm)}, chain seed {model.config.seed})", file=sys.stderr)
    return 0


def _load_model_with_corpus(args):
    model = load_model(args.model)
    if getattr(args, "corpus", None):
        corpus = load_corpus_file(args.corpus)
        model.dtm = build_dtm(corpus, model.vocab)
        return model, corpus
    return model, None


def cmd_topics_show(args):
    model, _ = _load_model_with_corpus(args)
    ks = [args.topic] if args.topic is not None else range(model.config.k)
    out = []
    for k in ks:
        words = topics.top_words(model, k, args.top_n, args.lam)
        active = model.active_label(k)
        out.append({"topic": k, "label": active.label if active else None,
                    "words": [{"term": w, "relevance": r} for w, r in words]})
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        for entry in out:
            label = f" [{entry['label']}]" if entry["label"] else ""
            print(f"topic {entry['topic']}{label}: "
                  + " ".join(w["term"] for w in entry["words"]))
    return 0


def cmd_topics_label(args):
    model = load_model(args.model)
    record = topics.label_topic(model, args.topic, args.label,
                                author=args.author)
    save_model(model, args.model)
    print(f"topic {args.topic} labelled {record.label!r}")
    return 0


def cmd_topics_filter(args):
    model = load_model(args.model)
    rows = topics.filter_by_topic(model, args.topic, args.min_share)
    if args.json:
        _write_or_print(json.dumps(
            [{"doc_id": d, "share": s} for d, s in rows], indent=2), args.out)
    else:
        lines = ["doc_id,share"] + [f"{d},{s:.9g}" for d, s in rows]
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_topics_by_meta(args):
    model, corpus = _load_model_with_corpus(args)
    contrast = topics.topic_by_metadata(model, corpus, args.field)
    if args.json:
        payload = {g: {"size": contrast.sizes[g],
                       "mean_theta": [float(x) for x in contrast.groups[g]]}
                   for g in contrast.groups}
        _write_or_print(json.dumps(payload, indent=2), args.out)
    else:
        k = model.config.k
        lines = ["group,size," + ",".join(f"topic_{i}" for i in range(k))]
        for g, mean in contrast.groups.items():
            lines.append(f"{g},{contrast.sizes[g]},"
                         + ",".join(f"{x:.9g}" for x in mean))
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_topics_coherence(args):
    model, corpus = _load_model_with_corpus(args)
    if model.dtm is None:
        raise SystemExit("coherence needs --corpus to rebuild the matrix")
    result = topics.coherence_umass(model, model.dtm, args.m)
    if args.json:
        payload = [{"topic": k, "coherence": s, "top_words": result.top_words[k]}
                   for k, s in enumerate(result.scores)]
        print(json.dumps(payload, indent=2))
    else:
        for k, s in enumerate(result.scores):
            print(f"topic {k}: {s:.6f}")
        if result.skipped:
            print(f"skipped zero-df terms: {result.skipped}", file=sys.stderr)
    return 0


def cmd_classify_train(args):
    _, dtm = corpus_dtm(args)
    labeled = read_labels_csv(args.labels)
    model = classify.train(dtm, labeled)
    payload = {
        "codes": list(model.codebook.ids),
        "log_prior": [float(x) for x in model.log_prior],
        "log_likelihood": [[float(x) for x in row]
                           for row in model.log_likelihood],
        "vocabulary": list(dtm.vocab.terms),
        "analysis_params": json.loads(dtm.vocab.params.to_json()),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n",
                              encoding="utf-8")
    print(f"classifier written to {args.out} "
          f"({len(model.codebook)} codes, V={len(dtm.vocab)})", file=sys.stderr)
    return 0


def cmd_classify_eval(args):
    _echo_seed(args.seed)
    _, dtm = corpus_dtm(args)
    labeled = read_labels_csv(args.labels)
    report = classify.evaluate(dtm, labeled, folds=args.folds, seed=args.seed)
    if args.json:
        _write_or_print(report.to_json(), args.out)
    else:
        _write_or_print(report.to_csv(), args.out)
    return 0


def cmd_classify_simulate(args):
    _echo_seed(args.seed)
    _, dtm = corpus_dtm(args)
    gold = read_labels_csv(args.gold)
    sim = classify.simulate_active_learning(
        dtm, gold, args.strategy.upper(), budget=args.budget, seed=args.seed)
    if args.json:
        payload = {"strategy": sim.strategy, "seed": sim.seed,
                   "curve": [{"labels": n, "accuracy": a} for n, a in sim.curve]}
        _write_or_print(json.dumps(payload, indent=2), args.out)
    else:
        lines = ["labels,accuracy"] + [f"{n},{a:.6f}" for n, a in sim.curve]
        _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_export_corpus(args):
    corpus = load_corpus_file(args.corpus)
    export_corpus_csv(corpus, args.out)
    return 0


def cmd_export_qdpx(args):
    _echo_seed(args.seed)
    corpus = load_corpus_file(args.corpus)
    labeled = read_labels_csv(args.labels) if args.labels else {}
    code_ids = sorted(set(labeled.values()))
    codebook = classify.Codebook.from_ids(code_ids or ["uncoded"])
    session = classify.CodingSession(codebook=codebook, strategy="ENTROPY",
                                     seed=args.seed, queue=[])
    for doc_id, code in labeled.items():
        session.labeled[doc_id] = classify.LabelRecord(
            code=code, author="", timestamp="1970-01-01T00:00:00+00:00")
    project = interchange.qdpx_from_session(args.name, corpus, session,
                                            seed=args.seed)
    interchange.export_qdpx(project, args.out)
    print(f"QDPX archive written to {args.out}", file=sys.stderr)
    return 0


def cmd_export_theta(args):
    model = load_model(args.model)
    interchange.export_theta_csv(model, args.out)
    return 0


def cmd_export_phi(args):
    model = load_model(args.model)
    interchange.export_phi_csv(model, args.out)
    return 0


def cmd_serve(args):
    from .server import serve
    serve(port=args.port, data_dir=args.data_dir, max_workers=args.workers)
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="cm", description="content-analysis workbench")
    parser.add_argument("--config", metavar="FILE",
                        help="TOML config presetting flags (default: ./cm.toml)")
    sub = parser.add_subparsers(dest="command", required=True)
    all_parsers: list[argparse.ArgumentParser] = []

    def register(p, fn):
        p.set_defaults(fn=fn)
        all_parsers.append(p)
        return p

    p = register(sub.add_parser("import", help="import CSV/TSV/text into a corpus"),
                 cmd_import)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=("csv", "tsv", "text"), default="csv",
                   help="text mode reads --in as a .txt file or directory")
    p.add_argument("--map", action="append", metavar="COL=TARGET",
                   help="column mapping; targets: id,title,body,date,metadata:<f>")
    p.add_argument("--date-format", default="%Y-%m-%d")
    p.add_argument("--gazetteer", metavar="FILE",
                   help="surface<TAB>kind entity list applied at import")
    p.add_argument("--out", required=True, help="normalized corpus CSV")
    p.add_argument("--json", action="store_true")

    p = register(sub.add_parser("dedup", help="find near-duplicate documents"),
                 cmd_dedup)
    p.add_argument("--corpus", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = register(sub.add_parser("freq", help="term frequency table"), cmd_freq)
    p.add_argument("--corpus", required=True)
    p.add_argument("--top-n", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    add_params_flags(p)

    p = register(sub.add_parser("cooc", help="scored term co-occurrence"),
                 cmd_cooc)
    p.add_argument("--corpus", required=True)
    p.add_argument("--measure", choices=("dice", "pmi", "loglik"),
                   default="dice")
    p.add_argument("--unit", choices=("sentence", "document"),
                   default="document")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    add_params_flags(p)

    p = register(sub.add_parser("lda", help="fit an LDA topic model"), cmd_lda)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None,
                   help="document-topic prior (default 50/K)")
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--restarts", type=int, default=1,
                   help="independent chains; the best final likelihood wins")
    p.add_argument("--out-dir", required=True)
    add_params_flags(p)

    topics_p = sub.add_parser("topics", help="query a fitted model")
    tsub = topics_p.add_subparsers(dest="subcommand", required=True)

    p = register(tsub.add_parser("show", help="top words per topic"),
                 cmd_topics_show)
    p.add_argument("--model", required=True)
    p.add_argument("--topic", type=int, default=None)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--json", action="store_true")

    p = register(tsub.add_parser("label", help="attach a topic label"),
                 cmd_topics_label)
    p.add_argument("--model", required=True)
    p.add_argument("--topic", type=int, required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--author", default="")

    p = register(tsub.add_parser("filter", help="documents by topic share"),
                 cmd_topics_filter)
    p.add_argument("--model", required=True)
    p.add_argument("--topic", type=int, required=True)
    p.add_argument("--min-share", type=float, default=0.0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = register(tsub.add_parser("by-meta", help="mean topic shares per metadata group"),
                 cmd_topics_by_meta)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")

    p = register(tsub.add_parser("coherence", help="UMass topic coherence"),
                 cmd_topics_coherence)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("-M", dest="m", type=int, default=10)
    p.add_argument("--json", action="store_true")

    classify_p = sub.add_parser("classify", help="supervised coding tools")
    csub = classify_p.add_subparsers(dest="subcommand", required=True)

    p = register(csub.add_parser("train", help="train the Naive Bayes coder"),
                 cmd_classify_train)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", required=True, help="doc_id,code_id CSV")
    p.add_argument("--out", required=True)
    add_params_flags(p)

    p = register(csub.add_parser("eval", help="cross-validated P/R/F1"),
                 cmd_classify_eval)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    add_params_flags(p)

    p = register(csub.add_parser("simulate", help="active-learning replay"),
                 cmd_classify_simulate)
    p.add_argument("--corpus", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--strategy",
                   choices=("entropy", "margin", "least_confidence", "random"),
                   default="entropy")
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    add_params_flags(p)

    export_p = sub.add_parser("export", help="interchange exports")
    esub = export_p.add_subparsers(dest="subcommand", required=True)

    p = register(esub.add_parser("corpus", help="normalized corpus CSV"),
                 cmd_export_corpus)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = register(esub.add_parser("qdpx", help="REFI-QDA subset archive"),
                 cmd_export_qdpx)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", help="doc_id,code_id CSV of codings")
    p.add_argument("--name", default="cminer project")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)

    p = register(esub.add_parser("theta", help="document-topic CSV"),
                 cmd_export_theta)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = register(esub.add_parser("phi", help="topic-word CSV"), cmd_export_phi)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = register(sub.add_parser("serve", help="run the HTTP service"),
                 cmd_serve)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--workers", type=int, default=2)

    return parser, all_parsers


def _load_config(argv) -> dict:
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = Path(argv[i + 1])
        elif arg.startswith("--config="):
            path = Path(arg.split("=", 1)[1])
    if path is None:
        default = Path("cm.toml")
        path = default if default.exists() else None
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat = data.get("cm", data)
    return {k.replace("-", "_"): v for k, v in flat.items()}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, all_parsers = build_parser()
    config = _load_config(argv)
    if config:
        for p in all_parsers:
            known = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in config.items() if k in known})
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
