"""Command line front end.

Subcommands: synth, train-s2v, train-w2v, eval, variance, neighbors,
export. Every option can also come from a JSON config file given with
--config; explicit flags win over config values, which win over built-in
defaults. All randomness flows from the single --seed value.

Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .corpus import (
    generate_synthetic,
    load_alignments,
    load_features,
    save_alignments,
    save_features,
    segment,
    standardize_utterances,
    transcripts,
    DEFAULT_MAX_LEN,
)
from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    NumericError,
    SegvecError,
    StateError,
)
from .evaluation import (
    average_instances,
    evaluate,
    load_benchmark_dir,
    load_embeddings,
    load_instance_table,
    nearest_neighbors,
    save_embeddings,
    save_instance_table,
    variance_study,
)
from .speech import TrainConfig, embed_instances, load_model, save_model, train
from .word2vec import train_w2v


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        raise ConfigError(message)


def _load_config(path):
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path!r} does not exist")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path!r} must hold a JSON object")
    return data


class _Options:
    """Flag > config-file > built-in default resolution."""

    def __init__(self, args):
        self.args = args
        self.config = _load_config(args.config)

    def get(self, key, default=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.config:
            return self.config[key]
        return default

    def require(self, key, flag):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required option {flag} (or config key {key!r})")
        return value

    def input_path(self, key, flag):
        path = self.require(key, flag)
        if not os.path.exists(path):
            raise ConfigError(f"path {path!r} for {flag} does not exist")
        return path


def _format_table(headers, rows):
    widths = [
        max(len(h), max((len(r[i]) for r in rows), default=0))
        for i, h in enumerate(headers)
    ]
    out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(out)


def _read_token_file(path):
    token_lists = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            toks = line.split()
            if toks:
                token_lists.append(toks)
    return token_lists


def cmd_synth(args) -> int:
    opt = _Options(args)
    tokens_path = opt.input_path("tokens", "--tokens")
    features_out = opt.require("features_out", "--features-out")
    alignments_out = opt.require("alignments_out", "--alignments-out")
    utterances, alignments = generate_synthetic(
        _read_token_file(tokens_path),
        feature_dim=int(opt.get("feature_dim", 13)),
        len_range=(int(opt.get("min_len", 4)), int(opt.get("max_len", 9))),
        noise_sigma=float(opt.get("sigma", 0.1)),
        seed=int(opt.get("seed", 0)),
    )
    save_features(utterances, features_out)
    save_alignments(alignments, alignments_out)
    print(f"wrote {len(utterances)} utterances ({len(alignments)} segments) "
          f"to {features_out} / {alignments_out}")
    return 0


def _load_corpus(opt, max_len):
    utterances = load_features(opt.input_path("features", "--features"))
    alignments = load_alignments(opt.input_path("alignments", "--alignments"))
    if opt.get("standardize", False):
        utterances = standardize_utterances(utterances)
    return segment(utterances, alignments, max_len)


def cmd_train_s2v(args) -> int:
    opt = _Options(args)
    out_dir = opt.require("out_dir", "--out-dir")
    clip = opt.get("clip")
    config = TrainConfig(
        mode=opt.get("mode", "skipgram"),
        embed_dim=int(opt.get("dim", 50)),
        window=int(opt.get("window", 3)),
        learning_rate=float(opt.get("lr", 1e-3)),
        epochs=int(opt.get("epochs", 500)),
        batch_size=int(opt.get("batch_size", 1)),
        seed=int(opt.get("seed", 0)),
        max_len=int(opt.get("max_frames", DEFAULT_MAX_LEN)),
        clip_norm=None if clip is None else float(clip),
    ).validate()
    corpus = _load_corpus(opt, config.max_len)
    model, trace = train(corpus, config)

    os.makedirs(out_dir, exist_ok=True)
    checkpoint = os.path.join(out_dir, "checkpoint.txt")
    instances = os.path.join(out_dir, "instances.txt")
    embeddings = os.path.join(out_dir, "embeddings.txt")
    loss_path = os.path.join(out_dir, "loss.txt")

    save_model(model, checkpoint)
    table = embed_instances(model, corpus)
    save_instance_table(table, instances, dim=config.embed_dim)
    save_embeddings(average_instances(table), embeddings)
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write("epoch\tmean_frame_loss\n")
        for epoch, value in enumerate(trace, 1):
            fh.write(f"{epoch}\t{value!r}\n")

    print(f"trained {config.mode} model: dim={config.embed_dim} window={config.window} "
          f"lr={config.learning_rate} epochs={config.epochs} seed={config.seed}")
    if trace:
        print(f"mean frame loss: epoch 1 = {trace[0]:.6g}, "
              f"epoch {len(trace)} = {trace[-1]:.6g}")
    print(f"wrote {checkpoint}, {instances}, {embeddings}, {loss_path}")
    return 0


def cmd_train_w2v(args) -> int:
    opt = _Options(args)
    out_path = opt.require("out", "--out")
    alignments = load_alignments(opt.input_path("alignments", "--alignments"))
    embeddings = train_w2v(
        transcripts(alignments),
        mode=opt.get("mode", "skipgram"),
        embed_dim=int(opt.get("dim", 50)),
        window=int(opt.get("window", 3)),
        negatives=int(opt.get("negatives", 5)),
        epochs=int(opt.get("epochs", 5)),
        learning_rate=float(opt.get("lr", 0.025)),
        seed=int(opt.get("seed", 0)),
    )
    save_embeddings(embeddings, out_path)
    print(f"wrote {len(embeddings)} word vectors to {out_path}")
    return 0


def _parse_model_specs(specs):
    """Each spec is 'path' or 'label=path'; the default label is the stem."""
    out = []
    for spec in specs:
        if "=" in spec:
            label, path = spec.split("=", 1)
        else:
            path = spec
            label = os.path.splitext(os.path.basename(path))[0]
        if not os.path.exists(path):
            raise ConfigError(f"embedding file {path!r} does not exist")
        out.append((label, path))
    return out


def cmd_eval(args) -> int:
    opt = _Options(args)
    specs = args.embeddings or opt.config.get("embeddings")
    if not specs:
        raise ConfigError("missing required option --embeddings")
    if isinstance(specs, str):
        specs = [specs]
    models = [(label, load_embeddings(path)) for label, path in _parse_model_specs(specs)]
    bench_dir = opt.input_path("benchmarks", "--benchmarks")
    benchmarks = load_benchmark_dir(bench_dir)
    if not benchmarks:
        print(f"warning: no benchmark files found in {bench_dir!r}", file=sys.stderr)
        return 0

    results = {}
    for label, embeddings in models:
        for bench in benchmarks:
            try:
                res = evaluate(embeddings, bench)
                results[(bench.name, label)] = (f"{res.rho:.4f}", res.pairs_used, res.pairs_skipped)
            except CoverageError as exc:
                print(f"warning: {exc}", file=sys.stderr)
                results[(bench.name, label)] = ("n/a", exc.pairs_used, exc.pairs_skipped)

    if opt.get("tsv", False):
        print("benchmark\tmodel\trho\tused\tskipped")
        for bench in benchmarks:
            for label, _ in models:
                rho, used, skipped = results[(bench.name, label)]
                print(f"{bench.name}\t{label}\t{rho}\t{used}\t{skipped}")
    elif len(models) == 1:
        label = models[0][0]
        rows = []
        for bench in benchmarks:
            rho, used, skipped = results[(bench.name, label)]
            rows.append([bench.name, rho, str(used), str(skipped)])
        print(_format_table(["benchmark", "rho", "used", "skipped"], rows))
    else:
        headers = ["benchmark"] + [label for label, _ in models]
        rows = []
        for bench in benchmarks:
            rows.append([bench.name] + [results[(bench.name, label)][0] for label, _ in models])
        print(_format_table(headers, rows))
    return 0


def cmd_variance(args) -> int:
    opt = _Options(args)
    table = load_instance_table(opt.input_path("instances", "--instances"))
    report = variance_study(table)
    rows = []
    for bucket in report.buckets:
        mean = "-" if bucket.mean_variation is None else f"{bucket.mean_variation:.6f}"
        rows.append([bucket.label, str(bucket.word_count), mean])
    print(_format_table(["instances", "words", "mean_variation"], rows))
    return 0


def cmd_neighbors(args) -> int:
    opt = _Options(args)
    embeddings = load_embeddings(opt.input_path("embeddings", "--embeddings"))
    word = opt.require("word", "--word")
    top = int(opt.get("top", 10))
    rows = [
        [str(rank), other, f"{sim:.4f}"]
        for rank, (other, sim) in enumerate(nearest_neighbors(embeddings, word, top), 1)
    ]
    print(_format_table(["rank", "word", "cosine"], rows))
    return 0


def cmd_export(args) -> int:
    opt = _Options(args)
    model = load_model(opt.input_path("checkpoint", "--checkpoint"))
    out_dir = opt.require("out_dir", "--out-dir")
    corpus = _load_corpus(opt, model.config.max_len)
    table = embed_instances(model, corpus)
    os.makedirs(out_dir, exist_ok=True)
    instances = os.path.join(out_dir, "instances.txt")
    embeddings = os.path.join(out_dir, "embeddings.txt")
    save_instance_table(table, instances, dim=model.config.embed_dim)
    save_embeddings(average_instances(table), embeddings)
    print(f"wrote {instances} and {embeddings}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="segvec",
        description="Learn and evaluate semantic embeddings of spoken-word segments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, parents=[])
        p.add_argument("--config", help="JSON config file; explicit flags override it")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth,
            "Generate a synthetic feature/alignment corpus from a token file "
            "(one utterance per line).")
    p.add_argument("--tokens", help="token file, one utterance per line")
    p.add_argument("--features-out", dest="features_out", help="output feature file")
    p.add_argument("--alignments-out", dest="alignments_out", help="output alignment file")
    p.add_argument("--feature-dim", dest="feature_dim", type=int,
                   help="frame vector size (default: 13)")
    p.add_argument("--min-len", dest="min_len", type=int,
                   help="minimum segment length in frames (default: 4)")
    p.add_argument("--max-len", dest="max_len", type=int,
                   help="maximum segment length in frames (default: 9)")
    p.add_argument("--sigma", type=float, help="per-frame noise stddev (default: 0.1)")
    p.add_argument("--seed", type=int, help="random seed (default: 0)")

    p = add("train-s2v", cmd_train_s2v,
            "Train the speech-side encoder-decoder on feature segments and "
            "write checkpoint, instance embeddings, averaged embeddings, and "
            "a per-epoch loss table.")
    p.add_argument("--features", help="input feature file")
    p.add_argument("--alignments", help="input alignment file")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.add_argument("--mode", choices=["skipgram", "cbow"],
                   help="training objective (default: skipgram)")
    p.add_argument("--dim", type=int,
                   help="embedding size, must be even; typical sizes 10, 50, 100, 200 "
                        "(default: 50)")
    p.add_argument("--window", type=int, help="context window k (default: 3)")
    p.add_argument("--lr", type=float, help="SGD learning rate, no momentum (default: 1e-3)")
    p.add_argument("--epochs", type=int, help="training epochs (default: 500)")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="examples per SGD update (default: 1)")
    p.add_argument("--seed", type=int, help="random seed (default: 0)")
    p.add_argument("--max-frames", dest="max_frames", type=int,
                   help=f"truncate segments to this many frames (default: {DEFAULT_MAX_LEN})")
    p.add_argument("--clip", type=float,
                   help="global gradient-norm clip threshold (default: off)")
    p.add_argument("--standardize", action="store_true", default=None,
                   help="per-dimension mean/variance normalization over the corpus "
                        "(default: off)")

    p = add("train-w2v", cmd_train_w2v,
            "Train the text baseline with negative sampling on the corpus "
            "transcripts and write an embedding file.")
    p.add_argument("--alignments", help="input alignment file (supplies the transcripts)")
    p.add_argument("--out", help="output embedding file")
    p.add_argument("--mode", choices=["skipgram", "cbow"],
                   help="training objective (default: skipgram)")
    p.add_argument("--dim", type=int, help="embedding size (default: 50)")
    p.add_argument("--window", type=int, help="context window k (default: 3)")
    p.add_argument("--negatives", type=int, help="negative samples per pair (default: 5)")
    p.add_argument("--epochs", type=int, help="training epochs (default: 5)")
    p.add_argument("--lr", type=float, help="SGD learning rate (default: 0.025)")
    p.add_argument("--seed", type=int, help="random seed (default: 0)")

    p = add("eval", cmd_eval,
            "Score embedding files against every benchmark file in a directory "
            "(Spearman rho over cosine similarities; uncovered pairs are "
            "skipped and counted).")
    p.add_argument("--embeddings", action="append",
                   help="embedding file, optionally 'label=path'; repeat to compare "
                        "several models side by side")
    p.add_argument("--benchmarks", help="directory of benchmark files (name = filename stem)")
    p.add_argument("--tsv", action="store_true", default=None,
                   help="machine-readable tab-separated output")

    p = add("variance", cmd_variance,
            "Per-frequency-bucket mean variation of instance embeddings "
            "(buckets 5-99, 100-999, 1000-9999, >=10000).")
    p.add_argument("--instances", help="instance embedding file (repeated word keys)")

    p = add("neighbors", cmd_neighbors,
            "Nearest neighbors of a word by cosine similarity.")
    p.add_argument("--embeddings", help="embedding file")
    p.add_argument("--word", help="query word")
    p.add_argument("--top", type=int, help="number of neighbors (default: 10)")

    p = add("export", cmd_export,
            "Recompute instance and averaged embeddings for a corpus from a "
            "saved checkpoint.")
    p.add_argument("--checkpoint", help="model checkpoint file")
    p.add_argument("--features", help="input feature file")
    p.add_argument("--alignments", help="input alignment file")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.add_argument("--standardize", action="store_true", default=None,
                   help="apply the same corpus normalization used at training time")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        return args.func(args)
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except (ConfigError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SegvecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
