"""Command-line pipeline: synth -> label -> train -> eval / analyze.

Report-writing commands (eval, analyze) render a companion PNG figure next
to each CSV they emit. CALIBRANK_THREADS sets the training worker count.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import analysis, plotting, synthgen
from .core import CorpusError, Corpus, load_corpus, save_corpus
from .features import FeatureConfig, featurize_corpus
from .gbdt import ModelError, TrainParams, load_model, save_model
from .reranker import TrainSpec, evaluate, rerank, train_calibrator
from .squad import label_corpus

_TRAIN_KEYS = {
    "num_rounds",
    "learning_rate",
    "max_depth",
    "min_child_weight",
    "reg_lambda",
    "gamma",
    "subsample",
    "colsample",
}
_MIX_KEYS = {"mode", "name", "count", "count_each", "clean_train_fraction"}
_RUN_KEYS = {"seed", "k"}
_SECTIONS = {"data", "features", "train", "mix", "run"}


@dataclass
class RunConfig:
    clean_path: Path
    shift_paths: dict[str, Path]
    feature_config: FeatureConfig
    train_kwargs: dict
    mode: str
    mixed_name: str | None
    mixed_count: int
    count_each: int
    clean_train_fraction: float
    seed: int
    k: int


def _reject_unknown(raw: dict, allowed: set[str], where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"config {where}: unknown key(s) {sorted(unknown)}")


def load_run_config(path) -> RunConfig:
    """Parse and strictly validate a TOML run configuration."""
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    _reject_unknown(raw, _SECTIONS, "top level")

    data = raw.get("data", {})
    _reject_unknown(data, {"clean", "shifts"}, "[data]")
    if "clean" not in data:
        raise ValueError("config [data]: missing 'clean' dump path")
    clean_path = Path(data["clean"])
    shift_paths = {name: Path(p) for name, p in data.get("shifts", {}).items()}
    for name, p in [("clean", clean_path)] + list(shift_paths.items()):
        if not p.exists():
            raise ValueError(f"config [data]: dump for '{name}' not found: {p}")

    feature_config = FeatureConfig.from_dict(raw.get("features", {}))

    train_raw = raw.get("train", {})
    _reject_unknown(train_raw, _TRAIN_KEYS, "[train]")

    mix = raw.get("mix", {})
    _reject_unknown(mix, _MIX_KEYS, "[mix]")

    run = raw.get("run", {})
    _reject_unknown(run, _RUN_KEYS, "[run]")

    return RunConfig(
        clean_path=clean_path,
        shift_paths=shift_paths,
        feature_config=feature_config,
        train_kwargs=dict(train_raw),
        mode=mix.get("mode", "clean"),
        mixed_name=mix.get("name"),
        mixed_count=int(mix.get("count", 2000)),
        count_each=int(mix.get("count_each", 1000)),
        clean_train_fraction=float(mix.get("clean_train_fraction", 0.5)),
        seed=int(run.get("seed", 0)),
        k=int(run.get("k", 10)),
    )


def _n_jobs() -> int:
    value = os.environ.get("CALIBRANK_THREADS", "1")
    try:
        n = int(value)
    except ValueError as err:
        raise ValueError(f"CALIBRANK_THREADS must be an integer, got {value!r}") from err
    if n < 1:
        raise ValueError(f"CALIBRANK_THREADS must be >= 1, got {n}")
    return n


def _load_labeled(path, note_stream=sys.stderr) -> Corpus:
    corpus = load_corpus(path)
    if not corpus.is_labeled():
        print(f"note: labeling '{path}' in memory (dump carries no labels)", file=note_stream)
        label_corpus(corpus)
    return corpus


def _parse_named_paths(specs: list[str]) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for spec in specs:
        if "=" in spec:
            name, _, p = spec.partition("=")
        else:
            name, p = Path(spec).stem, spec
        if name in out:
            raise ValueError(f"duplicate testset name '{name}'")
        out[name] = Path(p)
    return out


def cmd_label(args) -> int:
    corpus = load_corpus(args.infile)
    label_corpus(corpus)
    save_corpus(corpus, args.outfile)
    print(f"labeled {len(corpus.examples)} examples -> {args.outfile}")
    return 0


def cmd_featurize(args) -> int:
    config = load_run_config(args.config).feature_config
    corpus = load_corpus(args.infile)
    matrix = featurize_corpus(corpus, config, with_labels=args.labels)
    matrix.to_csv(args.outfile)
    print(f"wrote {matrix.n_rows} x {len(matrix.layout)} feature matrix -> {args.outfile}")
    return 0


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    clean = _load_labeled(config.clean_path)
    shifts = [(name, _load_labeled(path)) for name, path in config.shift_paths.items()]
    if clean.meta.k != config.k:
        raise ValueError(f"config k={config.k} but clean dump has k={clean.meta.k}")
    spec = TrainSpec(
        clean_corpus=clean,
        shift_corpora=shifts,
        mode=config.mode,
        mixed_name=config.mixed_name,
        mixed_count=config.mixed_count,
        count_each=config.count_each,
        clean_train_fraction=config.clean_train_fraction,
        feature_config=config.feature_config,
        params=TrainParams(num_classes=config.k, seed=config.seed, **config.train_kwargs),
        seed=config.seed,
    )

    def log_round(round_idx: int, loss: float) -> None:
        print(f"[{round_idx + 1:4d}] train log-loss {loss:.6f}")

    model = train_calibrator(spec, round_callback=log_round, n_jobs=_n_jobs())
    save_model(model, args.outfile)
    print(f"model ({config.mode}) -> {args.outfile}")
    return 0


def cmd_rerank(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus(args.infile)
    choices = rerank(model, corpus)
    with open(args.outfile, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "choice"])
        for ex, choice in zip(corpus.examples, choices):
            writer.writerow([ex.id, choice])
    print(f"reranked {len(choices)} examples -> {args.outfile}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    train_ids = set(model.meta.get("train_ids") or [])
    held_out: dict[str, Corpus] = {}
    for name, path in _parse_named_paths(args.test).items():
        corpus = _load_labeled(path)
        kept = [ex for ex in corpus.examples if ex.id not in train_ids]
        dropped = len(corpus.examples) - len(kept)
        if dropped:
            print(
                f"note: '{name}': excluded {dropped} example(s) used in training",
                file=sys.stderr,
            )
        if not kept:
            raise ValueError(f"testset '{name}': no examples left after training-id exclusion")
        held_out[name] = Corpus(meta=corpus.meta, examples=kept)
    report = evaluate(model, held_out)
    report.to_csv(args.report)
    fig_path = plotting.save_figure(
        plotting.eval_report_figure(report), plotting.figure_path_for(args.report)
    )
    print(report.format_table())
    print(f"report -> {args.report}\nfigure -> {fig_path}")
    return 0


def cmd_analyze(args) -> int:
    reports = {}
    for name, path in _parse_named_paths(args.infile).items():
        corpus = _load_labeled(path)
        reports[name] = analysis.better_candidate_stats(corpus)
    analysis.emit_histogram_csv(reports, args.report)
    fig_path = plotting.save_figure(
        plotting.rank_histogram_figure(reports), plotting.figure_path_for(args.report)
    )
    print(analysis.format_stats_table(reports))
    print(f"histogram -> {args.report}\nfigure -> {fig_path}")
    return 0


def cmd_synth(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.profile == "standard":
        corpora = synthgen.standard_suite(args.seed)
    else:
        profile = synthgen.named_profile(args.profile, args.seed, n=args.n)
        corpora = {args.profile: synthgen.generate(profile)}
    for name, corpus in corpora.items():
        path = outdir / f"{name}.json"
        save_corpus(corpus, path)
        print(f"{name}: {len(corpus.examples)} examples -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibrank",
        description="Rerank top-k extractive QA candidates with a boosted-tree calibrator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label", help="label each example's best candidate by F1")
    p.add_argument("--in", dest="infile", required=True, help="input candidate dump (JSON)")
    p.add_argument("--out", dest="outfile", required=True, help="labeled dump to write")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("featurize", help="export the feature matrix of a dump as CSV")
    p.add_argument("--in", dest="infile", required=True, help="input candidate dump")
    p.add_argument("--config", required=True, help="TOML run config (features section used)")
    p.add_argument("--out", dest="outfile", required=True, help="CSV path to write")
    p.add_argument("--labels", action="store_true", help="include the label column")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the calibrator per a TOML run config")
    p.add_argument("--config", required=True, help="TOML run config")
    p.add_argument("--out", dest="outfile", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rerank", help="write per-example chosen candidate indices")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--in", dest="infile", required=True, help="candidate dump to rerank")
    p.add_argument("--out", dest="outfile", required=True, help="CSV of id,choice")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="baseline vs calibrated vs oracle report")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument(
        "--test",
        required=True,
        nargs="+",
        help="test dump(s), each as path or name=path",
    )
    p.add_argument("--report", required=True, help="CSV report path (figure written alongside)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="bad-case and best-rank distribution report")
    p.add_argument(
        "--in",
        dest="infile",
        required=True,
        nargs="+",
        help="labeled dump(s), each as path or name=path",
    )
    p.add_argument("--report", required=True, help="histogram CSV path (figure written alongside)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate synthetic candidate dumps")
    p.add_argument(
        "--profile",
        default="standard",
        choices=("standard",) + synthgen.PROFILE_NAMES,
        help="'standard' writes the full clean + shifted suite",
    )
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=None, help="override example count (single profiles)")
    p.add_argument("--out", dest="outdir", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ModelError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
