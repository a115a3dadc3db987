"""Command-line interface.

Subcommands cover the whole workflow: synthesize a corpus, train, evaluate
NLI and entailment direction, grid-search hyperparameters, loop over seeds,
and emit length-ratio histograms. Every command is deterministic for fixed
flags and input files; exit codes are 0 on success, 1 on runtime failure, 2
on usage errors. Delimited outputs get a rendered figure next to them unless
--no-figure is passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import data as data_mod
from . import direction as direction_mod
from . import nli as nli_mod
from . import reports
from .encoder import DEFAULT_D_BASE, DEFAULT_DIM, DEFAULT_VOCAB_BUCKETS, new_bag_model, new_precomputed_model
from .formats import load_checkpoint, load_provider, save_checkpoint
from .training import (
    DEFAULT_GRID_BATCH_SIZES,
    DEFAULT_GRID_LEARNING_RATES,
    LOSS_VARIANTS,
    TrainConfig,
    grid_search,
    train,
)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _existing_file(parser: argparse.ArgumentParser, path: str | None, flag: str):
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        parser.error(f"{flag}: no such file: {path}")
    return p


def _add_train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--variant", choices=LOSS_VARIANTS, default="ent+con+rev",
                     help="which negative sets enter the loss denominator")
    sub.add_argument("--tau", type=float, default=0.05, help="softmax temperature")
    sub.add_argument("--batch-size", type=int, default=32)
    sub.add_argument("--lr", type=float, default=0.05,
                     help="peak learning rate; reached at the final warmup step")
    sub.add_argument("--epochs", type=int, default=3)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--eval-every", type=int, default=100,
                     help="steps between dev AUPRC evaluations")
    sub.add_argument("--d-base", type=int, default=DEFAULT_D_BASE,
                     help="base encoder output dimension (bag encoder)")
    sub.add_argument("--dim", type=int, default=DEFAULT_DIM,
                     help="Gaussian embedding dimension")
    sub.add_argument("--buckets", type=int, default=DEFAULT_VOCAB_BUCKETS,
                     help="hash buckets for the bag encoder")
    sub.add_argument("--vectors", help="GVEC file of precomputed base vectors; "
                                       "replaces the bag encoder when given")


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value file supplying flag defaults")
    sub.add_argument("--deterministic", action="store_true",
                     help="force single-threaded execution (the default mode already is)")
    sub.add_argument("--no-figure", action="store_true",
                     help="skip rendering figures next to delimited outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussent",
        description="Gaussian sentence embeddings: contrastive training and entailment evaluation.",
        allow_abbrev=False,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("train", help="train a model and write a checkpoint",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True, help="training NLI JSONL")
    sub.add_argument("--dev", help="development NLI JSONL for in-training AUPRC")
    sub.add_argument("--out", required=True, help="checkpoint path (GCKP)")
    sub.add_argument("--log", help="training log TSV (default: <out>.log.tsv)")
    _add_train_flags(sub)
    _add_common_flags(sub)

    sub = commands.add_parser("eval-nli", help="two-way NLI accuracy and AUPRC",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True, help="test NLI JSONL")
    sub.add_argument("--dev", required=True, help="dev NLI JSONL for the threshold search")
    sub.add_argument("--model", required=True, help="checkpoint path")
    sub.add_argument("--vectors", help="GVEC file (required for precomputed-vector checkpoints)")
    sub.add_argument("--per-example", help="write per-example scores TSV (for paired tests)")
    _add_common_flags(sub)

    sub = commands.add_parser("eval-direction", help="entailment-direction accuracy",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True, help="entailment-pair NLI JSONL")
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="checkpoint path")
    source.add_argument("--length-baseline", action="store_true",
                        help="score the longer-sentence baseline instead of a model")
    sub.add_argument("--vectors", help="GVEC file (required for precomputed-vector checkpoints)")
    _add_common_flags(sub)

    sub = commands.add_parser("grid-search", help="batch size x learning rate sweep",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True)
    sub.add_argument("--dev", required=True)
    sub.add_argument("--batch-sizes", type=_int_list, default=list(DEFAULT_GRID_BATCH_SIZES))
    sub.add_argument("--lrs", type=_float_list, default=list(DEFAULT_GRID_LEARNING_RATES))
    sub.add_argument("--plot", help="write a heatmap PNG of the score table")
    _add_train_flags(sub)
    _add_common_flags(sub)

    sub = commands.add_parser("multiseed", help="train and evaluate across seeds",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True)
    sub.add_argument("--dev", required=True)
    sub.add_argument("--test", required=True)
    sub.add_argument("--seeds", default="5",
                     help="seed count (expands to seed..seed+k-1) or explicit comma list")
    _add_train_flags(sub)
    _add_common_flags(sub)

    sub = commands.add_parser("synth", help="write a synthetic NLI corpus",
                              allow_abbrev=False)
    sub.add_argument("--out", required=True)
    sub.add_argument("--vocab", type=int, default=200)
    sub.add_argument("--count", type=int, default=1000, help="premise units (two examples each)")
    sub.add_argument("--min-len", type=int, default=12, help="minimum premise length")
    sub.add_argument("--max-len", type=int, default=24, help="maximum premise length")
    sub.add_argument("--max-hyp-len", type=int, default=5, help="hypothesis length cap")
    sub.add_argument("--seed", type=int, default=0)
    _add_common_flags(sub)

    sub = commands.add_parser("hist", help="length-ratio histogram TSV (and figure)",
                              allow_abbrev=False)
    sub.add_argument("--data", required=True)
    sub.add_argument("--out", required=True, help="histogram TSV path")
    sub.add_argument("--bin-width", type=float, default=direction_mod.DEFAULT_BIN_WIDTH)
    sub.add_argument("--label", choices=("all", "entailment"), default="all",
                     help="restrict to entailment pairs or keep every pair")
    _add_common_flags(sub)

    return parser


def _apply_config_file(parser, sub_actions, args, argv) -> None:
    """Overlay key=value file entries onto flags not given on the command line."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        parser.error(f"--config: no such file: {args.config}")
    converters = {}
    flags = {}
    for action in sub_actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                key = opt[2:]
                converters[key] = action
                flags[key] = opt
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                parser.error(f"{path}: line {lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in converters:
                parser.error(f"{path}: line {lineno}: unknown option {key!r}")
            given = any(a == flags[key] or a.startswith(flags[key] + "=") for a in argv)
            if given:
                continue
            action = converters[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                value = action.type(raw)
            else:
                value = raw
            if action.choices is not None and value not in action.choices:
                parser.error(f"{path}: line {lineno}: invalid value {raw!r} for {key}")
            setattr(args, action.dest, value)


def _table_size_hint(buckets: int, d_base: int) -> None:
    if buckets * d_base > 1 << 26:
        print(
            f"note: bag table has {buckets * d_base} parameters; "
            "consider fewer --buckets for desk-scale runs",
            file=sys.stderr,
        )


def _model_factory(parser, args):
    """Fresh-model builder for training commands; resolves --vectors once."""
    if args.vectors:
        provider = load_provider(_existing_file(parser, args.vectors, "--vectors"))
        return lambda cfg: new_precomputed_model(provider, dim=args.dim, seed=cfg.seed)
    _table_size_hint(args.buckets, args.d_base)
    return lambda cfg: new_bag_model(args.d_base, args.dim, args.buckets, cfg.seed)


def _load_model(parser, args):
    ckpt = _existing_file(parser, args.model, "--model")
    provider = None
    if args.vectors:
        provider = load_provider(_existing_file(parser, args.vectors, "--vectors"))
    return load_checkpoint(ckpt, provider)


def _train_config(args, **overrides) -> TrainConfig:
    cfg = TrainConfig(
        temperature=args.tau,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        loss_variant=args.variant,
        epochs=args.epochs,
        seed=args.seed,
        eval_every=args.eval_every,
    )
    return replace(cfg, **overrides) if overrides else cfg


def _load_triplets(parser, args):
    examples = data_mod.load_jsonl(_existing_file(parser, args.data, "--data"))
    result = data_mod.build_triplets(examples, return_stats=True)
    if not result.triplets:
        raise ValueError(f"{args.data}: no (entailment, contradiction) pairs to train on")
    return result.triplets


def _load_dev(parser, args):
    if not getattr(args, "dev", None):
        return []
    return data_mod.load_jsonl(_existing_file(parser, args.dev, "--dev"))


def _cmd_train(parser, args) -> int:
    triplets = _load_triplets(parser, args)
    dev = _load_dev(parser, args)
    config = _train_config(args)
    result = train(triplets, dev, config, _model_factory(parser, args)(config))
    out = Path(args.out)
    save_checkpoint(out, result.model)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.tsv")
    log_path.write_text(result.log.to_tsv(), encoding="utf-8")
    figure = None
    if not args.no_figure:
        figure = str(out.with_name(out.name + ".curves.png"))
        reports.save_training_curves(result.log, figure)
    print(
        json.dumps(
            {
                "checkpoint": str(out),
                "log": str(log_path),
                "figure": figure,
                "steps": len(result.log.records),
                "best_dev_auprc": result.best_dev_auprc,
                "best_step": result.best_step,
            },
            sort_keys=True,
            indent=2,
        )
    )
    return 0


def _cmd_eval_nli(parser, args) -> int:
    test = data_mod.load_jsonl(_existing_file(parser, args.data, "--data"))
    dev = data_mod.load_jsonl(_existing_file(parser, args.dev, "--dev"))
    model = _load_model(parser, args)
    report = nli_mod.evaluate(test, dev, model)
    if args.per_example:
        report.write_per_example_tsv(args.per_example)
    print(report.to_json())
    return 0


def _cmd_eval_direction(parser, args) -> int:
    pairs = data_mod.load_jsonl(_existing_file(parser, args.data, "--data"))
    pairs = [ex for ex in pairs if ex.label == "entailment"]
    if not pairs:
        raise ValueError(f"{args.data}: no entailment-labeled pairs")
    if args.length_baseline:
        report = direction_mod.length_baseline_report(pairs)
    else:
        report = direction_mod.direction_report(pairs, _load_model(parser, args))
    print(report.to_json())
    return 0


def _cmd_grid_search(parser, args) -> int:
    triplets = _load_triplets(parser, args)
    dev = _load_dev(parser, args)
    factory = _model_factory(parser, args)
    result = grid_search(triplets, dev, args.batch_sizes, args.lrs, _train_config(args), factory)
    sys.stdout.write(result.to_tsv())
    print(f"best\t{result.best.batch_size}\t{result.best.learning_rate:.10g}\t{result.best.dev_auprc:.6f}")
    if args.plot and not args.no_figure:
        reports.save_grid_heatmap(result, args.plot)
    return 0


def _parse_seeds(args) -> list[int]:
    text = str(args.seeds)
    if "," in text:
        return [int(s) for s in text.split(",") if s]
    count = int(text)
    if count < 1:
        raise ValueError("--seeds must name at least one seed")
    return [args.seed + i for i in range(count)]


def _cmd_multiseed(parser, args) -> int:
    triplets = _load_triplets(parser, args)
    dev = _load_dev(parser, args)
    test = data_mod.load_jsonl(_existing_file(parser, args.test, "--test"))
    direction_pairs = [ex for ex in test if ex.label == "entailment"]
    seeds = _parse_seeds(args)
    factory = _model_factory(parser, args)

    rows = []
    for seed in seeds:
        cfg = _train_config(args, seed=seed)
        result = train(triplets, dev, cfg, factory(cfg))
        report = nli_mod.evaluate(test, dev, result.model)
        dir_acc = (
            direction_mod.direction_accuracy(direction_pairs, result.model)
            if direction_pairs
            else float("nan")
        )
        rows.append((seed, report.accuracy, report.auprc, report.threshold, dir_acc))

    print("seed\taccuracy\tauprc\tthreshold\tdirection_accuracy")
    for row in rows:
        print(f"{row[0]}\t{row[1]:.6f}\t{row[2]:.6f}\t{row[3]:.3f}\t{row[4]:.6f}")
    k = len(rows)
    means = [sum(r[i] for r in rows) / k for i in range(1, 5)]
    print(f"mean\t{means[0]:.6f}\t{means[1]:.6f}\t{means[2]:.3f}\t{means[3]:.6f}")
    return 0


def _cmd_synth(parser, args) -> int:
    config = data_mod.SyntheticConfig(
        vocab_size=args.vocab,
        count=args.count,
        min_length=args.min_len,
        max_length=args.max_len,
        max_hypothesis_length=args.max_hyp_len,
        seed=args.seed,
    )
    examples = data_mod.generate_synthetic(config)
    data_mod.write_jsonl(examples, args.out)
    print(json.dumps({"examples": len(examples), "path": args.out}, sort_keys=True))
    return 0


def _cmd_hist(parser, args) -> int:
    examples = data_mod.load_jsonl(_existing_file(parser, args.data, "--data"))
    if args.label == "entailment":
        examples = [ex for ex in examples if ex.label == "entailment"]
    histogram = direction_mod.length_ratio_histogram(examples, args.bin_width)
    direction_mod.write_histogram_tsv(histogram, args.out)
    if not args.no_figure:
        out = Path(args.out)
        reports.save_histogram_figure(histogram, args.bin_width, out.with_suffix(".png"))
    return 0


_DISPATCH = {
    "train": _cmd_train,
    "eval-nli": _cmd_eval_nli,
    "eval-direction": _cmd_eval_direction,
    "grid-search": _cmd_grid_search,
    "multiseed": _cmd_multiseed,
    "synth": _cmd_synth,
    "hist": _cmd_hist,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    _apply_config_file(sub, sub._actions, args, argv)
    try:
        return _DISPATCH[args.command](sub, args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, KeyError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
