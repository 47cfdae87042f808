"""Command-line entry point.

Subcommands:

  preprocess       parse a dataset directory into a binary cache
  train            optimize a model, logging validation metrics
  eval             filtered-ranking metrics of a checkpoint on a split
  verify-patterns  run the relation-pattern checks, nonzero exit on failure
  inspect          dump a checkpoint header

Training options resolve as CLI flag > config-file key > built-in default.
Config files are flat ``key = value`` text whose keys are exactly the
TrainConfig field names; flags use the same names kebab-cased. The only
process-wide knob is --threads, which caps the BLAS thread pools
(--threads 1 is strict deterministic mode).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import get_type_hints

from .errors import ConfigError, TkgqError

_THREAD_LIMITER = None  # keeps the threadpoolctl controller alive


def _apply_threads(n: int | None) -> None:
    global _THREAD_LIMITER
    if n is None:
        return
    if n < 1:
        raise ConfigError(f"--threads must be >= 1, got {n}")
    from threadpoolctl import threadpool_limits

    _THREAD_LIMITER = threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# config file handling
# ---------------------------------------------------------------------------


def _field_types() -> dict[str, type]:
    from .train import TrainConfig

    hints = get_type_hints(TrainConfig)
    return {f.name: hints[f.name] for f in fields(TrainConfig)}


def _coerce(key: str, text: str, typ: type):
    if typ is bool:
        lowered = text.strip().lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {text!r}")
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {key}: expected {typ.__name__}, got {text!r}") from None
    return text


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; keys must name TrainConfig fields."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    types = _field_types()
    values: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, value.strip(), types[key])
    return values


def build_train_config(args: argparse.Namespace):
    from .train import TrainConfig

    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(TrainConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    cfg = TrainConfig(**values)
    cfg.validate()
    if not cfg.dataset:
        raise ConfigError("a dataset is required (--dataset or config key 'dataset')")
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _counts_line(name, vocab, ds) -> str:
    return (
        f"loaded {name}: entities={vocab.n_entities} relations={vocab.n_relations} "
        f"timestamps={vocab.n_timestamps} train={len(ds.train)} "
        f"valid={len(ds.valid)} test={len(ds.test)}"
    )


def _cmd_preprocess(args) -> int:
    from .data import load_dataset, save_cache

    vocab, ds = load_dataset(args.dataset)
    print(_counts_line(args.dataset, vocab, ds))
    save_cache(args.out, vocab, ds)
    print(f"wrote cache: {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .data import load_dataset_or_cache
    from .train import train_model

    _apply_threads(args.threads)
    cfg = build_train_config(args)
    vocab, ds = load_dataset_or_cache(cfg.dataset)
    print(_counts_line(cfg.dataset, vocab, ds))
    result = train_model(vocab, ds, cfg, log=print)
    if cfg.checkpoint:
        print(f"wrote checkpoint: {cfg.checkpoint}")
    if result.history:
        print(f"best valid MRR: {result.best_valid_mrr:.6f}")
    return 0


def _cmd_eval(args) -> int:
    from . import evaluation
    from .data import build_filter_index, load_dataset_or_cache
    from .model import load_checkpoint

    _apply_threads(args.threads)
    params, _ = load_checkpoint(args.checkpoint)
    vocab, ds = load_dataset_or_cache(args.dataset)
    if (params.n_entities, params.n_relations, params.n_timestamps) != (
        vocab.n_entities,
        vocab.n_relations,
        vocab.n_timestamps,
    ):
        raise ConfigError(
            f"checkpoint shape (E={params.n_entities}, R={params.n_relations}, "
            f"T={params.n_timestamps}) does not match dataset "
            f"(E={vocab.n_entities}, R={vocab.n_relations}, T={vocab.n_timestamps})"
        )
    quads = ds.split(args.split)
    result = evaluation.evaluate(params, quads, build_filter_index(ds))
    print(evaluation.format_table(result, title=args.split))
    if args.out:
        evaluation.write_results(args.out, result, split=args.split)
        print(f"wrote results: {args.out}")
    if args.dump_ranks:
        evaluation.write_rank_dump(args.dump_ranks, quads, result)
        print(f"wrote rank dump: {args.dump_ranks}")
    return 0


def _cmd_verify_patterns(args) -> int:
    from .patterns import verify_all

    _apply_threads(args.threads)
    report = verify_all(trials=args.trials, dim=args.dim, seed=args.seed)
    print(report.table())
    return 0 if report.all_passed else 1


def _cmd_inspect(args) -> int:
    from .model import checkpoint_header

    header = checkpoint_header(args.checkpoint)
    for key, value in header.items():
        print(f"{key} = {value}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tkgq",
        description="Temporal knowledge-graph completion with quaternion embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pre = sub.add_parser("preprocess", help="parse a dataset directory into a binary cache")
    pre.add_argument("--dataset", required=True, help="dataset directory (train/valid/test files)")
    pre.add_argument("--out", required=True, help="output cache file")
    pre.set_defaults(func=_cmd_preprocess)

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--config", help="flat key = value config file")
    tr.add_argument("--dataset", help="dataset directory or preprocessed cache")
    tr.add_argument("--checkpoint", help="checkpoint output path")
    tr.add_argument("--dim", type=int, help="quaternion dimension per embedding")
    tr.add_argument("--batch-size", type=int, dest="batch_size")
    tr.add_argument("--epochs", type=int, help="maximum training epochs")
    tr.add_argument("--lr", type=float, help="Adagrad learning rate")
    tr.add_argument("--lambda-e", type=float, dest="lambda_e",
                    help="embedding regularizer weight")
    tr.add_argument("--lambda-t", type=float, dest="lambda_t",
                    help="temporal regularizer weight")
    tr.add_argument("--p", type=float, help="regularizer norm order")
    tr.add_argument("--periodic", action=argparse.BooleanOptionalAction, default=None,
                    help="enable/disable the periodic time translation")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--eval-every", type=int, dest="eval_every",
                    help="validation interval in epochs (0 disables)")
    tr.add_argument("--float32", action=argparse.BooleanOptionalAction, default=None,
                    help="train the tables in float32")
    tr.add_argument("--metrics-log", dest="metrics_log", help="metrics log path")
    tr.add_argument("--threads", type=int, help="BLAS thread cap (1 = strict deterministic)")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint with time-wise filtering")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True, help="dataset directory or cache")
    ev.add_argument("--split", choices=("train", "valid", "test"), default="test")
    ev.add_argument("--out", help="write machine-readable results here")
    ev.add_argument("--dump-ranks", dest="dump_ranks", help="write per-query ranks here")
    ev.add_argument("--threads", type=int)
    ev.set_defaults(func=_cmd_eval)

    vp = sub.add_parser("verify-patterns", help="check the relation-pattern identities")
    vp.add_argument("--trials", type=int, default=1000)
    vp.add_argument("--dim", type=int, default=8)
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--threads", type=int)
    vp.set_defaults(func=_cmd_verify_patterns)

    ins = sub.add_parser("inspect", help="dump a checkpoint header")
    ins.add_argument("--checkpoint", required=True)
    ins.set_defaults(func=_cmd_inspect)

    return parser


def _error_chain(exc: BaseException) -> str:
    parts = []
    seen = set()
    cur: BaseException | None = exc
    while cur is not None and id(cur) not in seen:
        seen.add(id(cur))
        parts.append(str(cur) or cur.__class__.__name__)
        cur = cur.__cause__
    return ": ".join(parts)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TkgqError, OSError) as exc:
        print(f"error: {_error_chain(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
