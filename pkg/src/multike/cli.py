"""Command-line entry point: ``gen-synth``, ``train``, ``evaluate`` and ``align``.

Configuration precedence for ``train`` (lowest first): built-in defaults, a
``key=value`` file given with ``--config``, environment variables named
``MULTIKE_<KEY>`` (for example ``MULTIKE_LEARNING_RATE=0.1``), ``--set
key=value`` pairs, and finally the dedicated flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from typing import Dict, Optional, Sequence

import numpy as np

from . import __version__
from .checkpoint import CheckpointError
from .evaluation import compute_metrics, predictions_tsv, rank_candidates
from .kg import ParseError, load_dataset, save_dataset
from .literal import load_word_embeddings
from .synthetic import generate_synthetic_pair, synthetic_word_vectors
from .training import COMBINED, VIEW_TENSORS, TrainConfig, TrainingError, load_result_tensors, \
    parse_config_text, save_result, train_multike

logger = logging.getLogger("multike")

ENV_PREFIX = "MULTIKE_"
CHECKPOINT = "checkpoint.bin"
LOG = "train_log.jsonl"
MANIFEST = "manifest.json"
WORD_VECTORS = "word_vectors.txt"


class CliError(Exception):
    """A user-facing failure; the message is printed and the exit status is 1."""


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise CliError(f"no such file or directory: {path}")
    return path


def _read_text(path: str) -> str:
    with open(_require(path), "r", encoding="utf-8") as fh:
        return fh.read()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def env_overrides(environ=None) -> Dict[str, str]:
    """``MULTIKE_<KEY>`` variables that name a config field, keyed by field name."""
    environ = os.environ if environ is None else environ
    fields = set(TrainConfig.field_names())
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in fields:
                out[key] = value
    return out


def resolve_config(args, environ=None) -> TrainConfig:
    values: Dict[str, str] = {}
    if args.config:
        values.update(parse_config_text(_read_text(args.config)))
    values.update(env_overrides(environ))
    values.update(dict(args.set or []))
    for flag in ("epochs", "dim", "learning_rate", "seed", "seed_ratio", "combination"):
        value = getattr(args, flag, None)
        if value is not None:
            values[flag] = str(value)
    try:
        return TrainConfig().updated(values)
    except ValueError as exc:
        raise CliError(f"invalid config: {exc}") from None


# -- subcommands -------------------------------------------------------------

def cmd_gen_synth(args) -> None:
    dataset = generate_synthetic_pair(
        args.entities, args.relations, args.attributes, name_noise=args.name_noise,
        structure_dropout=args.dropout, rng_seed=args.seed)
    save_dataset(dataset, args.out)
    _write_text(os.path.join(args.out, WORD_VECTORS),
                synthetic_word_vectors(dataset, args.dim, coverage=args.word_coverage,
                                       rng_seed=args.seed))
    print(f"wrote {len(dataset.test_alignment)} aligned pairs to {args.out}")


def _load_dataset(data_dir: str, config: TrainConfig):
    _require(data_dir)
    try:
        return load_dataset(data_dir, config.seed_ratio, config.seed)
    except FileNotFoundError as exc:
        raise CliError(f"no such file or directory: {exc.args[0]}") from None
    except (ParseError, ValueError) as exc:
        raise CliError(f"invalid dataset in {data_dir}: {exc}") from None


def cmd_train(args) -> None:
    config = resolve_config(args)
    dataset = _load_dataset(args.data, config)
    vectors_path = args.word_vectors
    if vectors_path is None and os.path.exists(os.path.join(args.data, WORD_VECTORS)):
        vectors_path = os.path.join(args.data, WORD_VECTORS)
    word_table = None
    if vectors_path is not None:
        try:
            word_table = load_word_embeddings(_read_text(vectors_path), dim=config.dim)
        except (ParseError, ValueError) as exc:
            raise CliError(f"invalid word vectors {vectors_path}: {exc}") from None
    os.makedirs(args.out, exist_ok=True)
    start = time.perf_counter()
    try:
        result = train_multike(dataset, config, word_table)
    except TrainingError as exc:
        raise CliError(str(exc)) from None
    train_seconds = time.perf_counter() - start
    checkpoint = os.path.join(args.out, CHECKPOINT)
    save_result(result, checkpoint, config.dim)
    _write_text(os.path.join(args.out, LOG),
                "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in result.log))
    inputs = sorted(os.path.join(args.data, f) for f in os.listdir(args.data)
                    if os.path.isfile(os.path.join(args.data, f)))
    known = {os.path.abspath(p) for p in inputs}
    if vectors_path is not None and os.path.abspath(vectors_path) not in known:
        inputs.append(vectors_path)
    manifest = {
        "version": __version__,
        "config": dataclasses.asdict(config),
        "seed": config.seed,
        "data": os.path.abspath(args.data),
        "word_vectors": os.path.abspath(vectors_path) if vectors_path else None,
        "inputs": {os.path.abspath(p): _sha256(p) for p in inputs},
        "outputs": {CHECKPOINT: _sha256(checkpoint), LOG: _sha256(os.path.join(args.out, LOG))},
        "timings": {"train_seconds": round(train_seconds, 3)},
    }
    _write_text(os.path.join(args.out, MANIFEST), json.dumps(manifest, indent=2, sort_keys=True))
    print(f"trained {config.epochs} epochs ({config.combination}) in {train_seconds:.1f}s; "
          f"checkpoint {checkpoint}")


def _load_run(args):
    checkpoint = _require(args.checkpoint or os.path.join(args.run, CHECKPOINT))
    manifest = json.loads(_read_text(os.path.join(args.run, MANIFEST)))
    config = TrainConfig().updated(manifest["config"])
    dataset = _load_dataset(args.data or manifest["data"], config)
    try:
        tensors = load_result_tensors(checkpoint, config.dim)
    except CheckpointError as exc:
        raise CliError(f"{checkpoint}: {exc}") from None
    return config, dataset, tensors


def _candidates(dataset, pool: str) -> Optional[np.ndarray]:
    if pool == "test":
        return None
    vocab = dataset.vocab
    return np.arange(vocab.n_source_entities, vocab.n_entities)


def cmd_evaluate(args) -> None:
    config, dataset, tensors = _load_run(args)
    pairs = dataset.pair_indices(dataset.test_alignment)
    if len(pairs) == 0:
        raise CliError("the test split is empty")
    candidates = _candidates(dataset, args.candidate_pool)
    reports = {}
    for label, key in [("combined", COMBINED)] + sorted(VIEW_TENSORS.items()):
        result = rank_candidates(tensors[key], pairs, candidates, keep=1, workers=args.workers)
        reports[label] = compute_metrics(result, ks=args.hits)
    out = args.out or args.run
    os.makedirs(out, exist_ok=True)
    payload = {label: report.to_dict() for label, report in reports.items()}
    payload["candidate_pool"] = args.candidate_pool
    _write_text(os.path.join(out, "metrics.json"), json.dumps(payload, indent=2, sort_keys=True)
                + "\n")
    table = "".join(f"[{label}]\n{report.to_table()}\n" for label, report in reports.items())
    _write_text(os.path.join(out, "metrics.txt"), table)
    print(table, end="")


def cmd_align(args) -> None:
    config, dataset, tensors = _load_run(args)
    pairs = dataset.pair_indices(dataset.test_alignment)
    if len(pairs) == 0:
        raise CliError("the test split is empty")
    result = rank_candidates(tensors[COMBINED], pairs, _candidates(dataset, args.candidate_pool),
                             keep=1, workers=args.workers)
    labels = [eid for _, eid in dataset.vocab.entities]
    path = args.out or os.path.join(args.run, "predictions.tsv")
    _write_text(path, predictions_tsv(result, labels))
    print(f"wrote {len(result)} predictions to {path}")


# -- parser ------------------------------------------------------------------

def _add_run_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--run", required=True, help="training output directory")
    p.add_argument("--data", help="dataset directory (defaults to the one in the manifest)")
    p.add_argument("--checkpoint", help="checkpoint path (defaults to <run>/checkpoint.bin)")
    p.add_argument("--candidate-pool", choices=("test", "all"), default="test",
                   help="rank against test-pair targets or every target entity")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multike",
                                     description="Multi-view entity alignment toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic aligned KG pair")
    p.add_argument("--entities", type=int, default=300)
    p.add_argument("--relations", type=int, default=10)
    p.add_argument("--attributes", type=int, default=8)
    p.add_argument("--name-noise", type=float, default=0.1)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=75, help="word-vector dimension")
    p.add_argument("--word-coverage", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="run")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", type=_key_value, metavar="KEY=VALUE")
    p.add_argument("--word-vectors", help="word-vector file (defaults to <data>/word_vectors.txt)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--seed-ratio", type=float)
    p.add_argument("--combination", choices=("wva", "ssl", "itc"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="write metrics for a trained run")
    _add_run_inputs(p)
    p.add_argument("--hits", type=int, nargs="+", default=[1, 10])
    p.add_argument("--out", help="metrics directory (defaults to the run directory)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("align", help="write rank-1 predictions for the test split")
    _add_run_inputs(p)
    p.add_argument("--out", help="TSV path (defaults to <run>/predictions.tsv)")
    p.set_defaults(func=cmd_align)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"multike {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"multike {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
