"""Command-line entry point.

Subcommands: preprocess (CSV -> encoded corpus + vocabulary), train, eval,
sine-demo, gradcheck (finite-difference verification), census (parameter
count check).  Exit codes: 0 success, 1 usage error, 2 data/format error,
3 failed verification or divergence.

Diagnostics go to stderr (QVULN_LOG_LEVEL controls verbosity); data goes to
files or stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .corpus import LabeledCorpus, Vocabulary, balance, build_vocab, encode_and_pad, load_dataset, tokenize
from .embedding import MODES, build_embedding_matrix, load_vectors
from .errors import CheckpointError, DataError, DivergenceError
from .neural import bce_from_logit, init_lstm_params, lstm_backward, lstm_forward
from .qlstm import init_qlstm_params, qlstm_backward, qlstm_forward
from .trainer import (
    ClassifyDataset,
    TrainConfig,
    analytic_census,
    evaluate,
    load_checkpoint,
    load_curves,
    runtime_census,
    save_checkpoint,
    save_metrics,
    sine_task,
    train,
)
from .vqc import init_vqc_params, vqc_forward, vqc_gradients

log = logging.getLogger("qvuln")

GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCES = {"vqc": 1e-6, "lstm": 1e-6, "qlstm": 1e-5}
_TABLES_REQUIRED = {"basic": 0, "glove": 1, "fasttext": 1, "glove+fasttext": 2}


# --- encoded corpus and vocabulary files ---


def save_vocab_file(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocab.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_vocab_file(path: str | Path) -> Vocabulary:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"vocabulary file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from None
    return Vocabulary.from_dict(doc)


def encode_corpus(corpus: LabeledCorpus, vocab: Vocabulary, max_len: int) -> ClassifyDataset:
    sequences = np.zeros((len(corpus), max_len), dtype=np.int64)
    labels = np.zeros(len(corpus), dtype=np.int64)
    for k, (code, label) in enumerate(corpus.samples):
        sequences[k] = encode_and_pad(tokenize(code), vocab, max_len).indices
        labels[k] = label
    return ClassifyDataset(
        sequences=sequences, labels=labels, max_len=max_len, vocab_digest=vocab.digest()
    )


def save_encoded_dataset(data: ClassifyDataset, split: str, path: str | Path) -> None:
    doc = {
        "format": "encoded.v1",
        "split": split,
        "max_len": data.max_len,
        "vocab_digest": data.vocab_digest,
        "labels": [int(v) for v in data.labels],
        "sequences": [[int(v) for v in row] for row in data.sequences],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_encoded_dataset(path: str | Path) -> ClassifyDataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"encoded dataset not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from None
    if doc.get("format") != "encoded.v1":
        raise DataError(f"{path}: unsupported dataset format {doc.get('format')!r}")
    max_len = int(doc["max_len"])
    sequences = np.array(doc["sequences"], dtype=np.int64)
    labels = np.array(doc["labels"], dtype=np.int64)
    if sequences.ndim != 2 or sequences.shape[1] != max_len:
        raise DataError(f"{path}: sequence rows must all have length {max_len}")
    if sequences.shape[0] != labels.shape[0]:
        raise DataError(f"{path}: {sequences.shape[0]} sequences but {labels.shape[0]} labels")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise DataError(f"{path}: labels must be 0 or 1")
    return ClassifyDataset(
        sequences=sequences, labels=labels, max_len=max_len,
        vocab_digest=str(doc.get("vocab_digest", "")),
    )


# --- gradient verification suites ---


def _central_fd(value_fn, tree: dict[str, np.ndarray], step: float) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar function w.r.t. every element
    of every array in the tree (arrays are perturbed in place)."""
    out: dict[str, np.ndarray] = {}
    for name, arr in tree.items():
        grad = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + step
            up = value_fn()
            flat[j] = keep - step
            down = value_fn()
            flat[j] = keep
            gflat[j] = (up - down) / (2.0 * step)
        out[name] = grad
    return out


def _max_abs_diff(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> float:
    return max(float(np.max(np.abs(a[name] - b[name]))) for name in a)


def run_gradcheck(seed: int = 42, trials: int = 20) -> dict[str, float]:
    """Max absolute deviation between analytic gradients and central finite
    differences for each differentiation path."""
    rng = np.random.default_rng(seed)
    worst = {"vqc": 0.0, "lstm": 0.0, "qlstm": 0.0}

    for _ in range(trials):
        d_in = int(rng.integers(2, 7))
        params = init_vqc_params(d_in, rng)
        params.bias[:] = 0.3 * rng.normal(size=4)
        params.out_scale[...] = 1.0 + 0.2 * rng.normal()
        params.out_shift[...] = 0.2 * rng.normal()
        x = rng.normal(size=d_in)
        upstream = rng.normal(size=4)
        grads, dx = vqc_gradients(params, x, upstream)

        def vqc_value() -> float:
            return float(upstream @ vqc_forward(params, x).values)

        fd = _central_fd(vqc_value, {**params.tree(), "x": x}, GRADCHECK_STEP)
        got = {**grads.tree(), "x": dx}
        worst["vqc"] = max(worst["vqc"], _max_abs_diff(fd, got))

    for T in (1, 2, 3, 4):
        hidden, d_in = 3, 2
        params = init_lstm_params(hidden, d_in, rng)
        seq = [rng.normal(size=d_in) for _ in range(T)]
        target = float(rng.integers(0, 2))

        def lstm_value() -> float:
            logit, _ = lstm_forward(params, seq)
            return bce_from_logit(logit, target)[0]

        logit, caches = lstm_forward(params, seq)
        _, dlogit = bce_from_logit(logit, target)
        grads, dx = lstm_backward(params, caches, dlogit)
        inputs = {f"x{t}": seq[t] for t in range(T)}
        fd = _central_fd(lstm_value, {**params.tree(), **inputs}, GRADCHECK_STEP)
        got = {**grads.tree(), **{f"x{t}": dx[t] for t in range(T)}}
        worst["lstm"] = max(worst["lstm"], _max_abs_diff(fd, got))

    for d_x, T in ((2, 2), (3, 3)):
        params = init_qlstm_params(d_x, rng)
        seq = [rng.normal(size=d_x) for _ in range(T)]
        target = float(rng.integers(0, 2))

        def qlstm_value() -> float:
            logit, _ = qlstm_forward(params, seq)
            return bce_from_logit(logit, target)[0]

        logit, caches = qlstm_forward(params, seq)
        _, dlogit = bce_from_logit(logit, target)
        grads, dx = qlstm_backward(params, caches, dlogit)
        inputs = {f"x{t}": seq[t] for t in range(T)}
        fd = _central_fd(qlstm_value, {**params.tree(), **inputs}, GRADCHECK_STEP)
        got = {**grads.tree(), **{f"x{t}": dx[t] for t in range(T)}}
        worst["qlstm"] = max(worst["qlstm"], _max_abs_diff(fd, got))

    return worst


# --- subcommand handlers ---


def _cmd_preprocess(args: argparse.Namespace) -> int:
    data_dir = Path(args.data_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpora = {}
    for split in ("train", "validation", "test"):
        corpus = load_dataset(data_dir / f"{split}.csv", split)
        if args.balance:
            corpus = balance(corpus, args.seed)
        corpora[split] = corpus
        log.info("%s: %d samples after preprocessing", split, len(corpus))
    vocab = build_vocab(corpora["train"], args.max_vocab)
    save_vocab_file(vocab, out_dir / "vocab.json")
    for split, corpus in corpora.items():
        data = encode_corpus(corpus, vocab, args.max_len)
        save_encoded_dataset(data, split, out_dir / f"{split}.json")
    return 0


def _load_tables(args: argparse.Namespace) -> list:
    vectors = args.vectors or []
    needed = _TABLES_REQUIRED[args.embedding]
    if len(vectors) != needed:
        raise DataError(
            f"embedding mode {args.embedding!r} requires {needed} --vectors file(s), "
            f"got {len(vectors)}"
        )
    return [load_vectors(p) for p in vectors]


def _cmd_train(args: argparse.Namespace) -> int:
    config = TrainConfig(
        model=args.model,
        task=args.task,
        embedding_mode=args.embedding,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        lr=args.lr,
        threshold=args.threshold,
        hidden=args.hidden,
        d_basic=args.d_basic,
        n_points=args.n_points,
        window=args.window,
        sigma_hidden=args.sigma_hidden,
    )
    if args.task == "classify":
        if args.data is None or args.vocab is None:
            print("error: --task classify requires --data and --vocab", file=sys.stderr)
            return 1
        vocab = load_vocab_file(args.vocab)
        data = load_encoded_dataset(args.data)
        eval_data = load_encoded_dataset(args.eval_data) if args.eval_data else None
        tables = _load_tables(args)
        matrix = build_embedding_matrix(
            vocab, tables, args.embedding, seed=args.seed, d_basic=args.d_basic
        )
        ckpt, report = train(
            config, data, matrix=matrix, vocab_digest=vocab.digest(),
            eval_data=eval_data, curves_path=args.curves,
        )
    else:
        data = sine_task(args.n_points, args.window)
        ckpt, report = train(config, data, curves_path=args.curves)
    save_checkpoint(ckpt, args.out)
    if args.metrics:
        save_metrics(report, args.task, args.metrics)
    if args.task == "classify":
        print(
            f"model={args.model} task=classify accuracy={report.accuracy!r} "
            f"f1={report.f1!r} parameters={report.parameter_count}"
        )
    else:
        print(
            f"model={args.model} task=sine mse={report.mse!r} "
            f"parameters={report.parameter_count}"
        )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.ckpt)
    if ckpt.task == "classify":
        if args.data is None:
            print("error: eval of a classify checkpoint requires --data", file=sys.stderr)
            return 1
        data = load_encoded_dataset(args.data)
    else:
        hp = ckpt.hyperparameters
        data = sine_task(int(hp.get("n_points", 100)), int(hp.get("window", 4)))
    report = evaluate(ckpt, data, args.threshold)
    if args.metrics:
        save_metrics(report, ckpt.task, args.metrics)
    if ckpt.task == "classify":
        cm = report.confusion
        print(
            f"accuracy={report.accuracy!r} precision={report.precision!r} "
            f"recall={report.recall!r} f1={report.f1!r} "
            f"tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}"
        )
    else:
        print(f"mse={report.mse!r}")
    return 0


def _cmd_sine_demo(args: argparse.Namespace) -> int:
    config = TrainConfig(model=args.model, task="sine", epochs=args.epochs, seed=args.seed)
    data = sine_task(config.n_points, config.window)
    train(config, data, curves_path=args.curves)
    blocks = load_curves(args.curves)
    for epoch in sorted(blocks):
        _, actual, predicted = blocks[epoch]
        mse = float(np.mean((predicted - actual) ** 2))
        print(f"model={args.model} epoch={epoch} mse={mse!r}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    worst = run_gradcheck(seed=args.seed, trials=args.trials)
    failed = False
    for name in ("vqc", "lstm", "qlstm"):
        tol = GRADCHECK_TOLERANCES[name]
        ok = worst[name] < tol
        failed = failed or not ok
        print(f"{name}: max abs deviation {worst[name]:.3e} tolerance {tol:.0e} "
              f"{'ok' if ok else 'FAILED'}")
    return 3 if failed else 0


def _cmd_census(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.ckpt)
    runtime = runtime_census(
        ckpt.arrays, bool(ckpt.hyperparameters.get("embedding_trainable"))
    )
    analytic = analytic_census(ckpt)
    ok = runtime == analytic
    print(f"model={ckpt.model} runtime={runtime} analytic={analytic} "
          f"{'ok' if ok else 'MISMATCH'}")
    return 0 if ok else 3


# --- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvuln",
        description="Classical and quantum LSTM pipeline for function-level "
        "vulnerability classification and sine regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, handler) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.set_defaults(func=handler)
        return p

    p = add("preprocess", "encode CSV corpora into fixed-length index sequences", _cmd_preprocess)
    p.add_argument("--data-dir", required=True,
                   help="directory holding train.csv, validation.csv, test.csv")
    p.add_argument("--max-len", type=int, default=100, help="sequence length after padding")
    p.add_argument("--max-vocab", type=int, default=10000, help="vocabulary size cap")
    p.add_argument("--balance", action=argparse.BooleanOptionalAction, default=True,
                   help="down-sample the majority class in every split")
    p.add_argument("--seed", type=int, default=42, help="balancing seed")
    p.add_argument("--out", required=True, help="output directory for encoded files")

    p = add("train", "train a model and write a checkpoint", _cmd_train)
    p.add_argument("--model", required=True, choices=("lstm", "qlstm"), help="model kind")
    p.add_argument("--task", required=True, choices=("classify", "sine"), help="training task")
    p.add_argument("--embedding", choices=MODES, default="basic", help="input representation")
    p.add_argument("--vectors", action="append", default=None, metavar="FILE",
                   help="pretrained vector file (repeat for glove+fasttext)")
    p.add_argument("--data", default=None, help="encoded training split (classify)")
    p.add_argument("--eval-data", default=None, help="encoded split for the metrics report")
    p.add_argument("--vocab", default=None, help="vocabulary file (classify)")
    p.add_argument("--epochs", type=int, default=None, help="epochs (default: 30 sine, 10 classify)")
    p.add_argument("--batch", type=int, default=16, help="mini-batch size")
    p.add_argument("--lr", type=float, default=None,
                   help="learning rate (default: 1e-2 sine, 1e-3 classify)")
    p.add_argument("--seed", type=int, default=42, help="seed for init and shuffling")
    p.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    p.add_argument("--hidden", type=int, default=50, help="classical hidden units")
    p.add_argument("--d-basic", type=int, default=50, help="trainable embedding dimension")
    p.add_argument("--n-points", type=int, default=100, help="sine task sample count")
    p.add_argument("--window", type=int, default=4, help="sine task input window")
    p.add_argument("--sigma-hidden", action=argparse.BooleanOptionalAction, default=True,
                   help="wrap the quantum hidden-state block in a sigmoid")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--metrics", default=None, help="metrics report output path")
    p.add_argument("--curves", default=None, help="prediction curve output path")

    p = add("eval", "evaluate a checkpoint on a dataset", _cmd_eval)
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", default=None, help="encoded dataset (classify checkpoints)")
    p.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    p.add_argument("--metrics", default=None, help="metrics report output path")

    p = add("sine-demo", "train on the sine task and dump prediction curves", _cmd_sine_demo)
    p.add_argument("--model", required=True, choices=("lstm", "qlstm"), help="model kind")
    p.add_argument("--epochs", type=int, default=30, help="training epochs")
    p.add_argument("--seed", type=int, default=42, help="seed for init and shuffling")
    p.add_argument("--curves", required=True, help="curve output path")

    p = add("gradcheck", "verify analytic gradients against finite differences", _cmd_gradcheck)
    p.add_argument("--seed", type=int, default=42, help="seed for random instances")
    p.add_argument("--trials", type=int, default=20, help="random circuit draws")

    p = add("census", "compare runtime parameter count with the analytic formula", _cmd_census)
    p.add_argument("--ckpt", required=True, help="checkpoint path")

    return parser


def _configure_logging() -> None:
    level = os.environ.get("QVULN_LOG_LEVEL", "warning").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
