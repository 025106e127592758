"""Training and evaluation for both models and both tasks.

Covers the binary-classification metrics (accuracy, precision, recall, F1
with zero-denominator flags), seeded mini-batch training with Adam, the
windowed sine-regression task, wall-clock timing, an exact parameter
census, and versioned JSON checkpoints that round-trip bitwise.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PAD_INDEX
from .embedding import EmbeddingMatrix
from .errors import CheckpointError, DataError, DivergenceError
from .neural import (
    LstmParams,
    OptimizerState,
    adam_step,
    bce_from_logit,
    init_lstm_params,
    lstm_backward,
    lstm_forward,
    sigmoid,
    zeros_like_lstm,
)
from .qlstm import (
    HIDDEN as QLSTM_HIDDEN,
    QlstmParams,
    init_qlstm_params,
    qlstm_backward,
    qlstm_forward,
    zeros_like_qlstm,
)
from .vqc import VqcParams

log = logging.getLogger("qvuln")

MODELS = ("lstm", "qlstm")
TASKS = ("classify", "sine")
CHECKPOINT_VERSION = 1

SINE_DEFAULT_EPOCHS = 30
CLASSIFY_DEFAULT_EPOCHS = 10
SINE_DEFAULT_LR = 1e-2
CLASSIFY_DEFAULT_LR = 1e-3


@dataclass
class TrainConfig:
    """One training run's settings; epoch and learning-rate defaults depend
    on the task (30 epochs / 1e-2 for sine, 10 / 1e-3 for classify)."""

    model: str
    task: str
    embedding_mode: str = "basic"
    epochs: int | None = None
    batch_size: int = 16
    seed: int = 42
    lr: float | None = None
    max_len: int = 100
    threshold: float = 0.5
    hidden: int = 50
    d_basic: int = 50
    n_points: int = 100
    window: int = 4
    sigma_hidden: bool = True

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise DataError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.epochs is None:
            self.epochs = SINE_DEFAULT_EPOCHS if self.task == "sine" else CLASSIFY_DEFAULT_EPOCHS
        if self.lr is None:
            self.lr = SINE_DEFAULT_LR if self.task == "sine" else CLASSIFY_DEFAULT_LR
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold must lie in (0, 1), got {self.threshold}")


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    warnings: list[str] = field(default_factory=list)
    confusion: ConfusionMatrix | None = None
    mse: float | None = None
    wall_time_seconds: float = 0.0
    parameter_count: int = 0
    loss_curve: list[float] = field(default_factory=list)
    predictions: np.ndarray | None = field(default=None, repr=False)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision, recall, F1 from counts; any zero denominator
    yields 0 for that metric and a named warning flag."""
    report = MetricsReport(confusion=cm)
    if cm.tp + cm.fp > 0:
        report.precision = cm.tp / (cm.tp + cm.fp)
    else:
        report.warnings.append("precision")
    if cm.tp + cm.fn > 0:
        report.recall = cm.tp / (cm.tp + cm.fn)
    else:
        report.warnings.append("recall")
    if report.precision + report.recall > 0:
        report.f1 = 2.0 * report.precision * report.recall / (report.precision + report.recall)
    else:
        report.warnings.append("f1")
    if cm.total > 0:
        report.accuracy = (cm.tp + cm.tn) / cm.total
    else:
        report.warnings.append("accuracy")
    for name in report.warnings:
        log.warning("metrics: zero denominator for %s, reporting 0", name)
    return report


# --- datasets ---


@dataclass
class ClassifyDataset:
    """Encoded fixed-length sequences with binary labels."""

    sequences: np.ndarray  # (N, max_len) integer indices
    labels: np.ndarray  # (N,) in {0, 1}
    max_len: int
    vocab_digest: str

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class SineDataset:
    """Windowed next-value regression over one sine period."""

    inputs: np.ndarray  # (N, window, 1)
    targets: np.ndarray  # (N,)
    xs: np.ndarray  # (N,) x position of each target

    def __len__(self) -> int:
        return len(self.targets)


def sine_task(n_points: int = 100, window: int = 4) -> SineDataset:
    """Cyclic windows over x_j = 2*pi*j/n_points: each sample predicts
    sin(x_j) from the previous `window` sine values."""
    if window < 1 or n_points <= window:
        raise DataError(f"need n_points > window >= 1, got n_points={n_points} window={window}")
    x = 2.0 * np.pi * np.arange(n_points) / n_points
    s = np.sin(x)
    inputs = np.empty((n_points, window, 1))
    for j in range(n_points):
        inputs[j, :, 0] = s[(np.arange(j - window, j)) % n_points]
    return SineDataset(inputs=inputs, targets=s.copy(), xs=x)


# --- parameter census ---


def lstm_census(hidden: int, d_in: int) -> int:
    """Trainable scalars of the classical model (head included)."""
    return 4 * (hidden * (hidden + d_in) + hidden) + hidden + 1


def qlstm_census(d_x: int) -> int:
    """Trainable scalars of the quantum model: six circuit blocks plus the
    head; each block holds 4*d_in + 4 + 24 + 2 values."""
    per_vqc = lambda d_in: 4 * d_in + 4 + 24 + 2
    return 4 * per_vqc(QLSTM_HIDDEN + d_x) + 2 * per_vqc(QLSTM_HIDDEN) + QLSTM_HIDDEN + 1


def embedding_census(n_rows: int, dim: int) -> int:
    """Trainable scalars of a trainable embedding (padding row is pinned)."""
    return (n_rows - 1) * dim


def runtime_census(arrays: dict[str, np.ndarray], embedding_trainable: bool) -> int:
    """Count trainable scalars from the actual parameter arrays."""
    count = 0
    for name, arr in arrays.items():
        if name == "embedding.rows":
            if embedding_trainable:
                count += (arr.shape[0] - 1) * arr.shape[1]
        else:
            count += arr.size
    return count


def analytic_census(ckpt: Checkpoint) -> int:
    """Closed-form census from checkpoint shapes (cross-checks runtime)."""
    arrays = ckpt.arrays
    if ckpt.model == "lstm":
        hidden = arrays["w_f"].shape[0]
        d_in = arrays["w_f"].shape[1] - hidden
        count = lstm_census(hidden, d_in)
    else:
        d_x = arrays["vqc1.in_proj"].shape[1] - QLSTM_HIDDEN
        count = qlstm_census(d_x)
    if ckpt.hyperparameters.get("embedding_trainable") and "embedding.rows" in arrays:
        emb = arrays["embedding.rows"]
        count += embedding_census(emb.shape[0], emb.shape[1])
    return count


# --- checkpoints ---


@dataclass
class Checkpoint:
    model: str
    task: str
    hyperparameters: dict
    vocab_digest: str | None
    arrays: dict[str, np.ndarray]


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    """Versioned JSON document; float serialization round-trips bitwise."""
    doc = {
        "format": "checkpoint.v1",
        "version": CHECKPOINT_VERSION,
        "model": ckpt.model,
        "task": ckpt.task,
        "hyperparameters": ckpt.hyperparameters,
        "vocab_digest": ckpt.vocab_digest,
        "params": {
            name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
            for name, arr in ckpt.arrays.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: not valid JSON: {exc}") from None
    if doc.get("format") != "checkpoint.v1" or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format/version "
            f"{doc.get('format')!r}/{doc.get('version')!r}"
        )
    arrays = {
        name: np.array(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    return Checkpoint(
        model=doc["model"],
        task=doc["task"],
        hyperparameters=doc["hyperparameters"],
        vocab_digest=doc.get("vocab_digest"),
        arrays=arrays,
    )


def lstm_params_from_arrays(arrays: dict[str, np.ndarray]) -> LstmParams:
    return LstmParams(
        w_f=arrays["w_f"], w_i=arrays["w_i"], w_c=arrays["w_c"], w_o=arrays["w_o"],
        b_f=arrays["b_f"], b_i=arrays["b_i"], b_c=arrays["b_c"], b_o=arrays["b_o"],
        head_w=arrays["head_w"], head_b=arrays["head_b"],
    )


def qlstm_params_from_arrays(arrays: dict[str, np.ndarray], sigma_hidden: bool) -> QlstmParams:
    def block(k: int) -> VqcParams:
        p = f"vqc{k}."
        return VqcParams(
            in_proj=arrays[p + "in_proj"],
            bias=arrays[p + "bias"],
            angles=arrays[p + "angles"],
            out_scale=arrays[p + "out_scale"],
            out_shift=arrays[p + "out_shift"],
        )

    return QlstmParams(
        vqc1=block(1), vqc2=block(2), vqc3=block(3), vqc4=block(4),
        vqc5=block(5), vqc6=block(6),
        head_w=arrays["head_w"], head_b=arrays["head_b"],
        sigma_hidden=sigma_hidden,
    )


# --- metrics report files ---


def save_metrics(report: MetricsReport, task: str, path: str | Path) -> None:
    doc: dict = {
        "format": "metrics.v1",
        "task": task,
        "wall_time_seconds": report.wall_time_seconds,
        "parameter_count": report.parameter_count,
        "loss_curve": [float(v) for v in report.loss_curve],
        "warnings": list(report.warnings),
    }
    if task == "classify":
        cm = report.confusion or ConfusionMatrix()
        doc.update(
            accuracy=report.accuracy,
            precision=report.precision,
            recall=report.recall,
            f1=report.f1,
            tp=cm.tp, fp=cm.fp, tn=cm.tn, fn=cm.fn,
        )
    else:
        doc["mse"] = report.mse
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_metrics(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "metrics.v1":
        raise DataError(f"{path}: unsupported metrics format {doc.get('format')!r}")
    return doc


# --- prediction curve files ---


def save_curves(blocks: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]], path: str | Path) -> None:
    """Plain delimited text: one `x actual predicted epoch` row per point."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# x actual predicted epoch\n")
        for epoch in sorted(blocks):
            xs, actual, predicted = blocks[epoch]
            for x, a, p in zip(xs, actual, predicted):
                fh.write(f"{float(x)!r} {float(a)!r} {float(p)!r} {epoch}\n")


def load_curves(path: str | Path) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    blocks: dict[int, list[list[float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            x, a, p, e = line.split()
            blocks.setdefault(int(e), []).append([float(x), float(a), float(p)])
    return {
        e: (np.array(rows)[:, 0], np.array(rows)[:, 1], np.array(rows)[:, 2])
        for e, rows in blocks.items()
    }


# --- model plumbing shared by train and evaluate ---


def _init_model(config: TrainConfig, d_in: int, rng: np.random.Generator):
    if config.model == "lstm":
        return init_lstm_params(config.hidden, d_in, rng)
    return init_qlstm_params(d_in, rng, sigma_hidden=config.sigma_hidden)


def _forward(model: str, params, xs):
    if model == "lstm":
        return lstm_forward(params, xs)
    return qlstm_forward(params, xs)


def _backward(model: str, params, caches, upstream: float):
    if model == "lstm":
        return lstm_backward(params, caches, upstream)
    return qlstm_backward(params, caches, upstream)


def _sample_inputs(task: str, data, k: int, matrix: EmbeddingMatrix | None) -> np.ndarray:
    if task == "sine":
        return data.inputs[k]
    return matrix.rows[data.sequences[k]]


def _sample_target(task: str, data, k: int) -> float:
    if task == "sine":
        return float(data.targets[k])
    return float(data.labels[k])


def _sample_loss(task: str, logit: float, target: float) -> tuple[float, float]:
    """(loss value, dLoss/dlogit) for one sample."""
    if task == "sine":
        diff = logit - target
        return diff * diff, 2.0 * diff
    return bce_from_logit(logit, target)


def predictions_over(
    model: str, task: str, params, data, matrix: EmbeddingMatrix | None
) -> np.ndarray:
    """Raw value for sine, probability for classify, one entry per sample."""
    out = np.empty(len(data))
    for k in range(len(data)):
        logit, _ = _forward(model, params, _sample_inputs(task, data, k, matrix))
        out[k] = logit if task == "sine" else float(sigmoid(logit))
    return out


def _curve_block(task: str, data, preds: np.ndarray):
    if task == "sine":
        return data.xs.copy(), data.targets.copy(), preds
    n = len(data)
    return np.arange(n, dtype=float), data.labels.astype(float), preds


def train(
    config: TrainConfig,
    data,
    matrix: EmbeddingMatrix | None = None,
    vocab_digest: str | None = None,
    eval_data=None,
    curves_path: str | Path | None = None,
) -> tuple[Checkpoint, MetricsReport]:
    """Seeded mini-batch Adam training.

    Records the per-epoch mean training loss, emits epoch-1 and final-epoch
    prediction curves when curves_path is given, and reports metrics over
    eval_data (falling back to the training data).
    """
    if len(data) == 0:
        raise DataError("training data is empty")
    if config.task == "classify" and matrix is None:
        raise DataError("classification training requires an embedding matrix")
    d_in = 1 if config.task == "sine" else matrix.dim
    init_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    params = _init_model(config, d_in, init_rng)

    params_tree = params.tree()
    emb_trainable = matrix is not None and matrix.trainable
    if emb_trainable:
        params_tree = dict(params_tree)
        params_tree["embedding.rows"] = matrix.rows
    opt = OptimizerState(lr=config.lr)

    n = len(data)
    loss_curve: list[float] = []
    curve_blocks: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    started = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            acc = {name: np.zeros_like(arr) for name, arr in params_tree.items()}
            batch_loss = 0.0
            for k in batch:
                xs = _sample_inputs(config.task, data, k, matrix)
                target = _sample_target(config.task, data, k)
                logit, caches = _forward(config.model, params, xs)
                value, dlogit = _sample_loss(config.task, logit, target)
                batch_loss += value
                grads, dx = _backward(config.model, params, caches, dlogit)
                for name, g in grads.tree().items():
                    acc[name] += g
                if emb_trainable:
                    np.add.at(acc["embedding.rows"], data.sequences[k], dx)
            if not np.isfinite(batch_loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            epoch_loss += batch_loss
            scale = 1.0 / len(batch)
            for name in acc:
                acc[name] *= scale
            if emb_trainable:
                acc["embedding.rows"][PAD_INDEX] = 0.0
            adam_step(opt, params_tree, acc)
        mean_loss = epoch_loss / n
        if not np.isfinite(mean_loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        loss_curve.append(mean_loss)
        log.info("epoch %d/%d: mean loss %.6f", epoch, config.epochs, mean_loss)
        if curves_path is not None and epoch in (1, config.epochs):
            preds = predictions_over(config.model, config.task, params, data, matrix)
            curve_blocks[epoch] = _curve_block(config.task, data, preds)
    wall_time = time.perf_counter() - started

    if curves_path is not None:
        save_curves(curve_blocks, curves_path)

    parameter_count = runtime_census(params_tree, emb_trainable)
    hyperparameters: dict = {
        "batch_size": config.batch_size,
        "d_in": d_in,
        "epochs": config.epochs,
        "lr": config.lr,
        "seed": config.seed,
        "threshold": config.threshold,
    }
    if config.model == "lstm":
        hyperparameters["hidden"] = config.hidden
    else:
        hyperparameters["sigma_hidden"] = config.sigma_hidden
    arrays = dict(params.tree())
    if config.task == "classify":
        hyperparameters.update(
            embedding_mode=matrix.source,
            embedding_trainable=matrix.trainable,
            max_len=data.max_len,
        )
        arrays["embedding.rows"] = matrix.rows
    else:
        hyperparameters.update(n_points=len(data), window=data.inputs.shape[1])
    ckpt = Checkpoint(
        model=config.model,
        task=config.task,
        hyperparameters=hyperparameters,
        vocab_digest=vocab_digest,
        arrays=arrays,
    )

    report = evaluate(ckpt, eval_data if eval_data is not None else data, config.threshold)
    report.wall_time_seconds = wall_time
    report.loss_curve = loss_curve
    return ckpt, report


def evaluate(ckpt: Checkpoint, data, threshold: float = 0.5) -> MetricsReport:
    """Metrics over a dataset: thresholded confusion metrics for classify
    (predict 1 iff probability >= threshold), MSE for sine."""
    started = time.perf_counter()
    matrix = None
    if ckpt.task == "classify":
        if not isinstance(data, ClassifyDataset):
            raise DataError("checkpoint task is classify but data is not an encoded corpus")
        hp = ckpt.hyperparameters
        if data.max_len != hp.get("max_len"):
            raise DataError(
                f"max_len mismatch: checkpoint {hp.get('max_len')}, data {data.max_len}"
            )
        if ckpt.vocab_digest is not None and data.vocab_digest != ckpt.vocab_digest:
            log.warning(
                "vocabulary digest mismatch: checkpoint %s..., data %s...",
                str(ckpt.vocab_digest)[:12], str(data.vocab_digest)[:12],
            )
        matrix = EmbeddingMatrix(
            rows=ckpt.arrays["embedding.rows"],
            trainable=bool(hp.get("embedding_trainable")),
            source=str(hp.get("embedding_mode")),
        )
        if int(data.sequences.max(initial=0)) >= matrix.rows.shape[0]:
            raise DataError("data contains indices outside the checkpoint vocabulary")
    elif not isinstance(data, SineDataset):
        raise DataError("checkpoint task is sine but data is not a sine dataset")

    if ckpt.model == "lstm":
        params = lstm_params_from_arrays(ckpt.arrays)
    else:
        params = qlstm_params_from_arrays(
            ckpt.arrays, bool(ckpt.hyperparameters.get("sigma_hidden", True))
        )
    preds = predictions_over(ckpt.model, ckpt.task, params, data, matrix)

    if ckpt.task == "classify":
        predicted = (preds >= threshold).astype(int)
        actual = np.asarray(data.labels, dtype=int)
        cm = ConfusionMatrix(
            tp=int(np.sum((predicted == 1) & (actual == 1))),
            fp=int(np.sum((predicted == 1) & (actual == 0))),
            tn=int(np.sum((predicted == 0) & (actual == 0))),
            fn=int(np.sum((predicted == 0) & (actual == 1))),
        )
        report = metrics(cm)
    else:
        report = MetricsReport(mse=float(np.mean((preds - data.targets) ** 2)))
    report.predictions = preds
    report.parameter_count = runtime_census(
        ckpt.arrays, bool(ckpt.hyperparameters.get("embedding_trainable"))
    )
    report.wall_time_seconds = time.perf_counter() - started
    return report
