"""Training loops, metrics, parameter census, and checkpoint/report
persistence."""
from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from qvuln.corpus import Vocabulary
from qvuln.embedding import build_embedding_matrix
from qvuln.errors import CheckpointError, DataError, DivergenceError
from qvuln.neural import init_lstm_params
from qvuln.qlstm import init_qlstm_params
from qvuln.trainer import (
    Checkpoint,
    ClassifyDataset,
    ConfusionMatrix,
    TrainConfig,
    analytic_census,
    embedding_census,
    evaluate,
    load_checkpoint,
    load_curves,
    load_metrics,
    lstm_census,
    metrics,
    qlstm_census,
    runtime_census,
    save_checkpoint,
    save_curves,
    save_metrics,
    sine_task,
    train,
)


def brute_metrics(tp: int, fp: int, tn: int, fn: int) -> tuple[float, float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total > 0 else 0.0
    return accuracy, precision, recall, f1


def tiny_classify_dataset(n_per_class: int = 5, max_len: int = 3) -> tuple[Vocabulary, ClassifyDataset]:
    vocab = Vocabulary(tokens=["hot", "cold"])
    rows = []
    labels = []
    for _ in range(n_per_class):
        rows.append([2, 2, 0][:max_len])
        labels.append(1)
        rows.append([3, 3, 0][:max_len])
        labels.append(0)
    return vocab, ClassifyDataset(
        sequences=np.array(rows, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        max_len=max_len,
        vocab_digest=vocab.digest(),
    )


class TestMetrics:
    def test_textbook_example(self):
        report = metrics(ConfusionMatrix(tp=9, fp=1, tn=8, fn=2))
        assert report.precision == 0.9
        assert abs(report.recall - 9 / 11) < 1e-15
        assert report.accuracy == 0.85
        assert abs(report.f1 - 6 / 7) < 1e-15
        assert report.warnings == []

    def test_degenerate_denominators(self):
        report = metrics(ConfusionMatrix(tp=0, fp=0, tn=10, fn=0))
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.accuracy == 1.0
        assert "precision" in report.warnings
        assert "recall" in report.warnings

    def test_exhaustive_against_brute_force(self):
        for tp in range(6):
            for fp in range(6):
                for tn in range(6):
                    for fn in range(6):
                        report = metrics(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
                        accuracy, precision, recall, f1 = brute_metrics(tp, fp, tn, fn)
                        assert report.accuracy == accuracy
                        assert report.precision == precision
                        assert report.recall == recall
                        assert report.f1 == f1

    def test_total(self):
        assert ConfusionMatrix(tp=1, fp=2, tn=3, fn=4).total == 10


class TestSineTask:
    def test_quarter_period_values(self):
        data = sine_task(n_points=4, window=1)
        np.testing.assert_allclose(data.targets, [0.0, 1.0, 0.0, -1.0], atol=1e-12)
        # input of sample j is the previous point, wrapping at the start
        np.testing.assert_allclose(data.inputs[:, 0, 0], [-1.0, 0.0, 1.0, 0.0], atol=1e-12)
        assert data.inputs.shape == (4, 1, 1)

    def test_targets_bounded(self):
        data = sine_task(n_points=50, window=5)
        assert np.all(np.abs(data.targets) <= 1.0)

    def test_reproducible(self):
        a = sine_task(100, 4)
        b = sine_task(100, 4)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.xs, b.xs)

    def test_invalid_sizes(self):
        with pytest.raises(DataError):
            sine_task(4, 4)
        with pytest.raises(DataError):
            sine_task(10, 0)


class TestTrainConfig:
    def test_task_defaults(self):
        sine = TrainConfig(model="qlstm", task="sine")
        assert sine.epochs == 30 and sine.lr == 1e-2
        classify = TrainConfig(model="lstm", task="classify")
        assert classify.epochs == 10 and classify.lr == 1e-3

    def test_validation(self):
        with pytest.raises(DataError):
            TrainConfig(model="gru", task="sine")
        with pytest.raises(DataError):
            TrainConfig(model="lstm", task="regress")
        with pytest.raises(DataError):
            TrainConfig(model="lstm", task="sine", epochs=0)
        with pytest.raises(DataError):
            TrainConfig(model="lstm", task="sine", batch_size=0)
        with pytest.raises(DataError):
            TrainConfig(model="lstm", task="sine", threshold=1.0)


class TestTrain:
    def test_zero_lr_is_a_no_op(self):
        data = sine_task(n_points=12, window=2)
        config = dict(model="lstm", task="sine", lr=0.0, batch_size=1000, seed=3, hidden=4)
        one, report_one = train(TrainConfig(epochs=1, **config), data)
        five, report_five = train(TrainConfig(epochs=5, **config), data)
        for name, arr in one.arrays.items():
            np.testing.assert_array_equal(arr, five.arrays[name])
        assert len(report_five.loss_curve) == 5
        # per-epoch means differ only by shuffled summation order
        first = report_five.loss_curve[0]
        assert all(math.isclose(v, first, rel_tol=1e-12) for v in report_five.loss_curve)
        assert report_one.loss_curve[0] == first

    def test_loss_curve_deterministic(self):
        data = sine_task(n_points=16, window=2)
        config = TrainConfig(model="qlstm", task="sine", epochs=2, seed=11, batch_size=4)
        _, first = train(config, data)
        _, second = train(TrainConfig(model="qlstm", task="sine", epochs=2, seed=11, batch_size=4), data)
        assert first.loss_curve == second.loss_curve

    def test_divergence_guard(self):
        data = sine_task(n_points=12, window=2)
        config = TrainConfig(model="lstm", task="sine", epochs=10, lr=1e160, seed=1, hidden=4)
        with pytest.raises(DivergenceError), np.errstate(all="ignore"):
            train(config, data)

    def test_classify_training_moves_loss(self):
        vocab, data = tiny_classify_dataset()
        matrix = build_embedding_matrix(vocab, [], "basic", seed=5, d_basic=4)
        config = TrainConfig(
            model="lstm", task="classify", epochs=8, batch_size=4, seed=5, hidden=6, lr=0.05
        )
        ckpt, report = train(config, data, matrix=matrix, vocab_digest=data.vocab_digest)
        assert report.loss_curve[-1] < report.loss_curve[0]
        assert "embedding.rows" in ckpt.arrays
        assert ckpt.vocab_digest == data.vocab_digest
        assert report.accuracy == 1.0
        # padding row stays pinned through trainable-embedding updates
        np.testing.assert_array_equal(ckpt.arrays["embedding.rows"][0], np.zeros(4))

    def test_empty_data_rejected(self):
        with pytest.raises(DataError):
            train(
                TrainConfig(model="lstm", task="classify", hidden=2),
                ClassifyDataset(
                    sequences=np.zeros((0, 3), dtype=np.int64),
                    labels=np.zeros(0, dtype=np.int64),
                    max_len=3,
                    vocab_digest="",
                ),
                matrix=build_embedding_matrix(Vocabulary(tokens=["a"]), [], "basic", seed=0, d_basic=2),
            )


class TestCensus:
    def test_lstm_formula_matches_runtime(self):
        for hidden, d_in in ((3, 2), (6, 50)):
            params = init_lstm_params(hidden, d_in, np.random.default_rng(0))
            assert runtime_census(params.tree(), False) == lstm_census(hidden, d_in)
        assert lstm_census(6, 50) == 4 * (6 * 56 + 6) + 6 + 1

    def test_qlstm_formula_matches_runtime(self):
        for d_x in (1, 4, 50):
            params = init_qlstm_params(d_x, np.random.default_rng(0))
            assert runtime_census(params.tree(), False) == qlstm_census(d_x)
        assert qlstm_census(1) == 4 * (4 * 5 + 30) + 2 * (4 * 4 + 30) + 5

    def test_embedding_census_skips_padding_row(self):
        assert embedding_census(102, 50) == 101 * 50
        rows = np.zeros((10, 3))
        arrays = {"embedding.rows": rows, "w": np.zeros(7)}
        assert runtime_census(arrays, True) == 9 * 3 + 7
        assert runtime_census(arrays, False) == 7

    def test_analytic_matches_trained_checkpoints(self, tmp_path):
        vocab, data = tiny_classify_dataset()
        matrix = build_embedding_matrix(vocab, [], "basic", seed=2, d_basic=3)
        ckpt, report = train(
            TrainConfig(model="lstm", task="classify", epochs=1, seed=2, hidden=3),
            data, matrix=matrix, vocab_digest=data.vocab_digest,
        )
        assert analytic_census(ckpt) == report.parameter_count
        sine_ckpt, sine_report = train(
            TrainConfig(model="qlstm", task="sine", epochs=1, seed=2, batch_size=8),
            sine_task(10, 2),
        )
        assert analytic_census(sine_ckpt) == sine_report.parameter_count
        assert analytic_census(sine_ckpt) == qlstm_census(1)


class TestCheckpointFiles:
    def make_checkpoint(self) -> Checkpoint:
        rng = np.random.default_rng(8)
        return Checkpoint(
            model="lstm",
            task="sine",
            hyperparameters={"hidden": 2, "d_in": 1, "lr": 0.01},
            vocab_digest=None,
            arrays={
                "w": rng.uniform(-1, 1, size=(2, 3)),
                "b": rng.uniform(-1, 1, size=2),
                "scalar": np.array(math.pi),
            },
        )

    def test_round_trip_bitwise(self, tmp_path):
        ckpt = self.make_checkpoint()
        path = tmp_path / "model.json"
        save_checkpoint(ckpt, path)
        again = load_checkpoint(path)
        assert again.model == ckpt.model
        assert again.task == ckpt.task
        assert again.hyperparameters == ckpt.hyperparameters
        for name, arr in ckpt.arrays.items():
            assert again.arrays[name].shape == arr.shape
            assert np.array_equal(again.arrays[name], arr)

    def test_save_is_byte_stable(self, tmp_path):
        ckpt = self.make_checkpoint()
        save_checkpoint(ckpt, tmp_path / "a.json")
        save_checkpoint(ckpt, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_tampered_version_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        save_checkpoint(self.make_checkpoint(), path)
        text = path.read_text().replace('"version": 1', '"version": 99')
        path.write_text(text)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)


class TestEvaluate:
    def perfect_checkpoint(self) -> tuple[Checkpoint, ClassifyDataset]:
        _, data = tiny_classify_dataset(n_per_class=10, max_len=1)
        hidden = 1
        arrays = {
            "w_f": np.zeros((hidden, 2)),
            "w_i": np.zeros((hidden, 2)),
            "w_c": np.array([[0.0, 1.0]]),
            "w_o": np.zeros((hidden, 2)),
            "b_f": np.zeros(hidden),
            "b_i": np.array([20.0]),
            "b_c": np.zeros(hidden),
            "b_o": np.array([20.0]),
            "head_w": np.array([10.0]),
            "head_b": np.array(0.0),
            "embedding.rows": np.array([[0.0], [0.0], [10.0], [-10.0]]),
        }
        ckpt = Checkpoint(
            model="lstm",
            task="classify",
            hyperparameters={
                "hidden": hidden, "d_in": 1, "max_len": 1,
                "embedding_mode": "basic", "embedding_trainable": True,
            },
            vocab_digest=data.vocab_digest,
            arrays=arrays,
        )
        return ckpt, data

    def test_perfect_predictor(self):
        ckpt, data = self.perfect_checkpoint()
        report = evaluate(ckpt, data)
        assert report.accuracy == 1.0
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.f1 == 1.0
        assert report.confusion.total == 20

    def test_constant_half_predictor_threshold_rule(self):
        ckpt, data = self.perfect_checkpoint()
        for name in ("w_c", "b_i", "b_o", "head_w"):
            ckpt.arrays[name] = np.zeros_like(ckpt.arrays[name])
        # 12 positives, 8 negatives; probability is exactly 0.5 everywhere
        data.labels[:] = 0
        data.labels[:12] = 1
        report = evaluate(ckpt, data, threshold=0.5)
        assert report.recall == 1.0
        assert report.accuracy == 0.6
        assert report.confusion.fp == 8 and report.confusion.fn == 0

    def test_max_len_mismatch(self):
        ckpt, data = self.perfect_checkpoint()
        bad = ClassifyDataset(
            sequences=np.zeros((2, 5), dtype=np.int64),
            labels=np.array([0, 1]),
            max_len=5,
            vocab_digest=data.vocab_digest,
        )
        with pytest.raises(DataError, match="max_len"):
            evaluate(ckpt, bad)

    def test_digest_mismatch_warns(self, caplog):
        ckpt, data = self.perfect_checkpoint()
        data.vocab_digest = "0" * 64
        with caplog.at_level(logging.WARNING):
            evaluate(ckpt, data)
        assert any("digest" in record.message for record in caplog.records)

    def test_out_of_vocabulary_index_rejected(self):
        ckpt, data = self.perfect_checkpoint()
        data.sequences[0, 0] = 99
        with pytest.raises(DataError, match="indices"):
            evaluate(ckpt, data)

    def test_task_dataset_type_mismatch(self):
        ckpt, data = self.perfect_checkpoint()
        with pytest.raises(DataError):
            evaluate(ckpt, sine_task(10, 2))

    def test_sine_mse_matches_predictions(self):
        data = sine_task(n_points=10, window=2)
        ckpt, _ = train(
            TrainConfig(model="lstm", task="sine", epochs=1, seed=4, hidden=3, batch_size=4),
            data,
        )
        report = evaluate(ckpt, data)
        recomputed = float(np.mean((report.predictions - data.targets) ** 2))
        assert report.mse == recomputed


class TestReportFiles:
    def test_classify_metrics_round_trip(self, tmp_path):
        report = metrics(ConfusionMatrix(tp=9, fp=1, tn=8, fn=2))
        report.wall_time_seconds = 1.25
        report.parameter_count = 321
        report.loss_curve = [0.7, 0.5, 0.4]
        path = tmp_path / "metrics.json"
        save_metrics(report, "classify", path)
        doc = load_metrics(path)
        assert doc["accuracy"] == report.accuracy
        assert doc["f1"] == report.f1
        assert doc["tp"] == 9 and doc["fn"] == 2
        assert doc["parameter_count"] == 321
        assert doc["loss_curve"] == report.loss_curve

    def test_sine_metrics_round_trip(self, tmp_path):
        report = metrics(ConfusionMatrix())
        report.mse = 0.0123
        report.loss_curve = [0.3]
        path = tmp_path / "metrics.json"
        save_metrics(report, "sine", path)
        doc = load_metrics(path)
        assert doc["mse"] == 0.0123

    def test_curves_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(6)
        blocks = {
            1: (rng.uniform(0, 7, 10), rng.uniform(-1, 1, 10), rng.uniform(-1, 1, 10)),
            30: (rng.uniform(0, 7, 10), rng.uniform(-1, 1, 10), rng.uniform(-1, 1, 10)),
        }
        path = tmp_path / "curves.txt"
        save_curves(blocks, path)
        again = load_curves(path)
        assert set(again) == {1, 30}
        for epoch in blocks:
            for a, b in zip(blocks[epoch], again[epoch]):
                assert np.array_equal(a, b)
