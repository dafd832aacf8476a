"""Metrics, batch evaluation, transfer protocols and correlations."""

import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest

from advglyph.attack import AttackConfig, AttackOutcome, outcome_to_dict, run_attack
from advglyph.errors import ConfigError, EmptyReportError
from advglyph.evaluate import (
    ExperimentConfig,
    correct_prefix,
    correlation_analysis,
    derive_seed,
    evaluate_attack,
    iou_topk,
    per_input_csv,
    report_to_csv,
    report_to_json,
    split_dataset,
    transfer_classifiers,
    transfer_interpreters,
)
from advglyph.interpret import InterpretationMap, InterpreterConfig
from advglyph.models import TrainConfig, predict, train
from advglyph.textcore import Dataset, HomoglyphTable

from conftest import zero_linear


def _map(scores):
    scores = np.asarray(scores, dtype=float)
    toks = tuple(f"t{i}" for i in range(len(scores)))
    return InterpretationMap(toks, scores, "lime", 0, " ".join(toks))


_FAST_ATTACK = AttackConfig(char_budget=4, similarity_threshold=0.3)
_FAST_INTERP = InterpreterConfig(sample_count=64, seed=0)


def _small_config(**kw):
    base = dict(
        classifiers=("linear",),
        interpreters=("saliency",),
        attacks=("glyph",),
        sample_cap=10,
        master_seed=0,
        attack=_FAST_ATTACK,
        interpreter=_FAST_INTERP,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestIouTopK:
    def test_identical_maps_all_k(self):
        m = _map([0.9, 0.2, 0.5, 0.7])
        for k in range(1, 5):
            assert iou_topk(m, m, k) == 1.0

    def test_disjoint_top_sets(self):
        a = _map([1.0, 0.9, 0.1, 0.0])
        b = _map([0.0, 0.1, 0.9, 1.0])
        assert iou_topk(a, b, 2) == 0.0

    def test_partial_overlap(self):
        a = _map([3.0, 2.0, 1.0, 0.0, -1.0])  # top-3 {0,1,2}
        b = _map([3.0, 2.0, -1.0, 1.0, 0.0])  # top-3 {0,1,3}
        assert iou_topk(a, b, 3) == pytest.approx(2 / 4)

    def test_k_out_of_range(self):
        m = _map([1.0, 0.5])
        with pytest.raises(ValueError):
            iou_topk(m, m, 0)
        with pytest.raises(ValueError):
            iou_topk(m, m, 3)

    def test_randomized_properties(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            n = int(rng.integers(1, 10))
            a, b = _map(rng.normal(size=n)), _map(rng.normal(size=n))
            k = int(rng.integers(1, n + 1))
            v = iou_topk(a, b, k)
            assert v == iou_topk(b, a, k)
            assert 0.0 <= v <= 1.0
            assert iou_topk(a, a, k) == 1.0
            # Independent set-arithmetic oracle from the rank orders.
            ta = set(np.argsort(-a.scores, kind="stable")[:k])
            tb = set(np.argsort(-b.scores, kind="stable")[:k])
            assert v == pytest.approx(len(ta & tb) / len(ta | tb))


class TestSeedsAndSplits:
    def test_derive_seed_deterministic_and_spread(self):
        seeds = [derive_seed(0, i) for i in range(50)]
        assert seeds == [derive_seed(0, i) for i in range(50)]
        assert len(set(seeds)) == 50
        assert derive_seed(1, 0) != derive_seed(0, 0)

    def test_split_dataset_partition(self, train_set):
        a, b = split_dataset(train_set, 0.7, 3)
        assert len(a) == int(0.7 * len(train_set))
        assert len(a) + len(b) == len(train_set)
        assert sorted(a.records + b.records) == sorted(train_set.records)
        a2, b2 = split_dataset(train_set, 0.7, 3)
        assert a.records == a2.records and b.records == b2.records
        a3, _ = split_dataset(train_set, 0.7, 4)
        assert a3.records != a.records

    def test_correct_prefix(self, linear_model, test_set):
        chosen = correct_prefix(linear_model, test_set, 25)
        assert len(chosen) == 25
        indices = [i for i, _, _ in chosen]
        assert indices == sorted(indices)
        for i, text, label in chosen:
            assert test_set.records[i] == (text, label)
            assert predict(linear_model, text).label == label


class TestEvaluateAttack:
    def test_report_matches_trace_replay(self, linear_model, corpus):
        train_ds, eval_ds = corpus
        config = _small_config()
        report = evaluate_attack(
            config, models={"linear": linear_model},
            train_dataset=train_ds, eval_dataset=eval_ds,
        )
        cell = report.cells["linear/saliency/glyph"]
        outcomes = report.outcomes["linear/saliency/glyph"]
        inputs = correct_prefix(linear_model, eval_ds, 10)
        assert cell.n_attempted == len(inputs) == 10
        # Replay every attack independently and recompute the aggregates.
        replayed = []
        for index, text, label in inputs:
            seed = derive_seed(0, index)
            replayed.append(
                run_attack(
                    "glyph", linear_model, "saliency", text, label,
                    replace(_FAST_ATTACK, seed=seed),
                    replace(_FAST_INTERP, seed=seed),
                )
            )
        assert [outcome_to_dict(o) for o in outcomes] == [
            outcome_to_dict(o) for o in replayed
        ]
        succ = [o for o in replayed if o.success]
        assert cell.n_succeeded == len(succ)
        assert cell.asr == pytest.approx(len(succ) / len(replayed))
        if succ:
            assert cell.mean_pa == pytest.approx(
                float(np.mean([o.perturbed_chars for o in succ]))
            )
            assert cell.mean_mc == pytest.approx(
                float(np.mean([o.misclassification_confidence for o in succ]))
            )

    def test_byte_identical_reruns(self, linear_model, corpus):
        train_ds, eval_ds = corpus
        config = _small_config()
        kw = dict(models={"linear": linear_model},
                  train_dataset=train_ds, eval_dataset=eval_ds)
        a = report_to_json(evaluate_attack(config, **kw))
        b = report_to_json(evaluate_attack(config, **kw))
        assert a == b

    def test_always_failing_attack(self, linear_model, corpus):
        train_ds, eval_ds = corpus
        # A table whose only key appears nowhere in the corpus leaves the
        # random attack with no substitutable characters at all.
        table = HomoglyphTable({"ß": ("β",)})
        config = _small_config(
            attacks=("random",), attack=replace(_FAST_ATTACK, table=table)
        )
        report = evaluate_attack(
            config, models={"linear": linear_model},
            train_dataset=train_ds, eval_dataset=eval_ds,
        )
        cell = report.cells["linear/saliency/random"]
        assert cell.asr == 0.0
        assert cell.n_succeeded == 0
        assert cell.mean_mc is None
        assert cell.mean_pa is None
        assert cell.mean_iou is None

    def test_empty_report_error(self, corpus):
        train_ds, _ = corpus
        all_positive = Dataset(
            tuple((t, 1) for t, _ in train_ds.records[:8]), 2, train_ds.class_names
        )
        with pytest.raises(EmptyReportError):
            evaluate_attack(
                _small_config(),
                models={"linear": zero_linear()},  # predicts label 0 everywhere
                train_dataset=train_ds,
                eval_dataset=all_positive,
            )

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            _small_config(classifiers=("quantum",))
        with pytest.raises(ConfigError):
            _small_config(interpreters=("gradcam",))
        with pytest.raises(ConfigError):
            _small_config(sample_cap=0)
        with pytest.raises(ConfigError):
            _small_config(iou_top_k_fraction=0.0)
        with pytest.raises(ConfigError):
            _small_config(dataset_path="x.csv", train_path="y.csv", eval_path="z.csv")
        with pytest.raises(ConfigError):
            _small_config(train_path="y.csv")

    def test_csv_outputs(self, linear_model, corpus):
        train_ds, eval_ds = corpus
        report = evaluate_attack(
            _small_config(), models={"linear": linear_model},
            train_dataset=train_ds, eval_dataset=eval_ds,
        )
        rows = list(csv.reader(io.StringIO(report_to_csv(report))))
        assert rows[0][:6] == [
            "classifier", "interpreter", "attack", "n_attempted", "n_succeeded", "asr",
        ]
        assert len(rows) == 2
        cell = report.cells["linear/saliency/glyph"]
        per_input = list(csv.reader(io.StringIO(per_input_csv(cell))))
        assert per_input[0] == ["tl", "mc", "qc_attack", "qc_interp", "pa", "success"]
        assert len(per_input) == 1 + cell.n_attempted


@pytest.fixture(scope="module")
def glyph_outcomes(linear_model, corpus):
    train_ds, eval_ds = corpus
    config = _small_config(
        interpreters=("lime",), sample_cap=12,
        interpreter=InterpreterConfig(sample_count=200, seed=0),
    )
    report = evaluate_attack(
        config, models={"linear": linear_model},
        train_dataset=train_ds, eval_dataset=eval_ds,
    )
    cell = report.cells["linear/lime/glyph"]
    return report.outcomes["linear/lime/glyph"], cell, config


class TestTransfer:
    def test_same_interpreter_reproduces_source_iou(
        self, glyph_outcomes, linear_model
    ):
        outcomes, cell, config = glyph_outcomes
        result = transfer_interpreters(
            outcomes, "lime", linear_model, config.interpreter,
            config.iou_top_k_fraction,
        )
        assert result["n"] == cell.n_succeeded
        if cell.n_succeeded:
            assert result["mean_iou"] == pytest.approx(cell.mean_iou)

    def test_cross_interpreter_bounds(self, glyph_outcomes, linear_model):
        outcomes, cell, config = glyph_outcomes
        result = transfer_interpreters(outcomes, "saliency", linear_model,
                                       config.interpreter)
        assert result["n"] == cell.n_succeeded
        if result["mean_iou"] is not None:
            assert 0.0 <= result["mean_iou"] <= 1.0

    def test_identical_target_classifier(self, glyph_outcomes, linear_model):
        outcomes, cell, _ = glyph_outcomes
        result = transfer_classifiers(outcomes, linear_model,
                                      {"clone": linear_model})
        clone = result["clone"]
        assert clone["n_source_successes"] == cell.n_succeeded
        # The clone misreads every source success the same way.
        assert clone["n_evaluated"] == cell.n_succeeded
        if cell.n_succeeded:
            assert clone["asr"] == 1.0

    def test_cross_classifier_re_prediction_oracle(
        self, glyph_outcomes, linear_model, train_set
    ):
        outcomes, _, _ = glyph_outcomes
        other = train(train_set, "linear", TrainConfig(epochs=20, seed=99))
        result = transfer_classifiers(outcomes, linear_model, {"other": other})
        flips = evaluated = 0
        for o in outcomes:
            if not (o.success and o.adversarial_text):
                continue
            if predict(other, o.benign_text).label != o.benign_label:
                continue
            evaluated += 1
            flips += predict(other, o.adversarial_text).label != o.benign_label
        assert result["other"]["n_evaluated"] == evaluated
        if evaluated:
            assert result["other"]["asr"] == pytest.approx(flips / evaluated)

    def test_label_space_mismatch(self, glyph_outcomes, linear_model):
        outcomes, _, _ = glyph_outcomes
        three_way = zero_linear(label_count=3)
        with pytest.raises(ConfigError):
            transfer_classifiers(outcomes, linear_model, {"bad": three_way})


def _mk_outcome(tl, mc, qc, pa, success=True):
    return AttackOutcome(
        attack_id="glyph",
        interpreter_id="lime",
        success=success,
        benign_text=" ".join(["w"] * tl),
        benign_label=0,
        adversarial_text="x",
        final_label=1,
        misclassification_confidence=mc,
        attack_queries=qc,
        interpreter_queries=0,
        perturbed_chars=pa,
        final_similarity=0.0,
        similarity_threshold=0.3,
        similarity_enforced=True,
        seed=0,
        steps=(),
    )


def _pearson(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    am, bm = a - a.mean(), b - b.mean()
    return float((am * bm).sum() / math.sqrt((am**2).sum() * (bm**2).sum()))


def _ranks(a):
    order = np.argsort(a, kind="stable")
    ranks = np.empty(len(a))
    i = 0
    a = np.asarray(a, float)
    sorted_a = a[order]
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


class TestCorrelationAnalysis:
    def test_textbook_formula_oracle(self):
        rows = [(5, 80.0, 12, 1), (8, 70.0, 20, 2), (11, 90.0, 25, 2),
                (14, 60.0, 31, 3), (17, 95.0, 40, 4)]
        outcomes = [_mk_outcome(*r) for r in rows]
        got = correlation_analysis(outcomes)
        assert got["n"] == 5
        cols = {
            "tl": [r[0] for r in rows],
            "mc": [r[1] for r in rows],
            "qc": [r[2] for r in rows],
            "pa": [r[3] for r in rows],
        }
        assert _pearson(cols["tl"], cols["tl"]) == pytest.approx(1.0)
        for key, pair in got["pairs"].items():
            fa, fb = key.split("_")
            assert pair["pearson"] == pytest.approx(_pearson(cols[fa], cols[fb]))
            assert pair["spearman"] == pytest.approx(
                _pearson(_ranks(cols[fa]), _ranks(cols[fb]))
            )

    def test_zero_variance_column_absent(self):
        outcomes = [_mk_outcome(tl, 75.0, 10 + tl, 1 + tl % 2) for tl in (4, 7, 9, 12)]
        got = correlation_analysis(outcomes)
        for key, pair in got["pairs"].items():
            if "mc" in key.split("_"):
                assert pair["pearson"] is None
                assert pair["spearman"] is None
            else:
                assert pair["pearson"] is not None

    def test_failures_excluded_and_minimum_enforced(self):
        outcomes = [_mk_outcome(5, 80.0, 10, 1), _mk_outcome(6, 70.0, 11, 2),
                    _mk_outcome(7, 60.0, 12, 3, success=False)]
        with pytest.raises(ValueError):
            correlation_analysis(outcomes)
