"""Batch evaluation: success/stealth metrics, transfer protocols, correlations.

An experiment is a grid of (classifier, interpreter, attack) cells run over
the correctly-classified prefix of an evaluation set. Per-input seeds are
derived from the master seed and the input's position, so reruns of the same
configuration are byte-identical and every cell sees the same inputs with the
same randomness.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as _scipy_stats

from .attack import ATTACK_IDS, AttackConfig, AttackOutcome, run_attack
from .errors import AlignmentError, ConfigError, EmptyReportError
from .interpret import (
    INTERPRETER_IDS,
    InterpretationMap,
    InterpreterConfig,
    explain,
    normalize_scores,
    rank_tokens,
)
from .models import (
    FeatureConfig,
    ModelParams,
    QueryLedger,
    TrainConfig,
    predict,
    train,
)
from .textcore import Dataset, fnv1a64, load_dataset, tokenize

CLASSIFIER_KINDS = ("linear", "mlp")

REPORT_VERSION = "advreport/1"

PER_INPUT_COLUMNS = ("tl", "mc", "qc_attack", "qc_interp", "pa", "success")


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-input seed: a hash of the master seed and input position."""
    return fnv1a64(f"{master_seed}:{index}".encode("ascii")) & 0x7FFFFFFF


def split_dataset(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-and-split; the first share has floor(fraction * N) records."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    cut = int(fraction * len(dataset))
    first = tuple(dataset.records[i] for i in order[:cut])
    second = tuple(dataset.records[i] for i in order[cut:])
    return (
        Dataset(first, dataset.label_count, dataset.class_names),
        Dataset(second, dataset.label_count, dataset.class_names),
    )


def iou_topk(a: InterpretationMap, b: InterpretationMap, k: int) -> float:
    """Jaccard overlap of the two maps' top-k token index sets."""
    n = len(a)
    if n != len(b):
        raise AlignmentError(f"maps cover {n} and {len(b)} tokens")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    top_a = set(rank_tokens(a)[:k])
    top_b = set(rank_tokens(b)[:k])
    return len(top_a & top_b) / len(top_a | top_b)


def _top_k(iou_fraction: float, n_tokens: int) -> int:
    return max(1, math.ceil(iou_fraction * n_tokens))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an evaluation run depends on, seeds included."""

    classifiers: tuple[str, ...] = ("linear",)
    interpreters: tuple[str, ...] = ("saliency",)
    attacks: tuple[str, ...] = ("glyph",)
    train_path: str | None = None
    eval_path: str | None = None
    dataset_path: str | None = None
    train_fraction: float = 0.7
    sample_cap: int = 100
    master_seed: int = 0
    iou_top_k_fraction: float = 0.2
    attack: AttackConfig = field(default_factory=AttackConfig)
    interpreter: InterpreterConfig = field(default_factory=InterpreterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self) -> None:
        for kind in self.classifiers:
            if kind not in CLASSIFIER_KINDS:
                raise ConfigError(f"unknown classifier {kind!r}")
        for interp in self.interpreters:
            if interp not in INTERPRETER_IDS:
                raise ConfigError(f"unknown interpreter {interp!r}")
        for atk in self.attacks:
            if atk not in ATTACK_IDS:
                raise ConfigError(f"unknown attack {atk!r}")
        if not (self.classifiers and self.interpreters and self.attacks):
            raise ConfigError("need at least one classifier, interpreter and attack")
        if self.sample_cap < 1:
            raise ConfigError("sample_cap must be >= 1")
        if not 0.0 < self.iou_top_k_fraction <= 1.0:
            raise ConfigError("iou_top_k_fraction must be in (0, 1]")
        if self.dataset_path and (self.train_path or self.eval_path):
            raise ConfigError("give either dataset_path or train_path/eval_path, not both")
        if (self.train_path is None) != (self.eval_path is None):
            raise ConfigError("train_path and eval_path must be given together")


@dataclass
class CellReport:
    """Aggregated metrics for one (classifier, interpreter, attack) cell."""

    classifier: str
    interpreter: str
    attack: str
    n_attempted: int
    n_succeeded: int
    asr: float
    mean_attack_queries: float
    median_attack_queries: float
    mean_interpreter_queries: float
    median_interpreter_queries: float
    mean_mc: float | None
    mean_pa: float | None
    mean_iou: float | None
    rows: list[dict] = field(default_factory=list)


@dataclass
class ExperimentReport:
    config: dict
    cells: dict[str, CellReport]
    n_eval_records: int
    label_count: int
    outcomes: dict[str, list[AttackOutcome]] = field(default_factory=dict)


def _attack_config_dict(c: AttackConfig) -> dict:
    return {
        "similarity_threshold": c.similarity_threshold,
        "char_budget": c.char_budget,
        "policy": c.policy.strategy.value,
        "resim_every": c.resim_every,
        "seed": c.seed,
        "table": "default" if c.table is None else "custom",
    }


def _interpreter_config_dict(c: InterpreterConfig) -> dict:
    return {
        "sample_count": c.sample_count,
        "kernel_width": c.kernel_width,
        "ridge_lambda": c.ridge_lambda,
        "seed": c.seed,
        "mask_mode": c.mask_mode,
    }


def _train_config_dict(c: TrainConfig) -> dict:
    return {
        "epochs": c.epochs,
        "learning_rate": c.learning_rate,
        "l2": c.l2,
        "batch_size": c.batch_size,
        "seed": c.seed,
        "hidden": c.hidden,
    }


def _feature_config_dict(c: FeatureConfig) -> dict:
    return {"ngram_min": c.ngram_min, "ngram_max": c.ngram_max, "dim": c.dim}


def experiment_config_dict(config: ExperimentConfig) -> dict:
    return {
        "classifiers": list(config.classifiers),
        "interpreters": list(config.interpreters),
        "attacks": list(config.attacks),
        "train_path": config.train_path,
        "eval_path": config.eval_path,
        "dataset_path": config.dataset_path,
        "train_fraction": config.train_fraction,
        "sample_cap": config.sample_cap,
        "master_seed": config.master_seed,
        "iou_top_k_fraction": config.iou_top_k_fraction,
        "attack": _attack_config_dict(config.attack),
        "interpreter": _interpreter_config_dict(config.interpreter),
        "train": _train_config_dict(config.train),
        "features": _feature_config_dict(config.features),
    }


def run_cell(
    model: ModelParams,
    interpreter_id: str,
    attack_id: str,
    inputs: list[tuple[int, str, int]],
    attack_config: AttackConfig,
    interpreter_config: InterpreterConfig,
    master_seed: int,
    iou_fraction: float,
    classifier_id: str = "",
) -> tuple[CellReport, list[AttackOutcome]]:
    """Attack every (index, text, label) input and aggregate the cell metrics.

    Query-cost means and medians run over all attempted inputs; confidence,
    perturbation size and interpretation overlap are success-conditioned and
    absent when nothing succeeded.
    """
    outcomes: list[AttackOutcome] = []
    rows: list[dict] = []
    ious: list[float] = []
    for index, text, label in inputs:
        seed = derive_seed(master_seed, index)
        outcome = run_attack(
            attack_id, model, interpreter_id, text, label,
            replace(attack_config, seed=seed),
            replace(interpreter_config, seed=seed),
        )
        outcomes.append(outcome)
        if outcome.success and outcome.benign_map is not None and outcome.final_map is not None:
            k = _top_k(iou_fraction, len(outcome.benign_map))
            ious.append(iou_topk(outcome.benign_map, outcome.final_map, k))
        rows.append(
            {
                "tl": len(tokenize(text)),
                "mc": outcome.misclassification_confidence,
                "qc_attack": outcome.attack_queries,
                "qc_interp": outcome.interpreter_queries,
                "pa": outcome.perturbed_chars,
                "success": outcome.success,
            }
        )
    succ = [o for o in outcomes if o.success]
    n_att, n_suc = len(outcomes), len(succ)
    qa = [o.attack_queries for o in outcomes]
    qi = [o.interpreter_queries for o in outcomes]
    report = CellReport(
        classifier=classifier_id,
        interpreter=interpreter_id,
        attack=attack_id,
        n_attempted=n_att,
        n_succeeded=n_suc,
        asr=n_suc / n_att,
        mean_attack_queries=float(np.mean(qa)),
        median_attack_queries=float(statistics.median(qa)),
        mean_interpreter_queries=float(np.mean(qi)),
        median_interpreter_queries=float(statistics.median(qi)),
        mean_mc=(
            float(np.mean([o.misclassification_confidence for o in succ])) if succ else None
        ),
        mean_pa=float(np.mean([o.perturbed_chars for o in succ])) if succ else None,
        mean_iou=float(np.mean(ious)) if ious else None,
        rows=rows,
    )
    return report, outcomes


def correct_prefix(
    model: ModelParams, dataset: Dataset, cap: int
) -> list[tuple[int, str, int]]:
    """First ``cap`` records the model classifies correctly, with positions."""
    chosen: list[tuple[int, str, int]] = []
    for index, (text, label) in enumerate(dataset.records):
        if predict(model, text).label == label:
            chosen.append((index, text, label))
            if len(chosen) >= cap:
                break
    return chosen


def evaluate_attack(
    config: ExperimentConfig,
    models: dict[str, ModelParams] | None = None,
    train_dataset: Dataset | None = None,
    eval_dataset: Dataset | None = None,
) -> ExperimentReport:
    """Run the full experiment grid described by ``config``.

    Datasets come from explicit arguments, a train/eval path pair, or a single
    dataset path split by the master seed. Models may be passed in
    pre-trained; missing ones are trained here. A classifier with zero
    correctly-classified evaluation inputs raises EmptyReportError.
    """
    train_ds, eval_ds = resolve_datasets(config, train_dataset, eval_dataset)
    models = dict(models) if models else {}
    for kind in config.classifiers:
        if kind not in models:
            if train_ds is None:
                raise ConfigError(f"no training data and no pre-trained {kind!r} model")
            models[kind] = train(train_ds, kind, config.train, config.features)

    cells: dict[str, CellReport] = {}
    outcomes: dict[str, list[AttackOutcome]] = {}
    for kind in config.classifiers:
        inputs = correct_prefix(models[kind], eval_ds, config.sample_cap)
        if not inputs:
            raise EmptyReportError(
                f"classifier {kind!r} classifies no evaluation input correctly"
            )
        for interp in config.interpreters:
            for atk in config.attacks:
                key = f"{kind}/{interp}/{atk}"
                cells[key], outcomes[key] = run_cell(
                    models[kind], interp, atk, inputs,
                    config.attack, config.interpreter,
                    config.master_seed, config.iou_top_k_fraction,
                    classifier_id=kind,
                )
    return ExperimentReport(
        config=experiment_config_dict(config),
        cells=cells,
        n_eval_records=len(eval_ds),
        label_count=eval_ds.label_count,
        outcomes=outcomes,
    )


def resolve_datasets(
    config: ExperimentConfig,
    train_dataset: Dataset | None = None,
    eval_dataset: Dataset | None = None,
) -> tuple[Dataset | None, Dataset]:
    """Materialize (train, eval) datasets from arguments or config paths."""
    if eval_dataset is not None:
        return train_dataset, eval_dataset
    if config.train_path:
        return load_dataset(config.train_path), load_dataset(config.eval_path)
    if config.dataset_path:
        whole = load_dataset(config.dataset_path)
        return split_dataset(whole, config.train_fraction, config.master_seed)
    raise ConfigError("no evaluation data: pass datasets or set paths in the config")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _cell_dict(cell: CellReport) -> dict:
    return {
        "classifier": cell.classifier,
        "interpreter": cell.interpreter,
        "attack": cell.attack,
        "n_attempted": cell.n_attempted,
        "n_succeeded": cell.n_succeeded,
        "asr": cell.asr,
        "mean_attack_queries": cell.mean_attack_queries,
        "median_attack_queries": cell.median_attack_queries,
        "mean_interpreter_queries": cell.mean_interpreter_queries,
        "median_interpreter_queries": cell.median_interpreter_queries,
        "mean_mc": cell.mean_mc,
        "mean_pa": cell.mean_pa,
        "mean_iou": cell.mean_iou,
    }


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "version": REPORT_VERSION,
        "config": report.config,
        "n_eval_records": report.n_eval_records,
        "label_count": report.label_count,
        "cells": {key: _cell_dict(report.cells[key]) for key in sorted(report.cells)},
    }


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, ensure_ascii=False, indent=2)


def report_to_csv(report: ExperimentReport) -> str:
    """Flat per-cell table; absent success-conditioned metrics render empty."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    head = (
        "classifier", "interpreter", "attack", "n_attempted", "n_succeeded", "asr",
        "mean_attack_queries", "median_attack_queries",
        "mean_interpreter_queries", "median_interpreter_queries",
        "mean_mc", "mean_pa", "mean_iou",
    )
    writer.writerow(head)
    for key in sorted(report.cells):
        d = _cell_dict(report.cells[key])
        writer.writerow(["" if d[col] is None else d[col] for col in head])
    return buf.getvalue()


def per_input_csv(cell: CellReport) -> str:
    """Per-input metric rows for one cell: tl,mc,qc_attack,qc_interp,pa,success."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(PER_INPUT_COLUMNS)
    for row in cell.rows:
        writer.writerow(
            [
                row["tl"],
                "" if row["mc"] is None else row["mc"],
                row["qc_attack"],
                row["qc_interp"],
                row["pa"],
                int(row["success"]),
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Transfer protocols
# ---------------------------------------------------------------------------


def transfer_interpreters(
    outcomes: list[AttackOutcome],
    target_interpreter_id: str,
    model: ModelParams,
    interpreter_config: InterpreterConfig | None = None,
    iou_fraction: float = 0.2,
) -> dict:
    """Re-explain each successful adversarial pair under another interpreter
    and report the mean top-k overlap. Seeds are taken from each outcome, so
    targeting the source interpreter reproduces the source overlaps exactly."""
    if target_interpreter_id not in INTERPRETER_IDS:
        raise ConfigError(f"unknown interpreter {target_interpreter_id!r}")
    icfg = interpreter_config or InterpreterConfig()
    ious: list[float] = []
    for outcome in outcomes:
        if not outcome.success or outcome.adversarial_text is None:
            continue
        benign_toks = tokenize(outcome.benign_text)
        adv_toks = tokenize(outcome.adversarial_text)
        if len(adv_toks) != len(benign_toks):
            raise AlignmentError(
                "interpreter transfer needs token-aligned adversarial text; "
                f"got {len(benign_toks)} vs {len(adv_toks)} tokens"
            )
        cfg = replace(icfg, seed=outcome.seed)
        ledger = QueryLedger()
        benign_map = normalize_scores(
            explain(target_interpreter_id, model, benign_toks, outcome.benign_label, cfg, ledger)
        )
        adv_map = normalize_scores(
            explain(target_interpreter_id, model, adv_toks, outcome.benign_label, cfg, ledger)
        )
        ious.append(iou_topk(benign_map, adv_map, _top_k(iou_fraction, len(benign_map))))
    return {
        "target_interpreter": target_interpreter_id,
        "n": len(ious),
        "mean_iou": float(np.mean(ious)) if ious else None,
    }


def transfer_classifiers(
    outcomes: list[AttackOutcome],
    source_model: ModelParams,
    targets: dict[str, ModelParams],
) -> dict:
    """Replay source-successful adversarial texts against other classifiers.

    For each target, inputs whose benign text the target already gets wrong
    are excluded; ASR is the flip rate on the rest and MC the mean confidence
    of the flipped predictions. Mismatched label spaces are refused.
    """
    results: dict[str, dict] = {}
    successes = [o for o in outcomes if o.success and o.adversarial_text is not None]
    for target_id in sorted(targets):
        target = targets[target_id]
        if target.label_count != source_model.label_count:
            raise ConfigError(
                f"target {target_id!r} has {target.label_count} labels, "
                f"source has {source_model.label_count}"
            )
        flips = []
        n_eval = 0
        for outcome in successes:
            if predict(target, outcome.benign_text).label != outcome.benign_label:
                continue
            n_eval += 1
            pred = predict(target, outcome.adversarial_text)
            if pred.label != outcome.benign_label:
                flips.append(float(pred.probabilities[pred.label]) * 100.0)
        results[target_id] = {
            "n_source_successes": len(successes),
            "n_evaluated": n_eval,
            "asr": (len(flips) / n_eval) if n_eval else None,
            "mean_mc": float(np.mean(flips)) if flips else None,
        }
    return results


# ---------------------------------------------------------------------------
# Correlation analysis
# ---------------------------------------------------------------------------

_CORR_FIELDS = ("tl", "mc", "qc", "pa")


def correlation_analysis(outcomes: list[AttackOutcome]) -> dict:
    """Pearson and Spearman correlations among input length, misclassification
    confidence, total query cost and perturbation size over successful runs.
    A metric with zero variance yields absent (None) entries, never a fake 0."""
    rows = []
    for o in outcomes:
        if not o.success:
            continue
        rows.append(
            {
                "tl": len(tokenize(o.benign_text)),
                "mc": o.misclassification_confidence,
                "qc": o.attack_queries + o.interpreter_queries,
                "pa": o.perturbed_chars,
            }
        )
    if len(rows) < 3:
        raise ValueError(f"correlation analysis needs >= 3 successful outcomes, got {len(rows)}")
    columns = {f: np.array([r[f] for r in rows], dtype=float) for f in _CORR_FIELDS}
    pairs: dict[str, dict] = {}
    for i, fa in enumerate(_CORR_FIELDS):
        for fb in _CORR_FIELDS[i + 1 :]:
            a, b = columns[fa], columns[fb]
            if np.std(a) == 0.0 or np.std(b) == 0.0:
                pairs[f"{fa}_{fb}"] = {"pearson": None, "spearman": None}
                continue
            pairs[f"{fa}_{fb}"] = {
                "pearson": float(_scipy_stats.pearsonr(a, b)[0]),
                "spearman": float(_scipy_stats.spearmanr(a, b)[0]),
            }
    return {"n": len(rows), "pairs": pairs, "rows": rows}
