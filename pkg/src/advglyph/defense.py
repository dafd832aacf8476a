"""Adversarial-training defense against homoglyph perturbation.

The defense is training-data augmentation: a seeded fraction of the training
records is copied with a few characters swapped for homoglyphs (labels kept),
and the model is retrained on the widened set. ``evaluate_defense`` measures
what that buys: attack success before and after, clean accuracy before and
after, under identical seeds for both runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackConfig
from .errors import ConfigError
from .evaluate import (
    _attack_config_dict,
    _feature_config_dict,
    _interpreter_config_dict,
    _train_config_dict,
    correct_prefix,
    run_cell,
    split_dataset,
)
from .interpret import INTERPRETER_IDS, InterpreterConfig
from .models import FeatureConfig, TrainConfig, accuracy, train
from .textcore import Dataset, HomoglyphTable


@dataclass(frozen=True)
class DefenseConfig:
    """Augmentation knobs plus the training recipe used for both models."""

    augmentation_rate: float = 0.5
    chars_per_record: int = 2
    seed: int = 0
    table: HomoglyphTable | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if not 0.0 <= self.augmentation_rate <= 1.0:
            raise ConfigError("augmentation_rate must be in [0, 1]")
        if self.chars_per_record < 1:
            raise ConfigError("chars_per_record must be >= 1")

    def resolved_table(self) -> HomoglyphTable:
        return self.table if self.table is not None else HomoglyphTable.default()


def augment_adversarial(dataset: Dataset, config: DefenseConfig) -> Dataset:
    """Append homoglyph-corrupted copies of a seeded sample of records.

    ceil(rate * N) records are chosen without replacement; each copy gets
    chars_per_record distinct substitutable positions replaced by a random
    table variant. Originals are kept untouched and labels carry over. A rate
    of zero returns the records unchanged.
    """
    n = len(dataset)
    n_aug = math.ceil(config.augmentation_rate * n)
    if n_aug == 0:
        return Dataset(dataset.records, dataset.label_count, dataset.class_names)
    table = config.resolved_table()
    rng = np.random.default_rng(config.seed)
    chosen = np.sort(rng.choice(n, size=n_aug, replace=False))
    extra: list[tuple[str, int]] = []
    for idx in chosen:
        text, label = dataset.records[int(idx)]
        chars = list(text)
        eligible = [i for i, ch in enumerate(chars) if ch in table]
        k = min(config.chars_per_record, len(eligible))
        if k:
            picks = rng.choice(len(eligible), size=k, replace=False)
            for p in picks:
                pos = eligible[int(p)]
                variants = table.variants(chars[pos])
                chars[pos] = variants[int(rng.integers(len(variants)))]
        extra.append(("".join(chars), label))
    return Dataset(
        dataset.records + tuple(extra), dataset.label_count, dataset.class_names
    )


@dataclass
class DefenseReport:
    asr_before: float
    asr_after: float
    acc_before: float
    acc_after: float
    config: dict
    n_attempted_before: int = 0
    n_attempted_after: int = 0


def evaluate_defense(
    dataset: Dataset,
    classifier_kind: str,
    interpreter_id: str,
    attack_config: AttackConfig,
    defense_config: DefenseConfig,
    interpreter_config: InterpreterConfig | None = None,
    features: FeatureConfig | None = None,
    sample_cap: int = 100,
    attack_id: str = "glyph",
    iou_fraction: float = 0.2,
) -> DefenseReport:
    """Train undefended and defended models on a seeded 70/30 split of
    ``dataset`` and attack both with identical per-input seeds.

    With augmentation_rate 0 the two models are the same function, so the
    before/after numbers coincide exactly.
    """
    if interpreter_id not in INTERPRETER_IDS:
        raise ConfigError(f"unknown interpreter {interpreter_id!r}")
    icfg = interpreter_config or InterpreterConfig()
    features = features or FeatureConfig()
    train_ds, test_ds = split_dataset(dataset, 0.7, defense_config.seed)

    baseline = train(train_ds, classifier_kind, defense_config.train, features)
    defended = train(
        augment_adversarial(train_ds, defense_config),
        classifier_kind,
        defense_config.train,
        features,
    )

    def attack_success_rate(model) -> tuple[float, int]:
        inputs = correct_prefix(model, test_ds, sample_cap)
        if not inputs:
            return 0.0, 0
        cell, _ = run_cell(
            model, interpreter_id, attack_id, inputs,
            attack_config, icfg, defense_config.seed, iou_fraction,
            classifier_id=classifier_kind,
        )
        return cell.asr, cell.n_attempted

    asr_before, n_before = attack_success_rate(baseline)
    asr_after, n_after = attack_success_rate(defended)
    report = DefenseReport(
        asr_before=asr_before,
        asr_after=asr_after,
        acc_before=accuracy(baseline, test_ds),
        acc_after=accuracy(defended, test_ds),
        config={
            "augmentation_rate": defense_config.augmentation_rate,
            "chars_per_record": defense_config.chars_per_record,
            "seed": defense_config.seed,
            "table": "default" if defense_config.table is None else "custom",
            "classifier": classifier_kind,
            "interpreter": interpreter_id,
            "attack_id": attack_id,
            "sample_cap": sample_cap,
            "attack": _attack_config_dict(attack_config),
            "interpreter_config": _interpreter_config_dict(icfg),
            "train": _train_config_dict(defense_config.train),
            "features": _feature_config_dict(features),
        },
        n_attempted_before=n_before,
        n_attempted_after=n_after,
    )
    return report


def defense_report_to_dict(report: DefenseReport) -> dict:
    return {
        "asr_before": report.asr_before,
        "asr_after": report.asr_after,
        "acc_before": report.acc_before,
        "acc_after": report.acc_after,
        "config": report.config,
    }


def defense_report_to_json(report: DefenseReport) -> str:
    return json.dumps(
        defense_report_to_dict(report), sort_keys=True, ensure_ascii=False, indent=2
    )
