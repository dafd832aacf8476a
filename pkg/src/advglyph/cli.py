"""Command-line front end.

Subcommands mirror the library surface: ``train``, ``explain``, ``attack``,
``evaluate``, ``transfer`` and ``defend``. Simple commands take flags; the
pipeline commands read a JSON config document (version 1) in which unknown
keys are hard errors. Exit codes: 0 success, 1 usage or configuration error,
2 data or model error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .attack import AttackConfig, outcome_to_dict, run_attack
from .defense import (
    DefenseConfig,
    defense_report_to_json,
    evaluate_defense,
)
from .errors import (
    AdvGlyphError,
    ConfigError,
    DataError,
    EmptyInputError,
    EmptyReportError,
    InvalidInputError,
    ModelFormatError,
    SizeError,
)
from .evaluate import (
    ExperimentConfig,
    evaluate_attack,
    per_input_csv,
    report_to_csv,
    report_to_json,
    resolve_datasets,
    transfer_classifiers,
    transfer_interpreters,
)
from .heatmap import comparison_html, heatmap_html
from .interpret import (
    INTERPRETER_IDS,
    InterpreterConfig,
    explain,
    explanation_to_dict,
    normalize_scores,
)
from .models import FeatureConfig, TrainConfig, load_model, predict, save_model, train
from .textcore import (
    HomoglyphTable,
    Strategy,
    SubstitutionPolicy,
    load_dataset,
    tokenize,
)

CONFIG_VERSION = 1

_USAGE_EXIT = 1
_DATA_EXIT = 2
_INTERNAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per our exit contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="advglyph", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="master seed for the run")
    parser.add_argument(
        "--jobs", type=int, default=1,
        help="worker count (accepted for interface stability; execution is single-threaded)",
    )
    parser.add_argument("--out", type=str, default=None, help="output file or directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a classifier on a CSV dataset")
    p_train.add_argument("--data", required=True, help="label,text CSV")
    p_train.add_argument("--kind", choices=("linear", "mlp"), default="linear")
    p_train.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p_train.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p_train.add_argument("--l2", type=float, default=TrainConfig.l2)
    p_train.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p_train.add_argument("--hidden", type=int, default=TrainConfig.hidden)
    p_train.add_argument("--ngram-min", type=int, default=FeatureConfig.ngram_min)
    p_train.add_argument("--ngram-max", type=int, default=FeatureConfig.ngram_max)
    p_train.add_argument("--dim", type=int, default=FeatureConfig.dim)

    p_explain = sub.add_parser("explain", help="attribute a prediction to tokens")
    p_explain.add_argument("--model", required=True)
    p_explain.add_argument("--text", required=True)
    p_explain.add_argument("--interpreter", choices=INTERPRETER_IDS, default="lime")
    p_explain.add_argument("--target-class", type=int, default=None,
                           help="defaults to the predicted label")
    p_explain.add_argument("--sample-count", type=int, default=InterpreterConfig.sample_count)
    p_explain.add_argument("--kernel-width", type=float, default=InterpreterConfig.kernel_width)
    p_explain.add_argument("--ridge-lambda", type=float, default=InterpreterConfig.ridge_lambda)
    p_explain.add_argument("--mask-mode", choices=("drop", "replace-with-empty"),
                           default=InterpreterConfig.mask_mode)
    p_explain.add_argument("--html", type=str, default=None, help="also write an HTML heatmap")

    p_attack = sub.add_parser("attack", help="perturb one input until it flips")
    p_attack.add_argument("--model", required=True)
    p_attack.add_argument("--text", required=True)
    p_attack.add_argument("--label", type=int, required=True, help="benign gold label")
    p_attack.add_argument("--attack", choices=("glyph", "bugger", "random"), default="glyph")
    p_attack.add_argument("--interpreter", choices=INTERPRETER_IDS, default="lime")
    p_attack.add_argument("--epsilon", type=float, default=AttackConfig.similarity_threshold,
                          help="interpretation similarity threshold")
    p_attack.add_argument("--char-budget", type=int, default=AttackConfig.char_budget)
    p_attack.add_argument("--policy", choices=[s.value for s in Strategy],
                          default=Strategy.MIDDLE_CHAR.value)
    p_attack.add_argument("--resim-every", type=int, default=AttackConfig.resim_every)
    p_attack.add_argument("--table", type=str, default=None, help="homoglyph table file")
    p_attack.add_argument("--sample-count", type=int, default=InterpreterConfig.sample_count)
    p_attack.add_argument("--html", type=str, default=None, help="also write a comparison heatmap")

    for name, helptext in (
        ("evaluate", "run a (classifier, interpreter, attack) experiment grid"),
        ("transfer", "re-test adversarial examples across interpreters and classifiers"),
        ("defend", "measure adversarial-training augmentation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config document")
    return parser


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------


def _load_config_doc(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(
            f"{path}: missing or unsupported config version (expected {CONFIG_VERSION})"
        )
    return doc


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where}{key!r}")


_ATTACK_KEYS = {"similarity_threshold", "char_budget", "policy", "resim_every", "table_path"}
_INTERP_KEYS = {"sample_count", "kernel_width", "ridge_lambda", "mask_mode"}
_TRAIN_KEYS = {"epochs", "learning_rate", "l2", "batch_size", "hidden", "seed"}
_FEATURE_KEYS = {"ngram_min", "ngram_max", "dim"}
_DEFENSE_KEYS = {"augmentation_rate", "chars_per_record", "seed", "table_path"}


def _attack_config_from(doc: dict, seed: int) -> AttackConfig:
    _check_keys(doc, _ATTACK_KEYS, "attack.")
    table = None
    if doc.get("table_path"):
        table = HomoglyphTable.from_file(doc["table_path"])
    try:
        policy = SubstitutionPolicy(Strategy(doc.get("policy", Strategy.MIDDLE_CHAR.value)))
    except ValueError:
        raise ConfigError(f"attack.policy: unknown strategy {doc.get('policy')!r}") from None
    return AttackConfig(
        similarity_threshold=doc.get("similarity_threshold", AttackConfig.similarity_threshold),
        char_budget=doc.get("char_budget", AttackConfig.char_budget),
        policy=policy,
        resim_every=doc.get("resim_every", AttackConfig.resim_every),
        seed=seed,
        table=table,
    )


def _interp_config_from(doc: dict, seed: int) -> InterpreterConfig:
    _check_keys(doc, _INTERP_KEYS, "interpreter.")
    return InterpreterConfig(
        sample_count=doc.get("sample_count", InterpreterConfig.sample_count),
        kernel_width=doc.get("kernel_width", InterpreterConfig.kernel_width),
        ridge_lambda=doc.get("ridge_lambda", InterpreterConfig.ridge_lambda),
        seed=seed,
        mask_mode=doc.get("mask_mode", InterpreterConfig.mask_mode),
    )


def _train_config_from(doc: dict, seed: int) -> TrainConfig:
    _check_keys(doc, _TRAIN_KEYS, "train.")
    return TrainConfig(
        epochs=doc.get("epochs", TrainConfig.epochs),
        learning_rate=doc.get("learning_rate", TrainConfig.learning_rate),
        l2=doc.get("l2", TrainConfig.l2),
        batch_size=doc.get("batch_size", TrainConfig.batch_size),
        seed=doc.get("seed", seed),
        hidden=doc.get("hidden", TrainConfig.hidden),
    )


def _feature_config_from(doc: dict) -> FeatureConfig:
    _check_keys(doc, _FEATURE_KEYS, "features.")
    return FeatureConfig(
        ngram_min=doc.get("ngram_min", FeatureConfig.ngram_min),
        ngram_max=doc.get("ngram_max", FeatureConfig.ngram_max),
        dim=doc.get("dim", FeatureConfig.dim),
    )


_EXPERIMENT_KEYS = {
    "version", "classifiers", "interpreters", "attacks",
    "train_path", "eval_path", "dataset_path", "train_fraction",
    "sample_cap", "master_seed", "iou_top_k_fraction",
    "attack", "interpreter", "train", "features",
}


def _experiment_config_from(doc: dict, seed: int) -> ExperimentConfig:
    _check_keys(doc, _EXPERIMENT_KEYS, "")
    master_seed = doc.get("master_seed", seed)
    try:
        return ExperimentConfig(
            classifiers=tuple(doc.get("classifiers", ("linear",))),
            interpreters=tuple(doc.get("interpreters", ("saliency",))),
            attacks=tuple(doc.get("attacks", ("glyph",))),
            train_path=doc.get("train_path"),
            eval_path=doc.get("eval_path"),
            dataset_path=doc.get("dataset_path"),
            train_fraction=doc.get("train_fraction", 0.7),
            sample_cap=doc.get("sample_cap", 100),
            master_seed=master_seed,
            iou_top_k_fraction=doc.get("iou_top_k_fraction", 0.2),
            attack=_attack_config_from(doc.get("attack", {}), master_seed),
            interpreter=_interp_config_from(doc.get("interpreter", {}), master_seed),
            train=_train_config_from(doc.get("train", {}), master_seed),
            features=_feature_config_from(doc.get("features", {})),
        )
    except TypeError as exc:
        raise ConfigError(f"malformed config value: {exc}") from None


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    features = FeatureConfig(args.ngram_min, args.ngram_max, args.dim)
    config = TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate, l2=args.l2,
        batch_size=args.batch_size, seed=args.seed, hidden=args.hidden,
    )
    model = train(dataset, args.kind, config, features)
    out = Path(args.out) if args.out else Path(f"{args.kind}.gsmodel")
    save_model(model, out)
    print(f"trained {args.kind} on {len(dataset)} records -> {out}")
    return 0


def _cmd_explain(args) -> int:
    model = load_model(args.model)
    toks = tokenize(args.text)
    icfg = InterpreterConfig(
        sample_count=args.sample_count, kernel_width=args.kernel_width,
        ridge_lambda=args.ridge_lambda, seed=args.seed, mask_mode=args.mask_mode,
    )
    target = args.target_class
    if target is None:
        target = predict(model, args.text).label
    m = explain(args.interpreter, model, toks, target, icfg)
    payload = json.dumps(explanation_to_dict(m, args.seed), indent=2, ensure_ascii=False)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    if args.html:
        Path(args.html).write_text(
            heatmap_html(normalize_scores(m), title=f"{args.interpreter} map"),
            encoding="utf-8",
        )
    return 0


def _cmd_attack(args) -> int:
    model = load_model(args.model)
    table = HomoglyphTable.from_file(args.table) if args.table else None
    acfg = AttackConfig(
        similarity_threshold=args.epsilon,
        char_budget=args.char_budget,
        policy=SubstitutionPolicy(Strategy(args.policy)),
        resim_every=args.resim_every,
        seed=args.seed,
        table=table,
    )
    icfg = InterpreterConfig(sample_count=args.sample_count, seed=args.seed)
    outcome = run_attack(args.attack, model, args.interpreter, args.text, args.label, acfg, icfg)
    payload = json.dumps(outcome_to_dict(outcome), indent=2, ensure_ascii=False)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    if args.html:
        if outcome.benign_map is not None and outcome.final_map is not None:
            note = (
                f"attack: {outcome.attack_id}, success: {outcome.success}, "
                f"perturbed chars: {outcome.perturbed_chars}, "
                f"similarity: {outcome.final_similarity}"
            )
            doc = comparison_html(outcome.benign_map, outcome.final_map, note=note)
        else:
            doc = "<!DOCTYPE html><html><body><p>No maps were computed for this run.</p></body></html>"
        Path(args.html).write_text(doc, encoding="utf-8")
    return 0


def _cmd_evaluate(args) -> int:
    doc = _load_config_doc(args.config)
    config = _experiment_config_from(doc, args.seed)
    report = evaluate_attack(config)
    out = _out_dir(args)
    (out / "report.json").write_text(report_to_json(report) + "\n", encoding="utf-8")
    (out / "report.csv").write_text(report_to_csv(report), encoding="utf-8")
    per_input = out / "per_input"
    per_input.mkdir(exist_ok=True)
    for key, cell in sorted(report.cells.items()):
        name = key.replace("/", "_") + ".csv"
        (per_input / name).write_text(per_input_csv(cell), encoding="utf-8")
    print(f"wrote report for {len(report.cells)} cells -> {out}")
    return 0


def _cmd_transfer(args) -> int:
    doc = _load_config_doc(args.config)
    config = _experiment_config_from(doc, args.seed)
    if "attacks" in doc and tuple(doc["attacks"]) != ("glyph",):
        raise ConfigError("transfer runs the guided attack only; omit 'attacks'")
    config = replace(config, attacks=("glyph",))
    train_ds, eval_ds = resolve_datasets(config)
    if train_ds is None:
        raise ConfigError("transfer needs training data to build the classifier pool")
    # One model per classifier kind, shared between attack runs and scoring.
    models = {
        kind: train(train_ds, kind, config.train, config.features)
        for kind in config.classifiers
    }
    report = evaluate_attack(config, models=models, train_dataset=train_ds,
                             eval_dataset=eval_ds)
    interpreter_matrix = {}
    classifier_matrix = {}
    for kind in config.classifiers:
        for source in config.interpreters:
            outcomes = report.outcomes[f"{kind}/{source}/glyph"]
            for target in config.interpreters:
                cellkey = f"{kind}:{source}->{target}"
                interpreter_matrix[cellkey] = transfer_interpreters(
                    outcomes, target, models[kind], config.interpreter,
                    config.iou_top_k_fraction,
                )
            others = {k: m for k, m in models.items() if k != kind}
            if others:
                classifier_matrix[f"{kind}:{source}"] = transfer_classifiers(
                    outcomes, models[kind], others
                )
    payload = {
        "version": "advtransfer/1",
        "interpreter_transfer": interpreter_matrix,
        "classifier_transfer": classifier_matrix,
    }
    out = _out_dir(args)
    (out / "transfer.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    print(f"wrote transfer matrices -> {out}")
    return 0


_DEFEND_KEYS = {
    "version", "dataset_path", "classifier", "interpreter", "sample_cap",
    "attack", "interpreter_config", "defense", "train", "features",
}


def _cmd_defend(args) -> int:
    doc = _load_config_doc(args.config)
    _check_keys(doc, _DEFEND_KEYS, "")
    if "dataset_path" not in doc:
        raise ConfigError("defend config needs dataset_path")
    dataset = load_dataset(doc["dataset_path"])
    ddoc = doc.get("defense", {})
    _check_keys(ddoc, _DEFENSE_KEYS, "defense.")
    table = None
    if ddoc.get("table_path"):
        table = HomoglyphTable.from_file(ddoc["table_path"])
    defense = DefenseConfig(
        augmentation_rate=ddoc.get("augmentation_rate", DefenseConfig.augmentation_rate),
        chars_per_record=ddoc.get("chars_per_record", DefenseConfig.chars_per_record),
        seed=ddoc.get("seed", args.seed),
        table=table,
        train=_train_config_from(doc.get("train", {}), args.seed),
    )
    seed = defense.seed
    report = evaluate_defense(
        dataset,
        doc.get("classifier", "linear"),
        doc.get("interpreter", "saliency"),
        _attack_config_from(doc.get("attack", {}), seed),
        defense,
        _interp_config_from(doc.get("interpreter_config", {}), seed),
        _feature_config_from(doc.get("features", {})),
        sample_cap=doc.get("sample_cap", 100),
    )
    out = _out_dir(args)
    (out / "defense.json").write_text(defense_report_to_json(report) + "\n", encoding="utf-8")
    print(
        f"asr {report.asr_before:.3f} -> {report.asr_after:.3f}, "
        f"acc {report.acc_before:.3f} -> {report.acc_after:.3f} -> {out}"
    )
    return 0


_HANDLERS = {
    "train": _cmd_train,
    "explain": _cmd_explain,
    "attack": _cmd_attack,
    "evaluate": _cmd_evaluate,
    "transfer": _cmd_transfer,
    "defend": _cmd_defend,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"advglyph: config error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except (
        DataError, ModelFormatError, EmptyInputError, InvalidInputError,
        EmptyReportError, SizeError, FileNotFoundError, IsADirectoryError,
    ) as exc:
        print(f"advglyph: data error: {exc}", file=sys.stderr)
        return _DATA_EXIT
    except AdvGlyphError as exc:
        print(f"advglyph: error: {exc}", file=sys.stderr)
        return _INTERNAL_EXIT
    except Exception as exc:  # pragma: no cover - safety net
        print(f"advglyph: internal error: {exc}", file=sys.stderr)
        return _INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
