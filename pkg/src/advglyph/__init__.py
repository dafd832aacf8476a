"""advglyph: homoglyph attacks on interpretable text classifiers.

The package trains small hashed n-gram classifiers, explains their
predictions with token-attribution interpreters, perturbs inputs with
visually confusable characters so the prediction flips while the
interpretation map stays put, and measures what that costs, how it
transfers, and how well augmentation-based training defends against it.
"""

from .attack import (
    ATTACK_IDS,
    AttackConfig,
    AttackOutcome,
    AttackStep,
    bug_attack,
    glyph_attack,
    outcome_to_dict,
    outcome_to_json,
    random_attack,
    run_attack,
    similarity,
)
from .corpus import make_toy_corpus, write_toy_corpus
from .defense import (
    DefenseConfig,
    DefenseReport,
    augment_adversarial,
    defense_report_to_dict,
    defense_report_to_json,
    evaluate_defense,
)
from .errors import (
    AdvGlyphError,
    AlignmentError,
    ConfigError,
    DataError,
    EmptyInputError,
    EmptyReportError,
    InvalidInputError,
    ModelFormatError,
    SizeError,
    SolverError,
    SubstitutionError,
    TrainingError,
)
from .evaluate import (
    CLASSIFIER_KINDS,
    CellReport,
    ExperimentConfig,
    ExperimentReport,
    correlation_analysis,
    derive_seed,
    evaluate_attack,
    iou_topk,
    per_input_csv,
    report_to_csv,
    report_to_dict,
    report_to_json,
    run_cell,
    split_dataset,
    transfer_classifiers,
    transfer_interpreters,
)
from .heatmap import comparison_html, heatmap_html
from .interpret import (
    INTERPRETER_IDS,
    InterpretationMap,
    InterpreterConfig,
    NormalizedMap,
    brute_force_shapley,
    explain,
    explanation_to_dict,
    kshap_explain,
    lime_explain,
    masked_text,
    normalize_scores,
    rank_tokens,
    saliency_explain,
)
from .models import (
    FeatureConfig,
    FeatureVector,
    ModelParams,
    PredictionResult,
    QueryLedger,
    TrainConfig,
    accuracy,
    featurize,
    fnv1a64,
    gradient_wrt_features,
    load_model,
    logits_from_counts,
    predict,
    save_model,
    token_feature_counts,
    train,
)
from .textcore import (
    Dataset,
    HomoglyphTable,
    Strategy,
    SubstitutionPolicy,
    Token,
    TokenizedText,
    candidate_positions,
    load_dataset,
    save_dataset,
    splice_token,
    substitute_char,
    tokenize,
)

__version__ = "0.1.0"
