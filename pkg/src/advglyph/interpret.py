"""Token-attribution interpreters for the hashed n-gram classifiers.

Three families produce a score per token of a tokenized input:

* ``lime_explain``: fits a weighted ridge surrogate over random keep/drop
  token masks, exponential kernel on Hamming distance.
* ``kshap_explain``: Shapley-kernel weighted least squares with the
  efficiency constraint eliminated exactly; enumerates every coalition when
  the grid is small enough, otherwise samples coalitions by kernel mass.
* ``saliency_explain``: white-box gradient-times-count aggregation, no
  classifier queries at all.

``brute_force_shapley`` is the exact exponential-time reference the kernel
solver is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError, SizeError, SolverError
from .models import (
    ModelParams,
    QueryLedger,
    gradient_wrt_features,
    predict,
    token_feature_counts,
)
from .textcore import TokenizedText

INTERPRETER_IDS = ("lime", "kshap", "saliency")

MASK_MODES = ("drop", "replace-with-empty")

# Exact coalition enumeration is only attempted below this table size.
_KSHAP_ENUM_CAP = 4096
_SHAPLEY_MAX_TOKENS = 10


@dataclass(frozen=True)
class InterpreterConfig:
    """Shared knobs for the query-based interpreters."""

    sample_count: int = 1000
    kernel_width: float = 0.75
    ridge_lambda: float = 1e-3
    seed: int = 0
    mask_mode: str = "drop"

    def __post_init__(self) -> None:
        if self.sample_count < 2:
            raise ConfigError("sample_count must be >= 2")
        if self.kernel_width <= 0:
            raise ConfigError("kernel_width must be positive")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be non-negative")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"mask_mode must be one of {MASK_MODES}")


@dataclass(frozen=True)
class InterpretationMap:
    """Per-token scores for one input under one interpreter and class."""

    tokens: tuple[str, ...]
    scores: np.ndarray
    interpreter_id: str
    target_class: int
    source: str

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.scores):
            raise AlignmentError(
                f"{len(self.scores)} scores for {len(self.tokens)} tokens"
            )

    def __len__(self) -> int:
        return len(self.tokens)


class NormalizedMap(InterpretationMap):
    """An InterpretationMap whose scores are min-max scaled into [0, 1]."""


def normalize_scores(m: InterpretationMap) -> NormalizedMap:
    """Min-max scale scores to [0, 1]; a constant map collapses to all zeros."""
    lo, hi = float(np.min(m.scores)), float(np.max(m.scores))
    if hi == lo:
        scaled = np.zeros(len(m.scores))
    else:
        scaled = (m.scores - lo) / (hi - lo)
    return NormalizedMap(m.tokens, scaled, m.interpreter_id, m.target_class, m.source)


def rank_tokens(m: InterpretationMap) -> list[int]:
    """Token indices by descending score, ties broken by ascending index."""
    scores = m.scores
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def masked_text(toks: TokenizedText, keep: np.ndarray, mode: str = "drop") -> str:
    """Render the text with masked tokens removed.

    "drop" joins the kept token texts with single spaces (the fully masked
    input renders as the empty string); "replace-with-empty" deletes masked
    spans from the source in place, preserving the original gaps.
    """
    if mode == "drop":
        return " ".join(t.text for t, k in zip(toks.tokens, keep) if k)
    if mode == "replace-with-empty":
        parts: list[str] = []
        cursor = 0
        for t, k in zip(toks.tokens, keep):
            parts.append(toks.source[cursor : t.start])
            if k:
                parts.append(t.text)
            cursor = t.end
        parts.append(toks.source[cursor:])
        return "".join(parts)
    raise ConfigError(f"mask_mode must be one of {MASK_MODES}")


def _coalition_values(
    model: ModelParams,
    toks: TokenizedText,
    masks: np.ndarray,
    target_class: int,
    mode: str,
    ledger: QueryLedger | None,
) -> np.ndarray:
    values = np.empty(len(masks))
    for i, mask in enumerate(masks):
        text = masked_text(toks, mask, mode)
        values[i] = predict(model, text, ledger, "interpreter").probabilities[target_class]
    return values


def _all_masks(n: int) -> np.ndarray:
    codes = np.arange(2**n, dtype=np.int64)
    return (codes[:, None] >> np.arange(n)) & 1


def lime_explain(
    model: ModelParams,
    toks: TokenizedText,
    target_class: int,
    config: InterpreterConfig,
    ledger: QueryLedger | None = None,
) -> InterpretationMap:
    """Local surrogate attribution via weighted ridge regression.

    Masks are enumerated exhaustively while 2^n fits within sample_count,
    otherwise drawn uniformly from the seeded generator. Sample weights are
    exp(-(hamming/n)^2 / kernel_width^2); the ridge penalty applies to the
    token coefficients only, never the intercept. With ridge_lambda = 0 a
    rank-deficient system raises SolverError instead of answering garbage.
    """
    n = len(toks)
    if not 0 <= target_class < model.label_count:
        raise IndexError(f"target class {target_class} out of range")
    if config.sample_count < n + 2:
        raise ConfigError(
            f"sample_count {config.sample_count} cannot determine {n} coefficients"
        )
    if 2**n <= config.sample_count:
        masks = _all_masks(n)
    else:
        rng = np.random.default_rng(config.seed)
        masks = rng.integers(0, 2, size=(config.sample_count, n), dtype=np.int64)
    values = _coalition_values(model, toks, masks, target_class, config.mask_mode, ledger)
    hamming = n - masks.sum(axis=1)
    weights = np.exp(-((hamming / n) ** 2) / config.kernel_width**2)

    design = np.hstack([np.ones((len(masks), 1)), masks.astype(float)])
    wd = weights[:, None] * design
    normal = design.T @ wd
    penalty = config.ridge_lambda * np.eye(n + 1)
    penalty[0, 0] = 0.0
    if config.ridge_lambda == 0.0 and np.linalg.matrix_rank(normal) < n + 1:
        raise SolverError(
            "surrogate system is singular with ridge_lambda = 0; use a positive ridge_lambda"
        )
    try:
        beta = np.linalg.solve(normal + penalty, wd.T @ values)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"surrogate regression failed: {exc}") from None
    return InterpretationMap(tuple(toks.texts()), beta[1:], "lime", target_class, toks.source)


def _shapley_kernel_weight(n: int, s: int) -> float:
    return (n - 1) / (math.comb(n, s) * s * (n - s))


def kshap_explain(
    model: ModelParams,
    toks: TokenizedText,
    target_class: int,
    config: InterpreterConfig,
    ledger: QueryLedger | None = None,
) -> InterpretationMap:
    """Shapley values via kernel-weighted least squares.

    The efficiency constraint (attributions sum to f(full) - f(empty)) is
    substituted into the system exactly, so it holds to rounding error no
    matter how coalitions were gathered. All 2^n coalitions are enumerated
    when 2^n <= 4096; beyond that, coalition sizes are drawn proportional to
    their total kernel mass and members uniformly within each size.
    """
    n = len(toks)
    if not 0 <= target_class < model.label_count:
        raise IndexError(f"target class {target_class} out of range")
    mode = config.mask_mode
    ends = np.stack([np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    base, full = _coalition_values(model, toks, ends, target_class, mode, ledger)
    gap = full - base
    if n == 1:
        return InterpretationMap(
            tuple(toks.texts()), np.array([gap]), "kshap", target_class, toks.source
        )

    if 2**n <= _KSHAP_ENUM_CAP:
        every = _all_masks(n)
        sizes = every.sum(axis=1)
        interior = every[(sizes > 0) & (sizes < n)]
        weights = np.array([_shapley_kernel_weight(n, int(s)) for s in interior.sum(axis=1)])
        sampled = False
    else:
        rng = np.random.default_rng(config.seed)
        size_mass = np.array([1.0 / (s * (n - s)) for s in range(1, n)])
        size_mass /= size_mass.sum()
        drawn = rng.choice(np.arange(1, n), size=config.sample_count, p=size_mass)
        interior = np.zeros((config.sample_count, n), dtype=np.int64)
        for i, s in enumerate(drawn):
            interior[i, rng.choice(n, size=int(s), replace=False)] = 1
        weights = np.ones(config.sample_count)
        sampled = True

    values = _coalition_values(model, toks, interior, target_class, mode, ledger)
    zf = interior.astype(float)
    # Substitute phi_n = gap - sum(phi_head): regress on z_i - z_n.
    reduced = zf[:, :-1] - zf[:, -1:]
    target = values - base - zf[:, -1] * gap
    wz = weights[:, None] * reduced
    normal = reduced.T @ wz
    rhs = wz.T @ target
    if sampled:
        phi_head = np.linalg.lstsq(normal, rhs, rcond=None)[0]
    else:
        try:
            phi_head = np.linalg.solve(normal, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"kernel system is singular: {exc}") from None
    phi = np.append(phi_head, gap - phi_head.sum())
    return InterpretationMap(tuple(toks.texts()), phi, "kshap", target_class, toks.source)


def saliency_explain(
    model: ModelParams, toks: TokenizedText, target_class: int
) -> InterpretationMap:
    """Gradient-based attribution: sum of |d logit / d feature| * count over
    the n-gram features overlapping each token. White-box; zero queries."""
    grad = gradient_wrt_features(model, toks.source, target_class)
    buckets = token_feature_counts(toks, model.features)
    scores = np.array(
        [sum(abs(grad[idx]) * cnt for idx, cnt in bucket.items()) for bucket in buckets]
    )
    return InterpretationMap(tuple(toks.texts()), scores, "saliency", target_class, toks.source)


def explain(
    interpreter_id: str,
    model: ModelParams,
    toks: TokenizedText,
    target_class: int,
    config: InterpreterConfig,
    ledger: QueryLedger | None = None,
) -> InterpretationMap:
    """Dispatch to an interpreter by id ("lime", "kshap" or "saliency")."""
    if interpreter_id == "lime":
        return lime_explain(model, toks, target_class, config, ledger)
    if interpreter_id == "kshap":
        return kshap_explain(model, toks, target_class, config, ledger)
    if interpreter_id == "saliency":
        return saliency_explain(model, toks, target_class)
    raise ConfigError(f"unknown interpreter {interpreter_id!r}; expected one of {INTERPRETER_IDS}")


def brute_force_shapley(
    model: ModelParams,
    toks: TokenizedText,
    target_class: int,
    config: InterpreterConfig | None = None,
    ledger: QueryLedger | None = None,
) -> InterpretationMap:
    """Exact Shapley values by full subset enumeration; refuses more than 10
    tokens because the cost is 2^n classifier calls."""
    n = len(toks)
    if n > _SHAPLEY_MAX_TOKENS:
        raise SizeError(f"exact Shapley capped at {_SHAPLEY_MAX_TOKENS} tokens, got {n}")
    mode = config.mask_mode if config is not None else "drop"
    masks = _all_masks(n)
    values = _coalition_values(model, toks, masks, target_class, mode, ledger)
    fact = [math.factorial(k) for k in range(n + 1)]
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for code in range(2**n):
            if code & bit:
                continue
            s = int(code).bit_count()
            weight = fact[s] * fact[n - 1 - s] / fact[n]
            phi[i] += weight * (values[code | bit] - values[code])
    return InterpretationMap(tuple(toks.texts()), phi, "shapley-exact", target_class, toks.source)


def explanation_to_dict(m: InterpretationMap, seed: int) -> dict:
    """JSON-ready view of a map: tokens, scores, interpreter, class, seed."""
    return {
        "tokens": list(m.tokens),
        "scores": [float(s) for s in m.scores],
        "interpreter_id": m.interpreter_id,
        "target_class": m.target_class,
        "seed": seed,
    }
