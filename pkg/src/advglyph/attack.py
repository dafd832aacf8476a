"""Character-level attacks that flip a classifier while keeping its
interpretation map close to the benign one.

The main attack (``glyph_attack``) walks tokens in descending interpreted
importance and replaces single characters with homoglyphs, checking after
each accepted edit whether the prediction flipped and whether the
interpretation drifted past the similarity threshold. ``bug_attack`` is the
classic perturbation baseline (swap / delete / insert-space / homoglyph,
leave-one-out token ranking) that ignores interpretations entirely, and
``random_attack`` is the control that scatters homoglyphs uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlignmentError, ConfigError, InvalidInputError
from .interpret import (
    InterpretationMap,
    InterpreterConfig,
    NormalizedMap,
    explain,
    normalize_scores,
    rank_tokens,
)
from .models import ModelParams, QueryLedger, predict
from .textcore import (
    HomoglyphTable,
    Strategy,
    SubstitutionPolicy,
    TokenizedText,
    candidate_positions,
    splice_token,
    substitute_char,
    tokenize,
)

ATTACK_IDS = ("glyph", "bugger", "random")

_BUG_TRANSFORMS = ("swap", "delete", "insert-space", "homoglyph")


@dataclass(frozen=True)
class AttackConfig:
    """Budgets and thresholds shared by every attack."""

    similarity_threshold: float = 0.3
    char_budget: int = 8
    policy: SubstitutionPolicy = field(default_factory=SubstitutionPolicy)
    resim_every: int = 1
    seed: int = 0
    table: HomoglyphTable | None = None

    def __post_init__(self) -> None:
        if self.similarity_threshold < 0:
            raise ConfigError("similarity_threshold must be >= 0")
        if self.char_budget < 1:
            raise ConfigError("char_budget must be >= 1")
        if self.resim_every < 1:
            raise ConfigError("resim_every must be >= 1")

    def resolved_table(self) -> HomoglyphTable:
        return self.table if self.table is not None else HomoglyphTable.default()


@dataclass(frozen=True)
class AttackStep:
    """One accepted edit: which token changed, how, and what the model said."""

    token_index: int
    position: int
    transform: str
    old_token: str
    new_token: str
    label_after: int
    p_benign_after: float


@dataclass
class AttackOutcome:
    """Everything a single attack run produced, success or not.

    ``similarity_enforced`` records whether the attack gated success on the
    interpretation-similarity threshold (the baseline does not; it merely
    reports the drift it caused). The benign and final maps are kept on the
    original token grid so downstream overlap metrics align index-by-index.
    """

    attack_id: str
    interpreter_id: str | None
    success: bool
    benign_text: str
    benign_label: int
    adversarial_text: str | None
    final_label: int
    misclassification_confidence: float | None
    attack_queries: int
    interpreter_queries: int
    perturbed_chars: int
    final_similarity: float | None
    similarity_threshold: float
    similarity_enforced: bool
    seed: int
    steps: tuple[AttackStep, ...]
    benign_map: NormalizedMap | None = None
    final_map: NormalizedMap | None = None


def similarity(benign: InterpretationMap, adversarial: InterpretationMap) -> float:
    """Mean rank displacement between two maps, scaled to [0, 1].

    Both maps are reduced to their descending-importance orders; the score is
    the summed absolute displacement of each token's rank position divided by
    the maximum possible displacement floor(n^2 / 2). Identical orders give
    0.0, a full reversal gives 1.0, and a single-token grid is always 0.0.
    """
    n = len(benign)
    if n != len(adversarial):
        raise AlignmentError(f"maps cover {n} and {len(adversarial)} tokens")
    if n == 1:
        return 0.0
    pos_a = np.empty(n, dtype=np.int64)
    pos_b = np.empty(n, dtype=np.int64)
    pos_a[rank_tokens(benign)] = np.arange(n)
    pos_b[rank_tokens(adversarial)] = np.arange(n)
    displacement = int(np.abs(pos_a - pos_b).sum())
    return displacement / (n * n // 2)


def _normalized(m: InterpretationMap) -> NormalizedMap:
    return m if isinstance(m, NormalizedMap) else normalize_scores(m)


def _mc(prediction) -> float:
    return float(prediction.probabilities[prediction.label]) * 100.0


def glyph_attack(
    model: ModelParams,
    interpreter_id: str,
    text: str,
    benign_label: int,
    config: AttackConfig,
    interpreter_config: InterpreterConfig | None = None,
) -> AttackOutcome:
    """Greedy interpretation-guided homoglyph attack.

    Tokens are visited in descending benign importance; each visited token
    receives at most one single-character homoglyph substitution, chosen by
    the configured position policy (scan-best probes every position/variant
    with one query each and keeps the one that lowers the benign-class
    probability most). Success requires both a flipped prediction and a
    freshly recomputed interpretation similarity within the threshold;
    drifting past the threshold at a similarity checkpoint aborts the run.
    """
    icfg = interpreter_config or InterpreterConfig()
    table = config.resolved_table()
    ledger = QueryLedger()

    first = predict(model, text, ledger, "attack")
    if first.label != benign_label:
        raise InvalidInputError(
            f"input is already classified {first.label}, not the benign label {benign_label}"
        )
    toks = tokenize(text)
    benign_map = _normalized(explain(interpreter_id, model, toks, benign_label, icfg, ledger))
    order = rank_tokens(benign_map)

    def outcome(success, cur, pred, sim, steps, final_map):
        return AttackOutcome(
            attack_id="glyph",
            interpreter_id=interpreter_id,
            success=success,
            benign_text=text,
            benign_label=benign_label,
            adversarial_text=cur.source if steps else None,
            final_label=pred.label,
            misclassification_confidence=_mc(pred) if success else None,
            attack_queries=ledger.attack,
            interpreter_queries=ledger.interpreter,
            perturbed_chars=len(steps),
            final_similarity=sim,
            similarity_threshold=config.similarity_threshold,
            similarity_enforced=True,
            seed=config.seed,
            steps=tuple(steps),
            benign_map=benign_map,
            final_map=final_map,
        )

    cur = toks
    pred = first
    steps: list[AttackStep] = []
    cur_map: NormalizedMap | None = None  # map of cur, when known
    for token_index in order:
        if len(steps) >= config.char_budget:
            break
        token = cur.tokens[token_index].text
        positions = _candidate_positions_for(token, table, config)
        if not positions:
            continue
        if config.policy.strategy is Strategy.SCAN_BEST:
            best = None
            for pos in positions:
                for variant in range(len(table.variants(token[pos]))):
                    cand_tok = substitute_char(token, pos, table, variant)
                    cand = splice_token(cur, token_index, cand_tok)
                    cand_pred = predict(model, cand.source, ledger, "attack")
                    key = float(cand_pred.probabilities[benign_label])
                    if best is None or key < best[0]:
                        best = (key, pos, variant, cand_tok, cand, cand_pred)
            _, pos, variant, new_token, nxt, pred = best
        else:
            pos = positions[0]
            new_token = substitute_char(token, pos, table, 0)
            nxt = splice_token(cur, token_index, new_token)
            pred = predict(model, nxt.source, ledger, "attack")
        steps.append(
            AttackStep(token_index, pos, "homoglyph", token, new_token, pred.label,
                       float(pred.probabilities[benign_label]))
        )
        cur = nxt
        cur_map = None
        if pred.label != benign_label:
            # Flipped: success is only declared on a fresh similarity check.
            final_map = _normalized(
                explain(interpreter_id, model, cur, benign_label, icfg, ledger)
            )
            sim = similarity(benign_map, final_map)
            return outcome(sim <= config.similarity_threshold, cur, pred, sim, steps, final_map)
        if len(steps) % config.resim_every == 0:
            cur_map = _normalized(
                explain(interpreter_id, model, cur, benign_label, icfg, ledger)
            )
            sim = similarity(benign_map, cur_map)
            if sim > config.similarity_threshold:
                return outcome(False, cur, pred, sim, steps, cur_map)

    # Budget or token supply exhausted without a flip.
    if not steps:
        return outcome(False, cur, pred, 0.0, steps, benign_map)
    if cur_map is None:
        cur_map = _normalized(explain(interpreter_id, model, cur, benign_label, icfg, ledger))
    return outcome(False, cur, pred, similarity(benign_map, cur_map), steps, cur_map)


def _candidate_positions_for(token: str, table: HomoglyphTable, config: AttackConfig):
    # The run seed drives every random choice of the run, including the
    # seeded-random position policy.
    policy = config.policy
    if policy.strategy is Strategy.SEEDED_RANDOM and policy.seed != config.seed:
        policy = replace(policy, seed=config.seed)
    return candidate_positions(token, table, policy)


# ---------------------------------------------------------------------------
# Baseline: classic character bugs, no interpreter in the loop
# ---------------------------------------------------------------------------


def _bug_candidates(
    token: str, table: HomoglyphTable, config: AttackConfig
) -> list[tuple[str, int, str]]:
    """Deterministic candidate edits for one token: at most one per transform."""
    out: list[tuple[str, int, str]] = []
    mid = (len(token) - 1) // 2
    if len(token) >= 2 and token[mid] != token[mid + 1]:
        swapped = token[:mid] + token[mid + 1] + token[mid] + token[mid + 2 :]
        out.append(("swap", mid, swapped))
    if len(token) >= 2:
        out.append(("delete", mid, token[:mid] + token[mid + 1 :]))
        cut = max(1, mid)
        out.append(("insert-space", cut, token[:cut] + " " + token[cut:]))
    positions = _candidate_positions_for(token, table, config)
    if positions:
        out.append(("homoglyph", positions[0], substitute_char(token, positions[0], table, 0)))
    return out


class _UnitText:
    """Tokens of the original text as editable units.

    Edits that insert spaces or shuffle punctuation can change the token grid
    of the rendered string, so each unit remembers which original token it
    came from; ``fold_scores`` maps a score vector on the re-tokenized
    adversarial grid back onto the original one by rendered span.
    """

    def __init__(self, toks: TokenizedText) -> None:
        self.texts = toks.texts()
        src = toks.source
        self.gaps = [src[: toks.tokens[0].start]] + [
            src[toks.tokens[i].end : toks.tokens[i + 1].start]
            for i in range(len(toks) - 1)
        ] + [src[toks.tokens[-1].end :]]

    def render(self) -> tuple[str, list[tuple[int, int]]]:
        parts: list[str] = []
        spans: list[tuple[int, int]] = []
        length = 0
        for gap, text in zip(self.gaps, self.texts):
            parts.append(gap)
            length += len(gap)
            parts.append(text)
            spans.append((length, length + len(text)))
            length += len(text)
        parts.append(self.gaps[-1])
        return "".join(parts), spans

    def fold_scores(self, adv: TokenizedText, scores: np.ndarray) -> np.ndarray:
        _, spans = self.render()
        folded = np.zeros(len(self.texts))
        for tok, score in zip(adv.tokens, scores):
            for unit, (a, b) in enumerate(spans):
                if a <= tok.start < b:
                    folded[unit] += score
                    break
        return folded


def bug_attack(
    model: ModelParams,
    text: str,
    benign_label: int,
    config: AttackConfig,
    measure_interpreter_id: str | None = None,
    interpreter_config: InterpreterConfig | None = None,
) -> AttackOutcome:
    """Character-bug baseline: rank tokens by leave-one-out prediction drop,
    then apply the single best edit per token (swap, delete, insert-space or
    homoglyph) until the prediction flips or the budget runs out.

    The attack itself never consults an interpreter and never gates on
    interpretation similarity; success is a flip alone. When
    ``measure_interpreter_id`` is given, the drift it caused is measured
    afterwards on a separate ledger purely for reporting, so the outcome's
    interpreter query count stays zero.
    """
    icfg = interpreter_config or InterpreterConfig()
    table = config.resolved_table()
    ledger = QueryLedger()

    first = predict(model, text, ledger, "attack")
    if first.label != benign_label:
        raise InvalidInputError(
            f"input is already classified {first.label}, not the benign label {benign_label}"
        )
    toks = tokenize(text)
    n = len(toks)
    p_full = float(first.probabilities[benign_label])

    drops = np.empty(n)
    for i in range(n):
        kept = " ".join(t.text for j, t in enumerate(toks.tokens) if j != i)
        loo = predict(model, kept, ledger, "attack")
        drops[i] = p_full - float(loo.probabilities[benign_label])
    order = sorted(range(n), key=lambda i: (-drops[i], i))

    units = _UnitText(toks)
    steps: list[AttackStep] = []
    pred = first
    success = False
    for token_index in order:
        if len(steps) >= config.char_budget:
            break
        token = units.texts[token_index]
        candidates = _bug_candidates(token, table, config)
        if not candidates:
            continue
        best = None
        for transform, pos, new_token in candidates:
            keep = units.texts[token_index]
            units.texts[token_index] = new_token
            cand_text, _ = units.render()
            units.texts[token_index] = keep
            cand_pred = predict(model, cand_text, ledger, "attack")
            key = float(cand_pred.probabilities[benign_label])
            if best is None or key < best[0]:
                best = (key, transform, pos, new_token, cand_pred)
        _, transform, pos, new_token, pred = best
        steps.append(
            AttackStep(token_index, pos, transform, token, new_token, pred.label,
                       float(pred.probabilities[benign_label]))
        )
        units.texts[token_index] = new_token
        if pred.label != benign_label:
            success = True
            break

    final_text, _ = units.render()
    sim = None
    benign_map = final_map = None
    if measure_interpreter_id is not None and steps:
        # Post-hoc stealth measurement; deliberately off the attack's ledger.
        scratch = QueryLedger()
        benign_map = _normalized(
            explain(measure_interpreter_id, model, toks, benign_label, icfg, scratch)
        )
        adv_toks = tokenize(final_text)
        raw = explain(measure_interpreter_id, model, adv_toks, benign_label, icfg, scratch)
        folded = InterpretationMap(
            tuple(units.texts), units.fold_scores(adv_toks, raw.scores),
            raw.interpreter_id, raw.target_class, final_text,
        )
        final_map = _normalized(folded)
        sim = similarity(benign_map, final_map)

    return AttackOutcome(
        attack_id="bugger",
        interpreter_id=measure_interpreter_id,
        success=success,
        benign_text=text,
        benign_label=benign_label,
        adversarial_text=final_text if steps else None,
        final_label=pred.label,
        misclassification_confidence=_mc(pred) if success else None,
        attack_queries=ledger.attack,
        interpreter_queries=ledger.interpreter,
        perturbed_chars=len(steps),
        final_similarity=sim,
        similarity_threshold=config.similarity_threshold,
        similarity_enforced=False,
        seed=config.seed,
        steps=tuple(steps),
        benign_map=benign_map,
        final_map=final_map,
    )


# ---------------------------------------------------------------------------
# Control: uniform random homoglyphs
# ---------------------------------------------------------------------------


def random_attack(
    model: ModelParams,
    interpreter_id: str,
    text: str,
    benign_label: int,
    config: AttackConfig,
    interpreter_config: InterpreterConfig | None = None,
) -> AttackOutcome:
    """Control attack: seeded-uniform (token, position) homoglyph edits with
    no importance guidance. A flip still has to pass the same final
    interpretation-similarity gate as the guided attack."""
    icfg = interpreter_config or InterpreterConfig()
    table = config.resolved_table()
    ledger = QueryLedger()
    rng = np.random.default_rng(config.seed)

    first = predict(model, text, ledger, "attack")
    if first.label != benign_label:
        raise InvalidInputError(
            f"input is already classified {first.label}, not the benign label {benign_label}"
        )
    toks = tokenize(text)

    cur = toks
    pred = first
    steps: list[AttackStep] = []
    flipped = False
    while len(steps) < config.char_budget:
        eligible = [
            (ti, pos)
            for ti, tok in enumerate(cur.tokens)
            for pos in range(len(tok.text))
            if tok.text[pos] in table
        ]
        if not eligible:
            break
        token_index, pos = eligible[int(rng.integers(len(eligible)))]
        token = cur.tokens[token_index].text
        variant = int(rng.integers(len(table.variants(token[pos]))))
        new_token = substitute_char(token, pos, table, variant)
        cur = splice_token(cur, token_index, new_token)
        pred = predict(model, cur.source, ledger, "attack")
        steps.append(
            AttackStep(token_index, pos, "homoglyph", token, new_token, pred.label,
                       float(pred.probabilities[benign_label]))
        )
        if pred.label != benign_label:
            flipped = True
            break

    success = False
    sim = None
    benign_map = final_map = None
    if flipped:
        benign_map = _normalized(explain(interpreter_id, model, toks, benign_label, icfg, ledger))
        final_map = _normalized(explain(interpreter_id, model, cur, benign_label, icfg, ledger))
        sim = similarity(benign_map, final_map)
        success = sim <= config.similarity_threshold

    return AttackOutcome(
        attack_id="random",
        interpreter_id=interpreter_id,
        success=success,
        benign_text=text,
        benign_label=benign_label,
        adversarial_text=cur.source if steps else None,
        final_label=pred.label,
        misclassification_confidence=_mc(pred) if success else None,
        attack_queries=ledger.attack,
        interpreter_queries=ledger.interpreter,
        perturbed_chars=len(steps),
        final_similarity=sim,
        similarity_threshold=config.similarity_threshold,
        similarity_enforced=True,
        seed=config.seed,
        steps=tuple(steps),
        benign_map=benign_map,
        final_map=final_map,
    )


def run_attack(
    attack_id: str,
    model: ModelParams,
    interpreter_id: str,
    text: str,
    benign_label: int,
    config: AttackConfig,
    interpreter_config: InterpreterConfig | None = None,
) -> AttackOutcome:
    """Dispatch an attack by id ("glyph", "bugger" or "random")."""
    if attack_id == "glyph":
        return glyph_attack(model, interpreter_id, text, benign_label, config, interpreter_config)
    if attack_id == "bugger":
        return bug_attack(
            model, text, benign_label, config,
            measure_interpreter_id=interpreter_id, interpreter_config=interpreter_config,
        )
    if attack_id == "random":
        return random_attack(model, interpreter_id, text, benign_label, config, interpreter_config)
    raise ConfigError(f"unknown attack {attack_id!r}; expected one of {ATTACK_IDS}")


def outcome_to_dict(outcome: AttackOutcome) -> dict:
    """JSON-ready trace of one attack run (schema tag "advtrace/1")."""
    return {
        "version": "advtrace/1",
        "attack_id": outcome.attack_id,
        "interpreter_id": outcome.interpreter_id,
        "benign_text": outcome.benign_text,
        "benign_label": outcome.benign_label,
        "success": outcome.success,
        "adversarial_text": outcome.adversarial_text,
        "final_label": outcome.final_label,
        "misclassification_confidence": outcome.misclassification_confidence,
        "attack_queries": outcome.attack_queries,
        "interpreter_queries": outcome.interpreter_queries,
        "perturbed_chars": outcome.perturbed_chars,
        "final_similarity": outcome.final_similarity,
        "similarity_threshold": outcome.similarity_threshold,
        "similarity_enforced": outcome.similarity_enforced,
        "seed": outcome.seed,
        "steps": [
            {
                "token_index": s.token_index,
                "position": s.position,
                "transform": s.transform,
                "old_token": s.old_token,
                "new_token": s.new_token,
                "label_after": s.label_after,
                "p_benign_after": s.p_benign_after,
            }
            for s in outcome.steps
        ],
    }


def outcome_to_json(outcome: AttackOutcome) -> str:
    return json.dumps(outcome_to_dict(outcome), sort_keys=True, ensure_ascii=False)
