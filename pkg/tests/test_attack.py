"""Attack loop behavior, the rank-similarity gate, and the baselines."""

import json

import numpy as np
import pytest

import advglyph.attack as attack_mod
from advglyph.attack import (
    AttackConfig,
    bug_attack,
    glyph_attack,
    outcome_to_dict,
    outcome_to_json,
    random_attack,
    run_attack,
    similarity,
)
from advglyph.errors import AlignmentError, ConfigError, InvalidInputError
from advglyph.interpret import InterpretationMap, InterpreterConfig, rank_tokens
from advglyph.models import FeatureConfig, ModelParams, featurize, predict
from advglyph.textcore import HomoglyphTable, substitute_char, tokenize

from conftest import zero_linear


def _map(scores):
    scores = np.asarray(scores, dtype=float)
    toks = tuple(f"t{i}" for i in range(len(scores)))
    return InterpretationMap(toks, scores, "lime", 0, " ".join(toks))


def _flip_model():
    """Linear model on "aa bb cc" where killing one 'a' flips class 0 -> 1."""
    fc = FeatureConfig(1, 1, 4096)
    w = np.zeros((2, 4096))
    idx = {ch: int(featurize(ch, fc).indices[0]) for ch in "abcа"}
    assert len(set(idx.values())) == 4  # hash collisions would spoil the setup
    w[0, idx["a"]] = 1.0
    w[1, idx["b"]] = 0.7
    w[1, idx["c"]] = 0.25
    model = ModelParams("linear", fc, 2, {"w": w, "b": np.zeros(2)})
    table = HomoglyphTable({"a": ("а",)})
    return model, table


class TestSimilarity:
    def test_identical_maps(self):
        m = _map([0.9, 0.1, 0.4])
        assert similarity(m, m) == 0.0

    def test_two_tokens_swapped(self):
        assert similarity(_map([0.0, 1.0]), _map([1.0, 0.0])) == 1.0

    def test_four_token_adjacent_swap(self):
        a = _map([4.0, 3.0, 2.0, 1.0])  # rank order 0,1,2,3
        b = _map([3.0, 4.0, 2.0, 1.0])  # rank order 1,0,2,3
        assert similarity(a, b) == pytest.approx(0.25)

    def test_single_token(self):
        assert similarity(_map([1.0]), _map([0.2])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            similarity(_map([1.0, 0.0]), _map([1.0, 0.0, 0.5]))

    def test_randomized_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(1, 12))
            a, b = _map(rng.normal(size=n)), _map(rng.normal(size=n))
            s = similarity(a, b)
            assert 0.0 <= s <= 1.0
            assert s == similarity(b, a)
            ra, rb = rank_tokens(a), rank_tokens(b)
            assert (s == 0.0) == (ra == rb)
            if n > 1:
                # Independent recomputation from rank positions.
                pa = {tok: r for r, tok in enumerate(ra)}
                pb = {tok: r for r, tok in enumerate(rb)}
                disp = sum(abs(pa[i] - pb[i]) for i in range(n))
                assert s == pytest.approx(disp / (n * n // 2))


class TestAttackConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            AttackConfig(similarity_threshold=-0.1)
        with pytest.raises(ConfigError):
            AttackConfig(char_budget=0)
        with pytest.raises(ConfigError):
            AttackConfig(resim_every=0)


class TestGlyphAttack:
    def test_flips_with_one_character(self):
        model, table = _flip_model()
        cfg = AttackConfig(char_budget=4, similarity_threshold=0.3, table=table)
        out = glyph_attack(model, "saliency", "aa bb cc", 0, cfg)
        assert out.success
        assert out.perturbed_chars == 1
        assert out.final_label == 1
        assert out.final_similarity <= 0.3
        assert out.misclassification_confidence is not None
        # Independent oracle: enumerate every single-character substitution
        # and collect the ones that flip the label; the attack's single edit
        # must be one of them.
        flips = set()
        for ti, tok in enumerate(["aa", "bb", "cc"]):
            for pos, ch in enumerate(tok):
                for variant in range(len(table.variants(ch))):
                    cand = substitute_char(tok, pos, table, variant)
                    parts = ["aa", "bb", "cc"]
                    parts[ti] = cand
                    if predict(model, " ".join(parts)).label != 0:
                        flips.add((ti, pos, variant))
        assert flips  # the construction guarantees single-char flips exist
        step = out.steps[0]
        assert (step.token_index, step.position) in {(t, p) for t, p, _ in flips}
        assert out.adversarial_text == "аa bb cc"

    def test_constant_model_fails(self, table):
        model = zero_linear()
        cfg = AttackConfig(char_budget=2, similarity_threshold=0.3, table=table)
        out = glyph_attack(model, "saliency", "aa bb cc", 0, cfg)
        assert not out.success
        assert out.final_label == 0
        assert out.perturbed_chars <= 2
        assert out.misclassification_confidence is None

    def test_no_substitutable_characters(self):
        model = zero_linear()
        table = HomoglyphTable({"z": ("ž",)})
        cfg = AttackConfig(char_budget=3, table=table)
        out = glyph_attack(model, "saliency", "aa bb cc", 0, cfg)
        assert not out.success
        assert out.perturbed_chars == 0
        assert out.adversarial_text is None
        assert out.steps == ()

    def test_already_misclassified_rejected(self):
        model = zero_linear()
        with pytest.raises(InvalidInputError):
            glyph_attack(model, "saliency", "aa bb", 1, AttackConfig())

    def test_query_accounting_matches_predict_calls(self, monkeypatch):
        model, table = _flip_model()
        cfg = AttackConfig(char_budget=4, table=table)
        calls = {"attack": 0, "interpreter": 0}
        real = attack_mod.predict

        def counting(model_, text, ledger=None, channel="attack"):
            calls[channel] += 1
            return real(model_, text, ledger, channel)

        monkeypatch.setattr(attack_mod, "predict", counting)
        out = glyph_attack(model, "saliency", "aa bb cc", 0, cfg)
        assert out.attack_queries == calls["attack"] == 2  # precheck + 1 step
        assert out.interpreter_queries == calls["interpreter"] == 0

    def test_deterministic(self, linear_model):
        cfg = AttackConfig(char_budget=4, similarity_threshold=0.3, seed=13)
        icfg = InterpreterConfig(sample_count=200, seed=13)
        text = "a sunny and witty film but a tardy plot"
        a = glyph_attack(linear_model, "lime", text, 1, cfg, icfg)
        b = glyph_attack(linear_model, "lime", text, 1, cfg, icfg)
        assert outcome_to_dict(a) == outcome_to_dict(b)

    def test_steps_replay_to_adversarial_text(self, linear_model, table):
        cfg = AttackConfig(char_budget=4, similarity_threshold=1.0)
        icfg = InterpreterConfig(sample_count=200, seed=1)
        text = "a sunny and witty film but a tardy plot"
        out = glyph_attack(linear_model, "lime", text, 1, cfg, icfg)
        assert out.steps
        toks = tokenize(text).texts()
        for step in out.steps:
            assert toks[step.token_index] == step.old_token
            assert len(step.new_token) == len(step.old_token)
            assert sum(a != b for a, b in zip(step.new_token, step.old_token)) == 1
            toks[step.token_index] = step.new_token
        assert " ".join(toks) == " ".join(tokenize(out.adversarial_text).texts())


class TestBugAttack:
    def test_succeeds_without_similarity_gate(self):
        model, table = _flip_model()
        cfg = AttackConfig(char_budget=4, similarity_threshold=0.3, table=table)
        out = bug_attack(model, "aa bb cc", 0, cfg,
                         measure_interpreter_id="saliency")
        assert out.success
        assert not out.similarity_enforced
        assert out.final_similarity is not None
        assert out.perturbed_chars <= 4
        assert predict(model, out.adversarial_text).label != 0

    def test_constant_model_fails(self, table):
        model = zero_linear()
        cfg = AttackConfig(char_budget=2, table=table)
        out = bug_attack(model, "aa bb cc", 0, cfg, measure_interpreter_id="saliency")
        assert not out.success

    def test_transform_shapes(self, linear_model):
        cfg = AttackConfig(char_budget=4)
        out = bug_attack(linear_model, "a sunny and witty film but a tardy plot",
                         1, cfg, measure_interpreter_id="saliency")
        for step in out.steps:
            old, new = step.old_token, step.new_token
            if step.transform == "homoglyph":
                assert len(new) == len(old)
                assert sum(a != b for a, b in zip(new, old)) == 1
            elif step.transform == "swap":
                assert sorted(new) == sorted(old) and new != old
            elif step.transform == "delete":
                assert len(new) == len(old) - 1
            elif step.transform == "insert-space":
                assert len(new) == len(old) + 1 and " " in new
            else:
                raise AssertionError(f"unknown transform {step.transform!r}")


class TestRandomAttack:
    def test_no_substitutable_characters(self):
        model = zero_linear()
        table = HomoglyphTable({"z": ("ž",)})
        out = random_attack(model, "saliency", "aa bb", 0,
                            AttackConfig(char_budget=3, table=table))
        assert not out.success
        assert out.perturbed_chars == 0
        assert out.adversarial_text is None

    def test_fixed_seed_reproduces(self, linear_model):
        cfg = AttackConfig(char_budget=4, similarity_threshold=0.3, seed=21)
        icfg = InterpreterConfig(sample_count=200, seed=21)
        text = "a sunny and witty film but a tardy plot"
        a = random_attack(linear_model, "lime", text, 1, cfg, icfg)
        b = random_attack(linear_model, "lime", text, 1, cfg, icfg)
        assert outcome_to_dict(a) == outcome_to_dict(b)

    def test_success_respects_similarity_gate(self):
        model, table = _flip_model()
        cfg = AttackConfig(char_budget=4, similarity_threshold=0.3, seed=5, table=table)
        out = random_attack(model, "saliency", "aa bb cc", 0, cfg)
        if out.success:
            assert out.final_similarity <= 0.3
        assert out.similarity_enforced


class TestRunAttack:
    def test_dispatch_and_json(self):
        model, table = _flip_model()
        cfg = AttackConfig(char_budget=4, table=table)
        out = run_attack("glyph", model, "saliency", "aa bb cc", 0, cfg)
        doc = json.loads(outcome_to_json(out))
        assert doc["version"] == "advtrace/1"
        assert doc["attack_id"] == "glyph"
        assert doc["success"] is True
        assert doc["perturbed_chars"] == 1

    def test_unknown_attack(self):
        model = zero_linear()
        with pytest.raises(ConfigError):
            run_attack("ddos", model, "lime", "aa", 0, AttackConfig())
