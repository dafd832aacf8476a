"""Walk one review through the whole pipeline.

Train a character n-gram classifier on the bundled corpus, explain one of its
predictions token by token, then substitute look-alike characters until the
label flips while the explanation stays put. Run the classic character-bug
baseline on the same input to see the difference in stealth.
"""

from pathlib import Path

import numpy as np

import advglyph as ag
from advglyph.evaluate import correct_prefix

# ---------------------------------------------------------------------------
# 1. Data and model
# ---------------------------------------------------------------------------
train_set, test_set = ag.make_toy_corpus()
model = ag.train(train_set, "linear", ag.TrainConfig())
print(f"trained on {len(train_set)} records, "
      f"clean test accuracy {ag.accuracy(model, test_set):.3f}")

# Pick the first test review the model gets right; the attack requires a
# correctly classified starting point.
index, text, label = correct_prefix(model, test_set, 1)[0]
pred = ag.predict(model, text)
print(f"\nreview #{index} ({test_set.class_names[label]}): {text!r}")
print(f"model says {test_set.class_names[pred.label]} "
      f"with p = {pred.probabilities[pred.label]:.3f}")

# ---------------------------------------------------------------------------
# 2. What does the model look at?
# ---------------------------------------------------------------------------
toks = ag.tokenize(text)
benign_map = ag.normalize_scores(
    ag.lime_explain(model, toks, label, ag.InterpreterConfig(seed=0))
)
order = ag.rank_tokens(benign_map)
print("\ntoken importance (descending):")
for i in order:
    bar = "#" * int(round(20 * benign_map.scores[i]))
    print(f"  {benign_map.tokens[i]:>12s}  {benign_map.scores[i]:.2f} {bar}")

# ---------------------------------------------------------------------------
# 3. The guided homoglyph attack
# ---------------------------------------------------------------------------
acfg = ag.AttackConfig(char_budget=4, similarity_threshold=0.3, seed=0)
icfg = ag.InterpreterConfig(seed=0)
outcome = ag.glyph_attack(model, "lime", text, label, acfg, icfg)

print(f"\nattack success: {outcome.success}")
for step in outcome.steps:
    print(f"  token {step.token_index}: {step.old_token!r} -> {step.new_token!r} "
          f"(p_benign {step.p_benign_after:.3f})")
if outcome.success:
    print(f"adversarial text: {outcome.adversarial_text!r}")
    print(f"characters changed: {outcome.perturbed_chars}, "
          f"rank drift S = {outcome.final_similarity:.3f} (threshold 0.3)")
    print(f"misclassification confidence: {outcome.misclassification_confidence:.1f}")
print(f"queries: {outcome.attack_queries} attack + "
      f"{outcome.interpreter_queries} interpreter")

# The two texts render almost identically, yet differ under repr():
if outcome.adversarial_text:
    diff = [i for i, (a, b) in enumerate(zip(text, outcome.adversarial_text)) if a != b]
    print(f"differing character positions: {diff}")

# ---------------------------------------------------------------------------
# 4. The noisy baseline on the same input
# ---------------------------------------------------------------------------
bug = ag.bug_attack(model, text, label, acfg,
                    measure_interpreter_id="lime", interpreter_config=icfg)
print(f"\nbug-style baseline success: {bug.success}")
if bug.success:
    print(f"baseline text: {bug.adversarial_text!r}")
    print(f"baseline rank drift S = {bug.final_similarity:.3f} "
          f"(not enforced, merely measured)")

# How much of the top of the map survives each attack?
k = max(1, int(np.ceil(0.2 * len(toks))))
for name, o in (("glyph", outcome), ("bugger", bug)):
    if o.success and o.benign_map is not None and o.final_map is not None:
        print(f"top-{k} overlap after {name}: "
              f"{ag.iou_topk(o.benign_map, o.final_map, k):.2f}")

# ---------------------------------------------------------------------------
# 5. Render the before/after heatmaps
# ---------------------------------------------------------------------------
out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
if outcome.benign_map is not None and outcome.final_map is not None:
    doc = ag.comparison_html(outcome.benign_map, outcome.final_map,
                             note=f"S = {outcome.final_similarity:.3f}")
    (out / "flip_comparison.html").write_text(doc, encoding="utf-8")
    print(f"\nwrote {out / 'flip_comparison.html'}")
