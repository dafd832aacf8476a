"""Measure attacks in bulk and study what drives their cost.

Runs the (classifier, interpreter, attack) grid over a slice of the bundled
corpus, prints the aggregate table, checks how the guided attack's adversarial
texts fare under other interpreters and a retrained classifier, and correlates
input length with query cost over the successful runs.
"""

from pathlib import Path

import advglyph as ag

train_set, test_set = ag.make_toy_corpus()
model = ag.train(train_set, "linear", ag.TrainConfig())

# ---------------------------------------------------------------------------
# 1. The grid: one guided attack, two baselines, all guided by LIME
# ---------------------------------------------------------------------------
config = ag.ExperimentConfig(
    classifiers=("linear",),
    interpreters=("lime",),
    attacks=("glyph", "bugger", "random"),
    sample_cap=30,
    master_seed=0,
    attack=ag.AttackConfig(char_budget=4, similarity_threshold=0.3),
    interpreter=ag.InterpreterConfig(),
)
report = ag.evaluate_attack(config, models={"linear": model},
                            train_dataset=train_set, eval_dataset=test_set)

print("per-cell metrics:")
print(ag.report_to_csv(report))

glyph_cell = report.cells["linear/lime/glyph"]
bug_cell = report.cells["linear/lime/bugger"]
print(f"stealth gap: guided IoU {glyph_cell.mean_iou:.2f} vs "
      f"baseline IoU {bug_cell.mean_iou:.2f}")

# ---------------------------------------------------------------------------
# 2. Do the adversarial texts fool other interpreters too?
# ---------------------------------------------------------------------------
outcomes = report.outcomes["linear/lime/glyph"]
for target in ag.INTERPRETER_IDS:
    result = ag.transfer_interpreters(outcomes, target, model,
                                      config.interpreter, config.iou_top_k_fraction)
    iou = "n/a" if result["mean_iou"] is None else f"{result['mean_iou']:.2f}"
    print(f"lime -> {target:8s}: mean top-k overlap {iou} over {result['n']} successes")

# ---------------------------------------------------------------------------
# 3. Do they fool a different classifier?
# ---------------------------------------------------------------------------
other = ag.train(train_set, "mlp", ag.TrainConfig())
transfer = ag.transfer_classifiers(outcomes, model, {"mlp": other})["mlp"]
print(f"replayed against an mlp: {transfer['n_evaluated']} evaluable, "
      f"asr {transfer['asr']:.2f}" if transfer["n_evaluated"] else
      "replayed against an mlp: nothing evaluable")

# ---------------------------------------------------------------------------
# 4. What correlates with attack cost?
# ---------------------------------------------------------------------------
corr = ag.correlation_analysis(outcomes)
print(f"\ncorrelations over {corr['n']} successful attacks "
      f"(tl = tokens, mc = confidence, qc = queries, pa = chars changed):")
for pair, stats in corr["pairs"].items():
    if stats["pearson"] is None:
        print(f"  {pair}: degenerate (a metric had zero variance)")
    else:
        print(f"  {pair}: pearson {stats['pearson']:+.2f}  "
              f"spearman {stats['spearman']:+.2f}")

# ---------------------------------------------------------------------------
# 5. Save everything for later inspection
# ---------------------------------------------------------------------------
out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
(out / "grid_report.json").write_text(ag.report_to_json(report) + "\n",
                                      encoding="utf-8")
(out / "grid_per_input.csv").write_text(ag.per_input_csv(glyph_cell),
                                        encoding="utf-8")
print(f"\nwrote {out / 'grid_report.json'} and {out / 'grid_per_input.csv'}")
