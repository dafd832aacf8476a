"""A small synthetic sentiment corpus for experiments and tests.

Reviews are built from a tiny fixed lexicon so that desk-scale hashed n-gram
models train to high accuracy in seconds and the effect of single-character
corruption is easy to study. The generator mixes several record families,
each named for the behavior it contributes to the benchmark:

* short records: a handful of tokens around one strong word, small enough
  that exhaustive coalition enumeration over all tokens stays cheap;
* contrast records: one strong word against one weak opposite-polarity word
  with light filler, the minimal flip target, and the main source of hard
  examples when corrupted copies enter retraining;
* weak-majority records: several weak words outvoting a strong opposite,
  which is what gives the weak lexicon stable trained weight;
* anchored records: carry uppercase acronym tokens whose characters have no
  confusable variant, so character substitution can never touch them; their
  ranks act as fixed landmarks in importance maps while the surrounding weak
  words absorb the actual perturbation;
* anchor calibration records: pin the two acronym tiers into separate weight
  bands (heavy above light, light above the weak lexicon);
* pinned-contrast records: a lone strong word against an untouchable acronym
  of the opposite polarity, padded with symbol tokens; every substitutable
  character in the record belongs to the strong word, which concentrates
  random augmentation exactly where attacks strike;
* review records: two strong words plus one weak opposite over sentence-like
  filler, in one variant with polarity-leaning filler and one with nearly
  neutral filler.

Sentiment words come in shared-affix pairs across classes (sunny/tinny,
witty/petty, grand/bland) so the discriminative n-grams sit in the word
interiors, which is exactly what single-character substitution destroys.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .textcore import Dataset, save_dataset

STRONG_POSITIVE = ("sunny", "witty", "perky", "jolly", "grand", "sassy")

STRONG_NEGATIVE = ("tinny", "petty", "murky", "folly", "bland", "messy")

WEAK_POSITIVE = ("merry", "zesty", "lucky", "brave")

WEAK_NEGATIVE = ("drear", "gluey", "tardy", "fusty")

# (positive, negative) acronym pairs. Uppercase D, L, Q, R, U, V, W and the
# digits 2, 7 and 9 have no confusable variant in the default substitution
# table, so these tokens cannot be altered by homoglyph edits at all.
HEAVY_ANCHORS = ("DVD", "WWW")

LIGHT_ANCHORS = ("LUV", "URL")

# Class-neutral symbol tokens built from the same untouchable characters.
SYMBOL_TOKENS = ("R7", "W2", "Q9", "V7", "U2", "L9", "QR", "W7")

FILLERS_POSITIVE = ("the", "a", "is", "it", "so", "film", "this", "at", "on", "up")

FILLERS_NEGATIVE = ("was", "as", "or", "but", "to", "that", "show", "plot", "cast", "bit")

SHORT_FILLERS_POSITIVE = ("a", "is", "it", "so", "at")

SHORT_FILLERS_NEGATIVE = ("as", "or", "on", "up", "to")

CLASS_NAMES = ("negative", "positive")

# Record-family mix. The remainder after these goes to review records with
# near-neutral filler.
_SHORT = 0.04
_CONTRAST = 0.20
_WEAK_MAJORITY = 0.06
_ANCHORED = 0.10
_HEAVY_CALIBRATION = 0.05
_LIGHT_CALIBRATION = 0.06
_ORDER_GUARD = 0.06
_PINNED_CONTRAST = 0.10
_LEANING_REVIEW = 0.0

# Probability that a filler word matches the record's polarity. Leaning
# filler gives function words a trained class signal; near-neutral filler
# keeps them close to weightless.
_LEAN = 0.60
_NEUTRAL = 0.50


def make_toy_corpus(
    n_train: int = 500, n_test: int = 200, seed: int = 3
) -> tuple[Dataset, Dataset]:
    """Generate a balanced, deterministic train/test pair of tiny reviews."""
    rng = np.random.default_rng(seed)
    counters: dict = {}

    def draw(pool, key=""):
        # Cycle each pool separately per record family so every word serves
        # each role equally often; bare rng.choice leaves words stuck with
        # lopsided role assignments and visibly uneven trained weights.
        i = counters.get((id(pool), key), 0)
        counters[(id(pool), key)] = i + 1
        return pool[i % len(pool)]

    def fill(lo, hi, label, pools=(FILLERS_POSITIVE, FILLERS_NEGATIVE), lean=None):
        own = pools[0] if label == 1 else pools[1]
        other = pools[1] if label == 1 else pools[0]
        p = _LEAN if lean is None else lean
        return [str(rng.choice(own if rng.random() < p else other))
                for _ in range(int(rng.integers(lo, hi + 1)))]

    def record(label: int) -> tuple[str, int]:
        strong_own = STRONG_POSITIVE if label == 1 else STRONG_NEGATIVE
        strong_opp = STRONG_NEGATIVE if label == 1 else STRONG_POSITIVE
        weak_own = WEAK_POSITIVE if label == 1 else WEAK_NEGATIVE
        weak_opp = WEAK_NEGATIVE if label == 1 else WEAK_POSITIVE
        heavy_own = HEAVY_ANCHORS[0] if label == 1 else HEAVY_ANCHORS[1]
        heavy_opp = HEAVY_ANCHORS[1] if label == 1 else HEAVY_ANCHORS[0]
        light_own = LIGHT_ANCHORS[0] if label == 1 else LIGHT_ANCHORS[1]
        light_opp = LIGHT_ANCHORS[1] if label == 1 else LIGHT_ANCHORS[0]
        short = (SHORT_FILLERS_POSITIVE, SHORT_FILLERS_NEGATIVE)

        r = rng.random()
        edge = _SHORT
        if r < edge:
            words = fill(1, 2, label) + [draw(strong_own, "S")] + fill(1, 3, label)
            return " ".join(words), label
        edge += _CONTRAST
        if r < edge:
            parts = [draw(strong_own, "H"), draw(weak_opp, "H")]
            rng.shuffle(parts)
            words = fill(1, 2, label, short)
            for p in parts:
                words += [p] + fill(2, 3, label, short)
            return " ".join(words), label
        edge += _WEAK_MAJORITY
        if r < edge:
            picks = [draw(weak_own, "W") for _ in range(4)] + [draw(strong_opp, "W")]
            rng.shuffle(picks)
            words = fill(1, 2, label)
            for p in picks:
                words += [p] + fill(1, 2, label)
            return " ".join(words), label
        edge += _ANCHORED
        if r < edge:
            picks = [heavy_opp, light_own, draw(weak_own, "D"), draw(weak_own, "D")]
            rng.shuffle(picks)
            words = fill(1, 1, label, short)
            for p in picks:
                words += [p] + fill(1, 1, label, short)
            return " ".join(words), label
        edge += _HEAVY_CALIBRATION
        if r < edge:
            picks = [heavy_own, draw(strong_opp, "Phi")]
            rng.shuffle(picks)
            words = fill(1, 1, label, short)
            for p in picks:
                words += [p] + fill(1, 1, label, short)
            return " ".join(words), label
        edge += _LIGHT_CALIBRATION
        if r < edge:
            picks = [light_own, draw(weak_opp, "Lo")]
            rng.shuffle(picks)
            words = fill(1, 1, label, short)
            for p in picks:
                words += [p] + fill(1, 2, label, short)
            return " ".join(words), label
        edge += _ORDER_GUARD
        if r < edge:
            picks = [heavy_own, light_opp, draw(weak_opp, "C")]
            rng.shuffle(picks)
            words = fill(1, 1, label, short)
            for p in picks:
                words += [p] + fill(1, 2, label, short)
            return " ".join(words), label
        edge += _PINNED_CONTRAST
        if r < edge:
            def draw_symbol():
                i = counters.get(("symbol", label), 0)
                counters[("symbol", label)] = i + 1
                return SYMBOL_TOKENS[i % len(SYMBOL_TOKENS)]

            picks = [draw(strong_own, "Z"), light_opp]
            rng.shuffle(picks)
            words = [draw_symbol(), draw_symbol()]
            for p in picks:
                words += [p] + [draw_symbol(), draw_symbol(), draw_symbol()]
            if rng.random() < 0.5:
                words += [draw_symbol()]
            return " ".join(words), label
        edge += _LEANING_REVIEW
        if r < edge:
            picks = [draw(strong_own, "Fb"), draw(strong_own, "Fb"), draw(weak_opp, "Fb")]
            rng.shuffle(picks)
            words = fill(3, 4, label)
            for p in picks:
                words += [p] + fill(3, 4, label)
            return " ".join(words), label
        picks = [draw(strong_own, "F"), draw(strong_own, "F"), draw(weak_opp, "F")]
        rng.shuffle(picks)
        words = fill(3, 4, label, lean=_NEUTRAL)
        for p in picks:
            words += [p] + fill(3, 4, label, lean=_NEUTRAL)
        return " ".join(words), label

    records = [record(i % 2) for i in range(n_train + n_test)]
    train = Dataset(tuple(records[:n_train]), 2, CLASS_NAMES)
    test = Dataset(tuple(records[n_train:]), 2, CLASS_NAMES)
    return train, test


def write_toy_corpus(
    directory: str | Path, n_train: int = 500, n_test: int = 200, seed: int = 3
) -> tuple[Path, Path]:
    """Write the toy corpus as CSV files and return their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    train, test = make_toy_corpus(n_train, n_test, seed)
    train_path = directory / "toy_train.csv"
    test_path = directory / "toy_test.csv"
    save_dataset(train, train_path)
    save_dataset(test, test_path)
    return train_path, test_path
