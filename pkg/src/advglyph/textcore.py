"""Text primitives: tokenization, homoglyph tables, substitution, datasets.

Everything downstream (feature hashing, interpreters, attacks) operates on the
token grid produced here, so the tokenizer is deliberately small and exactly
specified: tokens are maximal non-whitespace runs, with leading and trailing
punctuation peeled off as single-character tokens of their own. Offsets always
refer to the original string, which makes in-place character edits auditable.
"""

from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyInputError, SubstitutionError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash (offset 14695981039346656037, prime 1099511628211)."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    """A token together with its [start, end) span in the source string."""

    text: str
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TokenizedText:
    """A source string plus its token grid.

    ``source`` is the exact original string; concatenating the tokens with the
    inter-token gaps of ``source`` reproduces it verbatim.
    """

    source: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenizedText:
    """Split ``text`` into whitespace-delimited tokens with punctuation peeled.

    Each maximal non-whitespace run becomes one token, except that leading and
    trailing punctuation characters (Unicode category P*) of the run are
    emitted as single-character tokens before/after the core. Whitespace-only
    or empty input raises EmptyInputError.
    """
    if not isinstance(text, str):
        raise TypeError(f"expected str, got {type(text).__name__}")
    if not text or text.isspace():
        raise EmptyInputError("cannot tokenize empty or whitespace-only text")
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        _split_run(text, i, j, tokens)
        i = j
    return TokenizedText(text, tuple(tokens))


def _split_run(text: str, start: int, end: int, out: list[Token]) -> None:
    a, b = start, end
    while a < b and _is_punct(text[a]):
        out.append(Token(text[a], a, a + 1))
        a += 1
    trail: list[Token] = []
    while b > a and _is_punct(text[b - 1]):
        trail.append(Token(text[b - 1], b - 1, b))
        b -= 1
    if a < b:
        out.append(Token(text[a:b], a, b))
    out.extend(reversed(trail))


def splice_token(toks: TokenizedText, index: int, new_text: str) -> TokenizedText:
    """Replace token ``index`` with ``new_text`` and rebuild the grid.

    The replacement must keep the token a single whitespace-free,
    punctuation-free-at-the-edges unit so spans stay valid; homoglyph
    substitutions (letter for letter, same length) always satisfy this.
    """
    tok = toks.tokens[index]
    if not new_text or any(c.isspace() for c in new_text):
        raise ValueError("replacement token must be non-empty and whitespace-free")
    delta = len(new_text) - len(tok.text)
    source = toks.source[: tok.start] + new_text + toks.source[tok.end :]
    rebuilt: list[Token] = []
    for k, t in enumerate(toks.tokens):
        if k < index:
            rebuilt.append(t)
        elif k == index:
            rebuilt.append(Token(new_text, t.start, t.end + delta))
        else:
            rebuilt.append(Token(t.text, t.start + delta, t.end + delta))
    return TokenizedText(source, tuple(rebuilt))


# ---------------------------------------------------------------------------
# Homoglyph tables
# ---------------------------------------------------------------------------

# Visually confusable replacements drawn from Cyrillic, Greek and IPA blocks.
# Sources are ASCII; replacements are never themselves sources, so repeated
# substitution can never chain through the table.
_DEFAULT_CONFUSABLES: dict[str, tuple[str, ...]] = {
    "a": ("а",),            # а CYRILLIC SMALL A
    "b": ("Ƅ",),            # Ƅ LATIN SMALL TONE SIX
    "c": ("с",),            # с CYRILLIC SMALL ES
    "d": ("ԁ",),            # ԁ CYRILLIC SMALL KOMI DE
    "e": ("е",),            # е CYRILLIC SMALL IE
    "f": ("ƒ",),            # ƒ LATIN SMALL F WITH HOOK
    "g": ("ɡ",),            # ɡ LATIN SMALL SCRIPT G
    "h": ("һ",),            # һ CYRILLIC SMALL SHHA
    "i": ("і", "ι"),   # і CYRILLIC SMALL BYELORUSSIAN-UKRAINIAN I, ι GREEK IOTA
    "j": ("ј",),            # ј CYRILLIC SMALL JE
    "k": ("κ",),            # κ GREEK SMALL KAPPA
    "l": ("ӏ",),            # ӏ CYRILLIC SMALL PALOCHKA
    "m": ("м",),            # м CYRILLIC SMALL EM
    "n": ("ո",),            # ն ARMENIAN SMALL VO
    "o": ("о", "ο"),   # о CYRILLIC SMALL O, ο GREEK OMICRON
    "p": ("р", "ρ"),   # р CYRILLIC SMALL ER, ρ GREEK RHO
    "q": ("ԛ",),            # ԛ CYRILLIC SMALL QA
    "r": ("г",),            # г CYRILLIC SMALL GHE
    "s": ("ѕ",),            # ѕ CYRILLIC SMALL DZE
    "t": ("т",),            # т CYRILLIC SMALL TE
    "u": ("υ",),            # υ GREEK SMALL UPSILON
    "v": ("ν",),            # ν GREEK SMALL NU
    "w": ("ԝ",),            # ԝ CYRILLIC SMALL WE
    "x": ("х", "χ"),   # х CYRILLIC SMALL HA, χ GREEK CHI
    "y": ("у",),            # у CYRILLIC SMALL U
    "z": ("ᴢ",),            # ᴢ LATIN LETTER SMALL CAPITAL Z
    "A": ("А",),            # А CYRILLIC CAPITAL A
    "B": ("В",),            # В CYRILLIC CAPITAL VE
    "C": ("С",),            # С CYRILLIC CAPITAL ES
    "E": ("Е",),            # Е CYRILLIC CAPITAL IE
    "F": ("Ϝ",),            # Ϝ GREEK CAPITAL DIGAMMA
    "G": ("Ԍ",),            # Ԍ CYRILLIC CAPITAL KOMI SJE
    "H": ("Н",),            # Н CYRILLIC CAPITAL EN
    "I": ("І",),            # І CYRILLIC CAPITAL BYELORUSSIAN-UKRAINIAN I
    "J": ("Ј",),            # Ј CYRILLIC CAPITAL JE
    "K": ("К",),            # К CYRILLIC CAPITAL KA
    "M": ("М",),            # М CYRILLIC CAPITAL EM
    "N": ("Ν",),            # Ν GREEK CAPITAL NU
    "O": ("О",),            # О CYRILLIC CAPITAL O
    "P": ("Р",),            # Р CYRILLIC CAPITAL ER
    "S": ("Ѕ",),            # Ѕ CYRILLIC CAPITAL DZE
    "T": ("Т",),            # Т CYRILLIC CAPITAL TE
    "X": ("Х",),            # Х CYRILLIC CAPITAL HA
    "Y": ("Υ",),            # Υ GREEK CAPITAL UPSILON
    "Z": ("Ζ",),            # Ζ GREEK CAPITAL ZETA
    "0": ("О",),            # О CYRILLIC CAPITAL O
    "1": ("І",),            # І CYRILLIC CAPITAL I
    "3": ("З",),            # З CYRILLIC CAPITAL ZE
    "4": ("Ч",),            # Ч CYRILLIC CAPITAL CHE
    "5": ("Ƽ",),            # Ƽ LATIN CAPITAL TONE FIVE
    "6": ("б",),            # б CYRILLIC SMALL BE
}


@dataclass(frozen=True)
class HomoglyphTable:
    """Maps single characters to ordered tuples of confusable replacements.

    Replacements never appear as sources, so substitution cannot chain: a
    character written by one substitution is never itself substitutable.
    """

    entries: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        sources = set(self.entries)
        for src, repls in self.entries.items():
            if len(src) != 1:
                raise DataError(f"table source {src!r} is not a single character")
            if not repls:
                raise DataError(f"table source {src!r} has no replacements")
            for rep in repls:
                if len(rep) != 1:
                    raise DataError(f"replacement {rep!r} for {src!r} is not a single character")
                if rep == src:
                    raise DataError(f"replacement for {src!r} maps to itself")
                if rep in sources:
                    raise DataError(
                        f"replacement {rep!r} for {src!r} is itself a source; chains are not allowed"
                    )

    def __contains__(self, ch: str) -> bool:
        return ch in self.entries

    def variants(self, ch: str) -> tuple[str, ...]:
        return self.entries.get(ch, ())

    @classmethod
    def default(cls) -> "HomoglyphTable":
        return cls(dict(_DEFAULT_CONFUSABLES))

    @classmethod
    def from_file(cls, path: str | Path) -> "HomoglyphTable":
        """Parse a tab-separated table file.

        Each non-blank, non-comment line reads ``SOURCE<TAB>REPL[,REPL...]``
        where a character is written either literally or as ``U+XXXX``.
        """
        entries: dict[str, tuple[str, ...]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise DataError(f"{path}:{lineno}: expected SOURCE<TAB>REPLACEMENTS")
                src = _parse_char(parts[0].strip(), path, lineno)
                repls = tuple(
                    _parse_char(p.strip(), path, lineno) for p in parts[1].split(",")
                )
                if src in entries:
                    raise DataError(f"{path}:{lineno}: duplicate source {src!r}")
                entries[src] = repls
        if not entries:
            raise DataError(f"{path}: table file defines no entries")
        return cls(entries)


def _parse_char(spec: str, path, lineno: int) -> str:
    if spec.upper().startswith("U+"):
        try:
            code = int(spec[2:], 16)
            return chr(code)
        except (ValueError, OverflowError):
            raise DataError(f"{path}:{lineno}: bad code point {spec!r}") from None
    if len(spec) != 1:
        raise DataError(f"{path}:{lineno}: {spec!r} is not a single character")
    return spec


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


class Strategy(str, Enum):
    """Position-selection strategies for in-token substitution."""

    MIDDLE_CHAR = "middle-char"
    FIRST_ALPHABETIC = "first-alphabetic"
    SEEDED_RANDOM = "seeded-random"
    SCAN_BEST = "scan-best"


@dataclass(frozen=True)
class SubstitutionPolicy:
    strategy: Strategy = Strategy.MIDDLE_CHAR
    seed: int = 0


def substitute_char(token: str, position: int, table: HomoglyphTable, variant: int = 0) -> str:
    """Return ``token`` with the character at ``position`` replaced.

    Exactly one character differs from the input. Raises IndexError for an
    out-of-range position and SubstitutionError when the character has no
    table entry or the variant index is out of range.
    """
    if not token:
        raise EmptyInputError("cannot substitute into an empty token")
    if not 0 <= position < len(token):
        raise IndexError(f"position {position} out of range for token of length {len(token)}")
    repls = table.variants(token[position])
    if not repls:
        raise SubstitutionError(f"no replacement entry for character {token[position]!r}")
    if not 0 <= variant < len(repls):
        raise SubstitutionError(
            f"variant {variant} out of range; {token[position]!r} has {len(repls)} replacements"
        )
    return token[:position] + repls[variant] + token[position + 1 :]


def candidate_positions(
    token: str, table: HomoglyphTable, policy: SubstitutionPolicy
) -> list[int]:
    """Order the substitutable positions of ``token`` under ``policy``.

    Only positions whose character has a table entry are returned; the list is
    empty when nothing in the token is substitutable. middle-char sorts by
    distance from the token center (ties toward the left), first-alphabetic
    puts alphabetic positions first, seeded-random shuffles deterministically
    from (policy seed, token text), and scan-best returns ascending positions
    for the caller to probe exhaustively.
    """
    eligible = [i for i, ch in enumerate(token) if ch in table]
    if not eligible:
        return []
    if policy.strategy is Strategy.MIDDLE_CHAR:
        center = (len(token) - 1) / 2
        return sorted(eligible, key=lambda i: (abs(i - center), i))
    if policy.strategy is Strategy.FIRST_ALPHABETIC:
        alpha = [i for i in eligible if token[i].isalpha()]
        rest = [i for i in eligible if not token[i].isalpha()]
        return alpha + rest
    if policy.strategy is Strategy.SEEDED_RANDOM:
        rng = np.random.default_rng([policy.seed & _U64, fnv1a64(token.encode("utf-8"))])
        order = list(eligible)
        rng.shuffle(order)
        return order
    if policy.strategy is Strategy.SCAN_BEST:
        return eligible
    raise ValueError(f"unknown strategy {policy.strategy!r}")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Labeled text records with an explicit label-space size."""

    records: tuple[tuple[str, int], ...]
    label_count: int
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.label_count < 2:
            raise DataError(f"label_count must be >= 2, got {self.label_count}")
        for text, label in self.records:
            if not 0 <= label < self.label_count:
                raise DataError(f"label {label} outside [0, {self.label_count})")
        if self.class_names and len(self.class_names) != self.label_count:
            raise DataError("class_names length must match label_count")

    def __len__(self) -> int:
        return len(self.records)

    def texts(self) -> list[str]:
        return [t for t, _ in self.records]

    def labels(self) -> list[int]:
        return [y for _, y in self.records]


def load_dataset(path: str | Path) -> Dataset:
    """Read a two-column CSV of ``label,text`` records.

    The header's first column is either ``label`` (label space inferred as
    1 + max observed label) or ``label:M`` declaring M classes explicitly.
    Malformed rows raise DataError with the offending line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        declared = _parse_header(header, path)
        records: list[tuple[str, int]] = []
        for row in reader:
            if not row:
                continue
            lineno = reader.line_num
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {row[0]!r} is not an integer") from None
            if label < 0:
                raise DataError(f"{path}:{lineno}: label must be non-negative")
            text = row[1]
            if not text or text.isspace():
                raise DataError(f"{path}:{lineno}: record text is empty")
            records.append((text, label))
    if not records:
        raise DataError(f"{path}: no records")
    label_count = declared if declared is not None else 1 + max(y for _, y in records)
    if declared is not None:
        for i, (_, y) in enumerate(records):
            if y >= declared:
                raise DataError(f"{path}: record {i} has label {y} >= declared {declared}")
    if label_count < 2:
        raise DataError(f"{path}: needs at least 2 classes, found {label_count}")
    return Dataset(tuple(records), label_count)


def _parse_header(header: list[str], path) -> int | None:
    if len(header) != 2 or header[1].strip() != "text":
        raise DataError(f"{path}:1: header must be 'label,text' or 'label:M,text'")
    first = header[0].strip()
    if first == "label":
        return None
    if first.startswith("label:"):
        try:
            declared = int(first[len("label:") :])
        except ValueError:
            raise DataError(f"{path}:1: bad label-space declaration {first!r}") from None
        if declared < 2:
            raise DataError(f"{path}:1: declared label space must be >= 2")
        return declared
    raise DataError(f"{path}:1: header must be 'label,text' or 'label:M,text'")


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` as the CSV format load_dataset reads back."""
    observed = 1 + max(y for _, y in dataset.records) if dataset.records else 0
    head = "label" if observed == dataset.label_count else f"label:{dataset.label_count}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([head, "text"])
        for text, label in dataset.records:
            writer.writerow([label, text])
