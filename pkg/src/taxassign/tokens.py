"""Shared tokenizer for lexicon names and document text.

Both sides of the matcher (names at build time, text at scan time) must
tokenize identically, so this module is the single source of truth.

Token shape: maximal runs of alphanumerics, where ``.``, ``-``, ``:`` and
``/`` are kept inside a run when they sit between two alphanumerics (so
"O157:H7", "K-12" and "264.7" stay whole). A single trailing period is
absorbed when the run looks like an abbreviation: one or two letters
("E.", "Ae.") or a known dotted rank/strain prefix ("str.", "substr.").
Any other punctuation character is its own token; whitespace separates.
"""

from __future__ import annotations

from typing import NamedTuple

# Lowercase alphabetic runs that conventionally carry a trailing period in
# taxonomic writing and must survive as one token.
DOTTED_ABBREVIATIONS = frozenset(
    {"str", "substr", "subsp", "ssp", "var", "cv", "sp", "spp", "pv", "bv", "cf", "aff"}
)

_JOINERS = frozenset(".-:/")


class Token(NamedTuple):
    surface: str
    norm: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def normalize_token(surface: str) -> str:
    """Lowercase, except tokens containing a digit (strain codes) which are
    compared case-sensitively."""
    if any(c.isdigit() for c in surface):
        return surface
    return surface.lower()


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens with character spans mapping back exactly."""
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalnum():
            j = i + 1
            while j < n:
                c = text[j]
                if c.isalnum():
                    j += 1
                elif c in _JOINERS and j + 1 < n and text[j + 1].isalnum():
                    j += 2
                else:
                    break
            word = text[i:j]
            if (
                j < n
                and text[j] == "."
                and word.isalpha()
                and (len(word) <= 2 or word.lower() in DOTTED_ABBREVIATIONS)
            ):
                j += 1
                word = text[i:j]
            tokens.append(Token(word, normalize_token(word), i, j))
            i = j
        else:
            tokens.append(Token(ch, ch, i, i + 1))
            i += 1
    return tokens


def tokenize_name(name: str) -> list[str]:
    """Normalized token list of a lexicon name string."""
    return [t.norm for t in tokenize(name)]
