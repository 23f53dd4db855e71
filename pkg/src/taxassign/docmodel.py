"""Core document/mention types shared by the tagger, rules and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SpeciesMention:
    span: tuple[int, int]
    surface: str
    tax_ids: frozenset[int]
    source: str = "trie"  # trie | genus-promotion | strain-code | cell-line | annotation

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    @property
    def midpoint(self) -> float:
        return (self.span[0] + self.span[1]) / 2.0


@dataclass(frozen=True)
class GeneMention:
    span: tuple[int, int]
    surface: str
    gold_tax_ids: frozenset[int] | None = None

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    @property
    def midpoint(self) -> float:
        return (self.span[0] + self.span[1]) / 2.0


@dataclass
class Document:
    """One abstract: combined text is ``title + " " + abstract``."""

    doc_id: str
    title: str
    abstract: str
    species: list[SpeciesMention] = field(default_factory=list)
    genes: list[GeneMention] = field(default_factory=list)
    sentences: list[tuple[int, int]] | None = None

    @property
    def text(self) -> str:
        return self.title + " " + self.abstract

    @property
    def passages(self) -> tuple[tuple[int, int], tuple[int, int]]:
        title_end = len(self.title)
        return (0, title_end), (title_end + 1, len(self.text))

    def check_span(self, span: tuple[int, int], surface: str) -> bool:
        start, end = span
        return 0 <= start < end <= len(self.text) and self.text[start:end] == surface


def species_order(mentions: list[SpeciesMention]) -> list[int]:
    """Distinct tax ids ordered by earliest mention, then id.

    This is the canonical orientation used for every tie-break downstream
    (decoding, ambiguous-mention resolution), so the rule-based and
    scorer-based paths agree on equal evidence.
    """
    first: dict[int, int] = {}
    for m in mentions:
        for tid in m.tax_ids:
            if tid not in first or m.start < first[tid]:
                first[tid] = m.start
    return sorted(first, key=lambda tid: (first[tid], tid))
