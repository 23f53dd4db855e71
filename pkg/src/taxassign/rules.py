"""Rule-based species assignment baseline.

Each gene takes the first rule that fires in the configured priority
order; the default species (human unless configured otherwise) is the
unconditional last resort, so every gene always gets exactly one species
from this method.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .docmodel import Document, GeneMention, SpeciesMention, species_order
from .errors import TaxAssignError
from .tagger import split_sentences

RULE_PREFIX = "prefix"
RULE_SAME_SENTENCE = "same-sentence"
RULE_PARAGRAPH_FREQUENCY = "paragraph-frequency"
RULE_TITLE = "title"
RULE_GLOBAL_FREQUENCY = "global-frequency"
RULE_NEAREST_DOCUMENT = "nearest-document"
PROVENANCE_DEFAULT = "default"

KNOWN_RULES = (
    RULE_PREFIX,
    RULE_SAME_SENTENCE,
    RULE_PARAGRAPH_FREQUENCY,
    RULE_TITLE,
    RULE_GLOBAL_FREQUENCY,
    RULE_NEAREST_DOCUMENT,
)

DEFAULT_RULE_ORDER = (
    RULE_PREFIX,
    RULE_SAME_SENTENCE,
    RULE_PARAGRAPH_FREQUENCY,
    RULE_TITLE,
    RULE_GLOBAL_FREQUENCY,
)

# Classic single-letter organism prefixes; editable via the prefix table
# or the rule config file.
DEFAULT_GENE_PREFIXES = {
    "h": 9606,
    "m": 10090,
    "r": 10116,
    "d": 7227,
    "z": 7955,
}

DEFAULT_TAX_ID = 9606


@dataclass(frozen=True)
class Assignment:
    tax_id: int
    score: float
    provenance: str


@dataclass
class AssignmentResult:
    """Per-gene predicted species, aligned with the document's gene list."""

    assignments: list[list[Assignment]]
    method: str = ""
    scorer_calls: int = 0

    def predicted_ids(self, gene_index: int) -> frozenset[int]:
        return frozenset(a.tax_id for a in self.assignments[gene_index])

    def all_predicted_ids(self) -> list[frozenset[int]]:
        return [self.predicted_ids(i) for i in range(len(self.assignments))]


@dataclass
class RuleConfig:
    rule_order: tuple[str, ...] = DEFAULT_RULE_ORDER
    default_tax_id: int = DEFAULT_TAX_ID
    include_cell_lines: bool = True
    prefix_map: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_GENE_PREFIXES))

    def __post_init__(self) -> None:
        unknown = [r for r in self.rule_order if r not in KNOWN_RULES]
        if unknown:
            raise TaxAssignError(f"unknown rules in order: {', '.join(unknown)}")
        if len(set(self.rule_order)) != len(self.rule_order):
            raise TaxAssignError("rule order contains duplicates")

    @classmethod
    def from_file(cls, path: str) -> "RuleConfig":
        """Plain key=value file. Keys: rules (comma list), default_tax_id,
        include_cell_lines (true/false), prefixes (prefix:taxid comma list)."""
        kwargs: dict = {}
        with open(path, encoding="utf-8") as handle:
            for raw in handle:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise TaxAssignError(f"bad config line (expected key=value): {line!r}")
                key, _, value = line.partition("=")
                key, value = key.strip(), value.strip()
                if key == "rules":
                    kwargs["rule_order"] = tuple(
                        r.strip() for r in value.split(",") if r.strip()
                    )
                elif key == "default_tax_id":
                    kwargs["default_tax_id"] = int(value)
                elif key == "include_cell_lines":
                    kwargs["include_cell_lines"] = value.lower() in ("1", "true", "yes", "on")
                elif key == "prefixes":
                    pairs = [p.strip() for p in value.split(",") if p.strip()]
                    kwargs["prefix_map"] = {
                        p.split(":")[0].strip(): int(p.split(":")[1]) for p in pairs
                    }
                else:
                    raise TaxAssignError(f"unknown config key {key!r}")
        return cls(**kwargs)


def gene_prefix_species(gene_surface: str, prefix_map: dict[str, int]) -> int | None:
    """Species implied by a lowercase organism prefix on the gene surface.

    Fires only when the character after the prefix is uppercase or a digit
    ("hCB1R", "mTOR-like"); the longest matching prefix wins.
    """
    best: tuple[str, int] | None = None
    for prefix, tax_id in prefix_map.items():
        if not prefix or not prefix.islower():
            continue
        if not gene_surface.startswith(prefix) or len(gene_surface) <= len(prefix):
            continue
        nxt = gene_surface[len(prefix)]
        if nxt.isupper() or nxt.isdigit():
            if best is None or len(prefix) > len(best[0]):
                best = (prefix, tax_id)
    return best[1] if best else None


def _resolve_mention_id(mention: SpeciesMention, order: dict[int, int]) -> int:
    """Single id for a possibly ambiguous mention: the id occurring earliest
    in the document's species order."""
    return min(mention.tax_ids, key=lambda tid: order.get(tid, (1 << 60)))


def _sentence_index(sentences: list[tuple[int, int]], position: int) -> int | None:
    for idx, (s, e) in enumerate(sentences):
        if s <= position < e:
            return idx
    return None


def _nearest(gene: GeneMention, candidates: list[SpeciesMention]) -> SpeciesMention | None:
    best = None
    best_key = None
    for m in candidates:
        key = (abs(gene.midpoint - m.midpoint), m.start)
        if best_key is None or key < best_key:
            best, best_key = m, key
    return best


def _most_frequent(
    candidates: list[SpeciesMention], order: dict[int, int]
) -> int | None:
    if not candidates:
        return None
    counts: Counter[int] = Counter()
    first: dict[int, int] = {}
    for m in candidates:
        for tid in m.tax_ids:
            counts[tid] += 1
            if tid not in first or m.start < first[tid]:
                first[tid] = m.start
    return min(counts, key=lambda tid: (-counts[tid], first[tid], order.get(tid, 1 << 60)))


def assign_rule_based(
    doc: Document,
    genes: list[GeneMention],
    species_mentions: list[SpeciesMention],
    config: RuleConfig | None = None,
) -> AssignmentResult:
    """Assign one species per gene by the configured rule priority."""
    config = config or RuleConfig()
    mentions = [
        m
        for m in species_mentions
        if config.include_cell_lines or m.source != "cell-line"
    ]
    sentences = doc.sentences
    if sentences is None:
        sentences = split_sentences(doc.text, species_mentions)
    order = {tid: i for i, tid in enumerate(species_order(mentions))}
    title_span, abstract_span = doc.passages

    def fire(rule: str, gene: GeneMention) -> int | None:
        if rule == RULE_PREFIX:
            return gene_prefix_species(gene.surface, config.prefix_map)
        if rule == RULE_SAME_SENTENCE:
            sent = _sentence_index(sentences, gene.start)
            if sent is None:
                return None
            here = [m for m in mentions if _sentence_index(sentences, m.start) == sent]
            nearest = _nearest(gene, here)
            return _resolve_mention_id(nearest, order) if nearest else None
        if rule == RULE_PARAGRAPH_FREQUENCY:
            span = title_span if gene.start < title_span[1] else abstract_span
            inside = [m for m in mentions if span[0] <= m.start < span[1]]
            return _most_frequent(inside, order)
        if rule == RULE_TITLE:
            inside = [m for m in mentions if m.start < title_span[1]]
            if not inside:
                return None
            earliest = min(inside, key=lambda m: m.start)
            return _resolve_mention_id(earliest, order)
        if rule == RULE_GLOBAL_FREQUENCY:
            return _most_frequent(mentions, order)
        if rule == RULE_NEAREST_DOCUMENT:
            nearest = _nearest(gene, mentions)
            return _resolve_mention_id(nearest, order) if nearest else None
        raise TaxAssignError(f"unknown rule {rule!r}")

    assignments: list[list[Assignment]] = []
    for gene in genes:
        chosen: Assignment | None = None
        for rule in config.rule_order:
            tax_id = fire(rule, gene)
            if tax_id is not None:
                chosen = Assignment(tax_id, 1.0, rule)
                break
        if chosen is None:
            chosen = Assignment(config.default_tax_id, 1.0, PROVENANCE_DEFAULT)
        assignments.append([chosen])
    return AssignmentResult(assignments, method="rule")
