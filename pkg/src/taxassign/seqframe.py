"""Marker-tagged sequence encoding and scorer-driven species assignment.

Two sequence strategies plus a pairwise baseline share one pipeline:

  seq-sg  target one species, label every gene that belongs to it;
          one scorer call per distinct species in the document.
  seq-gs  target one gene, label every species it belongs to;
          one scorer call per gene mention.
  pair    classify a single (gene, species) pair per call;
          |genes| x |species| calls.

Documents with zero or one species never reach the scorer: all genes take
the default species, or the single mentioned one.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

from .docmodel import Document, GeneMention, SpeciesMention, species_order
from .errors import (
    CapabilityError,
    EncodeError,
    GoldMissingError,
    SpanOverlapError,
    TaxAssignError,
)
from .rules import Assignment, AssignmentResult, DEFAULT_TAX_ID
from .tagger import split_sentences
from .tokens import tokenize

GENE_OPEN, GENE_CLOSE = "<GENE>", "</GENE>"
SPEC_OPEN, SPEC_CLOSE = "<SPEC>", "</SPEC>"
ARG_OPEN, ARG_CLOSE = "<ARG>", "</ARG>"
MARKER_TOKENS = (GENE_OPEN, GENE_CLOSE, SPEC_OPEN, SPEC_CLOSE, ARG_OPEN, ARG_CLOSE)

MODE_SEQ_SG = "seq-sg"
MODE_SEQ_GS = "seq-gs"
MODE_PAIR = "pair"
SEQ_MODES = (MODE_SEQ_SG, MODE_SEQ_GS)

# Tokens allowed between two species mentions for them to count as conjoined.
CONJUNCTION_TOKENS = frozenset({"and", "or", "&", "/", ",", "to"})

LabelSeq = list[tuple[float, float]]  # per-token (p_O, p_I), rows sum to 1


@dataclass
class TaggedSequence:
    tokens: list[str]
    mode: str
    # Marked entities: token ranges are half-open and include marker tags.
    gene_spans: list[tuple[int, int]]
    gene_refs: list[int]  # document gene indices, aligned with gene_spans
    species_spans: list[tuple[int, int]]
    species_ids: list[frozenset[int]]  # ids per marked species mention
    target: tuple[int, int]  # token range of the ARG-wrapped entity
    target_gene: int | None
    target_species: int | None
    # Reverse mapping and scoring context.
    token_spans: list[tuple[int, int] | None]  # char spans; None for markers
    doc_gene_spans: list[tuple[int, int]] = field(default_factory=list)
    doc_species_mentions: list[tuple[frozenset[int], tuple[int, int]]] = field(
        default_factory=list
    )


@dataclass
class ScoreTable:
    species_ids: tuple[int, ...]  # ordered by earliest mention
    scores: list[list[float]]  # [gene][species index]
    strategy: str
    scorer_calls: int


class Scorer(Protocol):
    capabilities: frozenset[str]

    def score_sequence(self, tagged: TaggedSequence) -> LabelSeq: ...

    def score_pair(self, tagged: TaggedSequence) -> float: ...


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _align_to_tokens(
    starts: list[int], ends: list[int], span: tuple[int, int], surface: str
) -> tuple[int, int]:
    """Token index range covering ``span`` exactly; boundaries must align."""
    s, e = span
    k = bisect_left(starts, s)
    if k >= len(starts) or starts[k] != s:
        raise EncodeError(f"span {span} ({surface!r}) does not start on a token boundary")
    m = k
    while m < len(ends) and ends[m] < e:
        m += 1
    if m >= len(ends) or ends[m] != e:
        raise EncodeError(f"span {span} ({surface!r}) does not end on a token boundary")
    return k, m


def encode(
    doc: Document,
    genes: Sequence[GeneMention],
    species_mentions: Sequence[SpeciesMention],
    target,
    mode: str,
) -> TaggedSequence:
    """Insert GENE/SPEC marker pairs around entity mentions, with ARG tags
    immediately inside the target's own tags.

    ``target`` is a species tax id (seq-sg), a gene index (seq-gs), or a
    (gene index, species tax id) pair (pair mode). In seq modes every
    entity is marked and the target species' first mention carries the ARG
    pair; in pair mode only the requested gene and species are marked.
    """
    if mode not in (MODE_SEQ_SG, MODE_SEQ_GS, MODE_PAIR):
        raise TaxAssignError(f"unknown mode {mode!r}")

    # (char span, kind, entity index, arg?) for the entities to mark
    records: list[tuple[tuple[int, int], str, int, bool]] = []
    target_gene: int | None = None
    target_species: int | None = None

    def first_mention_of(tax_id: int) -> int:
        for i, m in enumerate(species_mentions):
            if tax_id in m.tax_ids:
                return i
        raise EncodeError(f"target species {tax_id} has no mention in document {doc.doc_id}")

    if mode == MODE_SEQ_SG:
        target_species = int(target)
        arg_mention = first_mention_of(target_species)
        records = [(g.span, "gene", i, False) for i, g in enumerate(genes)]
        records += [
            (m.span, "species", i, i == arg_mention)
            for i, m in enumerate(species_mentions)
        ]
    elif mode == MODE_SEQ_GS:
        target_gene = int(target)
        if not 0 <= target_gene < len(genes):
            raise EncodeError(f"target gene index {target_gene} out of range")
        records = [(g.span, "gene", i, i == target_gene) for i, g in enumerate(genes)]
        records += [(m.span, "species", i, False) for i, m in enumerate(species_mentions)]
    else:
        target_gene, target_species = int(target[0]), int(target[1])
        if not 0 <= target_gene < len(genes):
            raise EncodeError(f"target gene index {target_gene} out of range")
        mention_idx = first_mention_of(target_species)
        records = [
            (genes[target_gene].span, "gene", target_gene, False),
            (species_mentions[mention_idx].span, "species", mention_idx, False),
        ]

    # All entity spans must be pairwise disjoint, marked or not.
    all_spans = [g.span for g in genes] + [m.span for m in species_mentions]
    ordered = sorted(all_spans)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur[0] < prev[1]:
            raise SpanOverlapError(prev, cur)

    records.sort(key=lambda r: r[0])
    stream = tokenize(doc.text)
    starts = [t.start for t in stream]
    ends = [t.end for t in stream]

    aligned: list[tuple[int, int, str, int, bool]] = []
    for span, kind, idx, is_arg in records:
        surface = doc.text[span[0] : span[1]]
        k, m = _align_to_tokens(starts, ends, span, surface)
        aligned.append((k, m, kind, idx, is_arg))

    tokens: list[str] = []
    token_spans: list[tuple[int, int] | None] = []
    gene_spans: list[tuple[int, int]] = []
    gene_refs: list[int] = []
    spec_spans: list[tuple[int, int]] = []
    spec_ids: list[frozenset[int]] = []
    target_span: tuple[int, int] | None = None

    pos = 0
    for k, m, kind, idx, is_arg in aligned:
        for t in stream[pos:k]:
            tokens.append(t.surface)
            token_spans.append(t.span)
        open_tag, close_tag = (
            (GENE_OPEN, GENE_CLOSE) if kind == "gene" else (SPEC_OPEN, SPEC_CLOSE)
        )
        entity_start = len(tokens)
        tokens.append(open_tag)
        token_spans.append(None)
        if is_arg:
            tokens.append(ARG_OPEN)
            token_spans.append(None)
        for t in stream[k : m + 1]:
            tokens.append(t.surface)
            token_spans.append(t.span)
        if is_arg:
            tokens.append(ARG_CLOSE)
            token_spans.append(None)
        tokens.append(close_tag)
        token_spans.append(None)
        entity_end = len(tokens)
        if kind == "gene":
            gene_spans.append((entity_start, entity_end))
            gene_refs.append(idx)
        else:
            spec_spans.append((entity_start, entity_end))
            spec_ids.append(species_mentions[idx].tax_ids)
        if is_arg:
            target_span = (entity_start, entity_end)
        pos = m + 1
    for t in stream[pos:]:
        tokens.append(t.surface)
        token_spans.append(t.span)

    if target_span is None:
        # pair mode has no ARG pair: the target is the marked gene span
        target_span = gene_spans[0] if gene_spans else (0, 0)

    return TaggedSequence(
        tokens=tokens,
        mode=mode,
        gene_spans=gene_spans,
        gene_refs=gene_refs,
        species_spans=spec_spans,
        species_ids=spec_ids,
        target=target_span,
        target_gene=target_gene,
        target_species=target_species,
        token_spans=token_spans,
        doc_gene_spans=[g.span for g in genes],
        doc_species_mentions=[(m.tax_ids, m.span) for m in species_mentions],
    )


def strip_markers(tagged: TaggedSequence) -> list[str]:
    """Original token stream with all marker tokens removed."""
    return [t for t, span in zip(tagged.tokens, tagged.token_spans) if span is not None]


# ---------------------------------------------------------------------------
# Gold labels and aggregation
# ---------------------------------------------------------------------------


def make_gold_labels(
    tagged: TaggedSequence, gold: Sequence[frozenset[int] | None]
) -> LabelSeq:
    """Hard 0/1 label rows for a seq-mode sequence.

    ``gold`` is indexed by document gene position. Tokens of entities that
    correspond to the target (marker tags included) are inside; everything
    else is outside.
    """
    if tagged.mode not in SEQ_MODES:
        raise TaxAssignError(f"gold labels are defined for seq modes, not {tagged.mode!r}")
    labels: LabelSeq = [(1.0, 0.0)] * len(tagged.tokens)

    def gold_for(gene_idx: int) -> frozenset[int]:
        if gene_idx >= len(gold) or gold[gene_idx] is None:
            raise GoldMissingError(f"gene {gene_idx} has no gold species set")
        return gold[gene_idx]  # type: ignore[return-value]

    if tagged.mode == MODE_SEQ_SG:
        for span, gene_idx in zip(tagged.gene_spans, tagged.gene_refs):
            if tagged.target_species in gold_for(gene_idx):
                for t in range(span[0], span[1]):
                    labels[t] = (0.0, 1.0)
    else:
        target_gold = gold_for(tagged.target_gene)  # type: ignore[arg-type]
        for span, ids in zip(tagged.species_spans, tagged.species_ids):
            if ids & target_gold:
                for t in range(span[0], span[1]):
                    labels[t] = (0.0, 1.0)
    return labels


def aggregate(labels: LabelSeq, tagged: TaggedSequence) -> dict[int, float]:
    """Pool per-token inside-probabilities into entity scores.

    seq-sg returns {gene index: score}; seq-gs returns {species id: score}.
    The score is the arithmetic mean of p_I over the entity's tokens,
    marker tags included.
    """
    if tagged.mode not in SEQ_MODES:
        raise TaxAssignError(f"aggregation is defined for seq modes, not {tagged.mode!r}")
    if len(labels) != len(tagged.tokens):
        raise TaxAssignError(
            f"label row count {len(labels)} != token count {len(tagged.tokens)}"
        )

    def span_mean(span: tuple[int, int]) -> float:
        width = span[1] - span[0]
        return sum(labels[t][1] for t in range(span[0], span[1])) / width

    if tagged.mode == MODE_SEQ_SG:
        return {g: span_mean(span) for span, g in zip(tagged.gene_spans, tagged.gene_refs)}

    positions: dict[int, list[int]] = {}
    for span, ids in zip(tagged.species_spans, tagged.species_ids):
        for tid in ids:
            positions.setdefault(tid, []).extend(range(span[0], span[1]))
    return {
        tid: sum(labels[t][1] for t in pos) / len(pos) for tid, pos in positions.items()
    }


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def detect_conjunction(
    doc: Document,
    species_a_mentions: list[SpeciesMention],
    species_b_mentions: list[SpeciesMention],
    sentences: list[tuple[int, int]] | None = None,
) -> bool:
    """True when some mention of each species sits in the same sentence
    joined only by coordination tokens ("human and mouse")."""
    if sentences is None:
        sentences = doc.sentences
    if sentences is None:
        sentences = split_sentences(
            doc.text, list(species_a_mentions) + list(species_b_mentions)
        )

    def sentence_of(pos: int) -> int | None:
        for i, (s, e) in enumerate(sentences):
            if s <= pos < e:
                return i
        return None

    for ma in species_a_mentions:
        for mb in species_b_mentions:
            if ma is mb:
                continue
            sa = sentence_of(ma.start)
            if sa is None or sa != sentence_of(mb.start):
                continue
            lo, hi = (ma, mb) if ma.start <= mb.start else (mb, ma)
            if lo.end > hi.start:
                continue
            between = doc.text[lo.end : hi.start]
            if all(t.norm in CONJUNCTION_TOKENS for t in tokenize(between)):
                return True
    return False


def decode(
    table: ScoreTable,
    doc: Document,
    species_mentions: Sequence[SpeciesMention],
    threshold: float = 0.5,
) -> AssignmentResult:
    """Argmax assignment with the conjunction exception.

    Each gene takes the top-scoring species (ties go to the species whose
    first mention is earliest). When the runner-up clears the threshold and
    is in conjunction with the winner, it is assigned too. A top score
    below the threshold is still assigned but flagged as a fallback.
    """
    if not table.species_ids:
        raise TaxAssignError("cannot decode with zero species; use the shortcut path")
    by_id: dict[int, list[SpeciesMention]] = {tid: [] for tid in table.species_ids}
    for m in species_mentions:
        for tid in m.tax_ids:
            if tid in by_id:
                by_id[tid].append(m)
    sentences = doc.sentences
    if sentences is None:
        sentences = split_sentences(doc.text, list(species_mentions))

    assignments: list[list[Assignment]] = []
    for row in table.scores:
        ranked = sorted(range(len(table.species_ids)), key=lambda j: (-row[j], j))
        j0 = ranked[0]
        top = Assignment(
            table.species_ids[j0],
            row[j0],
            "model" if row[j0] >= threshold else "fallback",
        )
        per_gene = [top]
        if len(ranked) > 1:
            j1 = ranked[1]
            if row[j1] >= threshold and detect_conjunction(
                doc,
                by_id[table.species_ids[j0]],
                by_id[table.species_ids[j1]],
                sentences,
            ):
                per_gene.append(Assignment(table.species_ids[j1], row[j1], "conjunction"))
        assignments.append(per_gene)
    return AssignmentResult(assignments, method=table.strategy, scorer_calls=table.scorer_calls)


# ---------------------------------------------------------------------------
# Scorer-driven assignment
# ---------------------------------------------------------------------------


def assign_with_scorer(
    doc: Document,
    genes: Sequence[GeneMention],
    species_mentions: Sequence[SpeciesMention],
    strategy: str,
    scorer: Scorer,
    threshold: float = 0.5,
    default_tax_id: int = DEFAULT_TAX_ID,
) -> AssignmentResult:
    """Full scorer pipeline with the zero/one-species shortcut paths."""
    if strategy not in (MODE_SEQ_SG, MODE_SEQ_GS, MODE_PAIR):
        raise TaxAssignError(f"unknown strategy {strategy!r}")
    ids = species_order(list(species_mentions))
    if not genes:
        return AssignmentResult([], method=strategy, scorer_calls=0)
    if not ids:
        return AssignmentResult(
            [[Assignment(default_tax_id, 1.0, "default")] for _ in genes],
            method=strategy,
        )
    if len(ids) == 1:
        return AssignmentResult(
            [[Assignment(ids[0], 1.0, "single-species")] for _ in genes],
            method=strategy,
        )

    needed = "pair" if strategy == MODE_PAIR else "sequence"
    if needed not in scorer.capabilities:
        raise CapabilityError(f"scorer does not support {needed!r} requests")

    calls = 0
    scores = [[0.0] * len(ids) for _ in genes]
    if strategy == MODE_SEQ_SG:
        for j, tid in enumerate(ids):
            tagged = encode(doc, genes, species_mentions, tid, MODE_SEQ_SG)
            labels = scorer.score_sequence(tagged)
            calls += 1
            for g, score in aggregate(labels, tagged).items():
                scores[g][j] = score
    elif strategy == MODE_SEQ_GS:
        for g in range(len(genes)):
            tagged = encode(doc, genes, species_mentions, g, MODE_SEQ_GS)
            labels = scorer.score_sequence(tagged)
            calls += 1
            per_species = aggregate(labels, tagged)
            for j, tid in enumerate(ids):
                scores[g][j] = per_species.get(tid, 0.0)
    else:
        for g in range(len(genes)):
            for j, tid in enumerate(ids):
                tagged = encode(doc, genes, species_mentions, (g, tid), MODE_PAIR)
                scores[g][j] = scorer.score_pair(tagged)
                calls += 1

    table = ScoreTable(tuple(ids), scores, strategy, calls)
    return decode(table, doc, species_mentions, threshold)


# ---------------------------------------------------------------------------
# Mock scorer: deterministic nearest-mention oracle for tests and dry runs
# ---------------------------------------------------------------------------


def _nearest_mention_ids(
    gene_span: tuple[int, int],
    mentions: list[tuple[frozenset[int], tuple[int, int]]],
) -> frozenset[int]:
    mid = (gene_span[0] + gene_span[1]) / 2.0
    best_ids: frozenset[int] = frozenset()
    best_key: tuple[float, int] | None = None
    for ids, span in mentions:
        key = (abs(mid - (span[0] + span[1]) / 2.0), span[0])
        if best_key is None or key < best_key:
            best_key, best_ids = key, ids
    return best_ids


def mock_score(tagged: TaggedSequence) -> LabelSeq | float:
    """Nearest-species heuristic rendered as scorer output.

    Entities belonging to the target's nearest counterpart get 0.9, others
    0.1; non-entity tokens stay fully outside. Pair mode returns the scalar
    directly.
    """
    mentions = tagged.doc_species_mentions
    if tagged.mode == MODE_PAIR:
        nearest = _nearest_mention_ids(
            tagged.doc_gene_spans[tagged.target_gene], mentions
        )
        return 0.9 if tagged.target_species in nearest else 0.1

    labels: LabelSeq = [(1.0, 0.0)] * len(tagged.tokens)

    def fill(span: tuple[int, int], p: float) -> None:
        for t in range(span[0], span[1]):
            labels[t] = (1.0 - p, p)

    if tagged.mode == MODE_SEQ_SG:
        for span, gene_idx in zip(tagged.gene_spans, tagged.gene_refs):
            nearest = _nearest_mention_ids(tagged.doc_gene_spans[gene_idx], mentions)
            fill(span, 0.9 if tagged.target_species in nearest else 0.1)
    else:
        nearest = _nearest_mention_ids(
            tagged.doc_gene_spans[tagged.target_gene], mentions
        )
        for span, ids in zip(tagged.species_spans, tagged.species_ids):
            fill(span, 0.9 if ids & nearest else 0.1)
    return labels


class MockScorer:
    """In-process scorer used when no model service is available."""

    capabilities = frozenset({"sequence", "pair"})

    def score_sequence(self, tagged: TaggedSequence) -> LabelSeq:
        result = mock_score(tagged)
        assert isinstance(result, list)
        return result

    def score_pair(self, tagged: TaggedSequence) -> float:
        result = mock_score(tagged)
        assert isinstance(result, float)
        return result


# ---------------------------------------------------------------------------
# Training data export
# ---------------------------------------------------------------------------


def export_training_data(
    corpus, strategy: str
) -> Iterator[tuple[TaggedSequence, LabelSeq]]:
    """One (tagged sequence, gold labels) record per (document, target).

    Documents on the shortcut path (fewer than two species) produce no
    records; they never reach a scorer at inference time either. Only seq
    strategies are exportable: gold label sequences are undefined for the
    pairwise mode.
    """
    if strategy not in SEQ_MODES:
        raise TaxAssignError(f"training export supports seq modes, not {strategy!r}")
    documents: Iterable[Document] = getattr(corpus, "documents", corpus)
    documents = list(documents)
    missing = [
        doc.doc_id
        for doc in documents
        if any(g.gold_tax_ids is None for g in doc.genes)
    ]
    if missing:
        raise GoldMissingError(
            "documents with unannotated genes: " + ", ".join(missing)
        )
    for doc in documents:
        ids = species_order(doc.species)
        if len(ids) < 2 or not doc.genes:
            continue
        gold = [g.gold_tax_ids for g in doc.genes]
        if strategy == MODE_SEQ_SG:
            targets = list(ids)
        else:
            targets = list(range(len(doc.genes)))
        for target in targets:
            tagged = encode(doc, doc.genes, doc.species, target, strategy)
            yield tagged, make_gold_labels(tagged, gold)


def format_training_record(
    record_id: int, tagged: TaggedSequence, labels: LabelSeq
) -> str:
    """Serialize one export record as a wire-format JSON line."""
    return json.dumps(
        {
            "id": record_id,
            "mode": "sequence",
            "tokens": tagged.tokens,
            "labels": ["I" if p_i >= 0.5 else "O" for _, p_i in labels],
        },
        ensure_ascii=False,
    )
