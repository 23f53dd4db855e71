"""Document-level species recognition and normalization.

Pipeline per document: tokenize, greedy longest-match scan against the
species trie, genus promotion, bare strain-code recovery, cell-line
recognition, then sentence splitting that respects mention spans.
"""

from __future__ import annotations

from .docmodel import Document, SpeciesMention
from .lexicon import CompiledLexicon, Lexicon, RANK_GENUS, RANK_SPECIES, build_cell_line_trie
from .matcher import DEFAULT_SKIP_TOKENS, NO_SKIPS, TrieNode, search_longest
from .tokens import Token, tokenize  # noqa: F401  (tokenize is part of this module's surface)

_TERMINATORS = frozenset(".?!")


def doc_level_ids(mentions: list[SpeciesMention]) -> set[int]:
    """Deduplicated union of mention ids; document-level normalization output."""
    ids: set[int] = set()
    for m in mentions:
        ids.update(m.tax_ids)
    return ids


def _species_level_ids(lexicon: Lexicon, tax_ids: frozenset[int]) -> set[int]:
    """Map mention ids to their species-rank ancestors (or selves)."""
    out: set[int] = set()
    for tid in tax_ids:
        seen = set()
        current = tid
        while current and current in lexicon.entries and current not in seen:
            seen.add(current)
            entry = lexicon.entries[current]
            if entry.rank == RANK_SPECIES:
                out.add(current)
                break
            current = entry.parent_id
        else:
            if tid in lexicon.entries and lexicon.entries[tid].rank == RANK_SPECIES:
                out.add(tid)
    return out


def tag_document(
    doc: Document,
    lexicon: Lexicon,
    trie: TrieNode,
    cell_trie: TrieNode | None = None,
) -> list[SpeciesMention]:
    """Recognize and normalize species mentions in one document.

    Emitted spans never overlap; the scan is greedy left-to-right and
    resumes after each match. Promotion order: genus names to their
    representative species, then bare strain codes (anchored to a species
    already present in the document), then cell lines.
    """
    if cell_trie is None:
        cell_trie = build_cell_line_trie(lexicon)
    text = doc.text
    stream = tokenize(text)
    norms = [t.norm for t in stream]

    mentions: list[SpeciesMention] = []
    i = 0
    while i < len(norms):
        match = search_longest(trie, norms, i, DEFAULT_SKIP_TOKENS)
        if match is None:
            i += 1
            continue
        start = stream[match.start_token].start
        end = stream[match.end_token].end
        mentions.append(
            SpeciesMention((start, end), text[start:end], match.tax_ids, "trie")
        )
        i = match.end_token + 1

    # Genus promotion: a bare genus that represents exactly one species.
    promoted: list[SpeciesMention] = []
    for m in mentions:
        key = " ".join(
            t.norm for t in stream if t.start >= m.start and t.end <= m.end
        )
        species_id = lexicon.genus_to_species.get(key)
        if species_id is not None and any(
            lexicon.entries[tid].rank == RANK_GENUS
            for tid in m.tax_ids
            if tid in lexicon.entries
        ):
            promoted.append(
                SpeciesMention(m.span, m.surface, frozenset({species_id}), "genus-promotion")
            )
        else:
            promoted.append(m)
    mentions = promoted

    # Bare strain codes, valid only against species already in the document.
    anchors: set[int] = set()
    for m in mentions:
        anchors.update(_species_level_ids(lexicon, m.tax_ids))
    if lexicon.strain_codes and anchors:
        covered = [(m.start, m.end) for m in mentions]

        def free(tok: Token) -> bool:
            return all(tok.end <= s or tok.start >= e for s, e in covered)

        for tok in stream:
            if not any(c.isdigit() for c in tok.surface) or not free(tok):
                continue
            for species_id in sorted(anchors):
                strain_id = lexicon.strain_codes.get((species_id, tok.surface))
                if strain_id is not None:
                    mentions.append(
                        SpeciesMention(
                            tok.span, tok.surface, frozenset({strain_id}), "strain-code"
                        )
                    )
                    covered.append(tok.span)
                    break

    # Cell lines carry their host species id, flagged by source.
    if lexicon.cell_lines:
        covered = [(m.start, m.end) for m in mentions]
        i = 0
        while i < len(norms):
            match = search_longest(cell_trie, norms, i, NO_SKIPS)
            if match is None:
                i += 1
                continue
            start = stream[match.start_token].start
            end = stream[match.end_token].end
            if all(end <= s or start >= e for s, e in covered):
                mentions.append(
                    SpeciesMention((start, end), text[start:end], match.tax_ids, "cell-line")
                )
                covered.append((start, end))
            i = match.end_token + 1

    mentions.sort(key=lambda m: m.span)
    return mentions


def split_sentences(text: str, mentions: list[SpeciesMention]) -> list[tuple[int, int]]:
    """Sentence spans; terminators inside recognized mentions never split.

    A split happens after ".", "?" or "!" followed by whitespace and an
    uppercase letter. Spans are trimmed to non-whitespace bounds.
    """
    protected = [(m.start, m.end) for m in mentions]

    def inside_mention(i: int) -> bool:
        return any(s <= i < e for s, e in protected)

    n = len(text)
    boundaries: list[int] = []
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS or inside_mention(i):
            continue
        j = i + 1
        if j >= n or not text[j].isspace():
            continue
        while j < n and text[j].isspace():
            j += 1
        if j < n and text[j].isupper():
            boundaries.append(i + 1)

    spans: list[tuple[int, int]] = []
    prev = 0
    for b in boundaries + [n]:
        start, end = prev, b
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        if start < end:
            spans.append((start, end))
        prev = b
    return spans


def tag_and_segment(doc: Document, compiled: CompiledLexicon) -> Document:
    """Convenience: tag a document and attach mentions plus sentence spans."""
    mentions = tag_document(doc, compiled.lexicon, compiled.trie, compiled.cell_trie)
    doc.species = mentions
    doc.sentences = split_sentences(doc.text, mentions)
    return doc
