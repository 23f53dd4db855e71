"""Taxonomy ingestion and lexicon compilation.

Input tables are deliberately minimal tab-separated files that a one-pass
script can produce from an NCBI-style taxonomy dump:

    names:     tax_id <TAB> name <TAB> name_class
    nodes:     tax_id <TAB> parent_id <TAB> rank
    cell lines: cell_line_name <TAB> host_tax_id
    prefixes:  prefix <TAB> tax_id
    blocklist: one name per line
    genus overrides: genus_name <TAB> species_tax_id

Compilation produces an immutable :class:`Lexicon` (pure data) plus two
prefix trees (species names, cell-line names). Building is deterministic:
identical inputs serialize to byte-identical files.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import Iterable

from . import matcher
from .errors import LexiconBuildError, TableParseError, TrieFormatError
from .matcher import DEFAULT_SKIP_TOKENS, TrieNode
from .tokens import tokenize

LEXICON_FORMAT_VERSION = 1
MAPS_MAGIC = b"TAXMAPS1"

RANK_SPECIES = "species"
RANK_GENUS = "genus"

# Name classes that get genus-abbreviation variants; common names like
# "house mouse" must not become "h. mouse".
_ABBREVIATABLE_CLASSES = frozenset({"scientific", "synonym"})


@dataclass
class TaxonEntry:
    tax_id: int
    parent_id: int
    rank: str
    names: list[tuple[str, str]] = field(default_factory=list)  # (name, name_class)


@dataclass(frozen=True)
class NameVariant:
    tokens: tuple[str, ...]
    tax_id: int
    variant_class: str  # canonical | genus-abbrev-1 | genus-abbrev-2 | strain-expanded

    @property
    def surface(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Lexicon:
    entries: dict[int, TaxonEntry]
    genus_to_species: dict[str, int]
    strain_codes: dict[tuple[int, str], int]
    cell_lines: dict[str, int]
    gene_prefix_map: dict[str, int]
    blocklist: frozenset[str]  # normalized surfaces
    version: int = LEXICON_FORMAT_VERSION


@dataclass
class AuxTables:
    cell_lines: dict[str, int] = field(default_factory=dict)
    gene_prefixes: dict[str, int] = field(default_factory=dict)
    blocklist: set[str] = field(default_factory=set)
    genus_overrides: dict[str, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Table parsing
# ---------------------------------------------------------------------------


def _rows(lines: Iterable[str]) -> Iterable[tuple[int, str]]:
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        yield line_no, line


def _parse_int(text: str, line_no: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise TableParseError(line_no, f"non-numeric {what}: {text!r}") from None
    if value < 0:
        raise TableParseError(line_no, f"negative {what}: {value}")
    return value


def parse_names(lines: Iterable[str]) -> list[tuple[int, str, str]]:
    """Read a names table into (tax_id, name, name_class) rows, in order.

    Internal whitespace runs in names collapse to a single space.
    """
    rows: list[tuple[int, str, str]] = []
    for line_no, line in _rows(lines):
        fields = line.split("\t")
        if len(fields) < 3:
            raise TableParseError(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        tax_id = _parse_int(fields[0], line_no, "tax_id")
        name = " ".join(fields[1].split())
        name_class = fields[2].strip()
        if not name:
            raise TableParseError(line_no, "empty name")
        if not name_class:
            raise TableParseError(line_no, "empty name class")
        rows.append((tax_id, name, name_class))
    return rows


def parse_nodes(lines: Iterable[str]) -> dict[int, tuple[int, str]]:
    """Read a nodes table into tax_id -> (parent_id, rank).

    The root may reference itself or 0 as parent; both normalize to 0.
    """
    nodes: dict[int, tuple[int, str]] = {}
    for line_no, line in _rows(lines):
        fields = line.split("\t")
        if len(fields) < 3:
            raise TableParseError(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        tax_id = _parse_int(fields[0], line_no, "tax_id")
        parent_id = _parse_int(fields[1], line_no, "parent_id")
        rank = fields[2].strip().replace(" ", "-") or "no-rank"
        if tax_id in nodes:
            raise TableParseError(line_no, f"duplicate tax_id {tax_id}")
        if parent_id == tax_id:
            parent_id = 0
        nodes[tax_id] = (parent_id, rank)
    return nodes


def parse_two_column(lines: Iterable[str], what: str = "value") -> dict[str, int]:
    """Read a `key <TAB> tax_id` table (cell lines, prefixes, overrides)."""
    table: dict[str, int] = {}
    for line_no, line in _rows(lines):
        fields = line.split("\t")
        if len(fields) < 2:
            raise TableParseError(line_no, f"expected 2 tab-separated fields, got {len(fields)}")
        key = " ".join(fields[0].split())
        if not key:
            raise TableParseError(line_no, f"empty {what} key")
        table[key] = _parse_int(fields[1], line_no, "tax_id")
    return table


def parse_blocklist(lines: Iterable[str]) -> set[str]:
    return {" ".join(line.split()) for _, line in _rows(lines)}


# ---------------------------------------------------------------------------
# Abbreviation variants
# ---------------------------------------------------------------------------


def expand_abbreviations(name: NameVariant) -> list[NameVariant]:
    """Genus-abbreviated renderings of a multi-token name.

    "Escherichia coli" yields "E. coli" and "Es. coli"; single-token names
    yield nothing. Restoring the first token to the genus word reproduces
    the canonical token list exactly.
    """
    toks = name.tokens
    if len(toks) < 2:
        return []
    genus = toks[0]
    if not genus.isalpha() or not genus[0].isupper():
        return []
    variants = [NameVariant((genus[0] + ".",) + toks[1:], name.tax_id, "genus-abbrev-1")]
    if len(genus) >= 2:
        variants.append(
            NameVariant((genus[:2] + ".",) + toks[1:], name.tax_id, "genus-abbrev-2")
        )
    return variants


# ---------------------------------------------------------------------------
# Lexicon compilation
# ---------------------------------------------------------------------------


def _normalized_surface(name: str) -> str:
    return " ".join(t.norm for t in tokenize(name))


def _species_ancestor(entries: dict[int, TaxonEntry], tax_id: int) -> int | None:
    """Nearest ancestor-or-self with species rank, or None."""
    seen = set()
    current = tax_id
    while current and current in entries and current not in seen:
        seen.add(current)
        if entries[current].rank == RANK_SPECIES:
            return current
        current = entries[current].parent_id
    return None


def _validate_chains(entries: dict[int, TaxonEntry]) -> None:
    bad: list[str] = []
    for tax_id, entry in entries.items():
        seen = set()
        current = tax_id
        while current != 0:
            if current in seen:
                bad.append(f"{tax_id} (cycle at {current})")
                break
            seen.add(current)
            node = entries.get(current)
            if node is None:
                bad.append(f"{tax_id} (dangling parent {current})")
                break
            current = node.parent_id
    if bad:
        raise LexiconBuildError("unresolvable parent chains: " + ", ".join(sorted(bad)))


def build_lexicon(
    names: list[tuple[int, str, str]],
    nodes: dict[int, tuple[int, str]],
    aux: AuxTables | None = None,
) -> Lexicon:
    """Compile parsed tables into an immutable lexicon.

    Genus promotion targets genera with exactly one species child; explicit
    ``genus_overrides`` win over (and extend) that rule. Strain codes come
    from the final name token of below-species entries when it contains a
    digit; codes ambiguous within one species are dropped.
    """
    aux = aux or AuxTables()

    dangling = sorted({tax_id for tax_id, _, _ in names if tax_id not in nodes})
    if dangling:
        raise LexiconBuildError(
            "names reference tax_ids missing from nodes: "
            + ", ".join(str(t) for t in dangling)
        )

    entries: dict[int, TaxonEntry] = {
        tax_id: TaxonEntry(tax_id, parent_id, rank)
        for tax_id, (parent_id, rank) in nodes.items()
    }
    for tax_id, name, name_class in names:
        entries[tax_id].names.append((name, name_class))
    _validate_chains(entries)

    unnamed = sorted(
        e.tax_id
        for e in entries.values()
        if e.rank in (RANK_SPECIES, "strain")
        and not any(cls == "scientific" for _, cls in e.names)
    )
    if unnamed:
        raise LexiconBuildError(
            "species/strain entries without a scientific name: "
            + ", ".join(str(t) for t in unnamed)
        )

    # Genus promotion: exactly one direct species child, or explicit override.
    species_children: dict[int, list[int]] = {}
    for entry in entries.values():
        if entry.rank == RANK_SPECIES and entry.parent_id in entries:
            species_children.setdefault(entry.parent_id, []).append(entry.tax_id)
    genus_to_species: dict[str, int] = {}
    for entry in entries.values():
        if entry.rank != RANK_GENUS:
            continue
        children = species_children.get(entry.tax_id, [])
        if len(children) == 1:
            for name, _ in entry.names:
                genus_to_species[_normalized_surface(name)] = children[0]
    for genus_name, species_id in aux.genus_overrides.items():
        if species_id not in entries:
            raise LexiconBuildError(f"genus override {genus_name!r} -> unknown tax_id {species_id}")
        genus_to_species[_normalized_surface(genus_name)] = species_id

    # Strain codes: below-species entries whose final name token carries a digit.
    strain_codes: dict[tuple[int, str], int] = {}
    ambiguous: set[tuple[int, str]] = set()
    for entry in entries.values():
        if entry.rank == RANK_SPECIES or not entry.names:
            continue
        species_id = _species_ancestor(entries, entry.parent_id)
        if species_id is None:
            continue
        for name, _ in entry.names:
            toks = [t for t in tokenize(name) if t.norm not in DEFAULT_SKIP_TOKENS]
            if not toks:
                continue
            code = toks[-1].surface
            if not any(c.isdigit() for c in code):
                continue
            key = (species_id, code)
            if key in strain_codes and strain_codes[key] != entry.tax_id:
                ambiguous.add(key)
            else:
                strain_codes[key] = entry.tax_id
    for key in ambiguous:
        del strain_codes[key]

    for cell_line, host_id in aux.cell_lines.items():
        if host_id not in entries:
            raise LexiconBuildError(f"cell line {cell_line!r} -> unknown tax_id {host_id}")

    return Lexicon(
        entries=entries,
        genus_to_species=genus_to_species,
        strain_codes=strain_codes,
        cell_lines=dict(aux.cell_lines),
        gene_prefix_map=dict(aux.gene_prefixes),
        blocklist=frozenset(_normalized_surface(b) for b in aux.blocklist),
    )


@dataclass
class BuildStats:
    names_inserted: int = 0
    variants_inserted: int = 0
    names_blocklisted: int = 0
    names_skip_led: int = 0


def build_species_trie(lexicon: Lexicon) -> tuple[TrieNode, BuildStats]:
    """Insert every matchable name (plus abbreviation variants) into a trie.

    Strain-prefix tokens are stripped before insertion; names that *begin*
    with one are rejected outright (a bare "str. K-12" is not a name).
    """
    trie = matcher.new_trie()
    stats = BuildStats()

    def insert_variant(variant: NameVariant) -> bool:
        surface = _normalized_surface(variant.surface)
        if surface in lexicon.blocklist:
            stats.names_blocklisted += 1
            return False
        matcher.insert(trie, variant.tokens, variant.tax_id)
        return True

    for tax_id in sorted(lexicon.entries):
        for name, name_class in lexicon.entries[tax_id].names:
            toks = tokenize(name)
            if not toks:
                continue
            if toks[0].norm in DEFAULT_SKIP_TOKENS:
                stats.names_skip_led += 1
                continue
            kept = tuple(t.surface for t in toks if t.norm not in DEFAULT_SKIP_TOKENS)
            if not kept:
                stats.names_skip_led += 1
                continue
            canonical = NameVariant(kept, tax_id, "canonical")
            if insert_variant(canonical):
                stats.names_inserted += 1
            if name_class in _ABBREVIATABLE_CLASSES:
                for variant in expand_abbreviations(canonical):
                    if insert_variant(variant):
                        stats.variants_inserted += 1
    return trie, stats


def build_cell_line_trie(lexicon: Lexicon) -> TrieNode:
    trie = matcher.new_trie()
    for name in sorted(lexicon.cell_lines):
        toks = [t.surface for t in tokenize(name)]
        if not toks:
            continue
        matcher.insert(trie, toks, lexicon.cell_lines[name], skipset=matcher.NO_SKIPS)
    return trie


@dataclass
class CompiledLexicon:
    lexicon: Lexicon
    trie: TrieNode
    cell_trie: TrieNode
    stats: BuildStats = field(default_factory=BuildStats)


def compile_lexicon(lexicon: Lexicon) -> CompiledLexicon:
    trie, stats = build_species_trie(lexicon)
    return CompiledLexicon(lexicon, trie, build_cell_line_trie(lexicon), stats)


# ---------------------------------------------------------------------------
# Container file: species trie block, cell-line trie block, then a JSON
# maps block. Trie blocks use the matcher's documented binary layout.
# ---------------------------------------------------------------------------

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _maps_payload(lexicon: Lexicon) -> bytes:
    doc = {
        "version": lexicon.version,
        "entries": {
            str(e.tax_id): [e.parent_id, e.rank, e.names]
            for e in lexicon.entries.values()
        },
        "genus_to_species": lexicon.genus_to_species,
        "strain_codes": [
            [species_id, code, strain_id]
            for (species_id, code), strain_id in sorted(lexicon.strain_codes.items())
        ],
        "cell_lines": lexicon.cell_lines,
        "gene_prefix_map": lexicon.gene_prefix_map,
        "blocklist": sorted(lexicon.blocklist),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _maps_from_payload(payload: bytes) -> Lexicon:
    doc = json.loads(payload.decode("utf-8"))
    entries = {
        int(tax_id): TaxonEntry(
            int(tax_id), rec[0], rec[1], [(n, c) for n, c in rec[2]]
        )
        for tax_id, rec in doc["entries"].items()
    }
    return Lexicon(
        entries=entries,
        genus_to_species=dict(doc["genus_to_species"]),
        strain_codes={(s, code): strain for s, code, strain in doc["strain_codes"]},
        cell_lines=dict(doc["cell_lines"]),
        gene_prefix_map=dict(doc["gene_prefix_map"]),
        blocklist=frozenset(doc["blocklist"]),
        version=doc["version"],
    )


def save_compiled(compiled: CompiledLexicon, path: str) -> None:
    with open(path, "wb") as out:
        out.write(matcher.serialize(compiled.trie))
        out.write(matcher.serialize(compiled.cell_trie))
        payload = _maps_payload(compiled.lexicon)
        out.write(MAPS_MAGIC)
        out.write(_U32.pack(LEXICON_FORMAT_VERSION))
        out.write(_U64.pack(len(payload)))
        out.write(payload)


def load_compiled(path: str) -> CompiledLexicon:
    with open(path, "rb") as handle:
        data = handle.read()
    stream = io.BytesIO(data)
    trie = matcher.read_trie(stream)
    cell_trie = matcher.read_trie(stream)
    magic = stream.read(len(MAPS_MAGIC))
    if magic != MAPS_MAGIC:
        raise TrieFormatError(f"bad maps magic {magic!r}")
    raw = stream.read(4)
    if len(raw) != 4:
        raise TrieFormatError("truncated maps header")
    (version,) = _U32.unpack(raw)
    if version != LEXICON_FORMAT_VERSION:
        raise TrieFormatError(
            f"lexicon version {version} unsupported (expected {LEXICON_FORMAT_VERSION})"
        )
    raw = stream.read(8)
    if len(raw) != 8:
        raise TrieFormatError("truncated maps length")
    (length,) = _U64.unpack(raw)
    payload = stream.read(length)
    if len(payload) != length:
        raise TrieFormatError("truncated maps payload")
    return CompiledLexicon(_maps_from_payload(payload), trie, cell_trie)
