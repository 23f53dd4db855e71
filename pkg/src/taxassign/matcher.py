"""Tokenized prefix tree over species names.

Every node is one normalized token; names sharing a prefix share nodes.
Strain-prefix words ("str.", "substr.", ...) are never stored in the tree:
they are consumed during search without advancing the tree, which keeps a
single branch per species regardless of how the strain prefix is written.

Search is longest-match: the walk records the deepest terminal reached and
keeps extending while the next input token is either a child or a skip
token. A match can never end on a skip token because terminals are only
recorded when a real token advances the walk.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import SkipTokenError, TrieFormatError
from .tokens import normalize_token

TRIE_MAGIC = b"TAXTRIE1"
TRIE_FORMAT_VERSION = 1

# Strain-prefix words consumed (not matched) during search.
DEFAULT_SKIP_TOKENS = frozenset(
    {"str", "str.", "strain", "substr", "substr.", "subsp", "subsp.", "var.", "cv."}
)

NO_SKIPS: frozenset[str] = frozenset()


@dataclass
class TrieNode:
    token: str = ""
    depth: int = 0
    children: dict[str, "TrieNode"] = field(default_factory=dict)
    terminal_ids: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class Match:
    start_token: int
    end_token: int  # inclusive
    tax_ids: frozenset[int]
    consumed_skips: int = 0

    @property
    def token_count(self) -> int:
        return self.end_token - self.start_token + 1


def new_trie() -> TrieNode:
    return TrieNode()


def insert(
    trie: TrieNode,
    tokens: Sequence[str],
    tax_id: int,
    skipset: frozenset[str] = DEFAULT_SKIP_TOKENS,
) -> TrieNode:
    """Add a name path to the tree and mark its final node with ``tax_id``.

    Callers must strip skip tokens beforehand; passing one is an error
    because stored skip tokens would break skip-aware search.
    """
    if not tokens:
        raise SkipTokenError("cannot insert an empty token list")
    norm = [normalize_token(t) for t in tokens]
    for t in norm:
        if t in skipset:
            raise SkipTokenError(f"skip token {t!r} is not insertable; strip it first")
    node = trie
    for t in norm:
        child = node.children.get(t)
        if child is None:
            child = TrieNode(token=t, depth=node.depth + 1)
            node.children[t] = child
        node = child
    node.terminal_ids.add(tax_id)
    return trie


def search_longest(
    trie: TrieNode,
    tokens: Sequence[str],
    start: int,
    skipset: frozenset[str] = DEFAULT_SKIP_TOKENS,
) -> Match | None:
    """Longest skip-aware match over normalized ``tokens`` beginning at ``start``.

    Skip tokens are consumed only once the walk is inside the tree, so a
    match can neither begin nor end on one. Equal-length name collisions
    surface as the union of their ids on the shared terminal node.
    """
    if start < 0 or start >= len(tokens):
        return None
    node = trie
    best: Match | None = None
    skips = 0
    i = start
    n = len(tokens)
    while i < n:
        t = tokens[i]
        child = node.children.get(t)
        if child is not None:
            node = child
            if node.terminal_ids:
                best = Match(start, i, frozenset(node.terminal_ids), skips)
            i += 1
        elif node is not trie and t in skipset:
            skips += 1
            i += 1
        else:
            break
    return best


def iter_entries(trie: TrieNode) -> Iterable[tuple[tuple[str, ...], frozenset[int]]]:
    """All (token path, ids) pairs stored in the tree, in sorted path order."""
    stack: list[tuple[TrieNode, tuple[str, ...]]] = [(trie, ())]
    while stack:
        node, path = stack.pop()
        if node.terminal_ids:
            yield path, frozenset(node.terminal_ids)
        for tok in sorted(node.children, reverse=True):
            stack.append((node.children[tok], path + (tok,)))


def structurally_equal(a: TrieNode, b: TrieNode) -> bool:
    if a.token != b.token or a.terminal_ids != b.terminal_ids or a.depth != b.depth:
        return False
    if a.children.keys() != b.children.keys():
        return False
    return all(structurally_equal(a.children[k], b.children[k]) for k in a.children)


# ---------------------------------------------------------------------------
# Binary serialization: a flat node table in pre-order with child ranges
# pointing into a separate child-index array, so loading is a single pass
# with no pointer fix-up. Layout (all little-endian):
#
#   magic            8 bytes  "TAXTRIE1"
#   format version   u32
#   node count       u32
#   child count      u32
#   terminal count   u32
#   node table       per node: u16 token byte length, token UTF-8 bytes,
#                    u32 child start, u32 child count,
#                    u32 terminal start, u32 terminal count
#   child table      child count x u32 node indices
#   terminal table   terminal count x u32 tax ids
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<III")
_NODE_FIXED = struct.Struct("<IIII")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def serialize(trie: TrieNode) -> bytes:
    nodes: list[TrieNode] = []

    def visit(node: TrieNode) -> None:
        nodes.append(node)
        for tok in sorted(node.children):
            visit(node.children[tok])

    visit(trie)
    index = {id(node): i for i, node in enumerate(nodes)}

    node_blob = io.BytesIO()
    child_table: list[int] = []
    term_table: list[int] = []
    for node in nodes:
        token_bytes = node.token.encode("utf-8")
        child_start = len(child_table)
        for tok in sorted(node.children):
            child_table.append(index[id(node.children[tok])])
        term_start = len(term_table)
        terms = sorted(node.terminal_ids)
        term_table.extend(terms)
        node_blob.write(_U16.pack(len(token_bytes)))
        node_blob.write(token_bytes)
        node_blob.write(
            _NODE_FIXED.pack(child_start, len(node.children), term_start, len(terms))
        )

    out = io.BytesIO()
    out.write(TRIE_MAGIC)
    out.write(_U32.pack(TRIE_FORMAT_VERSION))
    out.write(_HEADER.pack(len(nodes), len(child_table), len(term_table)))
    out.write(node_blob.getvalue())
    for v in child_table:
        out.write(_U32.pack(v))
    for v in term_table:
        out.write(_U32.pack(v))
    return out.getvalue()


def read_trie(stream: io.BufferedIOBase) -> TrieNode:
    """Read one serialized trie block from ``stream``."""

    def take(k: int, what: str) -> bytes:
        data = stream.read(k)
        if len(data) != k:
            raise TrieFormatError(f"truncated stream while reading {what}")
        return data

    magic = take(len(TRIE_MAGIC), "magic")
    if magic != TRIE_MAGIC:
        raise TrieFormatError(f"bad magic {magic!r}; not a serialized trie")
    (version,) = _U32.unpack(take(4, "version"))
    if version != TRIE_FORMAT_VERSION:
        raise TrieFormatError(
            f"format version {version} unsupported (expected {TRIE_FORMAT_VERSION})"
        )
    node_count, child_count, term_count = _HEADER.unpack(take(_HEADER.size, "header"))
    if node_count == 0:
        raise TrieFormatError("node count 0; even an empty trie has a root")

    nodes = [TrieNode() for _ in range(node_count)]
    ranges: list[tuple[int, int, int, int]] = []
    for i in range(node_count):
        (token_len,) = _U16.unpack(take(2, "token length"))
        token = take(token_len, "token").decode("utf-8")
        child_start, n_children, term_start, n_terms = _NODE_FIXED.unpack(
            take(_NODE_FIXED.size, "node record")
        )
        nodes[i].token = token
        ranges.append((child_start, n_children, term_start, n_terms))

    child_table = [
        _U32.unpack(take(4, "child table"))[0] for _ in range(child_count)
    ]
    term_table = [_U32.unpack(take(4, "terminal table"))[0] for _ in range(term_count)]

    for i, (child_start, n_children, term_start, n_terms) in enumerate(ranges):
        node = nodes[i]
        if child_start + n_children > child_count or term_start + n_terms > term_count:
            raise TrieFormatError(f"node {i}: table range out of bounds")
        for ci in child_table[child_start : child_start + n_children]:
            if ci <= i or ci >= node_count:
                raise TrieFormatError(f"node {i}: invalid child index {ci}")
            child = nodes[ci]
            child.depth = node.depth + 1
            node.children[child.token] = child
        node.terminal_ids.update(term_table[term_start : term_start + n_terms])
    return nodes[0]


def deserialize(data: bytes) -> TrieNode:
    stream = io.BytesIO(data)
    trie = read_trie(stream)
    if stream.read(1):
        raise TrieFormatError("trailing bytes after trie block")
    return trie
