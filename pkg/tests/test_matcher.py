import random

import pytest
from hypothesis import given, strategies as st

from oracle import brute_force_longest
from taxassign import matcher
from taxassign.errors import SkipTokenError, TrieFormatError
from taxassign.matcher import (
    DEFAULT_SKIP_TOKENS,
    Match,
    deserialize,
    insert,
    new_trie,
    search_longest,
    serialize,
    structurally_equal,
)
from taxassign.tokens import tokenize


def norms(text):
    return [t.norm for t in tokenize(text)]


def small_lexicon():
    """E. coli family of names, normalized, as (tokens, id) entries."""
    entries = [
        (("e.", "coli"), 562),
        (("escherichia", "coli"), 562),
        (("e.", "coli", "K-12"), 83333),
        (("e.", "coli", "K-12", "MG1655"), 511145),
        (("e.", "coli", "O157:H7"), 83334),
        (("human",), 9606),
    ]
    trie = new_trie()
    for tokens, tax_id in entries:
        insert(trie, tokens, tax_id)
    return trie, entries


def test_insert_shares_prefix_nodes():
    trie = new_trie()
    insert(trie, ["escherichia", "coli", "k-12"], 83333)
    insert(trie, ["escherichia", "coli", "bl21"], 469008)
    coli = trie.children["escherichia"].children["coli"]
    assert set(coli.children) == {"k-12", "bl21"}
    assert coli.children["k-12"].depth == 3


def test_insert_is_idempotent():
    a, b = new_trie(), new_trie()
    insert(a, ["homo", "sapiens"], 9606)
    insert(b, ["homo", "sapiens"], 9606)
    insert(b, ["homo", "sapiens"], 9606)
    assert structurally_equal(a, b)


def test_insert_rejects_skip_tokens():
    trie = new_trie()
    with pytest.raises(SkipTokenError):
        insert(trie, ["e.", "coli", "str."], 562)


def test_search_spans_strain_prefixes():
    trie, _ = small_lexicon()
    tokens = norms("E. coli str. K-12 substr. MG1655")
    assert tokens == ["e.", "coli", "str.", "K-12", "substr.", "MG1655"]
    match = search_longest(trie, tokens, 0)
    assert match == Match(0, 5, frozenset({511145}), consumed_skips=2)


def test_search_prefers_longer_name_over_bare_species():
    trie, _ = small_lexicon()
    tokens = norms("E. coli strain O157:H7 Stx prophage")
    match = search_longest(trie, tokens, 0)
    assert match is not None
    assert match.tax_ids == frozenset({83334})
    assert match.end_token == 3  # spans through O157:H7, not just "coli"


def test_search_miss_returns_none():
    trie, _ = small_lexicon()
    assert search_longest(trie, ["mouse", "cells"], 0) is None
    assert search_longest(trie, [], 0) is None


def test_search_never_starts_or_ends_on_skip():
    trie, _ = small_lexicon()
    # starting on a skip token is a miss
    assert search_longest(trie, ["str.", "K-12"], 0) is None
    # trailing skips are not part of the span
    match = search_longest(trie, ["e.", "coli", "str."], 0)
    assert match == Match(0, 1, frozenset({562}), consumed_skips=0)


def test_equal_length_collision_unions_ids():
    trie = new_trie()
    insert(trie, ["e.", "coli"], 562)
    insert(trie, ["e.", "coli"], 622)  # pretend a shigella synonym collides
    match = search_longest(trie, ["e.", "coli"], 0)
    assert match.tax_ids == frozenset({562, 622})


# -- serialization -----------------------------------------------------------


def test_empty_trie_round_trips():
    trie = new_trie()
    assert structurally_equal(deserialize(serialize(trie)), trie)


def test_corrupted_magic_rejected():
    data = bytearray(serialize(new_trie()))
    data[0:3] = b"XXX"
    with pytest.raises(TrieFormatError, match="magic"):
        deserialize(bytes(data))


def test_version_mismatch_rejected():
    data = bytearray(serialize(new_trie()))
    data[8:12] = (99).to_bytes(4, "little")
    with pytest.raises(TrieFormatError, match="version"):
        deserialize(bytes(data))


def test_truncated_stream_rejected():
    data = serialize(small_lexicon()[0])
    with pytest.raises(TrieFormatError, match="truncated"):
        deserialize(data[: len(data) - 3])


def test_trailing_garbage_rejected():
    data = serialize(new_trie())
    with pytest.raises(TrieFormatError, match="trailing"):
        deserialize(data + b"junk")


def random_entries(rng, n_names, alphabet):
    entries = []
    for _ in range(n_names):
        length = rng.randint(1, 8)
        entries.append(
            (tuple(rng.choice(alphabet) for _ in range(length)), rng.randint(1, 99999))
        )
    return entries


def test_round_trip_on_random_fixture():
    rng = random.Random(7)
    alphabet = [f"tok{i}" for i in range(40)] + ["mg1655", "k-12", "coli"]
    entries = random_entries(rng, 500, alphabet)
    trie = new_trie()
    for tokens, tax_id in entries:
        insert(trie, tokens, tax_id)
    assert structurally_equal(deserialize(serialize(trie)), trie)


@given(
    st.lists(
        st.tuples(
            st.lists(st.sampled_from(["a", "b", "c", "d1", "e.", "ff"]), min_size=1, max_size=5),
            st.integers(min_value=1, max_value=500),
        ),
        max_size=30,
    )
)
def test_round_trip_property(named):
    trie = new_trie()
    for tokens, tax_id in named:
        insert(trie, tokens, tax_id)
    assert structurally_equal(deserialize(serialize(trie)), trie)


def test_serialization_is_deterministic():
    entries = [(("b", "a"), 2), (("a",), 1), (("b", "c"), 3)]
    one, two = new_trie(), new_trie()
    for tokens, tax_id in entries:
        insert(one, tokens, tax_id)
    for tokens, tax_id in reversed(entries):
        insert(two, tokens, tax_id)
    assert serialize(one) == serialize(two)


# -- oracle agreement --------------------------------------------------------


def build_random_case(rng):
    alphabet = [f"w{i}" for i in range(30)] + ["coli", "k-12", "o157:h7", "9x"]
    entries = random_entries(rng, rng.randint(1, 120), alphabet)
    trie = new_trie()
    for tokens, tax_id in entries:
        insert(trie, tokens, tax_id)
    # token stream: noise plus planted names with skips interleaved
    stream: list[str] = []
    for _ in range(rng.randint(20, 120)):
        roll = rng.random()
        if roll < 0.5:
            stream.append(rng.choice(alphabet))
        elif roll < 0.6:
            stream.append(rng.choice(sorted(DEFAULT_SKIP_TOKENS)))
        else:
            name = rng.choice(entries)[0]
            for i, tok in enumerate(name):
                if i > 0 and rng.random() < 0.3:
                    stream.append(rng.choice(sorted(DEFAULT_SKIP_TOKENS)))
                stream.append(tok)
    return entries, trie, stream


def test_search_agrees_with_brute_force_oracle():
    rng = random.Random(1234)
    for _ in range(30):
        entries, trie, stream = build_random_case(rng)
        for start in range(len(stream)):
            got = search_longest(trie, stream, start)
            want = brute_force_longest(entries, stream, start, DEFAULT_SKIP_TOKENS)
            if want is None:
                assert got is None, (start, stream[start : start + 6])
            else:
                assert got is not None
                assert (got.start_token, got.end_token, got.tax_ids) == want


def test_insert_then_find_with_skip_renderings():
    rng = random.Random(99)
    entries, trie, _ = build_random_case(rng)
    skips = sorted(DEFAULT_SKIP_TOKENS)
    for tokens, tax_id in entries[:50]:
        rendered: list[str] = []
        for i, tok in enumerate(tokens):
            if i > 0 and rng.random() < 0.5:
                rendered.append(rng.choice(skips))
            rendered.append(tok)
        match = search_longest(trie, rendered, 0)
        assert match is not None
        assert tax_id in match.tax_ids
        assert match.end_token == len(rendered) - 1


def test_adding_names_never_shortens_matches():
    rng = random.Random(5)
    entries, trie, stream = build_random_case(rng)
    before = [search_longest(trie, stream, i) for i in range(len(stream))]
    for _ in range(20):
        new_name = tuple(rng.choice(["w1", "w2", "coli", "zz"]) for _ in range(rng.randint(1, 4)))
        insert(trie, new_name, rng.randint(1, 1000))
    after = [search_longest(trie, stream, i) for i in range(len(stream))]
    for old, new in zip(before, after):
        if old is not None:
            assert new is not None
            assert new.end_token >= old.end_token


def test_iter_entries_reports_inserted_names():
    trie, entries = small_lexicon()
    stored = dict(matcher.iter_entries(trie))
    assert stored[("e.", "coli")] == frozenset({562})
    assert ("e.", "coli", "K-12", "MG1655") in stored
