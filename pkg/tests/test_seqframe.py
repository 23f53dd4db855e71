import pytest

from synth import G, S, T, make_doc, synthetic_corpus
from taxassign.docmodel import GeneMention, SpeciesMention, species_order
from taxassign.errors import (
    CapabilityError,
    GoldMissingError,
    SpanOverlapError,
    TaxAssignError,
)
from taxassign.rules import RULE_NEAREST_DOCUMENT, RuleConfig, assign_rule_based
from taxassign.seqframe import (
    ARG_CLOSE,
    ARG_OPEN,
    GENE_OPEN,
    MODE_PAIR,
    MODE_SEQ_GS,
    MODE_SEQ_SG,
    MockScorer,
    ScoreTable,
    SPEC_OPEN,
    aggregate,
    assign_with_scorer,
    decode,
    detect_conjunction,
    encode,
    export_training_data,
    format_training_record,
    make_gold_labels,
    mock_score,
    strip_markers,
)
from taxassign.tagger import split_sentences
from taxassign.tokens import tokenize


def labeled_doc():
    """Two species, four genes; all but ABCB9 belong to mouse."""
    return make_doc(
        "f3",
        [T("Kinase signaling in "), S("mouse", 10090), T(" models.")],
        [
            G("GSK-3", gold=[10090]), T(" and "), G("Keap1", gold=[10090]),
            T(" regulate "), G("PI3K-protein kinase B", gold=[10090]),
            T(" in "), S("mice", 10090), T(", while "), G("ABCB9", gold=[9606]),
            T(" was cloned from "), S("human", 9606), T(" tissue."),
        ],
    )


def prepared(doc):
    doc.sentences = split_sentences(doc.text, doc.species)
    return doc


# -- encode ----------------------------------------------------------------------


def test_encode_marks_all_entities_sg():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    assert tagged.tokens.count("<GENE>") == 4
    assert tagged.tokens.count("</GENE>") == 4
    assert tagged.tokens.count("<SPEC>") == 3
    assert tagged.tokens.count(ARG_OPEN) == 1
    assert tagged.tokens.count(ARG_CLOSE) == 1
    # ARG sits immediately inside the target's own SPEC tags
    arg = tagged.tokens.index(ARG_OPEN)
    assert tagged.tokens[arg - 1] == SPEC_OPEN
    assert tagged.target_species == 10090


def test_encode_strip_markers_round_trips():
    doc = labeled_doc()
    original = [t.surface for t in tokenize(doc.text)]
    for mode, target in [(MODE_SEQ_SG, 10090), (MODE_SEQ_GS, 2), (MODE_PAIR, (0, 9606))]:
        tagged = encode(doc, doc.genes, doc.species, target, mode)
        assert strip_markers(tagged) == original


def test_encode_pair_minimal_marking():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, (1, 9606), MODE_PAIR)
    assert tagged.tokens.count("<GENE>") == 1
    assert tagged.tokens.count("<SPEC>") == 1
    assert tagged.tokens.count(ARG_OPEN) == 0
    assert tagged.target_gene == 1
    assert tagged.target_species == 9606


def test_encode_rejects_overlap():
    doc = make_doc(
        "ov",
        [T("Overlap")],
        [T("The "), G("SRC"), T(" gene.")],
    )
    # force a species span overlapping the gene
    gene = doc.genes[0]
    doc.species = [SpeciesMention((gene.start, gene.end + 2), doc.text[gene.start : gene.end + 2], frozenset({9606}))]
    with pytest.raises(SpanOverlapError):
        encode(doc, doc.genes, doc.species, 9606, MODE_SEQ_SG)


def test_encode_token_spans_support_reverse_mapping():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    for token, span in zip(tagged.tokens, tagged.token_spans):
        if span is not None:
            assert doc.text[span[0] : span[1]] == token


# -- gold labels and aggregation ---------------------------------------------------


def gold_of(doc):
    return [g.gold_tax_ids for g in doc.genes]


def test_gold_labels_mark_matching_genes_including_tags():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    labels = make_gold_labels(tagged, gold_of(doc))
    inside = {i for i, (_, p_i) in enumerate(labels) if p_i == 1.0}
    expected = set()
    for span, gene_idx in zip(tagged.gene_spans, tagged.gene_refs):
        if 10090 in doc.genes[gene_idx].gold_tax_ids:
            expected.update(range(span[0], span[1]))
    assert inside == expected
    assert len(expected) > 0
    # tags included: each matching span starts with <GENE>
    for span, gene_idx in zip(tagged.gene_spans, tagged.gene_refs):
        if 10090 in doc.genes[gene_idx].gold_tax_ids:
            assert tagged.tokens[span[0]] == GENE_OPEN


def test_gold_labels_all_outside_when_no_gene_matches():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 9606, MODE_SEQ_SG)
    gold = [frozenset({10090})] * 4
    labels = make_gold_labels(tagged, gold)
    assert all(p_o == 1.0 for p_o, _ in labels)


def test_gold_labels_saturate_when_all_match():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    gold = [frozenset({10090})] * 4
    labels = make_gold_labels(tagged, gold)
    inside = {i for i, (_, p_i) in enumerate(labels) if p_i == 1.0}
    expected = set()
    for span in tagged.gene_spans:
        expected.update(range(span[0], span[1]))
    assert inside == expected


def test_gold_labels_pair_mode_unsupported():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, (0, 10090), MODE_PAIR)
    with pytest.raises(TaxAssignError, match="seq modes"):
        make_gold_labels(tagged, gold_of(doc))


def test_gold_labels_missing_gold_errors():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    with pytest.raises(GoldMissingError):
        make_gold_labels(tagged, [None] * 4)


def test_aggregate_constant_span_mean():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    labels = [(0.1, 0.9)] * len(tagged.tokens)
    scores = aggregate(labels, tagged)
    assert set(scores) == {0, 1, 2, 3}
    for value in scores.values():
        assert value == pytest.approx(0.9)


def test_aggregate_mean_of_mixed_rows():
    doc = make_doc("m1", [T("T.")], [G("AB"), T(" in "), S("human", 9606), T(".")])
    tagged = encode(doc, doc.genes, doc.species, 9606, MODE_SEQ_SG)
    span = tagged.gene_spans[0]
    labels = [(1.0, 0.0)] * len(tagged.tokens)
    labels[span[0]] = (0.0, 1.0)  # 1 of 3 tokens inside (<GENE> AB </GENE>)
    assert aggregate(labels, tagged)[0] == pytest.approx(1.0 / 3.0)


def test_aggregate_length_mismatch_errors():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    with pytest.raises(TaxAssignError, match="row count"):
        aggregate([(1.0, 0.0)], tagged)


# -- conjunction and decode ---------------------------------------------------------


def conjunction_doc():
    return prepared(
        make_doc(
            "cj",
            [T("Transporter cloning.")],
            [
                T("Both "), S("human", 9606), T(" and "), S("mouse", 10090),
                T(" cDNAs of "), G("ABCB9", gold=[9606, 10090]), T(" were cloned."),
            ],
        )
    )


def test_detect_conjunction_and_pattern():
    doc = conjunction_doc()
    human = [m for m in doc.species if 9606 in m.tax_ids]
    mouse = [m for m in doc.species if 10090 in m.tax_ids]
    assert detect_conjunction(doc, human, mouse) is True


def test_detect_conjunction_rejects_words_between():
    doc = prepared(
        make_doc(
            "cj2",
            [T("Infection.")],
            [
                S("human", 9606), T(" cells infected while "), S("mouse", 10090),
                T(" controls for "), G("TNF", gold=[9606]), T(" stayed intact."),
            ],
        )
    )
    human = [m for m in doc.species if 9606 in m.tax_ids]
    mouse = [m for m in doc.species if 10090 in m.tax_ids]
    assert detect_conjunction(doc, human, mouse) is False


def test_detect_conjunction_requires_same_sentence():
    doc = prepared(
        make_doc(
            "cj3",
            [T("Split.")],
            [S("human", 9606), T(" cells were used. And "), S("mouse", 10090), T(" too.")],
        )
    )
    human = [m for m in doc.species if 9606 in m.tax_ids]
    mouse = [m for m in doc.species if 10090 in m.tax_ids]
    assert detect_conjunction(doc, human, mouse) is False


def test_decode_conjunction_assigns_both():
    doc = conjunction_doc()
    table = ScoreTable((9606, 10090), [[0.9, 0.8]], MODE_SEQ_SG, 2)
    result = decode(table, doc, doc.species)
    assert result.predicted_ids(0) == frozenset({9606, 10090})
    provs = {a.provenance for a in result.assignments[0]}
    assert provs == {"model", "conjunction"}


def test_decode_below_threshold_is_fallback_but_assigned():
    doc = conjunction_doc()
    table = ScoreTable((9606, 10090), [[0.1, 0.3]], MODE_SEQ_SG, 2)
    result = decode(table, doc, doc.species)
    assert result.assignments[0][0].tax_id == 10090
    assert result.assignments[0][0].provenance == "fallback"
    assert result.predicted_ids(0) == frozenset({10090})


def test_decode_single_column_forced_argmax():
    doc = prepared(
        make_doc("one", [T("T.")], [G("A"), T(" in "), S("rat", 10116), T(".")])
    )
    table = ScoreTable((10116,), [[0.2]], MODE_SEQ_SG, 1)
    result = decode(table, doc, doc.species)
    assert result.predicted_ids(0) == frozenset({10116})


def test_decode_zero_species_errors():
    doc = prepared(make_doc("z", [T("T.")], [G("A"), T(" alone.")]))
    with pytest.raises(TaxAssignError, match="zero species"):
        decode(ScoreTable((), [[]], MODE_SEQ_SG, 0), doc, [])


def test_decode_tie_prefers_earliest_mentioned_species():
    doc = prepared(
        make_doc(
            "tie",
            [T("T.")],
            [S("mouse", 10090), T(" and later "), S("human", 9606),
             T(" for "), G("X1"), T(".")],
        )
    )
    table = ScoreTable(tuple(species_order(doc.species)), [[0.7, 0.7]], MODE_SEQ_SG, 2)
    result = decode(table, doc, doc.species)
    assert result.assignments[0][0].tax_id == 10090


def test_decode_assigns_at_most_two_species():
    doc = conjunction_doc()
    table = ScoreTable((9606, 10090), [[0.9, 0.9]], MODE_SEQ_SG, 2)
    result = decode(table, doc, doc.species)
    assert len(result.assignments[0]) <= 2


# -- assign_with_scorer ----------------------------------------------------------


def test_call_counts_by_strategy():
    doc = prepared(labeled_doc())
    scorer = MockScorer()
    sg = assign_with_scorer(doc, doc.genes, doc.species, MODE_SEQ_SG, scorer)
    gs = assign_with_scorer(doc, doc.genes, doc.species, MODE_SEQ_GS, scorer)
    pair = assign_with_scorer(doc, doc.genes, doc.species, MODE_PAIR, scorer)
    assert sg.scorer_calls == 2  # two distinct species
    assert gs.scorer_calls == 4  # four genes
    assert pair.scorer_calls == 8


def test_shortcut_zero_species():
    doc = prepared(make_doc("s0", [T("T.")], [G("A"), T(" and "), G("B"), T(".")]))
    result = assign_with_scorer(doc, doc.genes, doc.species, MODE_SEQ_SG, MockScorer())
    assert result.scorer_calls == 0
    assert [a[0].tax_id for a in result.assignments] == [9606, 9606]
    assert {a[0].provenance for a in result.assignments} == {"default"}


def test_shortcut_single_species():
    doc = prepared(
        make_doc("s1", [T("All about "), S("rat", 10116), T(".")],
                 [G("A"), T(" and "), G("B"), T(" were measured.")])
    )
    result = assign_with_scorer(doc, doc.genes, doc.species, MODE_SEQ_SG, MockScorer())
    assert result.scorer_calls == 0
    assert [a[0].tax_id for a in result.assignments] == [10116, 10116]
    assert {a[0].provenance for a in result.assignments} == {"single-species"}


def test_capability_mismatch_errors():
    class SequenceOnly:
        capabilities = frozenset({"sequence"})

        def score_sequence(self, tagged):
            return mock_score(tagged)

        def score_pair(self, tagged):  # pragma: no cover - never reached
            raise AssertionError

    doc = prepared(labeled_doc())
    with pytest.raises(CapabilityError):
        assign_with_scorer(doc, doc.genes, doc.species, MODE_PAIR, SequenceOnly())


def test_mock_strategies_agree_and_match_nearest_rule():
    config = RuleConfig(rule_order=(RULE_NEAREST_DOCUMENT,))
    scorer = MockScorer()
    for doc in synthetic_corpus(20):
        prepared(doc)
        results = {
            strategy: assign_with_scorer(doc, doc.genes, doc.species, strategy, scorer)
            for strategy in (MODE_SEQ_SG, MODE_SEQ_GS, MODE_PAIR)
        }
        ids = {s: r.all_predicted_ids() for s, r in results.items()}
        assert ids[MODE_SEQ_SG] == ids[MODE_SEQ_GS] == ids[MODE_PAIR]
        rule = assign_rule_based(doc, doc.genes, doc.species, config)
        assert ids[MODE_SEQ_SG] == rule.all_predicted_ids()


def test_gold_scores_decode_back_to_gold():
    for doc in synthetic_corpus(20):
        prepared(doc)
        ids = species_order(doc.species)
        if len(ids) < 2 or not doc.genes:
            continue
        gold = gold_of(doc)
        scores = [[0.0] * len(ids) for _ in doc.genes]
        for j, tid in enumerate(ids):
            tagged = encode(doc, doc.genes, doc.species, tid, MODE_SEQ_SG)
            for g, score in aggregate(make_gold_labels(tagged, gold), tagged).items():
                scores[g][j] = score
        table = ScoreTable(tuple(ids), scores, MODE_SEQ_SG, len(ids))
        result = decode(table, doc, doc.species)
        for i, gene in enumerate(doc.genes):
            assert result.predicted_ids(i) == gene.gold_tax_ids, (doc.doc_id, i)


# -- mock scorer shape -------------------------------------------------------------


def test_mock_rows_are_probabilities():
    doc = labeled_doc()
    tagged = encode(doc, doc.genes, doc.species, 10090, MODE_SEQ_SG)
    labels = mock_score(tagged)
    assert len(labels) == len(tagged.tokens)
    for p_o, p_i in labels:
        assert 0.0 <= p_i <= 1.0
        assert p_o + p_i == pytest.approx(1.0)


def test_mock_no_genes_all_outside():
    doc = make_doc("ng", [T("Only "), S("human", 9606), T(" here.")], [T("Nothing else.")])
    tagged = encode(doc, [], doc.species, 9606, MODE_SEQ_SG)
    labels = mock_score(tagged)
    assert all(p_i == 0.0 for _, p_i in labels)


# -- training data export -----------------------------------------------------------


def test_export_counts_one_record_per_target():
    doc = prepared(labeled_doc())
    records = list(export_training_data([doc], MODE_SEQ_SG))
    assert len(records) == 2  # two distinct species
    records = list(export_training_data([doc], MODE_SEQ_GS))
    assert len(records) == 4  # four genes


def test_export_skips_shortcut_documents():
    doc = prepared(make_doc("s1", [T("Only "), S("rat", 10116), T(".")],
                            [G("A", gold=[10116]), T(" was measured.")]))
    assert list(export_training_data([doc], MODE_SEQ_SG)) == []


def test_export_mouse_target_labels_mouse_genes():
    doc = prepared(labeled_doc())
    records = list(export_training_data([doc], MODE_SEQ_SG))
    by_target = {tagged.target_species: (tagged, labels) for tagged, labels in records}
    tagged, labels = by_target[10090]
    inside_tokens = [tagged.tokens[i] for i, (_, p_i) in enumerate(labels) if p_i == 1.0]
    assert "GSK-3" in inside_tokens
    assert "Keap1" in inside_tokens
    assert "ABCB9" not in inside_tokens


def test_export_missing_gold_lists_documents():
    doc = prepared(labeled_doc())
    doc.genes[1] = GeneMention(doc.genes[1].span, doc.genes[1].surface, None)
    with pytest.raises(GoldMissingError, match="f3"):
        list(export_training_data([doc], MODE_SEQ_SG))


def test_export_pair_strategy_rejected():
    with pytest.raises(TaxAssignError, match="seq modes"):
        list(export_training_data([], MODE_PAIR))


def test_training_record_format():
    doc = prepared(labeled_doc())
    tagged, labels = next(iter(export_training_data([doc], MODE_SEQ_SG)))
    import json

    record = json.loads(format_training_record(7, tagged, labels))
    assert record["id"] == 7
    assert record["mode"] == "sequence"
    assert record["tokens"] == tagged.tokens
    assert len(record["labels"]) == len(tagged.tokens)
    assert set(record["labels"]) <= {"I", "O"}
