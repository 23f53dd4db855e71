#!/usr/bin/env python3
"""Benchmark assignment methods on synthetic abstracts.

Builds the demo lexicon in memory, synthesizes N multi-species abstracts,
then reports scorer call counts, timing per 100 abstracts, and agreement
between the rule baseline and the mock-scorer strategies.

Usage:
    python3 scripts/run_benchmark.py [--docs 100] [--seed 13]
"""

import argparse
import random
import sys
from pathlib import Path

from taxassign import lexicon as lexmod
from taxassign.docmodel import Document, GeneMention
from taxassign.evalkit import Corpus, time_assignment
from taxassign.rules import RULE_NEAREST_DOCUMENT, RuleConfig, assign_rule_based
from taxassign.seqframe import MockScorer, assign_with_scorer
from taxassign.tagger import split_sentences, tag_document

DEMO = Path(__file__).resolve().parent.parent / "data" / "demo"

SPECIES_TEXT = ["human", "mouse", "rat", "zebrafish", "Escherichia coli", "Arabidopsis"]


def build_demo_lexicon() -> lexmod.CompiledLexicon:
    def rows(name):
        return (DEMO / name).read_text(encoding="utf-8").splitlines(keepends=True)

    lex = lexmod.build_lexicon(
        lexmod.parse_names(rows("names.tsv")),
        lexmod.parse_nodes(rows("nodes.tsv")),
        lexmod.AuxTables(
            cell_lines=lexmod.parse_two_column(rows("cell_lines.tsv")),
            gene_prefixes=lexmod.parse_two_column(rows("gene_prefixes.tsv")),
            blocklist=lexmod.parse_blocklist(rows("blocklist.txt")),
            genus_overrides=lexmod.parse_two_column(rows("genus_overrides.tsv")),
        ),
    )
    return lexmod.compile_lexicon(lex)


def synthesize(n_docs: int, seed: int) -> Corpus:
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        sentences, genes = [], []
        for s in range(rng.randint(4, 9)):
            gene = f"GENE{rng.randint(1, 60)}"
            sentences.append(
                f"The {gene} gene responded in {rng.choice(SPECIES_TEXT)} samples ({s})."
            )
            genes.append(gene)
        doc = Document(f"BM{i:04d}", f"Benchmark abstract {i}.", " ".join(sentences))
        text, cursor = doc.text, 0
        for gene in genes:
            start = text.find(f" {gene} ", cursor) + 1
            doc.genes.append(GeneMention((start, start + len(gene)), gene))
            cursor = start + len(gene)
        docs.append(doc)
    return Corpus(docs)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=100)
    parser.add_argument("--seed", type=int, default=13)
    args = parser.parse_args()

    compiled = build_demo_lexicon()
    corpus = synthesize(args.docs, args.seed)
    scorer = MockScorer()

    def tag_first(doc):
        mentions = tag_document(doc, compiled.lexicon, compiled.trie, compiled.cell_trie)
        doc.species = mentions
        doc.sentences = split_sentences(doc.text, mentions)
        return doc

    for doc in corpus:
        tag_first(doc)

    nearest_config = RuleConfig(rule_order=(RULE_NEAREST_DOCUMENT,))
    methods = {
        "seq-sg": lambda d: assign_with_scorer(d, d.genes, d.species, "seq-sg", scorer),
        "seq-gs": lambda d: assign_with_scorer(d, d.genes, d.species, "seq-gs", scorer),
        "pair": lambda d: assign_with_scorer(d, d.genes, d.species, "pair", scorer),
        "nearest": lambda d: assign_rule_based(d, d.genes, d.species, nearest_config),
        "rule": lambda d: assign_rule_based(d, d.genes, d.species, None),
    }

    # the mock scorer is a nearest-mention heuristic, so the first four rows
    # should agree document-for-document; the default rule order differs
    print(f"{'method':8} {'sec/100':>9} {'calls':>8} {'agreement-vs-seq-sg':>20}")
    baseline = None
    for name, method in methods.items():
        report, results = time_assignment(method, corpus)
        ids = {
            doc_id: result.all_predicted_ids() for doc_id, result in results.items()
        }
        if baseline is None:
            baseline = ids
        same = sum(1 for k in baseline if baseline[k] == ids[k])
        print(
            f"{name:8} {report.seconds_per_100:9.3f} {report.scorer_calls:8d}"
            f" {same / len(baseline):20.3f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
