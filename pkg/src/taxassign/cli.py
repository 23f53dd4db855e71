"""Command-line pipelines: build-lexicon, tag, assign, eval, filter.

Exit codes: 0 success, 1 runtime error, 2 usage error. ``-`` stands for
stdin/stdout on all text inputs and outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import evalkit, lexicon as lexmod, rules as rulesmod, seqframe
from .docmodel import Document
from .errors import TaxAssignError
from .evalkit import Corpus
from .rules import AssignmentResult, RuleConfig
from .scorer_protocol import RemoteScorer
from .seqframe import MockScorer
from .tagger import split_sentences, tag_document

SCORER_ADDR_ENV = "TAXASSIGN_SCORER_ADDR"


def _read_lines(path: str) -> list[str]:
    if path == "-":
        return sys.stdin.readlines()
    with open(path, encoding="utf-8") as handle:
        return handle.readlines()


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _load_corpus(path: str) -> Corpus:
    return evalkit.parse_pubtator(_read_lines(path))


def _map_documents(docs, worker, jobs: int):
    """Apply ``worker`` per document; output order always equals input order."""
    if jobs <= 1:
        return [worker(d) for d in docs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, docs))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_build_lexicon(args: argparse.Namespace) -> int:
    names = lexmod.parse_names(_read_lines(args.names))
    nodes = lexmod.parse_nodes(_read_lines(args.nodes))
    aux = lexmod.AuxTables()
    if args.cell_lines:
        aux.cell_lines = lexmod.parse_two_column(_read_lines(args.cell_lines), "cell line")
    if args.prefixes:
        aux.gene_prefixes = lexmod.parse_two_column(_read_lines(args.prefixes), "prefix")
    if args.blocklist:
        aux.blocklist = lexmod.parse_blocklist(_read_lines(args.blocklist))
    if args.genus_overrides:
        aux.genus_overrides = lexmod.parse_two_column(
            _read_lines(args.genus_overrides), "genus"
        )
    lex = lexmod.build_lexicon(names, nodes, aux)
    compiled = lexmod.compile_lexicon(lex)
    lexmod.save_compiled(compiled, args.out)
    print(f"entries: {len(lex.entries)}")
    print(f"names inserted: {compiled.stats.names_inserted}")
    print(f"abbreviation variants: {compiled.stats.variants_inserted}")
    print(f"blocklisted names removed: {compiled.stats.names_blocklisted}")
    print(f"genus promotions: {len(lex.genus_to_species)}")
    print(f"strain codes: {len(lex.strain_codes)}")
    print(f"cell lines: {len(lex.cell_lines)}")
    print(f"gene prefixes: {len(lex.gene_prefix_map)}")
    return 0


def cmd_tag(args: argparse.Namespace) -> int:
    compiled = lexmod.load_compiled(args.lexicon)
    corpus = _load_corpus(args.input)

    def worker(doc: Document) -> Document:
        mentions = tag_document(doc, compiled.lexicon, compiled.trie, compiled.cell_trie)
        existing = {(m.span, m.source == "cell-line") for m in doc.species}
        merged = list(doc.species)
        for m in mentions:
            if (m.span, m.source == "cell-line") not in existing:
                merged.append(m)
        doc.species = merged
        return doc

    documents = _map_documents(corpus.documents, worker, args.jobs)
    _write_text(args.output, evalkit.write_pubtator(Corpus(documents)))
    return 0


def _make_scorer(args: argparse.Namespace, parser: argparse.ArgumentParser):
    if args.scorer == "mock":
        return MockScorer()
    address = args.scorer_addr or os.environ.get(SCORER_ADDR_ENV)
    if not address:
        parser.error("--scorer remote requires --scorer-addr or " + SCORER_ADDR_ENV)
    return RemoteScorer(address)


def cmd_assign(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    corpus = _load_corpus(args.input)
    config = RuleConfig.from_file(args.rule_config) if args.rule_config else RuleConfig()
    scorer = None
    if args.method != "rule":
        scorer = _make_scorer(args, parser)

    def worker(doc: Document) -> tuple[Document, AssignmentResult]:
        doc.sentences = split_sentences(doc.text, doc.species)
        if args.method == "rule":
            result = rulesmod.assign_rule_based(doc, doc.genes, doc.species, config)
        else:
            result = seqframe.assign_with_scorer(
                doc,
                doc.genes,
                doc.species,
                args.method,
                scorer,
                threshold=args.threshold,
                default_tax_id=config.default_tax_id,
            )
        doc.genes = [
            replace(g, gold_tax_ids=result.predicted_ids(i))
            for i, g in enumerate(doc.genes)
        ]
        return doc, result

    started = time.perf_counter()
    pairs = _map_documents(corpus.documents, worker, args.jobs)
    elapsed = time.perf_counter() - started

    documents = [doc for doc, _ in pairs]
    total_calls = sum(result.scorer_calls for _, result in pairs)
    total_genes = sum(len(doc.genes) for doc in documents)
    _write_text(args.output, evalkit.write_pubtator(Corpus(documents)))
    per100 = elapsed * 100.0 / len(documents) if documents else 0.0
    print(
        f"method={args.method} docs={len(documents)} genes={total_genes} "
        f"scorer_calls={total_calls} seconds={elapsed:.3f} sec_per_100={per100:.3f}",
        file=sys.stderr,
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    gold = _load_corpus(args.gold)
    pred = _load_corpus(args.pred)
    if args.what == "ner":
        report = evalkit.eval_ner_doclevel(gold, pred)
        print(f"precision  {report.precision:.4f}")
        print(f"recall     {report.recall:.4f}")
        print(f"f-measure  {report.f_measure:.4f}")
        print(f"tp/fp/fn   {report.tp}/{report.fp}/{report.fn}")
        payload = report.to_json()
    else:
        predictions = {
            doc.doc_id: AssignmentResult(
                [
                    [rulesmod.Assignment(tid, 1.0, "file") for tid in sorted(g.gold_tax_ids or ())]
                    for g in doc.genes
                ]
            )
            for doc in pred.documents
        }
        report = evalkit.eval_assignment(gold, predictions)
        print(f"strict-acc {report.strict_acc:.4f} ({report.strict_correct}/{report.total_genes})")
        print(f"relax-acc  {report.relax_acc:.4f} ({report.relax_correct}/{report.total_genes})")
        payload = report.to_json()
    if args.json:
        _write_text(args.json, payload + "\n")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.input)
    eligible, excluded = evalkit.filter_eligible(corpus)
    _write_text(args.out_eligible, evalkit.write_pubtator(eligible))
    _write_text(
        args.out_excluded,
        evalkit.write_pubtator(Corpus([doc for doc, _ in excluded])),
    )
    reason_lines = "".join(f"{doc.doc_id}\t{reason}\n" for doc, reason in excluded)
    if args.reasons:
        _write_text(args.reasons, reason_lines)
    else:
        sys.stderr.write(reason_lines)
    print(
        f"eligible={len(eligible)} excluded={len(excluded)} total={len(corpus)}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxassign",
        description="Species mention recognition and gene-species assignment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-lexicon", help="compile taxonomy tables into a binary lexicon")
    p.add_argument("--names", required=True)
    p.add_argument("--nodes", required=True)
    p.add_argument("--cell-lines")
    p.add_argument("--prefixes")
    p.add_argument("--blocklist")
    p.add_argument("--genus-overrides")
    p.add_argument("--out", required=True)

    p = sub.add_parser("tag", help="add species/cell-line annotations to a PubTator file")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("assign", help="fill gene identifier fields with predicted species")
    p.add_argument("--method", required=True, choices=["rule", "seq-sg", "seq-gs", "pair"])
    p.add_argument("--scorer", choices=["mock", "remote"], default="mock")
    p.add_argument("--scorer-addr")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--rule-config")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval", help="score predictions against a gold corpus")
    p.add_argument("what", choices=["ner", "assign"])
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json", help="also write a machine-readable report here")

    p = sub.add_parser("filter", help="split a gold corpus by benchmark eligibility")
    p.add_argument("--input", required=True)
    p.add_argument("--out-eligible", required=True)
    p.add_argument("--out-excluded", required=True)
    p.add_argument("--reasons", help="write doc_id<TAB>reason lines here")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "build-lexicon":
            return cmd_build_lexicon(args)
        if args.command == "tag":
            return cmd_tag(args)
        if args.command == "assign":
            return cmd_assign(args, parser)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "filter":
            return cmd_filter(args)
        parser.error(f"unknown command {args.command!r}")
    except TaxAssignError as exc:
        print(f"taxassign: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"taxassign: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
