"""PubTator corpus I/O, benchmark eligibility filtering, and metrics.

PubTator convention used here: per document a ``PMID|t|title`` line, a
``PMID|a|abstract`` line, then tab-separated annotation lines
``PMID<TAB>start<TAB>end<TAB>mention<TAB>type<TAB>identifier`` and a blank
line. Offsets index the combined "title + space + abstract" text. The
Gene identifier column carries the gold *species* assignment for the gene
(comma-separated tax ids, ``-`` when unannotated) because this toolkit
evaluates species assignment, not gene normalization.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .docmodel import Document, GeneMention, SpeciesMention
from .errors import EvalError, PubTatorError
from .rules import AssignmentResult
from .tagger import doc_level_ids

TYPE_SPECIES = "Species"
TYPE_GENE = "Gene"
TYPE_CELL_LINE = "CellLine"
_KNOWN_TYPES = (TYPE_SPECIES, TYPE_GENE, TYPE_CELL_LINE)

REASON_ZERO = "zero-species"
REASON_SINGLE = "single-species"
REASON_GOLD_MISSING = "gold-not-in-abstract"


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]

    def by_id(self) -> dict[str, Document]:
        return {d.doc_id: d for d in self.documents}

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


# ---------------------------------------------------------------------------
# Parsing / writing
# ---------------------------------------------------------------------------


def _parse_ids(text: str, line_no: int) -> frozenset[int] | None:
    if text in ("", "-"):
        return None
    try:
        return frozenset(int(part) for part in text.split(","))
    except ValueError:
        raise PubTatorError(line_no, f"bad identifier field {text!r}") from None


def parse_pubtator(lines: Iterable[str]) -> Corpus:
    """Parse a PubTator stream, validating every annotation span."""
    documents: list[Document] = []
    seen_ids: set[str] = set()
    doc: Document | None = None
    expects_abstract = False

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            if doc is not None and expects_abstract:
                raise PubTatorError(line_no, "missing abstract line", doc.doc_id)
            doc = None
            continue

        if doc is not None and expects_abstract:
            prefix = doc.doc_id + "|a|"
            if not line.startswith(prefix):
                raise PubTatorError(line_no, "expected abstract line", doc.doc_id)
            doc.abstract = line[len(prefix) :]
            expects_abstract = False
            continue

        if "|t|" in line and "\t" not in line.split("|t|", 1)[0]:
            doc_id, _, title = line.partition("|t|")
            if doc_id in seen_ids:
                raise PubTatorError(line_no, f"duplicate doc_id {doc_id}")
            seen_ids.add(doc_id)
            doc = Document(doc_id=doc_id, title=title, abstract="")
            documents.append(doc)
            expects_abstract = True
            continue

        fields = line.split("\t")
        if doc is None:
            raise PubTatorError(line_no, "annotation before any title line")
        if len(fields) < 5:
            raise PubTatorError(line_no, "expected tab-separated annotation fields", doc.doc_id)
        if fields[0] != doc.doc_id:
            raise PubTatorError(
                line_no, f"annotation doc id {fields[0]} != {doc.doc_id}", doc.doc_id
            )
        try:
            start, end = int(fields[1]), int(fields[2])
        except ValueError:
            raise PubTatorError(line_no, "non-numeric offsets", doc.doc_id) from None
        mention, ann_type = fields[3], fields[4]
        identifier = fields[5] if len(fields) > 5 else "-"
        if ann_type not in _KNOWN_TYPES:
            raise PubTatorError(line_no, f"unknown annotation type {ann_type!r}", doc.doc_id)
        if not doc.check_span((start, end), mention):
            found = doc.text[start:end] if 0 <= start <= end <= len(doc.text) else "<oob>"
            raise PubTatorError(
                line_no,
                f"offset mismatch: expected {mention!r}, text has {found!r}",
                doc.doc_id,
            )
        ids = _parse_ids(identifier, line_no)
        if ann_type == TYPE_GENE:
            doc.genes.append(GeneMention((start, end), mention, ids))
        else:
            if ids is None:
                raise PubTatorError(line_no, f"{ann_type} line requires a tax id", doc.doc_id)
            source = "cell-line" if ann_type == TYPE_CELL_LINE else "annotation"
            doc.species.append(SpeciesMention((start, end), mention, ids, source))

    if doc is not None and expects_abstract:
        raise PubTatorError(line_no, "missing abstract line", doc.doc_id)
    return Corpus(documents)


def _identifier_field(ids: frozenset[int] | None) -> str:
    if not ids:
        return "-"
    return ",".join(str(t) for t in sorted(ids))


def write_pubtator(corpus: Corpus) -> str:
    """Canonical serialization: annotations sorted by span, type, surface."""
    blocks: list[str] = []
    for doc in corpus.documents:
        lines = [f"{doc.doc_id}|t|{doc.title}", f"{doc.doc_id}|a|{doc.abstract}"]
        annotations: list[tuple[tuple, str]] = []
        for m in doc.species:
            ann_type = TYPE_CELL_LINE if m.source == "cell-line" else TYPE_SPECIES
            line = "\t".join(
                [
                    doc.doc_id,
                    str(m.start),
                    str(m.end),
                    m.surface,
                    ann_type,
                    _identifier_field(m.tax_ids),
                ]
            )
            annotations.append(((m.start, m.end, ann_type, m.surface), line))
        for g in doc.genes:
            line = "\t".join(
                [
                    doc.doc_id,
                    str(g.start),
                    str(g.end),
                    g.surface,
                    TYPE_GENE,
                    _identifier_field(g.gold_tax_ids),
                ]
            )
            annotations.append(((g.start, g.end, TYPE_GENE, g.surface), line))
        annotations.sort(key=lambda pair: pair[0])
        lines.extend(line for _, line in annotations)
        blocks.append("\n".join(lines))
    return "".join(block + "\n\n" for block in blocks)


# ---------------------------------------------------------------------------
# Eligibility filter
# ---------------------------------------------------------------------------


def filter_eligible(corpus: Corpus) -> tuple[Corpus, list[tuple[Document, str]]]:
    """Split a gold corpus into benchmark-eligible and excluded documents.

    Eligible docs mention at least two species (cell-line hosts count) and
    every gene's gold species is actually mentioned in the abstract.
    """
    eligible: list[Document] = []
    excluded: list[tuple[Document, str]] = []
    for doc in corpus.documents:
        ids = doc_level_ids(doc.species)
        if len(ids) == 0:
            excluded.append((doc, REASON_ZERO))
            continue
        if len(ids) == 1:
            excluded.append((doc, REASON_SINGLE))
            continue
        missing = False
        for gene in doc.genes:
            if gene.gold_tax_ids is None:
                raise EvalError(
                    f"doc {doc.doc_id}: gene {gene.surface!r} lacks gold annotation"
                )
            if not gene.gold_tax_ids <= ids:
                missing = True
                break
        if missing:
            excluded.append((doc, REASON_GOLD_MISSING))
        else:
            eligible.append(doc)
    return Corpus(eligible), excluded


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class NerReport:
    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    per_document: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "precision": self.precision,
                "recall": self.recall,
                "f_measure": self.f_measure,
                "tp": self.tp,
                "fp": self.fp,
                "fn": self.fn,
                "per_document": self.per_document,
            },
            indent=2,
            sort_keys=True,
        )


@dataclass
class AssignReport:
    strict_acc: float
    relax_acc: float
    strict_correct: int
    relax_correct: int
    total_genes: int
    seconds_per_100: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "strict_acc": self.strict_acc,
                "relax_acc": self.relax_acc,
                "strict_correct": self.strict_correct,
                "relax_correct": self.relax_correct,
                "total_genes": self.total_genes,
                "seconds_per_100": self.seconds_per_100,
            },
            indent=2,
            sort_keys=True,
        )


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def eval_ner_doclevel(gold_corpus: Corpus, pred_corpus: Corpus) -> NerReport:
    """Micro-averaged P/R/F over (doc_id, tax_id) pairs, duplicates counted once."""
    gold_by_id = gold_corpus.by_id()
    pred_by_id = pred_corpus.by_id()
    if set(gold_by_id) != set(pred_by_id):
        only_gold = sorted(set(gold_by_id) - set(pred_by_id))
        only_pred = sorted(set(pred_by_id) - set(gold_by_id))
        raise EvalError(
            f"doc_id mismatch: gold-only {only_gold or '[]'}, pred-only {only_pred or '[]'}"
        )
    tp = fp = fn = 0
    per_document: dict[str, dict] = {}
    for doc_id in sorted(gold_by_id):
        gold_ids = doc_level_ids(gold_by_id[doc_id].species)
        pred_ids = doc_level_ids(pred_by_id[doc_id].species)
        d_tp = len(gold_ids & pred_ids)
        d_fp = len(pred_ids - gold_ids)
        d_fn = len(gold_ids - pred_ids)
        tp, fp, fn = tp + d_tp, fp + d_fp, fn + d_fn
        p, r, f = _prf(d_tp, d_fp, d_fn)
        per_document[doc_id] = {"tp": d_tp, "fp": d_fp, "fn": d_fn, "p": p, "r": r, "f": f}
    precision, recall, f = _prf(tp, fp, fn)
    return NerReport(precision, recall, f, tp, fp, fn, per_document)


def eval_assignment(
    gold_corpus: Corpus, predictions: Mapping[str, AssignmentResult]
) -> AssignReport:
    """Strict accuracy requires the full gold species set per gene; relax
    accepts any overlap with it."""
    strict = relax = total = 0
    for doc in gold_corpus.documents:
        result = predictions.get(doc.doc_id)
        for i, gene in enumerate(doc.genes):
            if gene.gold_tax_ids is None:
                raise EvalError(
                    f"doc {doc.doc_id}: gene {gene.surface!r} lacks gold annotation"
                )
            if result is None or i >= len(result.assignments):
                raise EvalError(
                    f"doc {doc.doc_id}: no prediction for gene {gene.surface!r} at {gene.span}"
                )
            predicted = result.predicted_ids(i)
            total += 1
            if predicted == gene.gold_tax_ids:
                strict += 1
            if predicted & gene.gold_tax_ids:
                relax += 1
    if total == 0:
        return AssignReport(0.0, 0.0, 0, 0, 0)
    return AssignReport(strict / total, relax / total, strict, relax, total)


@dataclass
class TimingReport:
    seconds_per_100: float
    total_seconds: float
    documents: int
    scorer_calls: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "seconds_per_100": self.seconds_per_100,
                "total_seconds": self.total_seconds,
                "documents": self.documents,
                "scorer_calls": self.scorer_calls,
            },
            indent=2,
            sort_keys=True,
        )


def time_assignment(
    method: Callable[[Document], AssignmentResult], corpus: Corpus
) -> tuple[TimingReport, dict[str, AssignmentResult]]:
    """Wall-clock the method over a corpus, scaled to seconds per 100 abstracts."""
    if len(corpus) == 0:
        raise EvalError("cannot time an empty corpus")
    results: dict[str, AssignmentResult] = {}
    start = time.perf_counter()
    for doc in corpus.documents:
        results[doc.doc_id] = method(doc)
    elapsed = time.perf_counter() - start
    calls = sum(r.scorer_calls for r in results.values())
    report = TimingReport(
        seconds_per_100=elapsed * 100.0 / len(corpus),
        total_seconds=elapsed,
        documents=len(corpus),
        scorer_calls=calls,
    )
    return report, results
