"""taxassign: species mention recognition and gene-species assignment."""

from .docmodel import Document, GeneMention, SpeciesMention, species_order
from .errors import TaxAssignError
from .lexicon import AuxTables, CompiledLexicon, Lexicon, build_lexicon, compile_lexicon
from .rules import Assignment, AssignmentResult, RuleConfig, assign_rule_based
from .seqframe import MockScorer, assign_with_scorer
from .tagger import doc_level_ids, split_sentences, tag_document

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AssignmentResult",
    "AuxTables",
    "CompiledLexicon",
    "Document",
    "GeneMention",
    "Lexicon",
    "MockScorer",
    "RuleConfig",
    "SpeciesMention",
    "TaxAssignError",
    "assign_rule_based",
    "assign_with_scorer",
    "build_lexicon",
    "compile_lexicon",
    "doc_level_ids",
    "species_order",
    "split_sentences",
    "tag_document",
]
