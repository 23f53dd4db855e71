"""Token-classification inference behind the scorer wire protocol.

The model is any HuggingFace token-classification checkpoint whose
tokenizer registers the six marker tokens as atomic vocabulary items.
Requests arrive as whole-token lists; the model's own sub-token pieces
are pooled back to one probability row per request token using the
first-piece policy.
"""

from __future__ import annotations

import threading

import torch
from transformers import AutoModelForTokenClassification, AutoTokenizer

MARKER_TOKENS = ("<GENE>", "</GENE>", "<SPEC>", "</SPEC>", "<ARG>", "</ARG>")


class RequestError(Exception):
    """Invalid request content; reported to the client as an error response."""


class TokenScorer:
    """Shared, read-only model handle. Inference is serialized by a lock so
    concurrent connections see deterministic results."""

    def __init__(self, model_dir: str):
        torch.set_num_threads(1)
        self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        self.model = AutoModelForTokenClassification.from_pretrained(model_dir)
        self.model.eval()
        self.max_pieces = int(self.model.config.max_position_embeddings)
        self._lock = threading.Lock()

    def predict_sequence(self, tokens: list[str]) -> list[tuple[float, float]]:
        """Per-token (p_O, p_I) rows, one per input token, each summing to 1."""
        if not tokens:
            raise RequestError("empty token list")
        encoded = self.tokenizer(
            [t if t else "[UNK]" for t in tokens],
            is_split_into_words=True,
            add_special_tokens=True,
            return_tensors="pt",
        )
        n_pieces = encoded["input_ids"].shape[1]
        if n_pieces > self.max_pieces:
            raise RequestError(
                f"too-long: {n_pieces} sub-token pieces exceeds model limit {self.max_pieces}"
            )
        word_ids = encoded.word_ids(0)
        with self._lock, torch.no_grad():
            logits = self.model(**encoded).logits[0]
        probs = torch.softmax(logits.double(), dim=-1)

        rows: list[tuple[float, float] | None] = [None] * len(tokens)
        for position, word_id in enumerate(word_ids):
            if word_id is not None and rows[word_id] is None:
                rows[word_id] = (float(probs[position, 0]), float(probs[position, 1]))
        # tokens that produced no pieces still need a row
        return [row if row is not None else (0.5, 0.5) for row in rows]

    def predict_pair(self, tokens: list[str]) -> float:
        """Scalar relatedness score in [0, 1].

        Pools the inside-probability over the GENE-marked region (tags
        included); if no gene markers are present, over all tokens.
        """
        rows = self.predict_sequence(tokens)
        segment = rows
        if "<GENE>" in tokens and "</GENE>" in tokens:
            start = tokens.index("<GENE>")
            end = tokens.index("</GENE>")
            if start < end:
                segment = rows[start : end + 1]
        return sum(p_i for _, p_i in segment) / len(segment)
