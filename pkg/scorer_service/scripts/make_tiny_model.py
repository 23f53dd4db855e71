#!/usr/bin/env python3
"""Create a tiny untrained token-classification model for protocol testing.

The tokenizer is character-level WordPiece over printable ASCII with the
six marker tokens registered as atomic special tokens, so any request
token encodes to at least one piece and markers never split. Weights are
randomly initialized from a fixed seed; the service only needs
deterministic, well-formed probabilities, not accuracy.

Usage:
    python3 scripts/make_tiny_model.py OUT_DIR [--seed 0]
"""

import argparse
import sys
from pathlib import Path

import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertForTokenClassification, PreTrainedTokenizerFast

MARKER_TOKENS = ["<GENE>", "</GENE>", "<SPEC>", "</SPEC>", "<ARG>", "</ARG>"]


def build_tokenizer() -> PreTrainedTokenizerFast:
    chars = [chr(c) for c in range(33, 127)]
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += chars + ["##" + c for c in chars]
    vocab_dict = {token: i for i, token in enumerate(vocab)}

    wordpiece = models.WordPiece(vocab_dict, unk_token="[UNK]", max_input_chars_per_word=500)
    tokenizer = Tokenizer(wordpiece)
    tokenizer.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab_dict["[CLS]"]), ("[SEP]", vocab_dict["[SEP]"])],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    fast.add_special_tokens({"additional_special_tokens": MARKER_TOKENS})
    return fast


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tokenizer = build_tokenizer()
    torch.manual_seed(args.seed)
    config = BertConfig(
        vocab_size=len(tokenizer),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
        num_labels=2,
    )
    model = BertForTokenClassification(config)

    tokenizer.save_pretrained(out)
    model.save_pretrained(out)
    print(f"wrote tiny model ({len(tokenizer)} vocab) to {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
