#!/usr/bin/env python3
"""Write scorer training records (JSON lines) from a gold PubTator corpus.

Usage:
    python3 scripts/export_training_data.py --input gold.pubtator \
        --strategy seq-sg --output train.jsonl
"""

import argparse
import sys

from taxassign.evalkit import parse_pubtator
from taxassign.seqframe import export_training_data, format_training_record
from taxassign.tagger import split_sentences


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True)
    parser.add_argument("--strategy", choices=["seq-sg", "seq-gs"], default="seq-sg")
    parser.add_argument("--output", required=True)
    args = parser.parse_args()

    with open(args.input, encoding="utf-8") as handle:
        corpus = parse_pubtator(handle.readlines())
    for doc in corpus:
        doc.sentences = split_sentences(doc.text, doc.species)

    count = 0
    out = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
    try:
        for record_id, (tagged, labels) in enumerate(
            export_training_data(corpus, args.strategy)
        ):
            out.write(format_training_record(record_id, tagged, labels) + "\n")
            count += 1
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"wrote {count} records ({args.strategy})", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
