#!/usr/bin/env python3
"""Convert an NCBI-style taxdump (names.dmp, nodes.dmp) into taxassign's
tab-separated names/nodes tables.

Dump lines look like ``tax_id\t|\tfield\t|\t...\t|\n``. Only the fields
this toolkit uses are kept; name classes are mapped onto {scientific,
synonym, common, abbreviation} and everything else passes through as-is.

Usage:
    python3 scripts/convert_ncbi_taxdump.py TAXDUMP_DIR OUT_DIR
"""

import sys
from pathlib import Path

CLASS_MAP = {
    "scientific name": "scientific",
    "synonym": "synonym",
    "equivalent name": "synonym",
    "genbank synonym": "synonym",
    "common name": "common",
    "genbank common name": "common",
    "acronym": "abbreviation",
    "genbank acronym": "abbreviation",
}


def dmp_fields(line: str) -> list[str]:
    return [f.strip() for f in line.rstrip("\t|\n").split("\t|\t")]


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    taxdump, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    n_names = 0
    with open(taxdump / "names.dmp", encoding="utf-8") as src, open(
        out_dir / "names.tsv", "w", encoding="utf-8"
    ) as dst:
        for line in src:
            fields = dmp_fields(line)
            if len(fields) < 4:
                continue
            tax_id, name, _, name_class = fields[0], fields[1], fields[2], fields[3]
            mapped = CLASS_MAP.get(name_class)
            if mapped is None:
                continue  # in-part, authority, blast name, type material ...
            dst.write(f"{tax_id}\t{name}\t{mapped}\n")
            n_names += 1

    n_nodes = 0
    with open(taxdump / "nodes.dmp", encoding="utf-8") as src, open(
        out_dir / "nodes.tsv", "w", encoding="utf-8"
    ) as dst:
        for line in src:
            fields = dmp_fields(line)
            if len(fields) < 3:
                continue
            dst.write(f"{fields[0]}\t{fields[1]}\t{fields[2]}\n")
            n_nodes += 1

    print(f"wrote {n_names} names, {n_nodes} nodes to {out_dir}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
