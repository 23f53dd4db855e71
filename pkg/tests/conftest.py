from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from taxassign import lexicon as lexmod

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "data" / "demo"


def read_lines(path: Path) -> list[str]:
    return path.read_text(encoding="utf-8").splitlines(keepends=True)


@pytest.fixture(scope="session")
def demo_tables() -> dict:
    return {
        "names": lexmod.parse_names(read_lines(DEMO_DIR / "names.tsv")),
        "nodes": lexmod.parse_nodes(read_lines(DEMO_DIR / "nodes.tsv")),
        "aux": lexmod.AuxTables(
            cell_lines=lexmod.parse_two_column(read_lines(DEMO_DIR / "cell_lines.tsv")),
            gene_prefixes=lexmod.parse_two_column(read_lines(DEMO_DIR / "gene_prefixes.tsv")),
            blocklist=lexmod.parse_blocklist(read_lines(DEMO_DIR / "blocklist.txt")),
            genus_overrides=lexmod.parse_two_column(
                read_lines(DEMO_DIR / "genus_overrides.tsv")
            ),
        ),
    }


@pytest.fixture(scope="session")
def demo_lexicon(demo_tables) -> lexmod.Lexicon:
    return lexmod.build_lexicon(
        demo_tables["names"], demo_tables["nodes"], demo_tables["aux"]
    )


@pytest.fixture(scope="session")
def demo_compiled(demo_lexicon) -> lexmod.CompiledLexicon:
    return lexmod.compile_lexicon(demo_lexicon)
