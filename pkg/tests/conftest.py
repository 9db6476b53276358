import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixture_corpus_args():
    return {
        "manifest": str(FIXTURES / "corpus" / "manifest.json"),
        "text_dir": str(FIXTURES / "corpus" / "texts"),
        "generation_fixture": str(FIXTURES / "generation_rules.json"),
        "ground_truth": str(FIXTURES / "ground_truth.json"),
    }


def run_cli(argv):
    from ragcausal.cli import main

    return main(argv)
