"""(c) 2025, hybrid-sape authors.
"""

import os
import sys

# Add the project root directory to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

import pytest

from app.services.corpus import LexiconTagger, Sentence, Triplet, TripletCorpus

MT_LINE = "CommanderX : Toad su gilipollas ."
PE_LINE = "CommanderX : Sapo eres un gilipollas ."
SRC_LINE = "CommanderX : Toad you asshole ."

EXAMPLE_LEXICON = {
    "CommanderX": "NC",
    "Toad": "NC",
    "Sapo": "NC",
    "su": "PPO",
    "eres": "VSfin",
    "un": "ART",
    "gilipollas": "NC",
}


@pytest.fixture
def example_mt():
    return Sentence(MT_LINE.split())


@pytest.fixture
def example_pe():
    return Sentence(PE_LINE.split())


@pytest.fixture
def example_tagger():
    return LexiconTagger(EXAMPLE_LEXICON)


@pytest.fixture
def example_corpus(example_mt, example_pe):
    return TripletCorpus([Triplet(Sentence(SRC_LINE.split()), example_mt, example_pe)])


def write_file(path, lines):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("".join(line + "\n" for line in lines))
    return str(path)


@pytest.fixture
def example_files(tmp_path):
    """The example triplet plus a tagger lexicon, written to disk."""
    paths = {
        "src_path": write_file(tmp_path / "train.src", [SRC_LINE]),
        "mt_path": write_file(tmp_path / "train.mt", [MT_LINE]),
        "pe_path": write_file(tmp_path / "train.pe", [PE_LINE]),
        "tagger_lexicon": write_file(
            tmp_path / "tagger.tsv", [f"{w}\t{t}" for w, t in EXAMPLE_LEXICON.items()]
        ),
    }
    return paths
