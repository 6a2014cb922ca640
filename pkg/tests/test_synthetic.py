"""(c) 2025, hybrid-sape authors.
"""

import os

import numpy as np
import pytest

from app.config.settings import PipelineConfig
from app.services.corpus import load_lexicon_tagger, load_triplets, pos_tag
from app.services.edit_aligner import SynonymLexicon
from app.services.synthetic import (
    CONFUSIONS,
    FILLERS,
    VOCABULARY,
    ErrorRates,
    generate_pe_sentence,
    inject_errors,
    make_synthetic,
    make_triplets,
    tagger_lexicon,
    to_source,
    write_synthetic,
)

NO_ERRORS = ErrorRates(0.0, 0.0, 0.0, 0.0)


def test_generated_sentences_use_the_vocabulary():
    rng = np.random.default_rng(71)
    for _ in range(200):
        tokens = generate_pe_sentence(rng)
        assert tokens[-1] == "."
        assert 6 <= len(tokens) <= 14
        assert all(t in VOCABULARY for t in tokens)


def test_zero_rates_copy_the_post_edit():
    corpus = make_triplets(50, np.random.default_rng(73), NO_ERRORS)
    assert all(entry.mt == entry.pe for entry in corpus)


def test_full_substitution_uses_every_confusion():
    rng = np.random.default_rng(79)
    rates = ErrorRates(substitution=1.0, swap=0.0, insertion=0.0, deletion=0.0)
    for _ in range(50):
        pe = generate_pe_sentence(rng)
        mt = inject_errors(pe, rng, rates)
        assert mt == [CONFUSIONS.get(t, t) for t in pe]


def test_deletion_keeps_a_word_and_the_period():
    rng = np.random.default_rng(83)
    rates = ErrorRates(substitution=0.0, swap=0.0, insertion=0.0, deletion=1.0)
    mt = inject_errors(["el", "perro", "come", "."], rng, rates)
    assert mt == ["el", "."]


def test_insertions_come_from_fillers():
    rng = np.random.default_rng(89)
    rates = ErrorRates(substitution=0.0, swap=0.0, insertion=1.0, deletion=0.0)
    mt = inject_errors(["el", "perro", "."], rng, rates)
    assert len(mt) == 5
    assert mt[0] in FILLERS and mt[2] in FILLERS
    assert mt[-1] == "."


def test_error_rates_are_validated():
    with pytest.raises(ValueError):
        ErrorRates(substitution=1.5)
    assert ErrorRates.from_config(PipelineConfig(synth_swap_rate=0.3)).swap == 0.3


def test_to_source():
    assert to_source(["el", "perro", "come", "."]) == ["the", "dog", "eats", "."]
    assert to_source(["zzz"]) == ["zzz"]


def test_same_seed_same_data():
    config = PipelineConfig(synth_train_size=30, synth_dev_size=5, synth_test_size=5)
    first, second = make_synthetic(config, seed=3), make_synthetic(config, seed=3)
    assert first == second
    assert make_synthetic(config, seed=4).train != first.train
    assert len(first.train) == 30 and len(first.dev) == 5 and len(first.test) == 5


def test_write_synthetic(tmp_path):
    config = PipelineConfig(synth_train_size=20, synth_dev_size=4, synth_test_size=4)
    data = make_synthetic(config)
    paths = write_synthetic(data, str(tmp_path / "synth"))
    assert load_triplets(paths["train_src"], paths["train_mt"], paths["train_pe"]) == data.train
    assert all(os.path.exists(path) for path in paths.values())

    tagger = load_lexicon_tagger(paths["tagger_lexicon"])
    for entry in data.train:
        assert pos_tag(entry.mt, tagger).tags == tuple(tagger_lexicon()[t] for t in entry.mt)

    lexicon = SynonymLexicon.load(paths["synonym_lexicon"])
    assert lexicon.are_synonyms("perro", "can")
