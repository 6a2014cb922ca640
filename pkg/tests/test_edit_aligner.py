"""(c) 2025, hybrid-sape authors.
"""

import numpy as np
import pytest

from app.services import edit_aligner
from app.services.corpus import pos_tag, to_bigrams
from app.services.edit_aligner import (
    Alignment,
    SynonymLexicon,
    align,
    count_crossings,
    porter_stem,
    stage_match,
)
from app.utils.errors import CorpusError


@pytest.mark.parametrize(
    "word, stem", [("running", "run"), ("x", "x"), ("caresses", "caress"), ("runs", "run")]
)
def test_porter_stem(word, stem):
    assert porter_stem(word) == stem


def test_stage_match():
    assert stage_match(["a", "b"], ["b", "c"], "exact", None, set(), set()) == {(1, 0)}
    assert stage_match(["running"], ["runs"], "stem", None, set(), set()) == {(0, 0)}
    lexicon = SynonymLexicon([frozenset({"toad", "sapo"})])
    assert stage_match(["toad"], ["sapo"], "synonym", lexicon, set(), set()) == {(0, 0)}
    # empty lexicon disables the synonym stage
    assert stage_match(["toad"], ["sapo"], "synonym", SynonymLexicon(), set(), set()) == set()
    # covered positions are skipped
    assert stage_match(["a", "a"], ["a"], "exact", None, {0}, set()) == {(1, 0)}


@pytest.mark.parametrize(
    "links, crossings",
    [([(0, 0), (1, 1)], 0), ([(0, 1), (1, 0)], 1), ([(0, 2), (1, 1), (2, 0)], 3), ([], 0)],
)
def test_count_crossings(links, crossings):
    assert count_crossings(Alignment.from_pairs(links)) == crossings
    assert count_crossings(links) == crossings


def test_align_identity():
    result = align(["a", "b", "c"], ["a", "b", "c"])
    assert result.pairs() == [(0, 0), (1, 1), (2, 2)]
    assert count_crossings(result) == 0
    assert result.is_matching()


def test_exact_limit_counts_candidate_links(mocker):
    exact = mocker.spy(edit_aligner, "_best_matching")
    greedy = mocker.spy(edit_aligner, "_greedy_matching")
    # long sentences sharing three words stay under the limit
    H = [f"h{k}" for k in range(27)] + ["a", "b", "c"]
    R = ["c", "b", "a"] + [f"r{k}" for k in range(27)]
    result = align(H, R, exact_limit=20)
    assert result.pairs() == [(27, 2), (28, 1), (29, 0)]
    assert exact.call_count == 1
    assert greedy.call_count == 0

    align(H, R, exact_limit=2)
    assert greedy.call_count == 1


def test_align_swap():
    assert align(["b", "a"], ["a", "b"]).pairs() == [(0, 1), (1, 0)]


def test_align_prefers_fewest_crossings_then_smallest():
    assert align(["a", "a"], ["a", "a"]).pairs() == [(0, 0), (1, 1)]
    assert align(["a"], ["a", "a"]).pairs() == [(0, 0)]


def test_align_bigram_example(example_mt, example_pe, example_tagger):
    mt = to_bigrams(pos_tag(example_mt, example_tagger))
    pe = to_bigrams(pos_tag(example_pe, example_tagger))
    assert align(mt, pe).to_pharaoh() == "0-0 1-1 4-5"


def test_align_stage_labels():
    lexicon = SynonymLexicon([frozenset({"toad", "sapo"})])
    result = align(["the", "running", "toad"], ["the", "runs", "sapo"], lexicon)
    stages = {(link.h_index, link.r_index): link.stage for link in result.links}
    assert stages == {(0, 0): "exact", (1, 1): "stem", (2, 2): "synonym"}


def test_align_greedy_above_limit():
    tokens = [f"w{k}" for k in range(30)]
    result = align(tokens, list(reversed(tokens)), exact_limit=20)
    assert len(result) == 30
    assert result.is_matching()


def test_pharaoh_round_trip():
    alignment = Alignment.from_pairs([(4, 5), (0, 0), (1, 1)])
    assert alignment.to_pharaoh() == "0-0 1-1 4-5"
    assert Alignment.from_pharaoh("0-0 1-1 4-5").pairs() == alignment.pairs()
    assert Alignment.from_pharaoh("").pairs() == []


def test_synonym_lexicon_load(tmp_path):
    path = tmp_path / "syn.txt"
    path.write_text("Toad sapo\nsolo\ncar auto coche\n", encoding="utf-8")
    lexicon = SynonymLexicon.load(str(path))
    assert len(lexicon.groups) == 2
    assert lexicon.are_synonyms("sapo", "TOAD")
    assert lexicon.are_synonyms("coche", "car")
    assert not lexicon.are_synonyms("toad", "car")
    assert not SynonymLexicon.load(None)
    with pytest.raises(CorpusError):
        SynonymLexicon.load(str(tmp_path / "missing.txt"))


def _all_matchings(candidates, rows):
    """Every matching over ``candidates``, built row by row."""
    by_row = {i: sorted(j for a, j in candidates if a == i) for i in rows}
    result = []

    def walk(k, chosen, used):
        if k == len(rows):
            result.append(list(chosen))
            return
        walk(k + 1, chosen, used)
        for j in by_row[rows[k]]:
            if j not in used:
                chosen.append((rows[k], j))
                walk(k + 1, chosen, used | {j})
                chosen.pop()

    walk(0, [], frozenset())
    return result


def test_align_crossing_oracle():
    rng = np.random.default_rng(7)
    alphabet = ["a", "b", "c"]
    for _ in range(500):
        H = [alphabet[k] for k in rng.integers(0, 3, rng.integers(0, 7))]
        R = [alphabet[k] for k in rng.integers(0, 3, rng.integers(0, 7))]
        result = align(H, R)
        assert result.is_matching()

        candidates = stage_match(H, R, "exact", None, set(), set())
        rows = sorted({i for i, _ in candidates})
        matchings = _all_matchings(candidates, rows)
        best_size = max(len(m) for m in matchings)
        best_cross = min(count_crossings(m) for m in matchings if len(m) == best_size)

        assert len(result) == best_size
        assert count_crossings(result) == best_cross
        assert all(H[i] == R[j] for i, j in result.pairs())


def test_align_matching_property():
    rng = np.random.default_rng(11)
    words = ["run", "runs", "running", "toad", "sapo", "a", "the"]
    lexicon = SynonymLexicon([frozenset({"toad", "sapo"})])
    for _ in range(1000):
        H = [words[k] for k in rng.integers(0, len(words), rng.integers(0, 8))]
        R = [words[k] for k in rng.integers(0, len(words), rng.integers(0, 8))]
        assert align(H, R, lexicon).is_matching()
