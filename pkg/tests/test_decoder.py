"""(c) 2025, hybrid-sape authors.
"""

import math
from functools import lru_cache
from itertools import product

import numpy as np
import pytest

from app.services.decoder import (
    WEIGHT_NAMES,
    WeightVector,
    build_chart,
    decode,
    decode_corpus,
    glue_weight,
    kbest,
    nbest_lines,
    pass_through_rule,
    rule_weight,
)
from app.services.ngram_lm import LOG10_TO_LN, score, train_lm
from app.services.rule_extract import (
    FEATURE_NAMES,
    GLUE_CONCAT,
    PHRASE_PENALTY,
    FeatureVector,
    RuleTable,
    SCFGRule,
)
from app.utils.errors import ModelError

TARGET_WORDS = ["x", "y", "z", "a", "b"]
SOURCE_WORDS = ["a", "b", "c", "d"]
SOURCE_SHAPES = [
    ("t",),
    ("t", "t"),
    ("t", "t", "t"),
    ("t", 1),
    (1, "t"),
    ("t", 1, "t"),
    (1, "t", 2),
    ("t", 1, "t", 2),
]


def _features(rng) -> FeatureVector:
    return FeatureVector(*rng.uniform(0.05, 1.0, 4))


def _rule(source, target, rng=None, links=()):
    features = _features(rng) if rng is not None else FeatureVector(0.5, 0.5, 0.5, 0.5)
    return SCFGRule("X", source, target, links, features)


@pytest.fixture(scope="module")
def lm():
    rng = np.random.default_rng(31)
    corpus = [
        [TARGET_WORDS[k] for k in rng.integers(0, len(TARGET_WORDS), rng.integers(1, 6))]
        for _ in range(40)
    ]
    return train_lm(corpus, order=3)


def _random_grammar(rng):
    rules = []
    for _ in range(int(rng.integers(3, 21))):
        shape = SOURCE_SHAPES[rng.integers(0, len(SOURCE_SHAPES))]
        source = tuple(
            SOURCE_WORDS[rng.integers(0, len(SOURCE_WORDS))] if s == "t" else s for s in shape
        )
        nts = [s for s in shape if isinstance(s, int)]
        terms = [TARGET_WORDS[k] for k in rng.integers(0, len(TARGET_WORDS), rng.integers(1, 3))]
        symbols = nts + terms
        target = tuple(symbols[k] for k in rng.permutation(len(symbols)))
        rules.append(_rule(source, target, rng))
    return rules


def _audit(derivation, weights, lm):
    """Score recomputed from the derivation's rule applications."""
    total = 0.0
    for rule, _, _ in derivation.applications():
        if rule.lhs == "X":
            total += rule_weight(rule, weights)
        elif rule == GLUE_CONCAT:
            total += glue_weight(weights)
    total += weights.lm * score(lm, derivation.output) * LOG10_TO_LN
    total -= weights.word_penalty * len(derivation.output)
    return total


def _enumerate(sentence, grammar, lm, weights):
    """Best score of every output reachable by any derivation, no pruning."""
    f = tuple(sentence)
    n = len(f)
    vocab = set(f)
    usable = [r for r in grammar if set(r.terminals()) <= vocab]
    single = {r.source[0] for r in usable if len(r.source) == 1}
    usable += [pass_through_rule(t) for t in sorted(vocab) if t not in single]

    def matches(source, i, j):
        found = []

        def walk(pos, k, nts):
            if pos == len(source):
                if k == j:
                    found.append(dict(nts))
                return
            sym = source[pos]
            if isinstance(sym, str):
                if k < j and f[k] == sym:
                    walk(pos + 1, k + 1, nts)
                return
            for end in range(k + 1, j + 1):
                nts[sym] = (k, end)
                walk(pos + 1, end, nts)
                del nts[sym]

        walk(0, i, {})
        return found

    @lru_cache(maxsize=None)
    def x_derivs(i, j):
        result = []
        for rule in usable:
            for nts in matches(rule.source, i, j):
                children = [x_derivs(*nts[nt]) for nt in sorted(nts)]
                for combo in product(*children):
                    output = []
                    for sym in rule.target:
                        output.extend(combo[sym - 1][0] if isinstance(sym, int) else (sym,))
                    logs = [sum(v) for v in zip(rule.features.log_values, *(c[1] for c in combo))]
                    result.append((tuple(output), tuple(logs)))
        return result

    @lru_cache(maxsize=None)
    def s_derivs(j):
        result = [(out, logs, 0) for out, logs in x_derivs(0, j)]
        for k in range(1, j):
            for s_out, s_logs, glue in s_derivs(k):
                for x_out, x_logs in x_derivs(k, j):
                    logs = tuple(a + b for a, b in zip(s_logs, x_logs))
                    result.append((s_out + x_out, logs, glue + 1))
        return result

    best = {}
    for output, logs, glue in s_derivs(n):
        lm_ln = score(lm, output) * LOG10_TO_LN
        total = weights.dot(logs + (-float(glue), lm_ln, -float(len(output))))
        if output not in best or total > best[output]:
            best[output] = total
    return best


def test_rule_weight_examples():
    rule = SCFGRule("X", ("a",), ("x",), ((0, 0),), FeatureVector(0.5, 0.5, 1.0, 1.0))
    assert rule_weight(rule, WeightVector()) == pytest.approx(math.log(0.25) - 1.0)
    zero = WeightVector.from_array([0.0] * len(WEIGHT_NAMES))
    assert rule_weight(rule, zero) == 0.0
    doubled = WeightVector(p_src_given_tgt=2.0)
    assert rule_weight(rule, doubled) - rule_weight(rule, WeightVector()) == pytest.approx(
        math.log(0.5)
    )
    with pytest.raises(ValueError):
        rule_weight(SCFGRule("X", ("a",), ("x",)), WeightVector())


def test_glue_weight():
    assert glue_weight(WeightVector(glue=0.0)) == 0.0
    assert glue_weight(WeightVector(glue=1.0)) == -1.0


def test_glue_example(lm):
    grammar = [_rule(("a",), ("x",)), _rule(("b",), ("y",))]
    weights = WeightVector()
    result = decode(["a", "b"], grammar, lm, weights, beam=0, search_depth=2)
    assert result.output == ("x", "y")
    glue_uses = sum(1 for rule, _, _ in result.applications() if rule == GLUE_CONCAT)
    assert glue_uses == 1
    assert result.score == pytest.approx(_audit(result, weights, lm), abs=1e-9)


def test_hierarchical_rule_reorders(lm):
    grammar = [_rule(("a", 1), (1, "z")), _rule(("b",), ("y",))]
    result = decode(["a", "b"], grammar, lm, WeightVector(), beam=0, search_depth=2)
    assert result.output in {("y", "z"), ("a", "y")}
    spans = [(rule.source, i, j) for rule, i, j in result.applications() if rule.lhs == "X"]
    assert all(j - i <= 2 for _, i, j in spans)


def test_pass_through(lm):
    rule = pass_through_rule("q")
    assert rule.features.as_tuple() == pytest.approx((PHRASE_PENALTY,) * len(FEATURE_NAMES))
    result = decode(["a", "q"], [_rule(("a",), ("x",))], lm, WeightVector(), beam=0)
    assert result.output == ("x", "q")
    only_unknown = decode(["q", "r"], [_rule(("a",), ("x",))], lm, WeightVector())
    assert only_unknown.output == ("q", "r")


def test_empty_input(lm):
    weights = WeightVector()
    result = decode([], [_rule(("a",), ("x",))], lm, weights)
    assert result.output == ()
    assert result.applications() == []
    assert result.score == pytest.approx(weights.lm * score(lm, []) * LOG10_TO_LN)


def test_search_depth_limits_rule_spans(lm):
    grammar = [_rule(("a", "b"), ("z",))]
    shallow = decode(["a", "b"], grammar, lm, WeightVector(), search_depth=1)
    assert shallow.output == ("a", "b")
    with pytest.raises(ValueError):
        decode(["a"], grammar, lm, WeightVector(), search_depth=0)
    with pytest.raises(ValueError):
        decode(["a"], grammar, lm, WeightVector(), beam=-1)


def test_decoder_matches_exhaustive_enumeration(lm):
    rng = np.random.default_rng(37)
    for _ in range(100):
        grammar = _random_grammar(rng)
        weights = WeightVector.from_array(rng.uniform(-1.0, 1.0, len(WEIGHT_NAMES)))
        sentence = [SOURCE_WORDS[k] for k in rng.integers(0, len(SOURCE_WORDS), rng.integers(1, 7))]
        best = _enumerate(sentence, grammar, lm, weights)

        chart = build_chart(sentence, grammar, lm, weights, beam=0, search_depth=len(sentence))
        result = chart.best()
        assert result.score == pytest.approx(max(best.values()), abs=1e-9)
        assert best[result.output] == pytest.approx(result.score, abs=1e-9)
        assert result.score == pytest.approx(_audit(result, weights, lm), abs=1e-9)

        ranked = sorted(best.values(), reverse=True)
        derivations = kbest(chart, 5)
        assert derivations[0].output == result.output
        assert len({d.output for d in derivations}) == len(derivations)
        for d, expected in zip(derivations, ranked):
            assert d.score == pytest.approx(expected, abs=1e-9)
            assert d.score == pytest.approx(_audit(d, weights, lm), abs=1e-9)


def test_kbest_ordering_and_size(lm):
    grammar = [_rule(("a",), ("x",)), _rule(("a",), ("y",)), _rule(("a",), ("z",))]
    chart = build_chart(["a"], grammar, lm, WeightVector(), beam=0)
    derivations = kbest(chart, 10)
    assert sorted(d.output for d in derivations) == [("x",), ("y",), ("z",)]
    scores = [d.score for d in derivations]
    assert scores == sorted(scores, reverse=True)
    assert kbest(chart, 1)[0].output == chart.best().output
    with pytest.raises(ValueError):
        kbest(chart, 0)


def test_decoding_is_deterministic(lm):
    rng = np.random.default_rng(41)
    grammar = RuleTable(_random_grammar(rng))
    sentences = [["a", "b", "c"], ["d", "a"], ["b"], []]
    first = decode_corpus(sentences, grammar, lm, WeightVector(), nbest=3)
    second = decode_corpus(sentences, grammar, lm, WeightVector(), nbest=3)
    assert [[d.output for d in ds] for ds in first] == [[d.output for d in ds] for ds in second]
    assert [ds[0].score for ds in first] == [ds[0].score for ds in second]
    parallel = decode_corpus(sentences, grammar, lm, WeightVector(), nbest=3, threads=2)
    assert [[d.output for d in ds] for ds in parallel] == [[d.output for d in ds] for ds in first]


def test_nbest_lines(lm):
    chart = build_chart(["a"], [_rule(("a",), ("x",))], lm, WeightVector())
    (line,) = nbest_lines(4, kbest(chart, 2))
    sent_id, output, breakdown, total = line.split(" ||| ")
    assert (sent_id, output) == ("4", "x")
    assert breakdown.split()[0].startswith("p_src_given_tgt=")
    assert [item.split("=")[0] for item in breakdown.split()] == list(WEIGHT_NAMES)
    assert float(total) == pytest.approx(chart.best().score, abs=1e-6)


def test_weights_round_trip(tmp_path):
    weights = WeightVector.from_array(np.linspace(-1.0, 1.0, len(WEIGHT_NAMES)))
    path = str(tmp_path / "weights.tsv")
    weights.save(path)
    assert WeightVector.load(path) == weights
    assert weights.dot(np.ones(len(WEIGHT_NAMES))) == pytest.approx(0.0, abs=1e-12)

    bad = tmp_path / "bad.tsv"
    bad.write_text("beam\t3\n", encoding="utf-8")
    with pytest.raises(ModelError):
        WeightVector.load(str(bad))
    with pytest.raises(ModelError):
        WeightVector.load(str(tmp_path / "missing.tsv"))
    with pytest.raises(ValueError):
        WeightVector(lm=float("nan"))
