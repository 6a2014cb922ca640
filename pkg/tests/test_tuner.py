"""(c) 2025, hybrid-sape authors.
"""

import numpy as np
import pytest

from app.services.decoder import WEIGHT_NAMES, Derivation, WeightVector
from app.services.tuner import NBestPool, _envelope, line_search, optimize_pool, tune
from app.utils.errors import TrainingError

DIMS = len(WEIGHT_NAMES)
LM = WEIGHT_NAMES.index("lm")

REFS = [
    ("el", "perro", "come", "mucho", "."),
    ("la", "casa", "es", "grande", "."),
    ("un", "gato", "busca", "la", "carta", "."),
]


def _unit(index: int, value: float = 1.0) -> np.ndarray:
    vector = np.zeros(DIMS)
    vector[index] = value
    return vector


def _candidates(ref, rng):
    """Two wrong outputs, then the reference; only the reference fires the LM feature."""
    shared = rng.uniform(-1.0, 1.0, DIMS)
    shared[LM] = 0.0
    wrong = [tuple(reversed(ref)), ref[:2] + ("zzz",) * (len(ref) - 2)]
    result = [(output, shared.copy()) for output in wrong]
    result.append((ref, shared + _unit(LM)))
    return result


def _pool(rng, refs=REFS):
    pool = NBestPool(refs)
    for index, ref in enumerate(refs):
        for output, features in _candidates(ref, rng):
            pool.add_candidate(index, output, features)
    return pool


def test_envelope_crossing_point():
    hull = _envelope(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert hull == [(-np.inf, 0), (1.0, 1)]
    # a dominated line never reaches the envelope
    hull = _envelope(np.array([1.0, 0.0, -5.0]), np.array([0.0, 1.0, 0.5]))
    assert [c for _, c in hull] == [0, 1]


def test_line_search_single_sentence():
    ref = ("a", "b", "c", "d")
    pool = NBestPool([ref])
    pool.add_candidate(0, ("x", "y", "z", "w"), _unit(0))
    pool.add_candidate(0, ref, _unit(1))
    weights = _unit(0)
    assert pool.bleu(weights) == 0.0
    gamma, best = line_search(pool, weights, _unit(1))
    # candidate lines 1 and gamma cross at gamma = 1
    assert gamma > 1.0
    assert best == pytest.approx(100.0)
    assert pool.bleu(weights + gamma * _unit(1)) == pytest.approx(100.0)


def test_line_search_prefers_smallest_step():
    ref = ("a", "b", "c", "d")
    pool = NBestPool([ref])
    pool.add_candidate(0, ref, _unit(0))
    pool.add_candidate(0, ("x", "y", "z", "w"), _unit(1))
    gamma, best = line_search(pool, _unit(0), _unit(1))
    assert best == pytest.approx(100.0)
    assert gamma < 1.0
    assert abs(gamma) <= 1.0


def test_pool_deduplicates():
    pool = NBestPool([("a",)])
    assert pool.add_candidate(0, ("a",), _unit(0))
    assert not pool.add_candidate(0, ("a",), _unit(0))
    assert pool.add_candidate(0, ("a",), _unit(1))
    assert len(pool) == 2
    with pytest.raises(ValueError):
        NBestPool([("a",), ("b",)]).bleu(np.zeros(DIMS))


def test_optimize_pool_reaches_perfect_bleu():
    rng = np.random.default_rng(47)
    pool = _pool(rng)
    start = WeightVector(lm=-1.0)
    assert pool.bleu(start.as_array()) < 100.0
    weights, best = optimize_pool(pool, start, restarts=2, rng=np.random.default_rng(0))
    assert best == pytest.approx(100.0)
    assert weights.lm > 0.0
    assert pool.bleu(weights.as_array()) == pytest.approx(100.0)


def test_optimal_start_is_kept():
    pool = _pool(np.random.default_rng(53))
    start = WeightVector(lm=1.0)
    assert pool.bleu(start.as_array()) == pytest.approx(100.0)
    weights, _ = optimize_pool(pool, start, restarts=3)
    assert weights == start


def test_optimize_never_loses_bleu():
    rng = np.random.default_rng(59)
    for _ in range(20):
        refs = [tuple(f"w{k}" for k in rng.integers(0, 6, 5)) for _ in range(4)]
        pool = NBestPool(refs)
        for index, ref in enumerate(refs):
            for _ in range(4):
                output = tuple(f"w{k}" for k in rng.integers(0, 6, rng.integers(3, 7)))
                pool.add_candidate(index, output, rng.normal(size=DIMS))
        start = WeightVector.from_array(rng.uniform(-1.0, 1.0, DIMS))
        weights, best = optimize_pool(pool, start, restarts=2, rng=rng)
        assert best >= pool.bleu(start.as_array()) - 1e-9
        assert pool.bleu(weights.as_array()) == pytest.approx(best)


def _fixed_decoder(rng):
    nbests = [
        [
            Derivation(src, output, 0.0, tuple(features))
            for output, features in _candidates(ref, rng)
        ]
        for src, ref in zip(REFS, REFS)
    ]

    def decode_fn(sentences, weights):
        assert len(sentences) == len(REFS)
        return nbests

    return decode_fn


def test_tune_with_stub_decoder(mocker):
    decode_fn = mocker.Mock(side_effect=_fixed_decoder(np.random.default_rng(61)))
    dev = [(ref, ref) for ref in REFS]
    result = tune(
        dev, None, None, WeightVector(lm=-1.0), restarts=2, iterations=5, decode_fn=decode_fn
    )
    assert result.bleu == pytest.approx(100.0)
    assert result.weights.lm > 0.0
    # the second pass adds nothing new, which ends tuning
    assert decode_fn.call_count == 2
    assert [record.iteration for record in result.history] == [1, 2]
    for record in result.history:
        assert record.bleu_after >= record.bleu_before - 1e-9


def test_tune_is_deterministic():
    dev = [(ref, ref) for ref in REFS]
    results = []
    for _ in range(2):
        decode_fn = _fixed_decoder(np.random.default_rng(67))
        results.append(
            tune(dev, None, None, WeightVector(lm=-1.0), restarts=3, seed=5, decode_fn=decode_fn)
        )
    assert results[0].weights == results[1].weights


def _ranking_decoder(rng, refs, size=40, k=3):
    """Top ``k`` of a fixed random candidate list per sentence under the given weights."""
    lists = []
    for ref in refs:
        candidates = []
        for _ in range(size):
            length = int(rng.integers(2, len(ref) + 2))
            output = tuple(
                ref[int(rng.integers(len(ref)))] if rng.random() < 0.7 else "zzz"
                for _ in range(length)
            )
            candidates.append(Derivation(ref, output, 0.0, tuple(rng.normal(size=DIMS))))
        lists.append(candidates)

    def decode_fn(sentences, weights):
        w = weights.as_array()
        return [
            sorted(candidates, key=lambda d: -float(np.dot(w, d.features)))[:k]
            for candidates in lists
        ]

    return decode_fn


def test_tune_bleu_never_drops_across_iterations():
    dev = [(ref, ref) for ref in REFS]
    for seed in range(20):
        decode_fn = _ranking_decoder(np.random.default_rng(100 + seed), REFS)
        result = tune(
            dev, None, None, WeightVector(), restarts=1, iterations=8, seed=seed, decode_fn=decode_fn
        )
        after = [record.bleu_after for record in result.history]
        assert all(b >= a - 1e-9 for a, b in zip(after, after[1:])), (seed, after)
        assert after[-1] >= result.history[0].bleu_before - 1e-9
        assert result.bleu == after[-1]


def test_tune_errors():
    with pytest.raises(TrainingError):
        tune([], None, None, WeightVector())
    with pytest.raises(TrainingError):
        tune([(("a",), ())], None, None, WeightVector())
    with pytest.raises(ValueError):
        tune([(("a",), ("a",))], None, None, WeightVector())
