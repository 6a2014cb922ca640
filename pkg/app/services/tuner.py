"""(c) 2025, hybrid-sape authors.

Minimum error rate training: coordinate ascent over the log-linear weights
with an exact line search on the pooled n-best lists of a development set.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.config.logging_config import setup_logger
from app.services.decoder import (
    DEFAULT_BEAM,
    DEFAULT_SEARCH_DEPTH,
    WEIGHT_NAMES,
    Derivation,
    WeightVector,
    decode_corpus,
)
from app.services.evaluate import MAX_ORDER, bleu_from_stats, bleu_stats
from app.services.ngram_lm import NGramLM
from app.services.rule_extract import RuleTable
from app.utils.errors import TrainingError

logger = setup_logger(__name__)

# Stop when an iteration gains less BLEU than this
MIN_GAIN = 0.01
# Line-search improvements smaller than this are ignored
EPSILON = 1e-9
MAX_COORDINATE_ROUNDS = 50

DecodeFn = Callable[[Sequence[Sequence[str]], WeightVector], List[List[Derivation]]]


@dataclass
class _SentencePool:
    outputs: List[Tuple[str, ...]] = field(default_factory=list)
    features: List[np.ndarray] = field(default_factory=list)
    stats: List[np.ndarray] = field(default_factory=list)
    _seen: set = field(default_factory=set)

    def add(self, output: Tuple[str, ...], features: Sequence[float], ref: Sequence[str]) -> bool:
        key = (tuple(output), tuple(round(f, 9) for f in features))
        if key in self._seen:
            return False
        self._seen.add(key)
        self.outputs.append(tuple(output))
        self.features.append(np.asarray(features, dtype=float))
        self.stats.append(bleu_stats(output, ref))
        return True

    def matrices(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.vstack(self.features), np.vstack(self.stats)


class NBestPool:
    """Accumulated candidates per development sentence with their BLEU statistics."""

    def __init__(self, refs: Sequence[Sequence[str]]):
        self.refs = [tuple(r) for r in refs]
        self.sentences = [_SentencePool() for _ in self.refs]
        self._cache: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None

    def __len__(self) -> int:
        return sum(len(s.outputs) for s in self.sentences)

    def add(self, nbests: Sequence[Sequence[Derivation]]) -> int:
        """Merge one n-best list per sentence; returns how many candidates were new."""
        if len(nbests) != len(self.refs):
            raise ValueError(f"{len(nbests)} n-best lists for {len(self.refs)} sentences")
        added = 0
        for pool, ref, derivations in zip(self.sentences, self.refs, nbests):
            for d in derivations:
                added += pool.add(d.output, d.features, ref)
        self._cache = None
        return added

    def add_candidate(self, index: int, output: Sequence[str], features: Sequence[float]) -> bool:
        self._cache = None
        return self.sentences[index].add(tuple(output), features, self.refs[index])

    def matrices(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        if self._cache is None:
            if any(not s.outputs for s in self.sentences):
                raise ValueError("every sentence needs at least one candidate")
            self._cache = [s.matrices() for s in self.sentences]
        return self._cache

    def argmax(self, weights: np.ndarray) -> List[int]:
        return [int(np.argmax(features @ weights)) for features, _ in self.matrices()]

    def bleu(self, weights: np.ndarray) -> float:
        """Corpus BLEU of the best-scoring candidate of every sentence."""
        total = np.zeros(2 * MAX_ORDER + 2)
        for (_, stats), best in zip(self.matrices(), self.argmax(weights)):
            total += stats[best]
        return bleu_from_stats(total)


def _envelope(a: np.ndarray, b: np.ndarray) -> List[Tuple[float, int]]:
    """Upper envelope of lines ``a + gamma * b`` as (gamma start, candidate) pieces."""
    order = sorted(range(len(a)), key=lambda c: (b[c], a[c], -c))
    hull: List[Tuple[float, int]] = []
    for c in order:
        if hull and b[hull[-1][1]] == b[c]:
            hull.pop()
        while hull:
            start, top = hull[-1]
            x = (a[top] - a[c]) / (b[c] - b[top])
            if x <= start:
                hull.pop()
            else:
                break
        if hull:
            top = hull[-1][1]
            hull.append(((a[top] - a[c]) / (b[c] - b[top]), c))
        else:
            hull.append((-np.inf, c))
    return hull


def line_search(
    pool: NBestPool, weights: np.ndarray, direction: np.ndarray
) -> Tuple[float, float]:
    """Step ``gamma`` along ``direction`` maximizing pooled BLEU, and that BLEU.

    Each sentence's best candidate changes only where two candidate score
    lines cross, so BLEU is piecewise constant in ``gamma``. Among equally
    good intervals the one closest to zero wins.
    """
    total = np.zeros(2 * MAX_ORDER + 2)
    events: List[Tuple[float, int, int, int]] = []
    for s, (features, stats) in enumerate(pool.matrices()):
        hull = _envelope(features @ weights, features @ direction)
        total += stats[hull[0][1]]
        for (x, c), (_, previous) in zip(hull[1:], hull):
            events.append((x, s, previous, c))
    events.sort()
    if not events:
        return 0.0, bleu_from_stats(total)

    matrices = pool.matrices()
    thresholds = sorted({e[0] for e in events})
    candidates = [(bleu_from_stats(total), thresholds[0] - 1.0)]
    k = 0
    for t_index, x in enumerate(thresholds):
        while k < len(events) and events[k][0] == x:
            _, s, previous, c = events[k]
            stats = matrices[s][1]
            total += stats[c] - stats[previous]
            k += 1
        upper = thresholds[t_index + 1] if t_index + 1 < len(thresholds) else x + 2.0
        candidates.append((bleu_from_stats(total), (x + upper) / 2.0))
    best_bleu = max(b for b, _ in candidates)
    gamma = min((g for b, g in candidates if b >= best_bleu - EPSILON), key=abs)
    return float(gamma), best_bleu


def _coordinate_ascent(pool: NBestPool, start: np.ndarray) -> Tuple[np.ndarray, float]:
    weights = start.copy()
    best = pool.bleu(weights)
    for _ in range(MAX_COORDINATE_ROUNDS):
        improved = False
        for dim in range(len(weights)):
            direction = np.zeros_like(weights)
            direction[dim] = 1.0
            gamma, score = line_search(pool, weights, direction)
            if score > best + EPSILON:
                weights = weights + gamma * direction
                best = pool.bleu(weights)
                improved = True
        if not improved:
            break
    return weights, best


def optimize_pool(
    pool: NBestPool,
    start: WeightVector,
    restarts: int = 5,
    rng: Optional[np.random.Generator] = None,
    extra_starts: Sequence[WeightVector] = (),
) -> Tuple[WeightVector, float]:
    """Best weights from ``start``, ``extra_starts`` and random restarts.

    A candidate only replaces the incumbent when its pooled BLEU is strictly
    higher, so the result never scores below ``start``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    starts = [start.as_array()] + [w.as_array() for w in extra_starts]
    starts += [rng.uniform(-1.0, 1.0, len(WEIGHT_NAMES)) for _ in range(restarts)]

    best_weights, best_bleu = starts[0], pool.bleu(starts[0])
    for point in starts:
        weights, score = _coordinate_ascent(pool, point)
        if score > best_bleu + EPSILON:
            best_weights, best_bleu = weights, score
    return WeightVector.from_array(best_weights), best_bleu


@dataclass
class IterationRecord:
    iteration: int
    pool_size: int
    bleu_before: float
    bleu_after: float


@dataclass
class TuneResult:
    weights: WeightVector
    bleu: float
    history: List[IterationRecord] = field(default_factory=list)


def tune(
    dev: Sequence[Tuple[Sequence[str], Sequence[str]]],
    grammar: Optional[RuleTable],
    lm: Optional[NGramLM],
    w0: WeightVector,
    nbest: int = 100,
    restarts: int = 5,
    iterations: int = 10,
    seed: int = 0,
    beam: int = DEFAULT_BEAM,
    search_depth: int = DEFAULT_SEARCH_DEPTH,
    threads: int = 1,
    decode_fn: Optional[DecodeFn] = None,
) -> TuneResult:
    """MERT on ``dev`` (mt, pe) pairs starting from ``w0``.

    ``decode_fn(sentences, weights)`` returns one n-best list per sentence;
    by default the chart decoder is used with ``grammar`` and ``lm``.
    """
    if not dev:
        raise TrainingError("cannot tune on an empty development set")
    refs = [tuple(pe) for _, pe in dev]
    if all(not r for r in refs):
        raise TrainingError("development references are all empty")
    if decode_fn is None:
        if grammar is None or lm is None:
            raise ValueError("a grammar and a language model are required to decode")

        def decode_fn(sentences, weights):
            return decode_corpus(
                sentences, grammar, lm, weights, beam, search_depth, nbest, threads
            )

    rng = np.random.default_rng(seed)
    sources = [tuple(mt) for mt, _ in dev]
    pool = NBestPool(refs)
    best_weights, best_bleu = w0, -np.inf
    visited: List[WeightVector] = [w0]
    history: List[IterationRecord] = []

    # A grown pool can score every optimum lower than before; the best
    # weights are only replaced by a strictly higher pooled BLEU.
    for it in range(1, iterations + 1):
        added = pool.add(decode_fn(sources, best_weights))
        before = pool.bleu(best_weights.as_array())
        weights, after = optimize_pool(pool, best_weights, restarts, rng, visited)
        visited.append(weights)
        previous = best_bleu
        if after > best_bleu + EPSILON:
            best_weights, best_bleu = weights, after
        history.append(IterationRecord(it, len(pool), before, best_bleu))
        logger.info(
            f"🎯 MERT iteration {it}: pool {len(pool)} candidates, "
            f"BLEU {before:.2f} -> {best_bleu:.2f}"
        )
        if added == 0 or best_bleu - previous < MIN_GAIN:
            break

    logger.info(
        f"✅ Tuning finished after {len(history)} iterations, pooled BLEU {best_bleu:.2f}"
    )
    return TuneResult(best_weights, best_bleu, history)
