"""(c) 2025, hybrid-sape authors.

BLEU, TER and METEOR for tokenized hypothesis and reference sentences.
Scores are reported on a 0-100 scale.
"""

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from nltk.translate.bleu_score import brevity_penalty
from nltk.util import ngrams

from app.config.logging_config import setup_logger
from app.services.corpus import lowercase, read_sentences
from app.services.edit_aligner import SynonymLexicon, align
from app.utils.errors import CorpusError
from app.utils.helpers import parallel_map

logger = setup_logger(__name__)

MAX_ORDER = 4
# Sentences up to this length get an exhaustive shift search
TER_EXACT_LIMIT = 7
# Longer ones keep this many states per shift depth
TER_BEAM = 10

Tokens = Sequence[str]


def bleu_stats(hyp: Tokens, ref: Tokens, max_n: int = MAX_ORDER) -> np.ndarray:
    """Clipped n-gram matches and totals per order, then hyp and ref lengths."""
    hyp, ref = list(hyp), list(ref)
    stats = np.zeros(2 * max_n + 2)
    for n in range(1, max_n + 1):
        hyp_counts = Counter(ngrams(hyp, n))
        ref_counts = Counter(ngrams(ref, n))
        stats[2 * (n - 1)] = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        stats[2 * (n - 1) + 1] = sum(hyp_counts.values())
    stats[-2], stats[-1] = len(hyp), len(ref)
    return stats


def bleu_from_stats(stats: np.ndarray, max_n: int = MAX_ORDER, smooth: bool = False) -> float:
    """BLEU x 100. With ``smooth`` orders above one get add-one counts."""
    matches = np.array(stats[0 : 2 * max_n : 2], dtype=float)
    totals = np.array(stats[1 : 2 * max_n : 2], dtype=float)
    if smooth:
        matches[1:] += 1.0
        totals[1:] += 1.0
    if np.any(totals <= 0) or np.any(matches <= 0):
        return 0.0
    log_precision = float(np.mean(np.log(matches / totals)))
    bp = brevity_penalty(int(stats[-1]), int(stats[-2]))
    return 100.0 * bp * math.exp(log_precision)


def _check_lengths(hyps: Sequence, refs: Sequence) -> None:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} references")


def bleu(hyps: Sequence[Tokens], refs: Sequence[Tokens]) -> float:
    """Corpus BLEU without smoothing."""
    _check_lengths(hyps, refs)
    total = np.zeros(2 * MAX_ORDER + 2)
    for hyp, ref in zip(hyps, refs):
        total += bleu_stats(hyp, ref)
    return bleu_from_stats(total)


def sentence_bleu(hyp: Tokens, ref: Tokens) -> float:
    return bleu_from_stats(bleu_stats(hyp, ref), smooth=True)


def edit_distance(a: Tokens, b: Tokens) -> int:
    """Word-level Levenshtein distance."""
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y))
        previous = current
    return previous[-1]


def _shifts(hyp: Tuple[str, ...], ref: Tuple[str, ...]):
    """Block moves whose block matches ``ref`` where it lands and not where it was."""
    n = len(hyp)
    for start in range(n):
        for end in range(start + 1, n + 1):
            block = hyp[start:end]
            if ref[start:end] == block:
                continue
            rest = hyp[:start] + hyp[end:]
            for dest in range(len(rest) + 1):
                if dest == start:
                    continue
                if ref[dest : dest + len(block)] == block:
                    yield rest[:dest] + block + rest[dest:]


def _exact_ter_edits(hyp: Tuple[str, ...], ref: Tuple[str, ...]) -> int:
    best = edit_distance(hyp, ref)
    seen = {hyp}
    queue = deque([(hyp, 0)])
    while queue:
        state, depth = queue.popleft()
        if depth + 1 >= best:
            continue
        for shifted in _shifts(state, ref):
            if shifted in seen:
                continue
            seen.add(shifted)
            best = min(best, depth + 1 + edit_distance(shifted, ref))
            queue.append((shifted, depth + 1))
    return best


def _beam_ter_edits(hyp: Tuple[str, ...], ref: Tuple[str, ...], beam: int = TER_BEAM) -> int:
    """Shift search keeping the ``beam`` cheapest states per depth.

    Shifts that leave the total unchanged stay in the beam.
    """
    best = edit_distance(hyp, ref)
    seen = {hyp}
    frontier = [hyp]
    depth = 0
    while frontier:
        depth += 1
        if depth >= best:
            break
        expanded = []
        for state in frontier:
            for shifted in _shifts(state, ref):
                if shifted in seen:
                    continue
                seen.add(shifted)
                cost = depth + edit_distance(shifted, ref)
                if cost <= best:
                    expanded.append((cost, shifted))
        expanded.sort()
        frontier = [state for _, state in expanded[:beam]]
        if expanded:
            best = expanded[0][0]
    return best


def ter_edits(hyp: Tokens, ref: Tokens) -> int:
    """Fewest insertions, deletions, substitutions and block shifts."""
    hyp, ref = tuple(hyp), tuple(ref)
    if max(len(hyp), len(ref)) <= TER_EXACT_LIMIT:
        return _exact_ter_edits(hyp, ref)
    return _beam_ter_edits(hyp, ref)


def ter(hyp: Tokens, ref: Tokens) -> float:
    """Edit rate: edits divided by the reference length."""
    if not ref:
        raise ValueError("TER needs a non-empty reference")
    return ter_edits(hyp, ref) / len(ref)


def _chunks(pairs: List[Tuple[int, int]]) -> int:
    chunks = 0
    previous = None
    for i, j in sorted(pairs):
        if previous is None or (i, j) != (previous[0] + 1, previous[1] + 1):
            chunks += 1
        previous = (i, j)
    return chunks


def meteor_stats(
    hyp: Tokens, ref: Tokens, lexicon: Optional[SynonymLexicon] = None
) -> Tuple[int, int, int, int]:
    """(matches, hyp length, ref length, chunks) from the lowercased alignment."""
    pairs = align(lowercase(hyp).tokens, lowercase(ref).tokens, lexicon).pairs()
    return len(pairs), len(hyp), len(ref), _chunks(pairs)


def meteor_from_stats(matches: int, hyp_len: int, ref_len: int, chunks: int) -> float:
    if matches == 0:
        return 0.0
    precision, recall = matches / hyp_len, matches / ref_len
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return 100.0 * fmean * (1.0 - penalty)


def meteor_score(hyp: Tokens, ref: Tokens, lexicon: Optional[SynonymLexicon] = None) -> float:
    return meteor_from_stats(*meteor_stats(hyp, ref, lexicon))


@dataclass
class SentenceScores:
    bleu: float
    meteor: float
    ter_edits: int
    ref_len: int


@dataclass
class EvalReport:
    """Corpus scores in the column order BLEU, METEOR, TER."""

    bleu: float
    meteor: float
    ter: float
    sentences: List[SentenceScores] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.bleu <= 100.0 + 1e-9 or not 0.0 <= self.meteor <= 100.0 + 1e-9:
            raise ValueError("bleu and meteor must lie in [0, 100]")
        if self.ter < 0.0:
            raise ValueError("ter must be >= 0")

    def render(self) -> str:
        return f"BLEU={self.bleu:.2f} METEOR={self.meteor:.2f} TER={self.ter:.2f}"

    def relative_to(self, baseline: "EvalReport") -> Dict[str, float]:
        """Relative improvement over ``baseline`` in percent; TER counts reductions."""

        def gain(difference: float, old: float) -> float:
            return 100.0 * difference / old if old else 0.0

        return {
            "bleu": gain(self.bleu - baseline.bleu, baseline.bleu),
            "meteor": gain(self.meteor - baseline.meteor, baseline.meteor),
            "ter": gain(baseline.ter - self.ter, baseline.ter),
        }


def _sentence_job(job):
    hyp, ref, lexicon = job
    return (
        bleu_stats(hyp, ref),
        meteor_stats(hyp, ref, lexicon),
        ter_edits(hyp, ref),
    )


def evaluate(
    hyps: Sequence[Tokens],
    refs: Sequence[Tokens],
    lexicon: Optional[SynonymLexicon] = None,
    threads: int = 1,
) -> EvalReport:
    """Corpus BLEU, METEOR from pooled statistics and TER as total edits over total ref length."""
    _check_lengths(hyps, refs)
    ref_total = sum(len(r) for r in refs)
    if ref_total == 0:
        raise ValueError("references are all empty")
    jobs = [(tuple(h), tuple(r), lexicon) for h, r in zip(hyps, refs)]
    results = parallel_map(_sentence_job, jobs, threads)

    bleu_total = np.zeros(2 * MAX_ORDER + 2)
    meteor_total = np.zeros(4, dtype=int)
    edits = 0
    sentences = []
    for (hyp, ref, _), (b, m, e) in zip(jobs, results):
        bleu_total += b
        meteor_total += np.array(m)
        edits += e
        sentences.append(
            SentenceScores(bleu_from_stats(b, smooth=True), meteor_from_stats(*m), e, len(ref))
        )
    return EvalReport(
        bleu=bleu_from_stats(bleu_total),
        meteor=meteor_from_stats(*(int(v) for v in meteor_total)),
        ter=100.0 * edits / ref_total,
        sentences=sentences,
    )


def evaluate_files(
    hyp_path: str, ref_path: str, lexicon: Optional[SynonymLexicon] = None, threads: int = 1
) -> EvalReport:
    hyps, refs = read_sentences(hyp_path), read_sentences(ref_path)
    if len(hyps) != len(refs):
        raise CorpusError(
            f"line count mismatch: {hyp_path} has {len(hyps)} lines, {ref_path} has {len(refs)}"
        )
    report = evaluate(hyps, refs, lexicon, threads)
    logger.info(f"📏 {hyp_path}: {report.render()}")
    return report
