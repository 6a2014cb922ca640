"""(c) 2025, hybrid-sape authors.

Statistical word aligner: IBM Model 1 trained with EM in both directions,
Viterbi alignments per direction and grow-diag-final-and symmetrization.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from tqdm import tqdm

from app.config.logging_config import setup_logger
from app.services.edit_aligner import STATISTICAL, Alignment, Link
from app.utils.errors import CorpusError, TrainingError
from app.utils.helpers import write_lines

logger = setup_logger(__name__)

NULL = "<NULL>"
# Real links need at least this translation probability
NULL_FLOOR = 1e-4

FORWARD = "forward"
REVERSE = "reverse"

Pair = Tuple[Sequence[str], Sequence[str]]

# Moore neighbourhood
NEIGHBOURS = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


@dataclass
class TranslationTable:
    """t(target | source), NULL included as a source token."""

    probs: Dict[Tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        self._rows: Dict[str, Dict[str, float]] = defaultdict(dict)
        for (src, tgt), p in self.probs.items():
            self._rows[src][tgt] = p

    def prob(self, src: str, tgt: str) -> float:
        return self._rows.get(src, {}).get(tgt, 0.0)

    def row(self, src: str) -> Dict[str, float]:
        return self._rows.get(src, {})

    def sources(self) -> List[str]:
        return sorted(self._rows)

    def save(self, path: str) -> None:
        """``src<TAB>tgt<TAB>prob`` lines, sorted, 10 significant digits."""
        write_lines(
            path, (f"{s}\t{t}\t{p:.10g}" for (s, t), p in sorted(self.probs.items()))
        )

    @classmethod
    def load(cls, path: str) -> "TranslationTable":
        probs: Dict[Tuple[str, str], float] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise CorpusError(f"{path}:{lineno}: expected 'src<TAB>tgt<TAB>prob'")
                probs[(parts[0], parts[1])] = float(parts[2])
        return cls(probs)


@dataclass(frozen=True)
class DirectionalAlignment:
    """Links (i, j) over (src, tgt) positions, from one training direction."""

    links: frozenset
    direction: str = FORWARD

    def pairs(self) -> List[Link]:
        return sorted(self.links)


def train_em(
    corpus: Sequence[Pair], iterations: int = 5, progress: bool = False
) -> TranslationTable:
    """IBM Model 1 EM with a NULL source token prepended to every sentence."""
    if not corpus:
        raise TrainingError("cannot train a translation table on an empty corpus")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    bitext = [((NULL,) + tuple(src), tuple(tgt)) for src, tgt in corpus]

    # Uniform initialization over co-occurring pairs
    cooc: Dict[str, Set[str]] = defaultdict(set)
    for src, tgt in bitext:
        for s in src:
            cooc[s].update(tgt)
    t: Dict[str, Dict[str, float]] = {
        s: {w: 1.0 / len(targets) for w in targets} for s, targets in cooc.items() if targets
    }

    for it in tqdm(range(iterations), unit="iter", disable=not progress):
        counts: Dict[str, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
        for src, tgt in bitext:
            for w in tgt:
                norm = sum(t[s][w] for s in src)
                if norm <= 0.0:
                    continue
                for s in src:
                    counts[s][w] += t[s][w] / norm
        for s, row in counts.items():
            total = sum(row.values())
            t[s] = {w: c / total for w, c in row.items()}
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"EM iteration {it + 1}: log-likelihood {_log_likelihood(t, bitext):.4f}")

    return TranslationTable({(s, w): p for s, row in t.items() for w, p in row.items()})


def _log_likelihood(t: Dict[str, Dict[str, float]], bitext) -> float:
    total = 0.0
    for src, tgt in bitext:
        for w in tgt:
            p = sum(t.get(s, {}).get(w, 0.0) for s in src) / len(src)
            total += math.log(p) if p > 0 else float("-inf")
    return total


def log_likelihood(tt: TranslationTable, corpus: Sequence[Pair]) -> float:
    """Corpus log-likelihood under Model 1 (uniform alignment prior)."""
    bitext = [((NULL,) + tuple(src), tuple(tgt)) for src, tgt in corpus]
    return _log_likelihood(tt._rows, bitext)


def viterbi_align(
    tt: TranslationTable,
    src: Sequence[str],
    tgt: Sequence[str],
    direction: str = FORWARD,
) -> DirectionalAlignment:
    """Each target word links to its most probable source word.

    Ties go to the smallest source index. No link is made when NULL is
    strictly more probable or the best probability is under ``NULL_FLOOR``.
    """
    links = set()
    for j, w in enumerate(tgt):
        best_i, best_p = -1, 0.0
        for i, s in enumerate(src):
            p = tt.prob(s, w)
            if p > best_p:
                best_i, best_p = i, p
        if best_i < 0 or best_p < NULL_FLOOR or tt.prob(NULL, w) > best_p:
            continue
        links.add((best_i, j))
    return DirectionalAlignment(frozenset(links), direction)


def gdfa(fwd: DirectionalAlignment, rev: DirectionalAlignment) -> Alignment:
    """Grow-diag-final-and over two directional alignments of one pair."""
    fwd_links, rev_links = set(fwd.links), set(rev.links)
    union = fwd_links | rev_links
    alignment = fwd_links & rev_links
    rows = {i for i, _ in alignment}
    cols = {j for _, j in alignment}

    def add(i: int, j: int) -> None:
        alignment.add((i, j))
        rows.add(i)
        cols.add(j)

    # grow-diag, row-major until nothing changes
    changed = True
    while changed:
        changed = False
        for i, j in sorted(alignment):
            for di, dj in NEIGHBOURS:
                cand = (i + di, j + dj)
                if cand in union and cand not in alignment and (
                    cand[0] not in rows or cand[1] not in cols
                ):
                    add(*cand)
                    changed = True

    # final-and: both endpoints must still be unaligned
    for directional in (fwd_links, rev_links):
        for i, j in sorted(directional):
            if (i, j) not in alignment and i not in rows and j not in cols:
                add(i, j)

    return Alignment.from_pairs(alignment, STATISTICAL)


@dataclass
class StatAligner:
    """Forward (mt -> pe) and reverse tables trained on the same pairs."""

    forward: TranslationTable
    reverse: TranslationTable

    @classmethod
    def train(cls, corpus: Sequence[Pair], iterations: int = 5) -> "StatAligner":
        logger.info(f"🔁 Training forward IBM-1 model on {len(corpus)} pairs")
        forward = train_em(corpus, iterations, progress=True)
        logger.info("🔁 Training reverse IBM-1 model")
        reverse = train_em([(t, s) for s, t in corpus], iterations, progress=True)
        logger.info(
            f"📈 Log-likelihood forward={log_likelihood(forward, corpus):.2f} "
            f"reverse={log_likelihood(reverse, [(t, s) for s, t in corpus]):.2f}"
        )
        return cls(forward, reverse)

    def directional(
        self, src: Sequence[str], tgt: Sequence[str]
    ) -> Tuple[DirectionalAlignment, DirectionalAlignment]:
        """Forward and reverse Viterbi links, both as (src, tgt) positions."""
        fwd = viterbi_align(self.forward, src, tgt, FORWARD)
        back = viterbi_align(self.reverse, tgt, src, REVERSE)
        return fwd, DirectionalAlignment(frozenset((i, j) for j, i in back.links), REVERSE)

    def align(self, src: Sequence[str], tgt: Sequence[str]) -> Alignment:
        return gdfa(*self.directional(src, tgt))

    def align_corpus(
        self, corpus: Iterable[Pair]
    ) -> List[Tuple[DirectionalAlignment, DirectionalAlignment, Alignment]]:
        """(forward, reverse, symmetrized) alignments of every pair."""
        pairs = list(corpus)
        result = []
        for src, tgt in tqdm(pairs, unit="pair", disable=len(pairs) < 100):
            fwd, rev = self.directional(src, tgt)
            result.append((fwd, rev, gdfa(fwd, rev)))
        return result
