"""(c) 2025, hybrid-sape authors.

Katz back-off n-gram language model with Good-Turing discounts, stored and
read in ARPA format. Probabilities are log10 internally.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from nltk.probability import FreqDist
from nltk.util import ngrams
from tqdm import tqdm

from app.config.logging_config import setup_logger
from app.utils.errors import ModelError, TrainingError
from app.utils.helpers import write_lines

logger = setup_logger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
# log10 stand-in for probability zero, as in ARPA files
LOG_ZERO = -99.0
# Counts up to this value are discounted
DISCOUNT_MAX = 5
LOG10_TO_LN = math.log(10.0)

NGram = Tuple[str, ...]
State = Tuple[str, ...]


def katz_discounts(count_of_counts: Dict[int, int], k: int = DISCOUNT_MAX) -> Dict[int, float]:
    """Good-Turing discount ratios ``d_r`` for counts ``1..k``.

    A ratio that comes out undefined or outside (0, 1] is replaced by 1,
    which leaves that count undiscounted.
    """
    discounts = {}
    n1 = count_of_counts.get(1, 0)
    common = (k + 1) * count_of_counts.get(k + 1, 0) / n1 if n1 else 0.0
    for r in range(1, k + 1):
        n_r, n_next = count_of_counts.get(r, 0), count_of_counts.get(r + 1, 0)
        d = 1.0
        if n1 and n_r and n_next and common < 1.0:
            r_star = (r + 1) * n_next / n_r
            candidate = (r_star / r - common) / (1.0 - common)
            if 0.0 < candidate <= 1.0:
                d = candidate
        discounts[r] = d
    return discounts


def _to_log10(p: float) -> float:
    return math.log10(p) if p > 0.0 else LOG_ZERO


@dataclass
class NGramLM:
    """Back-off model: log10 probabilities and back-off weights per n-gram."""

    order: int
    probs: Dict[NGram, float] = field(default_factory=dict)
    bows: Dict[NGram, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        self._vocab = frozenset(g[0] for g in self.probs if len(g) == 1)

    @property
    def vocab(self) -> frozenset:
        return self._vocab

    def map_word(self, word: str) -> str:
        return word if word in self._vocab else UNK

    def initial_state(self) -> State:
        return (BOS,)[: self.order - 1] if self.order > 1 else ()

    def logprob(self, context: Sequence[str], word: str) -> float:
        """log10 P(word | context) with back-off; the word must be mapped."""
        context = tuple(context)[-(self.order - 1) :] if self.order > 1 else ()
        total = 0.0
        while True:
            ngram = context + (word,)
            if ngram in self.probs:
                return total + self.probs[ngram]
            if not context:
                return total + LOG_ZERO
            total += self.bows.get(context, 0.0)
            context = context[1:]

    def ngram_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = defaultdict(int)
        for gram in self.probs:
            counts[len(gram)] += 1
        return dict(counts)

    def write_arpa(self, path: str) -> None:
        write_lines(path, self.arpa_lines())

    def arpa_lines(self) -> List[str]:
        counts = self.ngram_counts()
        lines = ["", "\\data\\"]
        lines += [f"ngram {k}={counts.get(k, 0)}" for k in range(1, self.order + 1)]
        for k in range(1, self.order + 1):
            lines += ["", f"\\{k}-grams:"]
            for gram in sorted(g for g in self.probs if len(g) == k):
                row = f"{self.probs[gram]:.10f}\t{' '.join(gram)}"
                if k < self.order:
                    row += f"\t{self.bows.get(gram, 0.0):.10f}"
                lines.append(row)
        lines += ["", "\\end\\"]
        return lines


def train_lm(corpus: Sequence[Sequence[str]], order: int = 5) -> NGramLM:
    """Estimate a Katz back-off model from tokenized sentences."""
    if order < 1:
        raise ValueError("order must be >= 1")
    sentences = [list(s) for s in corpus]
    if not sentences:
        raise TrainingError("cannot train a language model on an empty corpus")

    counts: Dict[int, FreqDist] = {k: FreqDist() for k in range(1, order + 1)}
    for sentence in tqdm(sentences, unit="sent", disable=len(sentences) < 1000):
        padded = [BOS] + sentence + [EOS]
        for k in range(1, order + 1):
            counts[k].update(ngrams(padded, k))
    del counts[1][(BOS,)]

    probs: Dict[NGram, float] = {}
    bows: Dict[NGram, float] = {}

    # unigrams: the discounted mass goes to <unk>
    unigrams = counts[1]
    d = katz_discounts(unigrams.r_Nr())
    total = unigrams.N()
    linear = {g: d.get(c, 1.0) * c / total for g, c in unigrams.items()}
    leftover = max(0.0, 1.0 - sum(linear.values()))
    linear[(UNK,)] = linear.get((UNK,), 0.0) + leftover
    for gram, p in linear.items():
        probs[gram] = _to_log10(p)
    probs[(BOS,)] = LOG_ZERO

    for k in range(2, order + 1):
        lm = NGramLM(k - 1, dict(probs), dict(bows))
        d = katz_discounts(counts[k].r_Nr())
        by_context: Dict[NGram, List[Tuple[str, int]]] = defaultdict(list)
        for gram, c in counts[k].items():
            by_context[gram[:-1]].append((gram[-1], c))
        for context, continuations in by_context.items():
            context_total = sum(c for _, c in continuations)
            discounted = {w: d.get(c, 1.0) * c / context_total for w, c in continuations}
            seen_mass = sum(discounted.values())
            lower_mass = sum(10.0 ** lm.logprob(context[1:], w) for w in discounted)
            numerator, denominator = 1.0 - seen_mass, 1.0 - lower_mass
            if numerator > 1e-12 and denominator <= 1e-12:
                # nothing left to back off to: spread the freed mass over the seen words
                discounted = {w: p / seen_mass for w, p in discounted.items()}
            for word, p in discounted.items():
                probs[context + (word,)] = _to_log10(p)
            if numerator <= 1e-12 or denominator <= 1e-12:
                bows[context] = LOG_ZERO
            else:
                bows[context] = math.log10(numerator / denominator)

    lm = NGramLM(order, probs, bows)
    logger.info(
        f"🧮 Trained {order}-gram LM on {len(sentences)} sentences, "
        f"vocabulary {len(lm.vocab)}"
    )
    return lm


def score(lm: NGramLM, s: Sequence[str]) -> float:
    """log10 probability of the sentence followed by </s>."""
    state = lm.initial_state()
    total = 0.0
    for word in list(s) + [EOS]:
        logp, state = lm_state_score(lm, state, word)
        total += logp
    return total


def lm_state_score(lm: NGramLM, state: State, word: str) -> Tuple[float, State]:
    """Score one word after ``state`` (the last order-1 words) and advance."""
    mapped = word if word == EOS else lm.map_word(word)
    logp = lm.logprob(state, mapped)
    if lm.order == 1:
        return logp, ()
    return logp, (tuple(state) + (mapped,))[-(lm.order - 1) :]


def perplexity(lm: NGramLM, sentences: Iterable[Sequence[str]]) -> float:
    total, events = 0.0, 0
    for s in sentences:
        total += score(lm, s)
        events += len(s) + 1
    if events == 0:
        raise ValueError("perplexity needs at least one sentence")
    return 10.0 ** (-total / events)


def load_arpa(path: str) -> NGramLM:
    """Read an ARPA file written by ``write_arpa`` (or any standard tool)."""
    try:
        with open(path, encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as e:
        raise ModelError(f"cannot read language model {path}: {e}", artifact=path) from e

    declared: Dict[int, int] = {}
    probs: Dict[NGram, float] = {}
    bows: Dict[NGram, float] = {}
    section: Optional[int] = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped == "\\data\\":
            continue
        if stripped == "\\end\\":
            break
        if stripped.startswith("ngram "):
            k, _, n = stripped[6:].partition("=")
            declared[int(k)] = int(n)
            continue
        if stripped.startswith("\\") and stripped.endswith("-grams:"):
            section = int(stripped[1 : -len("-grams:")])
            continue
        if section is None:
            raise ModelError(f"{path}:{lineno}: n-gram line outside a section", artifact=path)
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ModelError(f"{path}:{lineno}: malformed n-gram line", artifact=path)
        gram = tuple(parts[1].split())
        if len(gram) != section:
            raise ModelError(f"{path}:{lineno}: expected a {section}-gram", artifact=path)
        probs[gram] = float(parts[0])
        if len(parts) == 3:
            bows[gram] = float(parts[2])

    if not declared:
        raise ModelError(f"{path}: missing \\data\\ header", artifact=path)
    lm = NGramLM(max(declared), probs, bows)
    for k, n in declared.items():
        if lm.ngram_counts().get(k, 0) != n:
            raise ModelError(f"{path}: header declares {n} {k}-grams", artifact=path)
    return lm


def write_arpa(lm: NGramLM, path: str) -> None:
    lm.write_arpa(path)
    logger.info(f"💾 Wrote {lm.order}-gram LM to {path}")
