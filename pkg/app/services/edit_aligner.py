"""(c) 2025, hybrid-sape authors.

METEOR-style monolingual aligner.

Links are found in three stages (exact, Porter stem, synonym). Each stage
picks a maximum matching over its candidate pairs that crosses the links
fixed by earlier stages as little as possible; the final alignment is the
union of the stage selections.
"""

import os
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from nltk.stem.porter import PorterStemmer

from app.config.logging_config import setup_logger
from app.utils.errors import CorpusError

logger = setup_logger(__name__)

STAGES: Tuple[str, ...] = ("exact", "stem", "synonym")
STATISTICAL = "statistical"

# A stage with more candidate links than this is matched greedily
EXACT_MATCH_LIMIT = 20
# Branch-and-bound expansions before settling for the best matching found so far
SEARCH_NODE_LIMIT = 200_000

Link = Tuple[int, int]

_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


class AlignmentLink(NamedTuple):
    h_index: int
    r_index: int
    stage: str = "exact"


@dataclass(frozen=True)
class Alignment:
    """A set of positional links between two token sequences."""

    links: FrozenSet[AlignmentLink] = field(default_factory=frozenset)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Link], stage: str = "exact") -> "Alignment":
        return cls(frozenset(AlignmentLink(i, j, stage) for i, j in pairs))

    def pairs(self) -> List[Link]:
        """Sorted, de-duplicated (h, r) pairs."""
        return sorted({(link.h_index, link.r_index) for link in self.links})

    def __len__(self) -> int:
        return len(self.pairs())

    def __contains__(self, pair: Link) -> bool:
        return tuple(pair) in set(self.pairs())

    def h_covered(self) -> Set[int]:
        return {link.h_index for link in self.links}

    def r_covered(self) -> Set[int]:
        return {link.r_index for link in self.links}

    def is_matching(self) -> bool:
        pairs = self.pairs()
        return len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})

    def union(self, other: "Alignment") -> "Alignment":
        return Alignment(self.links | other.links)

    def to_pharaoh(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in self.pairs())

    @classmethod
    def from_pharaoh(cls, text: str, stage: str = "exact") -> "Alignment":
        pairs = []
        for item in text.split():
            left, _, right = item.partition("-")
            pairs.append((int(left), int(right)))
        return cls.from_pairs(pairs, stage)


@dataclass
class SynonymLexicon:
    """Groups of mutually synonymous surface forms (compared lowercased)."""

    groups: List[FrozenSet[str]] = field(default_factory=list)

    def __post_init__(self):
        self.groups = [frozenset(w.lower() for w in g) for g in self.groups]
        self._index: Dict[str, Set[int]] = defaultdict(set)
        for gid, group in enumerate(self.groups):
            for word in group:
                self._index[word].add(gid)

    def __bool__(self) -> bool:
        return bool(self.groups)

    def are_synonyms(self, a: str, b: str) -> bool:
        return bool(self._index.get(a.lower(), set()) & self._index.get(b.lower(), set()))

    @classmethod
    def load(cls, path: Optional[str]) -> "SynonymLexicon":
        """One group per line, members space separated. No path, no groups."""
        if not path:
            return cls()
        if not os.path.isfile(path):
            raise CorpusError(f"synonym lexicon not found: {path}")
        with open(path, encoding="utf-8") as handle:
            groups = [frozenset(line.split()) for line in handle if len(line.split()) > 1]
        logger.info(f"📖 Loaded {len(groups)} synonym groups from {path}")
        return cls(groups)


@lru_cache(maxsize=1 << 16)
def porter_stem(word: str) -> str:
    return _STEMMER.stem(word)


def _matches(stage: str, h: str, r: str, lexicon: Optional[SynonymLexicon]) -> bool:
    if stage == "exact":
        return h == r
    if stage == "stem":
        return porter_stem(h.lower()) == porter_stem(r.lower())
    if stage == "synonym":
        return lexicon is not None and lexicon.are_synonyms(h, r)
    raise ValueError(f"unknown stage '{stage}'")


def stage_match(
    H: Sequence[str],
    R: Sequence[str],
    stage: str,
    lexicon: Optional[SynonymLexicon],
    covered_H: Set[int],
    covered_R: Set[int],
) -> Set[Link]:
    """All uncovered (i, j) whose tokens match under the stage predicate."""
    if stage == "synonym" and not lexicon:
        return set()
    return {
        (i, j)
        for i, h in enumerate(H)
        if i not in covered_H
        for j, r in enumerate(R)
        if j not in covered_R and _matches(stage, h, r, lexicon)
    }


def count_crossings(a) -> int:
    """Unordered link pairs that invert relative order."""
    pairs = a.pairs() if isinstance(a, Alignment) else sorted(set(a))
    total = 0
    for k, (i, j) in enumerate(pairs):
        for i2, j2 in pairs[k + 1 :]:
            if (i - i2) * (j - j2) < 0:
                total += 1
    return total


def _crossings_against(link: Link, others: Iterable[Link]) -> int:
    i, j = link
    return sum(1 for a, b in others if (a - i) * (b - j) < 0)


def _best_matching(candidates: Set[Link], fixed: List[Link]) -> List[Link]:
    """Maximum matching with fewest crossings, lexicographically smallest on ties.

    Rows are visited in increasing order and each row tries its columns in
    increasing order before being skipped, so solutions are reached in
    lexicographic order and only strictly better ones replace the incumbent.
    """
    by_row: Dict[int, List[int]] = defaultdict(list)
    for i, j in sorted(candidates):
        by_row[i].append(j)
    rows = sorted(by_row)
    columns = {j for _, j in candidates}
    fixed_cost = {link: _crossings_against(link, fixed) for link in candidates}

    best_links: List[Link] = []
    best_size, best_cross = -1, float("inf")
    expansions = 0

    def search(idx: int, chosen: List[Link], used: Set[int], cross: int) -> None:
        nonlocal best_links, best_size, best_cross, expansions
        expansions += 1
        if expansions > SEARCH_NODE_LIMIT:
            return
        if idx == len(rows):
            size = len(chosen)
            if size > best_size or (size == best_size and cross < best_cross):
                best_links, best_size, best_cross = list(chosen), size, cross
            return
        bound = len(chosen) + min(len(rows) - idx, len(columns) - len(used))
        if bound < best_size or (bound == best_size and cross >= best_cross):
            return
        i = rows[idx]
        for j in by_row[i]:
            if j in used:
                continue
            added = fixed_cost[(i, j)] + sum(1 for _, b in chosen if b > j)
            chosen.append((i, j))
            used.add(j)
            search(idx + 1, chosen, used, cross + added)
            used.discard(j)
            chosen.pop()
        search(idx + 1, chosen, used, cross)

    search(0, [], set(), 0)
    if expansions > SEARCH_NODE_LIMIT:
        logger.debug(f"matching search stopped after {SEARCH_NODE_LIMIT} expansions")
    return best_links


def _greedy_matching(candidates: Set[Link], fixed: List[Link]) -> List[Link]:
    """Left-to-right: each row takes its free column adding fewest crossings."""
    by_row: Dict[int, List[int]] = defaultdict(list)
    for i, j in sorted(candidates):
        by_row[i].append(j)
    chosen: List[Link] = []
    used: Set[int] = set()
    for i in sorted(by_row):
        options = [
            (_crossings_against((i, j), fixed) + _crossings_against((i, j), chosen), j)
            for j in by_row[i]
            if j not in used
        ]
        if options:
            _, j = min(options)
            chosen.append((i, j))
            used.add(j)
    return chosen


def align(
    H: Sequence[str],
    R: Sequence[str],
    lexicon: Optional[SynonymLexicon] = None,
    exact_limit: int = EXACT_MATCH_LIMIT,
) -> Alignment:
    """Align hypothesis ``H`` to reference ``R`` stage by stage."""
    fixed: List[Link] = []
    links: List[AlignmentLink] = []
    covered_H: Set[int] = set()
    covered_R: Set[int] = set()

    for stage in STAGES:
        candidates = stage_match(H, R, stage, lexicon, covered_H, covered_R)
        if not candidates:
            continue
        if len(candidates) <= exact_limit:
            chosen = _best_matching(candidates, fixed)
        else:
            chosen = _greedy_matching(candidates, fixed)
        for i, j in chosen:
            links.append(AlignmentLink(i, j, stage))
            covered_H.add(i)
            covered_R.add(j)
        fixed.extend(chosen)

    return Alignment(frozenset(links))
