"""(c) 2025, hybrid-sape authors.

Phrase pair and hierarchical rule extraction from aligned (mt, pe) pairs,
rule feature estimation and Good-Turing smoothing of the rule counts.

Inside a rule side, nonterminals are the integers 1 and 2 and terminals are
strings. On disk they are written as ``[X,1]`` and ``[X,2]``.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from nltk.probability import FreqDist
from tqdm import tqdm

from app.config.logging_config import setup_logger
from app.services.edit_aligner import Alignment
from app.services.stat_aligner import NULL, TranslationTable
from app.utils.errors import AlignmentError, ModelError
from app.utils.helpers import parallel_map, read_gzip_lines, write_gzip_lines

logger = setup_logger(__name__)

MAX_PHRASE_LEN = 7
MAX_RULE_SYMBOLS = 5
MAX_NONTERMINALS = 2
PHRASE_PENALTY = math.exp(-1)
# Lexical probabilities never drop below this
LEX_FLOOR = 1e-7

FEATURE_NAMES = (
    "p_src_given_tgt",
    "p_tgt_given_src",
    "lex_src_given_tgt",
    "lex_tgt_given_src",
    "phrase_penalty",
)

Symbol = Union[str, int]
Span = Tuple[int, int]
Link = Tuple[int, int]
RuleKey = Tuple[Tuple[Symbol, ...], Tuple[Symbol, ...]]


@dataclass(frozen=True)
class PhrasePair:
    """Inclusive token spans of an alignment-consistent phrase pair."""

    mt_span: Span
    pe_span: Span
    mt_tokens: Tuple[str, ...]
    pe_tokens: Tuple[str, ...]
    count: int = 1

    def contains(self, other: "PhrasePair") -> bool:
        return (
            self.mt_span[0] <= other.mt_span[0]
            and other.mt_span[1] <= self.mt_span[1]
            and self.pe_span[0] <= other.pe_span[0]
            and other.pe_span[1] <= self.pe_span[1]
            and (self.mt_span, self.pe_span) != (other.mt_span, other.pe_span)
        )


@dataclass(frozen=True)
class FeatureVector:
    """Rule probabilities; ``log_values`` gives their natural logs."""

    p_src_given_tgt: float
    p_tgt_given_src: float
    lex_src_given_tgt: float
    lex_tgt_given_src: float
    phrase_penalty: float = PHRASE_PENALTY
    log_values: Tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = self.as_tuple()
        for name, value in zip(FEATURE_NAMES, values):
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if not math.isclose(self.phrase_penalty, PHRASE_PENALTY):
            raise ValueError("phrase_penalty must be exp(-1)")
        object.__setattr__(self, "log_values", tuple(math.log(v) for v in values))

    def as_tuple(self) -> Tuple[float, ...]:
        return (
            self.p_src_given_tgt,
            self.p_tgt_given_src,
            self.lex_src_given_tgt,
            self.lex_tgt_given_src,
            self.phrase_penalty,
        )

    @classmethod
    def from_logs(cls, logs: Sequence[float]) -> "FeatureVector":
        if len(logs) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {len(logs)}")
        return cls(*(min(1.0, math.exp(v)) for v in logs))


@dataclass(frozen=True)
class SCFGRule:
    """``lhs -> <source, target>`` with co-indexed nonterminals."""

    lhs: str
    source: Tuple[Symbol, ...]
    target: Tuple[Symbol, ...]
    links: Tuple[Link, ...] = ()
    features: Optional[FeatureVector] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        object.__setattr__(self, "links", tuple(sorted(self.links)))
        if self.lhs not in ("X", "S"):
            raise ValueError(f"unknown nonterminal '{self.lhs}'")
        src_nts = [s for s in self.source if isinstance(s, int)]
        tgt_nts = [s for s in self.target if isinstance(s, int)]
        if len(src_nts) > MAX_NONTERMINALS:
            raise ValueError(f"at most {MAX_NONTERMINALS} nonterminals per rule")
        if sorted(src_nts) != sorted(tgt_nts) or len(set(src_nts)) != len(src_nts):
            raise ValueError("nonterminals must correspond one to one across sides")
        if self.lhs == "X" and not any(isinstance(s, str) for s in self.source):
            raise ValueError("X rules need at least one source terminal")

    @property
    def key(self) -> RuleKey:
        return (self.source, self.target)

    @property
    def arity(self) -> int:
        return sum(1 for s in self.source if isinstance(s, int))

    def terminals(self) -> Tuple[str, ...]:
        return tuple(s for s in self.source if isinstance(s, str))

    def render(self) -> str:
        feats = self.features.log_values if self.features else ()
        return " ||| ".join(
            (
                render_side(self.source),
                render_side(self.target),
                " ".join(f"{v:.10g}" for v in feats),
                " ".join(f"{i}-{j}" for i, j in self.links),
            )
        )

    @classmethod
    def parse(cls, line: str) -> "SCFGRule":
        parts = line.split(" ||| ")
        if len(parts) != 4:
            raise ValueError("expected 'source ||| target ||| features ||| links'")
        links = []
        for item in parts[3].split():
            left, _, right = item.partition("-")
            links.append((int(left), int(right)))
        return cls(
            "X",
            parse_side(parts[0]),
            parse_side(parts[1]),
            tuple(links),
            FeatureVector.from_logs([float(v) for v in parts[2].split()]),
        )


def render_side(side: Sequence[Symbol]) -> str:
    return " ".join(f"[X,{s}]" if isinstance(s, int) else s for s in side)


def parse_side(text: str) -> Tuple[Symbol, ...]:
    symbols: List[Symbol] = []
    for item in text.split():
        if item.startswith("[X,") and item.endswith("]") and item[3:-1].isdigit():
            symbols.append(int(item[3:-1]))
        else:
            symbols.append(item)
    return tuple(symbols)


# Glue rules: S -> <X1, X1> and S -> <S1 X2, S1 X2>
GLUE_START = SCFGRule("S", (1,), (1,))
GLUE_CONCAT = SCFGRule("S", (1, 2), (1, 2))


def _check_links(links: Sequence[Link], n: int, m: int) -> None:
    for i, j in links:
        if not (0 <= i < n and 0 <= j < m):
            raise AlignmentError(f"link {i}-{j} out of range for a {n}x{m} sentence pair")


def _link_pairs(a: Union[Alignment, Iterable[Link]]) -> List[Link]:
    return a.pairs() if isinstance(a, Alignment) else sorted(set(a))


def extract_phrases(
    mt: Sequence[str],
    pe: Sequence[str],
    a: Union[Alignment, Iterable[Link]],
    max_len: int = MAX_PHRASE_LEN,
) -> Set[PhrasePair]:
    """All alignment-consistent phrase pairs with both sides up to ``max_len``.

    A pair needs at least one link inside it and no link leaving either
    span. Unaligned pe words at the boundaries extend the pe side.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    mt, pe = tuple(mt), tuple(pe)
    n, m = len(mt), len(pe)
    links = _link_pairs(a)
    _check_links(links, n, m)
    pe_aligned = {j for _, j in links}

    phrases: Set[PhrasePair] = set()
    for s in range(n):
        for e in range(s, min(s + max_len, n)):
            js = [j for i, j in links if s <= i <= e]
            if not js:
                continue
            fs, fe = min(js), max(js)
            if fe - fs + 1 > max_len:
                continue
            if any(fs <= j <= fe and not s <= i <= e for i, j in links):
                continue
            start = fs
            while True:
                end = fe
                while end - start + 1 <= max_len:
                    phrases.add(
                        PhrasePair((s, e), (start, end), mt[s : e + 1], pe[start : end + 1])
                    )
                    end += 1
                    if end >= m or end in pe_aligned:
                        break
                start -= 1
                if start < 0 or start in pe_aligned:
                    break
    return phrases


def _make_rule(
    phrase: PhrasePair,
    subs: Sequence[PhrasePair],
    mt: Sequence[str],
    pe: Sequence[str],
    links: Sequence[Link],
    max_symbols: int,
) -> Optional[SCFGRule]:
    """Replace ``subs`` inside ``phrase`` by nonterminals numbered in source order."""
    subs = sorted(subs, key=lambda q: q.mt_span)

    def side(span: Span, sub_spans: List[Tuple[Span, int]], tokens: Sequence[str]):
        symbols: List[Symbol] = []
        positions: Dict[int, int] = {}
        starts = {s[0]: (s[1], nt) for s, nt in sub_spans}
        k = span[0]
        while k <= span[1]:
            if k in starts:
                end, nt = starts[k]
                symbols.append(nt)
                k = end + 1
            else:
                positions[k] = len(symbols)
                symbols.append(tokens[k])
                k += 1
        return tuple(symbols), positions

    source, src_pos = side(
        phrase.mt_span, [(q.mt_span, k + 1) for k, q in enumerate(subs)], mt
    )
    target, tgt_pos = side(
        phrase.pe_span, [(q.pe_span, k + 1) for k, q in enumerate(subs)], pe
    )
    if subs:
        if len(source) > max_symbols:
            return None
        if not any(isinstance(s, str) for s in source):
            return None
        if any(
            isinstance(a, int) and isinstance(b, int) for a, b in zip(source, source[1:])
        ):
            return None
    rule_links = tuple(
        sorted((src_pos[i], tgt_pos[j]) for i, j in links if i in src_pos and j in tgt_pos)
    )
    return SCFGRule("X", source, target, rule_links)


def induce_hier_rules(
    phrases: Iterable[PhrasePair],
    mt: Sequence[str],
    pe: Sequence[str],
    a: Union[Alignment, Iterable[Link]],
    max_symbols: int = MAX_RULE_SYMBOLS,
    hierarchical: bool = True,
) -> List[SCFGRule]:
    """Flat rules for every phrase pair plus rules with one or two gaps.

    Gaps are sub-phrase pairs that do not overlap on either side and are
    not adjacent on the source side. Rules with gaps keep at least one
    source terminal and at most ``max_symbols`` source symbols.
    """
    links = _link_pairs(a)
    ordered = sorted(phrases, key=lambda p: (p.mt_span, p.pe_span))
    rules: List[SCFGRule] = []
    for phrase in ordered:
        rules.append(_make_rule(phrase, (), mt, pe, links, max_symbols))
        if not hierarchical:
            continue
        subs = [q for q in ordered if phrase.contains(q)]
        for k, first in enumerate(subs):
            rule = _make_rule(phrase, (first,), mt, pe, links, max_symbols)
            if rule is not None:
                rules.append(rule)
            for second in subs[k + 1 :]:
                if second.mt_span[0] <= first.mt_span[1] + 1:
                    continue
                if not (
                    first.pe_span[1] < second.pe_span[0] or second.pe_span[1] < first.pe_span[0]
                ):
                    continue
                rule = _make_rule(phrase, (first, second), mt, pe, links, max_symbols)
                if rule is not None:
                    rules.append(rule)
    return rules


def _extract_sentence(job) -> List[Tuple[RuleKey, Tuple[Link, ...]]]:
    mt, pe, links, max_len, max_symbols, hierarchical = job
    phrases = extract_phrases(mt, pe, links, max_len)
    rules = induce_hier_rules(phrases, mt, pe, links, max_symbols, hierarchical)
    return [(rule.key, rule.links) for rule in rules]


@dataclass
class RuleCounts:
    """Occurrence counts per rule and the most frequent internal alignment."""

    counts: Counter = field(default_factory=Counter)
    link_counts: Dict[RuleKey, Counter] = field(default_factory=lambda: defaultdict(Counter))

    def add(self, key: RuleKey, links: Tuple[Link, ...]) -> None:
        self.counts[key] += 1
        self.link_counts[key][links] += 1

    def links(self, key: RuleKey) -> Tuple[Link, ...]:
        options = self.link_counts[key]
        return min(options, key=lambda links: (-options[links], links))

    def __len__(self) -> int:
        return len(self.counts)


def extract_rules(
    pairs: Sequence[Tuple[Sequence[str], Sequence[str]]],
    alignments: Sequence[Union[Alignment, Iterable[Link]]],
    max_phrase_len: int = MAX_PHRASE_LEN,
    max_rule_symbols: int = MAX_RULE_SYMBOLS,
    hierarchical: bool = True,
    threads: int = 1,
) -> RuleCounts:
    """Count rule occurrences over a corpus, one sentence pair per job."""
    if len(pairs) != len(alignments):
        raise ValueError(f"{len(pairs)} sentence pairs but {len(alignments)} alignments")
    jobs = [
        (
            tuple(mt),
            tuple(pe),
            tuple(_link_pairs(a)),
            max_phrase_len,
            max_rule_symbols,
            hierarchical,
        )
        for (mt, pe), a in zip(pairs, alignments)
    ]
    counts = RuleCounts()
    results = parallel_map(_extract_sentence, jobs, threads)
    for sentence_rules in tqdm(results, unit="pair", disable=len(results) < 100):
        for key, links in sentence_rules:
            counts.add(key, links)
    logger.info(f"🧱 Extracted {len(counts)} distinct rules from {len(pairs)} pairs")
    return counts


def good_turing_smooth(counts: Dict[RuleKey, int]) -> Dict[RuleKey, float]:
    """Good-Turing adjusted counts ``c* = (c+1) N_{c+1} / N_c``.

    Where ``N_{c+1}`` is zero the raw count stands. Adjusted counts never
    exceed the raw ones.
    """
    if not counts:
        return {}
    count_of_counts = FreqDist(counts).r_Nr()
    adjusted = {}
    for key, c in counts.items():
        if count_of_counts.get(c + 1, 0) > 0:
            c_star = (c + 1) * count_of_counts[c + 1] / count_of_counts[c]
            adjusted[key] = min(c_star, float(c))
        else:
            adjusted[key] = float(c)
    return adjusted


def lexical_weight(
    src_side: Sequence[Symbol],
    tgt_side: Sequence[Symbol],
    links: Iterable[Link],
    table: TranslationTable,
) -> float:
    """P_w(target | source): best aligned source word per target terminal.

    Unaligned target terminals are scored against NULL. A side without
    terminals has weight 1.
    """
    aligned: Dict[int, List[int]] = defaultdict(list)
    for i, j in links:
        aligned[j].append(i)
    weight = 1.0
    for j, word in enumerate(tgt_side):
        if isinstance(word, int):
            continue
        if aligned[j]:
            p = max(table.prob(src_side[i], word) for i in aligned[j])
        else:
            p = table.prob(NULL, word)
        weight *= max(p, LEX_FLOOR)
    return min(1.0, max(weight, LEX_FLOOR))


def _cap_singleton(p: float, count: int) -> float:
    return min(p, count / (count + 0.5))


def estimate_features(
    rule_counts: RuleCounts,
    forward: TranslationTable,
    reverse: TranslationTable,
    smoothing: bool = True,
    min_count: int = 1,
) -> List[SCFGRule]:
    """Attach features to every rule seen at least ``min_count`` times.

    ``forward`` holds t(pe word | mt word) and ``reverse`` t(mt word | pe word).
    Conditional probabilities divide (smoothed) joint counts by raw marginals.
    """
    kept = {k: c for k, c in rule_counts.counts.items() if c >= min_count}
    adjusted = good_turing_smooth(kept) if smoothing else {k: float(c) for k, c in kept.items()}
    src_totals: Counter = Counter()
    tgt_totals: Counter = Counter()
    for (source, target), c in kept.items():
        src_totals[source] += c
        tgt_totals[target] += c

    rules = []
    for key in sorted(kept, key=lambda k: (render_side(k[0]), render_side(k[1]))):
        source, target = key
        c = kept[key]
        p_tgt = adjusted[key] / src_totals[source]
        p_src = adjusted[key] / tgt_totals[target]
        if smoothing and c == 1:
            p_tgt, p_src = _cap_singleton(p_tgt, c), _cap_singleton(p_src, c)
        links = rule_counts.links(key)
        features = FeatureVector(
            p_src_given_tgt=p_src,
            p_tgt_given_src=p_tgt,
            lex_src_given_tgt=lexical_weight(target, source, [(j, i) for i, j in links], reverse),
            lex_tgt_given_src=lexical_weight(source, target, links, forward),
        )
        rules.append(SCFGRule("X", source, target, links, features))
    return rules


@dataclass
class RuleTable:
    """Scored X rules, sorted by their rendered sides."""

    rules: List[SCFGRule] = field(default_factory=list)

    def __post_init__(self):
        self._by_terminal: Optional[Dict[str, List[SCFGRule]]] = None

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def by_first_terminal(self) -> Dict[str, List[SCFGRule]]:
        """Rules grouped by the first terminal of their source side."""
        if self._by_terminal is None:
            index: Dict[str, List[SCFGRule]] = defaultdict(list)
            for rule in self.rules:
                index[rule.terminals()[0]].append(rule)
            self._by_terminal = dict(index)
        return self._by_terminal

    def save(self, path: str) -> None:
        write_gzip_lines(path, (rule.render() for rule in self.rules))
        logger.info(f"💾 Wrote {len(self.rules)} rules to {path}")

    @classmethod
    def load(cls, path: str) -> "RuleTable":
        try:
            lines = read_gzip_lines(path)
        except (OSError, EOFError) as e:
            raise ModelError(f"cannot read rule table {path}: {e}", artifact=path) from e
        rules = []
        for lineno, line in enumerate(lines, start=1):
            try:
                rules.append(SCFGRule.parse(line))
            except ValueError as e:
                raise ModelError(f"{path}:{lineno}: {e}", artifact=path) from e
        return cls(rules)


def build_rule_table(
    pairs: Sequence[Tuple[Sequence[str], Sequence[str]]],
    alignments: Sequence[Union[Alignment, Iterable[Link]]],
    forward: TranslationTable,
    reverse: TranslationTable,
    max_phrase_len: int = MAX_PHRASE_LEN,
    max_rule_symbols: int = MAX_RULE_SYMBOLS,
    min_rule_count: int = 1,
    hierarchical: bool = True,
    threads: int = 1,
) -> RuleTable:
    counts = extract_rules(
        pairs, alignments, max_phrase_len, max_rule_symbols, hierarchical, threads
    )
    rules = estimate_features(counts, forward, reverse, smoothing=True, min_count=min_rule_count)
    logger.info(f"📊 Rule table holds {len(rules)} rules (min count {min_rule_count})")
    return RuleTable(rules)
