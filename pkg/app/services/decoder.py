"""(c) 2025, hybrid-sape authors.

CKY chart decoder over the extracted grammar plus the glue rules.

X items cover spans up to ``search_depth`` tokens. S items cover prefixes
``(0, j)`` and are built by S -> <X1, X1> or S -> <S1 X2, S1 X2>. Every item
keeps the first and last ``order - 1`` output words so the language model
can be applied exactly when items are combined; items sharing those
boundary words are recombined.
"""

import heapq
import math
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from app.config.logging_config import setup_logger
from app.services.ngram_lm import BOS, EOS, LOG10_TO_LN, NGramLM
from app.services.rule_extract import (
    FEATURE_NAMES,
    GLUE_CONCAT,
    GLUE_START,
    PHRASE_PENALTY,
    FeatureVector,
    RuleTable,
    SCFGRule,
    Symbol,
)
from app.utils.errors import ModelError
from app.utils.helpers import parallel_map, write_lines

logger = setup_logger(__name__)

WEIGHT_NAMES: Tuple[str, ...] = FEATURE_NAMES + ("glue", "lm", "word_penalty")

DEFAULT_BEAM = 100
DEFAULT_SEARCH_DEPTH = 7
# k-best stops after this many derivations per requested output
KBEST_EXPANSION = 20

Span = Tuple[int, int]


@dataclass
class WeightVector:
    """One log-linear weight per feature."""

    p_src_given_tgt: float = 1.0
    p_tgt_given_src: float = 1.0
    lex_src_given_tgt: float = 1.0
    lex_tgt_given_src: float = 1.0
    phrase_penalty: float = 1.0
    glue: float = 1.0
    lm: float = 1.0
    word_penalty: float = 0.5

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"weight '{name}' must be finite, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in WEIGHT_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "WeightVector":
        if len(values) != len(WEIGHT_NAMES):
            raise ValueError(f"expected {len(WEIGHT_NAMES)} weights, got {len(values)}")
        return cls(*(float(v) for v in values))

    def dot(self, features: Sequence[float]) -> float:
        return sum(getattr(self, n) * f for n, f in zip(WEIGHT_NAMES, features))

    def save(self, path: str) -> None:
        write_lines(path, (f"{n}\t{getattr(self, n)!r}" for n in WEIGHT_NAMES))

    @classmethod
    def load(cls, path: str) -> "WeightVector":
        known = {f.name for f in fields(cls)}
        values: Dict[str, float] = {}
        try:
            with open(path, encoding="utf-8") as handle:
                for lineno, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    name, _, value = line.rstrip("\n").partition("\t")
                    if name not in known:
                        raise ModelError(f"{path}:{lineno}: unknown weight '{name}'", artifact=path)
                    values[name] = float(value)
        except OSError as e:
            raise ModelError(f"cannot read weights {path}: {e}", artifact=path) from e
        except ValueError as e:
            raise ModelError(f"{path}: {e}", artifact=path) from e
        return cls(**values)


def rule_weight(rule: SCFGRule, w: WeightVector) -> float:
    """Weighted sum of the rule's five log features."""
    if rule.features is None:
        raise ValueError("rule has no features")
    return sum(getattr(w, n) * v for n, v in zip(FEATURE_NAMES, rule.features.log_values))


def glue_weight(w: WeightVector) -> float:
    """Log weight of one S -> <S1 X2, S1 X2> application."""
    return -w.glue


def pass_through_rule(token: str) -> SCFGRule:
    """X -> <token, token> with every feature at exp(-1)."""
    return SCFGRule(
        "X",
        (token,),
        (token,),
        ((0, 0),),
        FeatureVector(PHRASE_PENALTY, PHRASE_PENALTY, PHRASE_PENALTY, PHRASE_PENALTY),
    )


class Hyperedge(NamedTuple):
    rule: Optional[SCFGRule]
    span: Span
    target: Tuple[Symbol, ...]
    children: Tuple["ChartItem", ...]
    local_score: float
    local_features: Tuple[float, ...]


@dataclass(eq=False)
class ChartItem:
    """Best partial translation of a span for one nonterminal and LM boundary."""

    span: Span
    lhs: str
    left: Tuple[str, ...]
    right: Tuple[str, ...]
    output: Tuple[str, ...]
    score: float
    features: Tuple[float, ...]
    edges: List[Hyperedge] = field(default_factory=list)
    best_edge: Optional[Hyperedge] = None


@dataclass(frozen=True)
class DerivationNode:
    rule: SCFGRule
    span: Span
    children: Tuple["DerivationNode", ...] = ()


@dataclass(frozen=True)
class Derivation:
    """A complete derivation: its output, feature totals and score."""

    source: Tuple[str, ...]
    output: Tuple[str, ...]
    score: float
    features: Tuple[float, ...]
    root: Optional[DerivationNode] = None

    def applications(self) -> List[Tuple[SCFGRule, int, int]]:
        """Rule applications ``(rule, i, j)`` in pre-order."""
        result = []
        stack = [self.root] if self.root else []
        while stack:
            node = stack.pop()
            result.append((node.rule, node.span[0], node.span[1]))
            stack.extend(reversed(node.children))
        return result

    def feature_breakdown(self) -> str:
        return " ".join(f"{n}={v:.6f}" for n, v in zip(WEIGHT_NAMES, self.features))

    def render(self) -> str:
        return " ".join(self.output)


def _tail(words: Tuple[str, ...], k: int) -> Tuple[str, ...]:
    return words[-k:] if k > 0 else ()


def _sum_features(*vectors: Sequence[float]) -> Tuple[float, ...]:
    return tuple(sum(values) for values in zip(*vectors))


def _compose(target: Sequence[Symbol], outputs: Sequence[Tuple[str, ...]]) -> Tuple[str, ...]:
    result: List[str] = []
    for sym in target:
        if isinstance(sym, int):
            result.extend(outputs[sym - 1])
        else:
            result.append(sym)
    return tuple(result)


def _candidate_rules(rules: Iterable[SCFGRule], vocab: set) -> Iterable[SCFGRule]:
    if isinstance(rules, RuleTable):
        index = rules.by_first_terminal()
        for token in sorted(vocab):
            yield from index.get(token, ())
    else:
        yield from rules


def _match_source(
    source: Sequence[Symbol], f: Sequence[str], start: int, limit: int
) -> List[Tuple[int, Dict[int, Span]]]:
    """Ways ``source`` covers ``f[start:end]`` with ``end <= limit``."""
    matches: List[Tuple[int, Dict[int, Span]]] = []

    def walk(pos: int, k: int, nts: Dict[int, Span]) -> None:
        if pos == len(source):
            matches.append((k, dict(nts)))
            return
        sym = source[pos]
        if isinstance(sym, str):
            if k < limit and f[k] == sym:
                walk(pos + 1, k + 1, nts)
            return
        for end in range(k + 1, limit + 1):
            nts[sym] = (k, end)
            walk(pos + 1, end, nts)
            del nts[sym]

    walk(0, start, {})
    return matches


class Chart:
    """Items of one sentence, built bottom-up by span length."""

    def __init__(
        self,
        source: Sequence[str],
        rules: Iterable[SCFGRule],
        lm: NGramLM,
        weights: WeightVector,
        beam: int = DEFAULT_BEAM,
        search_depth: int = DEFAULT_SEARCH_DEPTH,
    ):
        if beam < 0:
            raise ValueError("beam must be >= 0")
        if search_depth < 1:
            raise ValueError("search_depth must be >= 1")
        self.source = tuple(source)
        self.lm = lm
        self.weights = weights
        self.beam = beam
        self.search_depth = search_depth
        self.context = lm.order - 1
        self.cells: Dict[Tuple[Span, str], List[ChartItem]] = {}
        self.goal: List[Hyperedge] = []
        self._mapped: Dict[str, str] = {}
        self._grammar = self._sentence_grammar(rules)
        self._build()

    def _sentence_grammar(
        self, rules: Iterable[SCFGRule]
    ) -> Dict[Span, List[Tuple[SCFGRule, Dict[int, Span]]]]:
        """Rule matches per span, with pass-through rules for uncovered tokens."""
        f = self.source
        vocab = set(f)
        positions: Dict[str, List[int]] = {}
        for k, token in enumerate(f):
            positions.setdefault(token, []).append(k)

        matches: Dict[Span, List[Tuple[SCFGRule, Dict[int, Span]]]] = {}
        single = set()
        for rule in _candidate_rules(rules, vocab):
            if rule.lhs != "X":
                continue
            if not set(rule.terminals()) <= vocab:
                continue
            if rule.features is None:
                raise ValueError("grammar rules must carry features")
            if len(rule.source) == 1:
                single.add(rule.source[0])
            first = rule.source[0]
            starts = positions[first] if isinstance(first, str) else range(len(f))
            for i in starts:
                limit = min(len(f), i + self.search_depth)
                for j, nts in _match_source(rule.source, f, i, limit):
                    matches.setdefault((i, j), []).append((rule, nts))
        for k, token in enumerate(f):
            if token not in single:
                matches.setdefault((k, k + 1), []).append((pass_through_rule(token), {}))
        return matches

    def _map(self, word: str) -> str:
        mapped = self._mapped.get(word)
        if mapped is None:
            mapped = self._mapped[word] = self.lm.map_word(word)
        return mapped

    def _lm(self, context: Tuple[str, ...], word: str) -> float:
        """Natural-log LM probability of ``word`` after ``context``."""
        ctx = tuple(self._map(w) for w in context)
        target = word if word == EOS else self._map(word)
        return self.lm.logprob(ctx, target) * LOG10_TO_LN

    def _combine(
        self,
        rule: SCFGRule,
        span: Span,
        target: Tuple[Symbol, ...],
        children: Tuple[ChartItem, ...],
        rule_logs: Tuple[float, ...],
        glue: float,
    ) -> Tuple[Hyperedge, Tuple[str, ...], Tuple[str, ...], Tuple[str, ...]]:
        n1 = self.context
        tail: Tuple[str, ...] = ()
        left: List[str] = []
        output: List[str] = []
        lm_ln = 0.0
        words = 0
        for sym in target:
            if isinstance(sym, int):
                child = children[sym - 1]
                for p, word in enumerate(child.left):
                    if len(output) + p >= n1:
                        lm_ln += self._lm(_tail(tail + child.left[:p], n1), word)
                left.extend(child.left[: max(0, n1 - len(left))])
                tail = _tail(tail + child.right, n1)
                output.extend(child.output)
            else:
                if len(output) >= n1:
                    lm_ln += self._lm(_tail(tail, n1), sym)
                if len(left) < n1:
                    left.append(sym)
                tail = _tail(tail + (sym,), n1)
                output.append(sym)
                words += 1
        features = rule_logs + (glue, lm_ln, -float(words))
        edge = Hyperedge(rule, span, target, children, self.weights.dot(features), features)
        return edge, tuple(left), tail, tuple(output)

    def _add_edges(self, span: Span, lhs: str, candidates) -> None:
        items: Dict[tuple, ChartItem] = {}
        for rule, target, children, rule_logs, glue in candidates:
            edge, left, right, output = self._combine(rule, span, target, children, rule_logs, glue)
            score = edge.local_score + sum(c.score for c in children)
            key = (lhs, left, right)
            item = items.get(key)
            if item is None:
                item = items[key] = ChartItem(span, lhs, left, right, output, score, (), [])
                item.best_edge = edge
            elif score > item.score or (score == item.score and output < item.output):
                item.score, item.output, item.best_edge = score, output, edge
            item.edges.append(edge)
        ranked = sorted(items.values(), key=lambda it: (-it.score, it.output))
        if self.beam:
            ranked = ranked[: self.beam]
        for item in ranked:
            edge = item.best_edge
            item.features = _sum_features(edge.local_features, *(c.features for c in edge.children))
        if ranked:
            self.cells[(span, lhs)] = ranked

    def _x_candidates(self, span: Span):
        zero_glue = 0.0
        for rule, nts in self._grammar.get(span, []):
            child_cells = []
            for nt in sorted(nts):
                cell = self.cells.get((nts[nt], "X"))
                if not cell:
                    break
                child_cells.append(cell)
            else:
                for children in product(*child_cells):
                    yield rule, rule.target, children, rule.features.log_values, zero_glue

    def _s_candidates(self, j: int):
        none = (0.0,) * len(FEATURE_NAMES)
        for x in self.cells.get(((0, j), "X"), []):
            yield GLUE_START, (1,), (x,), none, 0.0
        for k in range(max(1, j - self.search_depth), j):
            for s in self.cells.get(((0, k), "S"), []):
                for x in self.cells.get(((k, j), "X"), []):
                    yield GLUE_CONCAT, (1, 2), (s, x), none, -1.0

    def _build(self) -> None:
        n = len(self.source)
        for length in range(1, n + 1):
            for i in range(0, n - length + 1):
                span = (i, i + length)
                if length <= self.search_depth:
                    self._add_edges(span, "X", self._x_candidates(span))
                if i == 0:
                    self._add_edges(span, "S", self._s_candidates(length))
        self._build_goal()

    def _build_goal(self) -> None:
        n1 = self.context
        none = (0.0,) * len(FEATURE_NAMES)
        if not self.source:
            lm_ln = self._lm(_tail((BOS,), n1), EOS)
            features = none + (0.0, lm_ln, 0.0)
            self.goal = [Hyperedge(None, (0, 0), (), (), self.weights.dot(features), features)]
            return
        for item in self.cells.get(((0, len(self.source)), "S"), []):
            context: Tuple[str, ...] = (BOS,)
            lm_ln = 0.0
            for word in item.left:
                lm_ln += self._lm(_tail(context, n1), word)
                context = context + (word,)
            lm_ln += self._lm(_tail((BOS,) + item.right, n1), EOS)
            features = none + (0.0, lm_ln, 0.0)
            self.goal.append(
                Hyperedge(
                    None,
                    (0, len(self.source)),
                    (1,),
                    (item,),
                    self.weights.dot(features),
                    features,
                )
            )

    def best(self) -> Derivation:
        """The highest scoring derivation; ties go to the smaller output."""
        if not self.goal:
            raise ValueError("chart has no complete derivation")
        scored = [
            (edge.local_score + sum(c.score for c in edge.children), _goal_output(edge), edge)
            for edge in self.goal
        ]
        score, output, edge = min(scored, key=lambda t: (-t[0], t[1]))
        features = _sum_features(edge.local_features, *(c.features for c in edge.children))
        root = _best_tree(edge.children[0]) if edge.children else None
        return Derivation(self.source, output, score, features, root)


def _goal_output(edge: Hyperedge) -> Tuple[str, ...]:
    return edge.children[0].output if edge.children else ()


def _best_tree(item: ChartItem) -> DerivationNode:
    edge = item.best_edge
    return DerivationNode(edge.rule, edge.span, tuple(_best_tree(c) for c in edge.children))


class _Candidate(NamedTuple):
    score: float
    output: Tuple[str, ...]
    features: Tuple[float, ...]
    edge: Hyperedge
    subs: Tuple["_Candidate", ...]


class _KBest:
    """Lazy k-best enumeration over the item hypergraph."""

    def __init__(self, chart: Chart):
        self.chart = chart
        self._derivs: Dict[int, List[_Candidate]] = {}
        self._heaps: Dict[int, list] = {}
        self._seen: Dict[int, set] = {}

    def _make(self, edge: Hyperedge, ranks: Tuple[int, ...]) -> Optional[_Candidate]:
        subs = []
        for child, rank in zip(edge.children, ranks):
            sub = self._get(id(child), child.edges, rank)
            if sub is None:
                return None
            subs.append(sub)
        score = edge.local_score + sum(s.score for s in subs)
        output = _compose(edge.target, [s.output for s in subs])
        features = _sum_features(edge.local_features, *(s.features for s in subs))
        return _Candidate(score, output, features, edge, tuple(subs))

    def _push(self, key: int, edges: List[Hyperedge], idx: int, ranks: Tuple[int, ...]) -> None:
        if (idx, ranks) in self._seen[key]:
            return
        self._seen[key].add((idx, ranks))
        cand = self._make(edges[idx], ranks)
        if cand is not None:
            heapq.heappush(self._heaps[key], (-cand.score, cand.output, idx, ranks, cand))

    def _get(self, key: int, edges: List[Hyperedge], k: int) -> Optional[_Candidate]:
        if key not in self._derivs:
            self._derivs[key], self._heaps[key], self._seen[key] = [], [], set()
            for idx, edge in enumerate(edges):
                self._push(key, edges, idx, (0,) * len(edge.children))
        derivs, heap = self._derivs[key], self._heaps[key]
        while len(derivs) <= k and heap:
            _, _, idx, ranks, cand = heapq.heappop(heap)
            derivs.append(cand)
            for c in range(len(ranks)):
                self._push(key, edges, idx, ranks[:c] + (ranks[c] + 1,) + ranks[c + 1 :])
        return derivs[k] if k < len(derivs) else None

    def goal(self, k: int) -> Optional[_Candidate]:
        return self._get(-1, self.chart.goal, k)


def _candidate_tree(cand: _Candidate) -> Optional[DerivationNode]:
    if cand.edge.rule is None:
        return _candidate_tree(cand.subs[0]) if cand.subs else None
    subtrees = tuple(_candidate_tree(s) for s in cand.subs)
    return DerivationNode(cand.edge.rule, cand.edge.span, subtrees)


def kbest(chart: Chart, k: int) -> List[Derivation]:
    """Up to ``k`` derivations with distinct outputs, best first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    extractor = _KBest(chart)
    result: List[Derivation] = []
    outputs = set()
    for rank in range(k * KBEST_EXPANSION):
        cand = extractor.goal(rank)
        if cand is None:
            break
        if cand.output in outputs:
            continue
        outputs.add(cand.output)
        result.append(
            Derivation(
                chart.source, cand.output, cand.score, cand.features, _candidate_tree(cand)
            )
        )
        if len(result) == k:
            break
    return result


def build_chart(
    sentence: Sequence[str],
    grammar: Iterable[SCFGRule],
    lm: NGramLM,
    weights: WeightVector,
    beam: int = DEFAULT_BEAM,
    search_depth: int = DEFAULT_SEARCH_DEPTH,
) -> Chart:
    return Chart(sentence, grammar, lm, weights, beam, search_depth)


def decode(
    sentence: Sequence[str],
    grammar: Iterable[SCFGRule],
    lm: NGramLM,
    weights: WeightVector,
    beam: int = DEFAULT_BEAM,
    search_depth: int = DEFAULT_SEARCH_DEPTH,
) -> Derivation:
    """Best derivation of ``sentence``. Tokens without a single-word rule are copied."""
    return build_chart(sentence, grammar, lm, weights, beam, search_depth).best()


# Worker state for decode_corpus, set once per process
_WORKER: Dict[str, object] = {}


def _init_worker(rules, lm, weights, beam, search_depth, nbest) -> None:
    _WORKER.update(
        rules=rules, lm=lm, weights=weights, beam=beam, search_depth=search_depth, nbest=nbest
    )


def _decode_one(sentence: Tuple[str, ...]) -> List[Derivation]:
    table: RuleTable = _WORKER["rules"]
    chart = build_chart(
        sentence,
        table,
        _WORKER["lm"],
        _WORKER["weights"],
        _WORKER["beam"],
        _WORKER["search_depth"],
    )
    nbest = _WORKER["nbest"]
    if nbest > 1:
        return kbest(chart, nbest)
    return [chart.best()]


def decode_corpus(
    sentences: Sequence[Sequence[str]],
    rules: RuleTable,
    lm: NGramLM,
    weights: WeightVector,
    beam: int = DEFAULT_BEAM,
    search_depth: int = DEFAULT_SEARCH_DEPTH,
    nbest: int = 1,
    threads: int = 1,
) -> List[List[Derivation]]:
    """Decode every sentence, keeping input order. Each entry is best first."""
    jobs = [tuple(s) for s in sentences]
    logger.info(
        f"🚀 Decoding {len(jobs)} sentences "
        f"(beam {beam}, depth {search_depth}, n-best {nbest})"
    )
    if threads <= 1:
        _init_worker(rules, lm, weights, beam, search_depth, nbest)
        return [_decode_one(s) for s in tqdm(jobs, unit="sent", disable=len(jobs) < 50)]
    return parallel_map(
        _decode_one,
        jobs,
        threads,
        initializer=_init_worker,
        initargs=(rules, lm, weights, beam, search_depth, nbest),
    )


def nbest_lines(index: int, derivations: Iterable[Derivation]) -> List[str]:
    """``sent_id ||| output ||| feature breakdown ||| total score`` lines."""
    return [
        f"{index} ||| {d.render()} ||| {d.feature_breakdown()} ||| {d.score:.6f}"
        for d in derivations
    ]
