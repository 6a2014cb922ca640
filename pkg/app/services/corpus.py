"""(c) 2025, hybrid-sape authors.

Sentences, POS tags, triplet corpora and their on-disk formats.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Sequence, Tuple, Union

from nltk.tag import RegexpTagger, UnigramTagger
from nltk.tag.api import TaggerI
from nltk.tag.util import tuple2str

from app.config.logging_config import setup_logger
from app.utils.errors import CorpusError
from app.utils.helpers import write_lines

logger = setup_logger(__name__)

PUNCTUATION = '.,:;!?¿¡"()'
DEFAULT_TAG = "NC"

# Fallback rules tried after the lexicon, in order
FALLBACK_PATTERNS: List[Tuple[str, str]] = [
    (r"^[+-]?\d+([.,]\d+)*$", "CARD"),
    (r"^\.$", "FS"),
    (r"^:$", "COLON"),
    (r".*", DEFAULT_TAG),
]


@dataclass(frozen=True)
class Sentence:
    """An ordered list of whitespace-free tokens."""

    tokens: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"invalid token {token!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    def render(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class TaggedSentence:
    """Tokens paired with POS labels of the same length."""

    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tokens) != len(self.tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def sentence(self) -> Sentence:
        return Sentence(self.tokens)

    def render(self) -> str:
        """Render as space separated ``token/TAG`` pairs."""
        return " ".join(tuple2str(pair) for pair in zip(self.tokens, self.tags))

    @classmethod
    def parse(cls, line: str) -> "TaggedSentence":
        # split on the last slash; tags keep their case
        pairs = [item.rpartition("/") for item in line.split()]
        if any(not token or not tag for token, _, tag in pairs):
            raise ValueError(f"untagged token in line: {line!r}")
        return cls(tuple(t for t, _, _ in pairs), tuple(tag for _, _, tag in pairs))


class Triplet(NamedTuple):
    source: Sentence
    mt: Sentence
    pe: Sentence


@dataclass
class TripletCorpus:
    """Source, raw MT and post-edited sentences, line aligned."""

    entries: List[Triplet] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self.entries)

    def pairs(self) -> List[Tuple[Sentence, Sentence]]:
        """The (mt, pe) training pairs."""
        return [(entry.mt, entry.pe) for entry in self.entries]


SentenceLike = Union[Sentence, Sequence[str]]


def tokenize(raw_line: str) -> Sentence:
    """Split on whitespace and detach leading/trailing punctuation marks."""
    tokens: List[str] = []
    for chunk in raw_line.split():
        head: List[str] = []
        while chunk and chunk[0] in PUNCTUATION:
            head.append(chunk[0])
            chunk = chunk[1:]
        tail: List[str] = []
        while chunk and chunk[-1] in PUNCTUATION:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(head)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return Sentence(tuple(tokens))


def lowercase(s: SentenceLike) -> Sentence:
    return Sentence(tuple(token.lower() for token in s))


class LexiconTagger(TaggerI):
    """Most-frequent-tag lexicon lookup with a small regex fallback.

    Lookups try the token as written, then its lowercase form.
    """

    def __init__(self, lexicon: Dict[str, str]):
        self.lexicon = dict(lexicon)
        self._tagger = UnigramTagger(
            model=self.lexicon, backoff=RegexpTagger(FALLBACK_PATTERNS)
        )

    def tag(self, tokens: Sequence[str]) -> List[Tuple[str, str]]:
        keys = [t if t in self.lexicon else t.lower() for t in tokens]
        tagged = self._tagger.tag(keys)
        return [(token, tag or DEFAULT_TAG) for token, (_, tag) in zip(tokens, tagged)]


# The interface every tagger must satisfy
TaggerInterface = TaggerI


def load_lexicon_tagger(path: str) -> LexiconTagger:
    """Build the built-in tagger from a ``token<TAB>TAG`` file."""
    lexicon: Dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1]:
                    raise CorpusError(f"{path}:{lineno}: expected 'token<TAB>TAG'")
                lexicon.setdefault(parts[0], parts[1])
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read tagger lexicon {path}: {e}") from e
    logger.info(f"🏷️  Loaded tagger lexicon with {len(lexicon)} entries from {path}")
    return LexiconTagger(lexicon)


def pos_tag(s: SentenceLike, tagger: TaggerInterface) -> TaggedSentence:
    tokens = tuple(s)
    pairs = tagger.tag(list(tokens)) if tokens else []
    return TaggedSentence(tokens, tuple(tag or DEFAULT_TAG for _, tag in pairs))


def to_bigrams(t: TaggedSentence) -> List[str]:
    """Tag bigrams ``tag_i-tag_{i+1}``."""
    return [f"{a}-{b}" for a, b in zip(t.tags, t.tags[1:])]


def _read_lines(path: str) -> List[str]:
    """Read UTF-8 lines; a single trailing newline does not add a line."""
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as e:
        raise CorpusError(f"cannot read {path}: {e}") from e
    chunks = data.split(b"\n")
    if chunks and chunks[-1] == b"":
        chunks.pop()
    lines = []
    for lineno, chunk in enumerate(chunks, start=1):
        try:
            lines.append(chunk.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError:
            raise CorpusError(f"{path}:{lineno}: malformed UTF-8") from None
    return lines


def read_sentences(path: str) -> List[Sentence]:
    return [tokenize(line) for line in _read_lines(path)]


def write_sentences(path: str, sentences: Iterable[SentenceLike]) -> None:
    write_lines(path, (" ".join(s) for s in sentences))


def read_tagged(path: str) -> List[TaggedSentence]:
    result = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            result.append(TaggedSentence.parse(line))
        except ValueError as e:
            raise CorpusError(f"{path}:{lineno}: {e}") from e
    return result


def write_tagged(path: str, sentences: Iterable[TaggedSentence]) -> None:
    write_lines(path, (s.render() for s in sentences))


def load_triplets(src_path: str, mt_path: str, pe_path: str) -> TripletCorpus:
    """Line i of each file forms triplet i."""
    sides = [(path, _read_lines(path)) for path in (src_path, mt_path, pe_path)]
    expected = len(sides[0][1])
    for path, lines in sides[1:]:
        if len(lines) != expected:
            raise CorpusError(
                f"line count mismatch: {path} has {len(lines)} lines, "
                f"{src_path} has {expected}"
            )
    if expected == 0:
        raise CorpusError(f"empty corpus: {src_path}")

    src, mt, pe = ([tokenize(line) for line in lines] for _, lines in sides)
    corpus = TripletCorpus([Triplet(s, m, p) for s, m, p in zip(src, mt, pe)])
    logger.info(f"📚 Loaded {len(corpus)} triplets from {mt_path}")
    return corpus


def load_pairs(mt_path: str, pe_path: str) -> List[Tuple[Sentence, Sentence]]:
    """Line-aligned (mt, pe) pairs, as used for development sets."""
    mt_lines, pe_lines = _read_lines(mt_path), _read_lines(pe_path)
    if len(mt_lines) != len(pe_lines):
        raise CorpusError(
            f"line count mismatch: {pe_path} has {len(pe_lines)} lines, "
            f"{mt_path} has {len(mt_lines)}"
        )
    return [(tokenize(m), tokenize(p)) for m, p in zip(mt_lines, pe_lines)]


def write_triplets(corpus: TripletCorpus, src_path: str, mt_path: str, pe_path: str) -> None:
    write_sentences(src_path, (e.source for e in corpus))
    write_sentences(mt_path, (e.mt for e in corpus))
    write_sentences(pe_path, (e.pe for e in corpus))


def corpus_stats(corpus: TripletCorpus) -> Dict[str, int]:
    """Sentence and word counts per side."""
    return {
        "sentences": len(corpus),
        "source_words": sum(len(e.source) for e in corpus),
        "mt_words": sum(len(e.mt) for e in corpus),
        "pe_words": sum(len(e.pe) for e in corpus),
    }
