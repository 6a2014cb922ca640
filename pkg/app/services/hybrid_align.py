"""(c) 2025, hybrid-sape authors.

Hybrid word alignment.

Step 1 keeps every edit-distance link and fills gaps with statistical links
whose endpoints are both still free. Step 2 unions the alignment tables
obtained from the surface, stem, POS and bigram-POS views of each pair.
The bigram-POS view also yields short surface segments that are added to
the training data.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

from tqdm import tqdm

from app.config.logging_config import setup_logger
from app.services.corpus import (
    Sentence,
    TaggedSentence,
    TaggerInterface,
    TripletCorpus,
    lowercase,
    pos_tag,
    to_bigrams,
)
from app.services.edit_aligner import (
    EXACT_MATCH_LIMIT,
    Alignment,
    SynonymLexicon,
    align,
    porter_stem,
)
from app.utils.errors import CorpusError
from app.utils.helpers import write_lines

logger = setup_logger(__name__)

ORIGINS = ("surface", "stem", "pos", "bigram-pos", "meteor", "statistical")


class TableEntry(NamedTuple):
    mt_phrase: Tuple[str, ...]
    pe_phrase: Tuple[str, ...]
    origin: str

    def render(self) -> str:
        return f"{' '.join(self.mt_phrase)} ||| {' '.join(self.pe_phrase)}"


def _sort_key(entry: TableEntry):
    return (entry.mt_phrase, entry.pe_phrase)


@dataclass
class AlignmentTable:
    """Aligned (mt phrase, pe phrase) pairs tagged with the view they came from."""

    entries: List[TableEntry] = field(default_factory=list)

    def __post_init__(self):
        for entry in self.entries:
            if not entry.mt_phrase or not entry.pe_phrase:
                raise ValueError("alignment table phrases must be non-empty")
            if entry.origin not in ORIGINS:
                raise ValueError(f"unknown origin '{entry.origin}'")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def pairs(self) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
        return [(e.mt_phrase, e.pe_phrase) for e in self.entries]

    def save(self, path: str) -> None:
        write_lines(path, (e.render() for e in self.entries))

    @classmethod
    def load(cls, path: str, origin: str = "surface") -> "AlignmentTable":
        entries = []
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                mt, sep, pe = line.rstrip("\n").partition(" ||| ")
                if not sep:
                    raise CorpusError(f"{path}:{lineno}: expected 'mt ||| pe'")
                entries.append(TableEntry(tuple(mt.split()), tuple(pe.split()), origin))
        return cls(entries)


def combine_link_level(meteor: Alignment, stat: Alignment) -> Alignment:
    """Keep METEOR links; add statistical links touching no METEOR endpoint."""
    h_covered, r_covered = meteor.h_covered(), meteor.r_covered()
    extra = frozenset(
        link
        for link in stat.links
        if link.h_index not in h_covered and link.r_index not in r_covered
    )
    return Alignment(meteor.links | extra)


def union_tables(tables: Iterable[AlignmentTable]) -> AlignmentTable:
    """Set union of the tables, first origin wins, sorted by mt then pe phrase."""
    seen = {}
    for table in tables:
        for entry in table:
            key = (entry.mt_phrase, entry.pe_phrase)
            if key not in seen:
                seen[key] = entry
    return AlignmentTable(sorted(seen.values(), key=_sort_key))


def table_from_alignment(
    mt: Sequence[str], pe: Sequence[str], alignment: Alignment, origin: str
) -> AlignmentTable:
    """One word-pair entry per link, read off the surface tokens."""
    entries = [
        TableEntry((mt[i],), (pe[j],), origin)
        for i, j in alignment.pairs()
        if i < len(mt) and j < len(pe)
    ]
    return AlignmentTable(entries)


def bigram_alignment(
    mt: TaggedSentence, pe: TaggedSentence, lexicon: Optional[SynonymLexicon] = None
) -> Alignment:
    """Align the tag-bigram sequences of two tagged sentences."""
    return align(to_bigrams(mt), to_bigrams(pe), lexicon)


def bigram_pos_pairs(
    mt: TaggedSentence, pe: TaggedSentence, lexicon: Optional[SynonymLexicon] = None
) -> AlignmentTable:
    """Surface bigram pairs for every link between tag bigrams."""
    links = bigram_alignment(mt, pe, lexicon).pairs()
    entries = [
        TableEntry(tuple(mt.tokens[i : i + 2]), tuple(pe.tokens[j : j + 2]), "bigram-pos")
        for i, j in links
    ]
    return AlignmentTable(entries)


def hybrid_link_alignment(
    meteor: Alignment, stat: Optional[Alignment], mode: str = "hybrid"
) -> Alignment:
    """The alignment handed to rule extraction for one sentence pair."""
    if mode == "meteor" or stat is None:
        return meteor
    if mode == "statistical":
        return stat
    return combine_link_level(meteor, stat)


def align_pair(
    mt: Sequence[str],
    pe: Sequence[str],
    stat: Optional[Alignment],
    lexicon: Optional[SynonymLexicon] = None,
    mode: str = "hybrid",
    exact_limit: int = EXACT_MATCH_LIMIT,
) -> Alignment:
    """Hybrid alignment of one lowercased surface pair."""
    meteor = align(lowercase(mt).tokens, lowercase(pe).tokens, lexicon, exact_limit)
    return hybrid_link_alignment(meteor, stat, mode)


class ViewAlignment(NamedTuple):
    surface: Alignment
    stem: Alignment
    pos: Alignment


def align_views(
    mt: TaggedSentence,
    pe: TaggedSentence,
    stat: Optional[Alignment],
    lexicon: Optional[SynonymLexicon] = None,
    exact_limit: int = EXACT_MATCH_LIMIT,
) -> ViewAlignment:
    """Step 1 on the surface, lowercased-stem and POS views of one pair.

    All views share the surface token positions, so their links can be
    compared and combined index by index.
    """
    mt_low, pe_low = lowercase(mt.tokens), lowercase(pe.tokens)
    views = (
        (mt.tokens, pe.tokens),
        (tuple(porter_stem(t) for t in mt_low), tuple(porter_stem(t) for t in pe_low)),
        (mt.tags, pe.tags),
    )
    combined = []
    for mt_view, pe_view in views:
        meteor = align(mt_view, pe_view, lexicon, exact_limit)
        combined.append(hybrid_link_alignment(meteor, stat))
    return ViewAlignment(*combined)


@dataclass
class AugmentedCorpus:
    """Training pairs, their hybrid alignments and the merged alignment table."""

    pairs: List[Tuple[Sentence, Sentence]] = field(default_factory=list)
    alignments: List[Alignment] = field(default_factory=list)
    bigram_segments: List[Tuple[Sentence, Sentence]] = field(default_factory=list)
    table: AlignmentTable = field(default_factory=AlignmentTable)

    def training_pairs(self, with_segments: bool = True) -> List[Tuple[Sentence, Sentence]]:
        return self.pairs + (self.bigram_segments if with_segments else [])


def tag_corpus(
    corpus: TripletCorpus, tagger: TaggerInterface
) -> List[Tuple[TaggedSentence, TaggedSentence]]:
    return [(pos_tag(e.mt, tagger), pos_tag(e.pe, tagger)) for e in corpus]


def bigram_segments(
    tagged: Sequence[Tuple[TaggedSentence, TaggedSentence]],
    lexicon: Optional[SynonymLexicon] = None,
) -> List[AlignmentTable]:
    """Bigram surface pairs of every tagged (mt, pe) pair."""
    return [bigram_pos_pairs(mt, pe, lexicon) for mt, pe in tagged]


def build_training_views(
    corpus: TripletCorpus,
    tagger: TaggerInterface,
    lexicon: Optional[SynonymLexicon] = None,
    stat_alignments: Optional[Sequence[Optional[Alignment]]] = None,
    mode: str = "hybrid",
    exact_limit: int = EXACT_MATCH_LIMIT,
    tagged: Optional[Sequence[Tuple[TaggedSentence, TaggedSentence]]] = None,
    bigram_tables: Optional[Sequence[AlignmentTable]] = None,
) -> AugmentedCorpus:
    """Align every view of every pair and merge the resulting tables.

    ``stat_alignments`` holds the symmetrized statistical alignment of each
    pair (``None`` entries or a missing list mean METEOR links only).
    """
    if not len(corpus):
        return AugmentedCorpus()
    if tagged is None:
        tagged = tag_corpus(corpus, tagger)
    if stat_alignments is None:
        stat_alignments = [None] * len(corpus)
    if bigram_tables is None:
        bigram_tables = bigram_segments(tagged, lexicon)

    tables: List[AlignmentTable] = []
    alignments: List[Alignment] = []
    segments: List[Tuple[Sentence, Sentence]] = []

    for entry, (mt_t, pe_t), stat, bigrams in tqdm(
        zip(corpus, tagged, stat_alignments, bigram_tables),
        total=len(corpus),
        unit="pair",
        disable=len(corpus) < 100,
    ):
        views = align_views(mt_t, pe_t, stat, lexicon, exact_limit)
        tables.append(table_from_alignment(entry.mt, entry.pe, views.surface, "surface"))
        tables.append(table_from_alignment(entry.mt, entry.pe, views.stem, "stem"))
        tables.append(table_from_alignment(entry.mt, entry.pe, views.pos, "pos"))
        tables.append(bigrams)

        alignments.append(align_pair(entry.mt, entry.pe, stat, lexicon, mode, exact_limit))
        segments.extend((Sentence(e.mt_phrase), Sentence(e.pe_phrase)) for e in bigrams)

    table = union_tables(tables)
    logger.info(
        f"🧩 Built {len(table)} alignment-table entries and "
        f"{len(segments)} bigram segments from {len(corpus)} pairs"
    )
    return AugmentedCorpus(corpus.pairs(), alignments, segments, table)
