"""(c) 2025, hybrid-sape authors.

Synthetic post-editing data. Post-edited sentences come from a small
Spanish-like grammar; the MT side is derived from them by injecting wrong
lexical choices, adjacent word swaps, spurious insertions and deletions.
The source side is a word-by-word English rendering of the post-edit.
"""

import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config.logging_config import setup_logger
from app.config.settings import PipelineConfig
from app.services.corpus import Sentence, Triplet, TripletCorpus, write_triplets
from app.utils.helpers import init, write_lines

logger = setup_logger(__name__)

# word -> (tag, source rendering)
VOCABULARY: Dict[str, Tuple[str, str]] = {
    "el": ("DM", "the"),
    "la": ("DF", "the"),
    "un": ("IM", "a"),
    "una": ("IF", "a"),
    "perro": ("NCM", "dog"),
    "gato": ("NCM", "cat"),
    "libro": ("NCM", "book"),
    "coche": ("NCM", "car"),
    "niño": ("NCM", "boy"),
    "casa": ("NCF", "house"),
    "mesa": ("NCF", "table"),
    "ciudad": ("NCF", "city"),
    "mujer": ("NCF", "woman"),
    "carta": ("NCF", "letter"),
    "grande": ("ADJ", "big"),
    "nuevo": ("ADJM", "new"),
    "nueva": ("ADJF", "new"),
    "viejo": ("ADJM", "old"),
    "vieja": ("ADJF", "old"),
    "come": ("VLfin", "eats"),
    "lee": ("VLfin", "reads"),
    "ve": ("VLfin", "sees"),
    "compra": ("VLfin", "buys"),
    "busca": ("VLfin", "seeks"),
    "quiere": ("VLfin", "wants"),
    "en": ("PREP", "in"),
    "con": ("PREP", "with"),
    "hoy": ("ADV", "today"),
    "ahora": ("ADV", "now"),
    "siempre": ("ADV", "always"),
    ".": ("FS", "."),
}

# correct form -> wrong lexical choice; wrong forms never occur in post-edits
CONFUSIONS: Dict[str, str] = {
    "perro": "can",
    "gato": "felino",
    "libro": "tomo",
    "coche": "auto",
    "casa": "hogar",
    "ciudad": "urbe",
    "carta": "misiva",
    "grande": "gran",
    "compra": "adquiere",
    "busca": "rebusca",
    "quiere": "desea",
    "hoy": "actualmente",
}

# spurious words inserted by the simulated MT system
FILLERS: Tuple[str, ...] = ("muy", "pues", "lo")
FILLER_TAGS = {"muy": "ADV", "pues": "CC", "lo": "PP"}

_MASCULINE = ("perro", "gato", "libro", "coche", "niño")
_FEMININE = ("casa", "mesa", "ciudad", "mujer", "carta")
_ADJECTIVES = {"M": ("grande", "nuevo", "viejo"), "F": ("grande", "nueva", "vieja")}
_VERBS = ("come", "lee", "ve", "compra", "busca", "quiere")
_ADVERBS = ("hoy", "ahora", "siempre")


@dataclass(frozen=True)
class ErrorRates:
    substitution: float = 0.15
    swap: float = 0.05
    insertion: float = 0.05
    deletion: float = 0.05

    def __post_init__(self):
        for name in ("substitution", "swap", "insertion", "deletion"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} rate must lie in [0, 1], got {value}")

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "ErrorRates":
        return cls(
            config.synth_substitution_rate,
            config.synth_swap_rate,
            config.synth_insertion_rate,
            config.synth_deletion_rate,
        )


def _choice(rng: np.random.Generator, options: Sequence[str]) -> str:
    return options[int(rng.integers(len(options)))]


def _noun_phrase(rng: np.random.Generator) -> List[str]:
    if rng.random() < 0.5:
        gender, noun = "M", _choice(rng, _MASCULINE)
        det = "el" if rng.random() < 0.6 else "un"
    else:
        gender, noun = "F", _choice(rng, _FEMININE)
        det = "la" if rng.random() < 0.6 else "una"
    phrase = [det, noun]
    if rng.random() < 0.4:
        phrase.append(_choice(rng, _ADJECTIVES[gender]))
    return phrase


def generate_pe_sentence(rng: np.random.Generator) -> List[str]:
    """NP verb NP [prep NP] [adverb] ."""
    tokens = _noun_phrase(rng) + [_choice(rng, _VERBS)] + _noun_phrase(rng)
    if rng.random() < 0.3:
        tokens += [_choice(rng, ("en", "con"))] + _noun_phrase(rng)
    if rng.random() < 0.3:
        tokens.append(_choice(rng, _ADVERBS))
    return tokens + ["."]


def inject_errors(
    tokens: Sequence[str], rng: np.random.Generator, rates: ErrorRates
) -> List[str]:
    """Apply substitutions, adjacent swaps, deletions and insertions in that order.

    The sentence-final period is never moved or deleted.
    """
    words = list(tokens[:-1]) if tokens and tokens[-1] == "." else list(tokens)
    final = ["."] if len(words) < len(tokens) else []

    words = [
        CONFUSIONS[w] if w in CONFUSIONS and rng.random() < rates.substitution else w
        for w in words
    ]

    k = 0
    while k + 1 < len(words):
        if rng.random() < rates.swap:
            words[k], words[k + 1] = words[k + 1], words[k]
            k += 2
        else:
            k += 1

    kept = [w for w in words if not rng.random() < rates.deletion]
    words = kept if kept else words[:1]

    result: List[str] = []
    for w in words:
        if rng.random() < rates.insertion:
            result.append(_choice(rng, FILLERS))
        result.append(w)
    return result + final


def to_source(tokens: Sequence[str]) -> List[str]:
    return [VOCABULARY[t][1] if t in VOCABULARY else t for t in tokens]


def make_triplets(n: int, rng: np.random.Generator, rates: ErrorRates) -> TripletCorpus:
    entries = []
    for _ in range(n):
        pe = generate_pe_sentence(rng)
        mt = inject_errors(pe, rng, rates)
        entries.append(Triplet(Sentence(to_source(pe)), Sentence(mt), Sentence(pe)))
    return TripletCorpus(entries)


@dataclass
class SyntheticData:
    train: TripletCorpus
    dev: TripletCorpus
    test: TripletCorpus


def make_synthetic(config: PipelineConfig, seed: Optional[int] = None) -> SyntheticData:
    """Train, dev and test triplets, reproducible from ``seed``."""
    rng = np.random.default_rng(config.mert_seed if seed is None else seed)
    rates = ErrorRates.from_config(config)
    data = SyntheticData(
        make_triplets(config.synth_train_size, rng, rates),
        make_triplets(config.synth_dev_size, rng, rates),
        make_triplets(config.synth_test_size, rng, rates),
    )
    logger.info(
        f"🧪 Generated {len(data.train)}/{len(data.dev)}/{len(data.test)} "
        f"train/dev/test triplets"
    )
    return data


def tagger_lexicon() -> Dict[str, str]:
    """POS tags for every word the generator can emit."""
    lexicon = {word: tag for word, (tag, _) in VOCABULARY.items()}
    for correct, wrong in CONFUSIONS.items():
        lexicon[wrong] = VOCABULARY[correct][0]
    lexicon.update(FILLER_TAGS)
    return lexicon


def synonym_groups() -> List[Tuple[str, str]]:
    return sorted(CONFUSIONS.items())


def write_synthetic(data: SyntheticData, out_dir: str) -> Dict[str, str]:
    """Write every split plus the tagger and synonym lexicons; returns the paths."""
    init(out_dir)
    paths: Dict[str, str] = {}
    for split in ("train", "dev", "test"):
        corpus = getattr(data, split)
        names = [os.path.join(out_dir, f"{split}.{side}") for side in ("src", "mt", "pe")]
        write_triplets(corpus, *names)
        for side, path in zip(("src", "mt", "pe"), names):
            paths[f"{split}_{side}"] = path
    paths["tagger_lexicon"] = os.path.join(out_dir, "tagger.tsv")
    write_lines(
        paths["tagger_lexicon"], (f"{w}\t{t}" for w, t in sorted(tagger_lexicon().items()))
    )
    paths["synonym_lexicon"] = os.path.join(out_dir, "synonyms.txt")
    write_lines(paths["synonym_lexicon"], (" ".join(g) for g in synonym_groups()))
    logger.info(f"💾 Synthetic corpus written to {out_dir}")
    return paths
