"""(c) 2025, hybrid-sape authors.
"""

import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, get_type_hints

from dotenv import dotenv_values, load_dotenv

from app.config.logging_config import setup_logger
from app.utils.errors import ConfigError

# Set up logger
logger = setup_logger(__name__)

# Load environment variables
load_dotenv()

# Process-wide settings
DATA_DIR: str = os.getenv("SAPE_DATA_DIR", "data")
DEFAULT_THREADS: int = int(os.getenv("SAPE_THREADS", "1"))
ENV_PREFIX: str = "SAPE_"

# Keys whose values are file or directory paths
PATH_KEYS = (
    "src_path",
    "mt_path",
    "pe_path",
    "dev_mt_path",
    "dev_pe_path",
    "tagger_lexicon",
    "synonym_lexicon",
    "lm_corpus_path",
    "model_dir",
)

ALIGNMENT_MODES = ("hybrid", "meteor", "statistical")


@dataclass
class PipelineConfig:
    """Every knob of the post-editing pipeline.

    Defaults follow the reference setup: phrases of at most 7 words, a
    5-gram language model and a search depth equal to the phrase limit.
    """

    # corpus
    src_path: Optional[str] = None
    mt_path: Optional[str] = None
    pe_path: Optional[str] = None
    dev_mt_path: Optional[str] = None
    dev_pe_path: Optional[str] = None
    tagger_lexicon: Optional[str] = None
    synonym_lexicon: Optional[str] = None
    lm_corpus_path: Optional[str] = None
    model_dir: str = os.path.join(DATA_DIR, "model")

    # alignment
    em_iterations: int = 5
    exact_match_limit: int = 20
    alignment_mode: str = "hybrid"
    bigram_pairs_to_rules: bool = True

    # grammar
    max_phrase_len: int = 7
    max_rule_symbols: int = 5
    min_rule_count: int = 1
    hierarchical: bool = True

    # language model
    lm_order: int = 5

    # decoding
    beam: int = 100
    search_depth: Optional[int] = None
    nbest: int = 100

    # tuning
    mert_restarts: int = 5
    mert_iterations: int = 10
    mert_seed: int = 0

    # synthetic corpus
    synth_train_size: int = 1000
    synth_dev_size: int = 100
    synth_test_size: int = 200
    synth_substitution_rate: float = 0.15
    synth_swap_rate: float = 0.05
    synth_insertion_rate: float = 0.05
    synth_deletion_rate: float = 0.05

    threads: int = DEFAULT_THREADS

    def __post_init__(self):
        if self.search_depth is None:
            self.search_depth = self.max_phrase_len
        self.validate()

    def validate(self) -> None:
        """Reject values no stage can work with."""
        if self.max_phrase_len < 1:
            raise ConfigError("max_phrase_len must be >= 1")
        if self.lm_order < 1:
            raise ConfigError("lm_order must be >= 1")
        if self.em_iterations < 1:
            raise ConfigError("em_iterations must be >= 1")
        if self.beam < 0:
            raise ConfigError("beam must be >= 0 (0 means unbounded)")
        if self.nbest < 1:
            raise ConfigError("nbest must be >= 1")
        if self.search_depth is not None and self.search_depth < 1:
            raise ConfigError("search_depth must be >= 1")
        if self.alignment_mode not in ALIGNMENT_MODES:
            raise ConfigError(
                f"alignment_mode must be one of {', '.join(ALIGNMENT_MODES)}, "
                f"got '{self.alignment_mode}'"
            )
        for name in (
            "synth_substitution_rate",
            "synth_swap_rate",
            "synth_insertion_rate",
            "synth_deletion_rate",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def fingerprint_items(self) -> Dict[str, Any]:
        """Settings that influence trained artifacts (paths and threads excluded)."""
        skip = set(PATH_KEYS) | {"threads"}
        return {k: v for k, v in self.to_dict().items() if k not in skip}


def _coerce(key: str, raw: str, target: Any) -> Any:
    """Convert a textual config value to the field's declared type."""
    text = raw.strip()
    optional = getattr(target, "__args__", None)
    if optional and type(None) in optional:
        if text == "" or text.lower() == "none":
            return None
        target = next(t for t in optional if t is not type(None))
    try:
        if target is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"invalid value for '{key}': {raw!r}") from None


def load_config(path: Optional[str] = None, **overrides: Any) -> PipelineConfig:
    """Load a flat ``key = value`` config file.

    Unknown keys are errors. ``SAPE_<KEY>`` environment variables win over the
    file, and keyword ``overrides`` win over both. Relative paths resolve
    against the directory holding the config file.
    """
    hints = get_type_hints(PipelineConfig)
    known = {f.name for f in fields(PipelineConfig)}
    values: Dict[str, Any] = {}
    base_dir = os.getcwd()

    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        base_dir = os.path.dirname(os.path.abspath(path))
        for key, raw in dotenv_values(path).items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}' in {path}")
            values[key] = _coerce(key, raw if raw is not None else "", hints[key])
        logger.info(f"⚙️  Configuration loaded from {path}")

    for key in known:
        env_value = os.getenv(ENV_PREFIX + key.upper())
        if env_value is not None:
            values[key] = _coerce(key, env_value, hints[key])

    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")
        if value is not None:
            values[key] = value

    for key in PATH_KEYS:
        value = values.get(key)
        if value and not os.path.isabs(value):
            values[key] = os.path.normpath(os.path.join(base_dir, value))

    return PipelineConfig(**values)
