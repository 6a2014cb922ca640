"""(c) 2025, hybrid-sape authors.

Pipeline Flow:
--------------
1. Load and tokenize the training triplets, tag both MT and PE sides.
2. Align tag bigrams to collect bigram segments; train IBM-1 in both
   directions on the (mt, pe) pairs plus those segments.
3. Build the hybrid alignment of every pair and the merged alignment table.
4. Extract hierarchical rules, smooth and score them.
5. Train the n-gram language model on the post-edited side.
6. Write default weights, tune them with MERT when a dev set is configured.
7. Record input and artifact checksums in the manifest.

Every stage writes into a scratch directory that replaces the model
directory only once all stages have succeeded.
"""

import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from app.config.logging_config import setup_logger
from app.config.settings import PipelineConfig
from app.services.corpus import (
    LexiconTagger,
    Sentence,
    TaggerInterface,
    TripletCorpus,
    corpus_stats,
    load_lexicon_tagger,
    load_pairs,
    load_triplets,
    read_sentences,
    write_sentences,
    write_tagged,
)
from app.services.decoder import WeightVector, decode_corpus, nbest_lines
from app.services.edit_aligner import Alignment, SynonymLexicon
from app.services.evaluate import EvalReport, evaluate_files
from app.services.hybrid_align import (
    AlignmentTable,
    AugmentedCorpus,
    align_pair,
    bigram_segments,
    build_training_views,
    tag_corpus,
)
from app.services.ngram_lm import NGramLM, load_arpa, train_lm, write_arpa
from app.services.rule_extract import RuleTable, build_rule_table
from app.services.stat_aligner import StatAligner, TranslationTable
from app.services.synthetic import make_synthetic, write_synthetic
from app.services.tuner import TuneResult, tune
from app.utils.errors import (
    ConfigError,
    ModelError,
    PipelineError,
    SapeError,
)
from app.utils.helpers import file_checksum, generate_hash, init, write_lines

logger = setup_logger(__name__)

# Model directory artifacts
RULES_FILE = "rules.gz"
LEX_FILE = "lex.tsv"
LEX_REV_FILE = "lex.rev.tsv"
LM_FILE = "lm.arpa"
WEIGHTS_FILE = "weights.tsv"
MANIFEST_FILE = "manifest.tsv"
ALIGNMENT_TABLE_FILE = "alignment_table.txt"
ALIGNMENTS_FILE = "alignments.txt"
SEGMENTS_FILE = "segments.txt"

# Config keys naming input files that feed a trained model
INPUT_KEYS = (
    "src_path",
    "mt_path",
    "pe_path",
    "dev_mt_path",
    "dev_pe_path",
    "tagger_lexicon",
    "synonym_lexicon",
    "lm_corpus_path",
)


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Run a pipeline stage, reporting failures under its name."""
    logger.info(f"▶️  Stage '{name}'")
    try:
        yield
    except PipelineError:
        raise
    except (SapeError, ValueError, OSError) as e:
        logger.error(f"❌ Stage '{name}' failed: {e}")
        raise PipelineError(name, e) from e


def _require(config: PipelineConfig, *keys: str) -> None:
    missing = [k for k in keys if not getattr(config, k)]
    if missing:
        raise ConfigError(f"Missing required config values: {', '.join(missing)}")


def load_tagger(config: PipelineConfig) -> TaggerInterface:
    """The lexicon tagger, or the regex fallback alone when no lexicon is set."""
    if config.tagger_lexicon:
        return load_lexicon_tagger(config.tagger_lexicon)
    logger.warning("⚠️  No tagger lexicon configured, tagging with fallback rules only")
    return LexiconTagger({})


def load_training_corpus(config: PipelineConfig) -> TripletCorpus:
    _require(config, "src_path", "mt_path", "pe_path")
    corpus = load_triplets(config.src_path, config.mt_path, config.pe_path)
    logger.info(f"📊 Corpus statistics: {corpus_stats(corpus)}")
    return corpus


def run_preprocess(config: PipelineConfig, out_dir: Optional[str] = None) -> Dict[str, int]:
    """Write tokenized and tagged MT and PE sides; returns corpus statistics."""
    out_dir = out_dir or config.model_dir
    with stage("preprocess"):
        corpus = load_training_corpus(config)
        tagger = load_tagger(config)
        init(out_dir)
        tagged = tag_corpus(corpus, tagger)
        write_sentences(os.path.join(out_dir, "train.mt.tok"), (e.mt for e in corpus))
        write_sentences(os.path.join(out_dir, "train.pe.tok"), (e.pe for e in corpus))
        write_tagged(os.path.join(out_dir, "train.mt.tag"), (mt for mt, _ in tagged))
        write_tagged(os.path.join(out_dir, "train.pe.tag"), (pe for _, pe in tagged))
    return corpus_stats(corpus)


@dataclass
class TrainingAlignment:
    """Everything rule extraction needs from the alignment stage."""

    augmented: AugmentedCorpus
    aligner: StatAligner
    segment_alignments: List[Alignment] = field(default_factory=list)
    use_segments: bool = True

    def pairs(self) -> List[Tuple[Sentence, Sentence]]:
        return self.augmented.training_pairs(self.use_segments)

    def alignments(self) -> List[Alignment]:
        extra = self.segment_alignments if self.use_segments else []
        return self.augmented.alignments + extra


def align_training_data(
    config: PipelineConfig,
    corpus: TripletCorpus,
    tagger: TaggerInterface,
    lexicon: Optional[SynonymLexicon] = None,
) -> TrainingAlignment:
    """Hybrid alignment of the corpus and of its bigram segments."""
    tagged = tag_corpus(corpus, tagger)
    bigram_tables = bigram_segments(tagged, lexicon)
    segments = [(e.mt_phrase, e.pe_phrase) for table in bigram_tables for e in table]

    em_pairs = [(mt.tokens, pe.tokens) for mt, pe in corpus.pairs()]
    if config.bigram_pairs_to_rules:
        em_pairs += segments
    aligner = StatAligner.train(em_pairs, config.em_iterations)

    def statistical(mt: Sequence[str], pe: Sequence[str]) -> Optional[Alignment]:
        return None if config.alignment_mode == "meteor" else aligner.align(mt, pe)

    stat_alignments = [statistical(mt, pe) for mt, pe in corpus.pairs()]
    augmented = build_training_views(
        corpus,
        tagger,
        lexicon,
        stat_alignments,
        config.alignment_mode,
        config.exact_match_limit,
        tagged,
        bigram_tables,
    )
    segment_alignments = []
    if config.bigram_pairs_to_rules:
        segment_alignments = [
            align_pair(
                mt,
                pe,
                statistical(mt, pe),
                lexicon,
                config.alignment_mode,
                config.exact_match_limit,
            )
            for mt, pe in augmented.bigram_segments
        ]
    return TrainingAlignment(augmented, aligner, segment_alignments, config.bigram_pairs_to_rules)


def write_alignment_artifacts(aligned: TrainingAlignment, out_dir: str) -> None:
    aligned.aligner.forward.save(os.path.join(out_dir, LEX_FILE))
    aligned.aligner.reverse.save(os.path.join(out_dir, LEX_REV_FILE))
    aligned.augmented.table.save(os.path.join(out_dir, ALIGNMENT_TABLE_FILE))
    write_lines(
        os.path.join(out_dir, ALIGNMENTS_FILE), (a.to_pharaoh() for a in aligned.alignments())
    )
    write_lines(
        os.path.join(out_dir, SEGMENTS_FILE),
        (f"{mt.render()} ||| {pe.render()}" for mt, pe in aligned.augmented.bigram_segments),
    )


def run_align(config: PipelineConfig, out_dir: Optional[str] = None) -> TrainingAlignment:
    """Align the training corpus and write tables and alignments to ``out_dir``."""
    out_dir = out_dir or config.model_dir
    with stage("corpus"):
        corpus = load_training_corpus(config)
        tagger = load_tagger(config)
        lexicon = SynonymLexicon.load(config.synonym_lexicon)
    with stage("align"):
        init(out_dir)
        aligned = align_training_data(config, corpus, tagger, lexicon)
        write_alignment_artifacts(aligned, out_dir)
    return aligned


def _read_alignment_artifacts(
    config: PipelineConfig, model_dir: str
) -> Tuple[List[Tuple[Sentence, Sentence]], List[Alignment], TranslationTable, TranslationTable]:
    """Training pairs and alignments written by an earlier ``align`` run."""
    paths = {
        name: os.path.join(model_dir, name)
        for name in (ALIGNMENTS_FILE, SEGMENTS_FILE, LEX_FILE, LEX_REV_FILE)
    }
    for name, path in paths.items():
        if not os.path.isfile(path):
            raise ModelError(f"missing alignment artifact '{name}' in {model_dir}", artifact=name)

    pairs = load_training_corpus(config).pairs()
    if config.bigram_pairs_to_rules:
        table = AlignmentTable.load(paths[SEGMENTS_FILE], origin="bigram-pos")
        pairs += [(Sentence(mt), Sentence(pe)) for mt, pe in table.pairs()]
    with open(paths[ALIGNMENTS_FILE], encoding="utf-8") as handle:
        alignments = [Alignment.from_pharaoh(line) for line in handle]
    if len(alignments) != len(pairs):
        raise ModelError(
            f"{paths[ALIGNMENTS_FILE]} holds {len(alignments)} alignments for {len(pairs)} pairs",
            artifact=ALIGNMENTS_FILE,
        )
    forward = TranslationTable.load(paths[LEX_FILE])
    reverse = TranslationTable.load(paths[LEX_REV_FILE])
    return pairs, alignments, forward, reverse


def run_extract(
    config: PipelineConfig,
    aligned: Optional[TrainingAlignment] = None,
    out_dir: Optional[str] = None,
) -> RuleTable:
    """Extract and score rules, from ``aligned`` or the alignment artifacts on disk."""
    out_dir = out_dir or config.model_dir
    with stage("extract"):
        if aligned is None:
            pairs, alignments, forward, reverse = _read_alignment_artifacts(config, out_dir)
        else:
            pairs, alignments = aligned.pairs(), aligned.alignments()
            forward, reverse = aligned.aligner.forward, aligned.aligner.reverse
        rules = build_rule_table(
            [(mt.tokens, pe.tokens) for mt, pe in pairs],
            alignments,
            forward,
            reverse,
            config.max_phrase_len,
            config.max_rule_symbols,
            config.min_rule_count,
            config.hierarchical,
            config.threads,
        )
        init(out_dir)
        rules.save(os.path.join(out_dir, RULES_FILE))
    return rules


def run_train_lm(config: PipelineConfig, out_dir: Optional[str] = None) -> NGramLM:
    """Train the LM on ``lm_corpus_path`` or, when unset, the post-edited side."""
    out_dir = out_dir or config.model_dir
    with stage("train-lm"):
        if config.lm_corpus_path:
            sentences = read_sentences(config.lm_corpus_path)
        else:
            _require(config, "pe_path")
            sentences = read_sentences(config.pe_path)
        lm = train_lm([s.tokens for s in sentences], config.lm_order)
        init(out_dir)
        write_arpa(lm, os.path.join(out_dir, LM_FILE))
    return lm


@dataclass
class Model:
    rules: RuleTable
    lm: NGramLM
    weights: WeightVector


def load_model(model_dir: str) -> Model:
    """Load rules, LM and weights; a missing artifact is reported by name."""
    for name in (RULES_FILE, LM_FILE, WEIGHTS_FILE):
        if not os.path.isfile(os.path.join(model_dir, name)):
            raise ModelError(f"missing model artifact '{name}' in {model_dir}", artifact=name)
    return Model(
        RuleTable.load(os.path.join(model_dir, RULES_FILE)),
        load_arpa(os.path.join(model_dir, LM_FILE)),
        WeightVector.load(os.path.join(model_dir, WEIGHTS_FILE)),
    )


def _tune_model(config: PipelineConfig, model: Model, model_dir: str) -> TuneResult:
    _require(config, "dev_mt_path", "dev_pe_path")
    dev = load_pairs(config.dev_mt_path, config.dev_pe_path)
    result = tune(
        [(mt.tokens, pe.tokens) for mt, pe in dev],
        model.rules,
        model.lm,
        model.weights,
        nbest=config.nbest,
        restarts=config.mert_restarts,
        iterations=config.mert_iterations,
        seed=config.mert_seed,
        beam=config.beam,
        search_depth=config.search_depth,
        threads=config.threads,
    )
    result.weights.save(os.path.join(model_dir, WEIGHTS_FILE))
    return result


def run_tune(config: PipelineConfig, model_dir: Optional[str] = None) -> TuneResult:
    """Tune the weights of a trained model on the dev set and refresh its manifest."""
    model_dir = model_dir or config.model_dir
    with stage("tune"):
        result = _tune_model(config, load_model(model_dir), model_dir)
        write_manifest(model_dir, config)
    return result


def input_checksums(config: PipelineConfig) -> Dict[str, str]:
    return {
        key: file_checksum(getattr(config, key))
        for key in INPUT_KEYS
        if getattr(config, key) and os.path.isfile(getattr(config, key))
    }


def manifest_items(model_dir: str, config: PipelineConfig) -> Dict[str, str]:
    """Input checksums, config fingerprint and artifact checksums."""
    items = {f"input.{k}": v for k, v in input_checksums(config).items()}
    items["config"] = generate_hash(config.fingerprint_items())
    for name in sorted(os.listdir(model_dir)):
        path = os.path.join(model_dir, name)
        if name != MANIFEST_FILE and os.path.isfile(path):
            items[f"artifact.{name}"] = file_checksum(path)
    return items


def write_manifest(model_dir: str, config: PipelineConfig) -> None:
    items = manifest_items(model_dir, config)
    write_lines(
        os.path.join(model_dir, MANIFEST_FILE), (f"{k}\t{v}" for k, v in sorted(items.items()))
    )


def read_manifest(model_dir: str) -> Dict[str, str]:
    path = os.path.join(model_dir, MANIFEST_FILE)
    if not os.path.isfile(path):
        raise ModelError(
            f"missing model artifact '{MANIFEST_FILE}' in {model_dir}", artifact=MANIFEST_FILE
        )
    items = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            key, _, value = line.rstrip("\n").partition("\t")
            if key:
                items[key] = value
    return items


def is_stale(model_dir: str, config: PipelineConfig) -> bool:
    """True unless the manifest matches the current inputs, config and artifacts."""
    try:
        recorded = read_manifest(model_dir)
    except ModelError:
        return True
    return recorded != manifest_items(model_dir, config)


def _replace_dir(scratch: str, target: str) -> None:
    """Move ``scratch`` into place as ``target``, dropping any previous contents."""
    if os.path.isdir(target):
        backup = tempfile.mkdtemp(prefix=".old-", dir=os.path.dirname(target))
        os.rmdir(backup)
        os.replace(target, backup)
        os.replace(scratch, target)
        shutil.rmtree(backup, ignore_errors=True)
    else:
        os.replace(scratch, target)


def run_train(config: PipelineConfig, force: bool = False, tune_weights: bool = True) -> str:
    """Train a complete model into ``config.model_dir``; returns its path.

    Nothing is written to the model directory unless every stage succeeds.
    An up-to-date model is left alone unless ``force`` is set.
    """
    model_dir = os.path.abspath(config.model_dir)
    if not force and not is_stale(model_dir, config):
        logger.info(f"✅ Model in {model_dir} is up to date, nothing to do")
        return model_dir

    parent = os.path.dirname(model_dir)
    init(parent)
    scratch = tempfile.mkdtemp(prefix=".model-", dir=parent)
    try:
        aligned = run_align(config, scratch)
        run_extract(config, aligned, scratch)
        run_train_lm(config, scratch)
        with stage("weights"):
            WeightVector().save(os.path.join(scratch, WEIGHTS_FILE))
        if tune_weights and config.dev_mt_path and config.dev_pe_path:
            with stage("tune"):
                _tune_model(config, load_model(scratch), scratch)
        with stage("manifest"):
            write_manifest(scratch, config)
        _replace_dir(scratch, model_dir)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise

    logger.info(f"✅ Training completed, model written to {model_dir}")
    return model_dir


def run_ape(
    config: PipelineConfig,
    model_dir: Optional[str],
    input_path: str,
    output_path: str,
    nbest_path: Optional[str] = None,
) -> int:
    """Post-edit ``input_path`` line by line; returns the number of lines written."""
    model_dir = model_dir or config.model_dir
    with stage("decode"):
        model = load_model(model_dir)
        sentences = read_sentences(input_path)
        nbest = config.nbest if nbest_path else 1
        results = decode_corpus(
            [s.tokens for s in sentences],
            model.rules,
            model.lm,
            model.weights,
            config.beam,
            config.search_depth,
            nbest,
            config.threads,
        )
        write_lines(output_path, (d[0].render() for d in results))
        if nbest_path:
            write_lines(
                nbest_path,
                (line for i, d in enumerate(results) for line in nbest_lines(i, d)),
            )
    logger.info(f"✅ Post-edited {len(results)} lines into {output_path}")
    return len(results)


def run_evaluate(
    hyp_path: str,
    ref_path: str,
    synonyms: Optional[str] = None,
    baseline_path: Optional[str] = None,
    threads: int = 1,
) -> Tuple[EvalReport, Optional[Dict[str, float]]]:
    """Score ``hyp_path``; with a baseline also the relative improvement over it."""
    with stage("evaluate"):
        lexicon = SynonymLexicon.load(synonyms)
        report = evaluate_files(hyp_path, ref_path, lexicon, threads)
        gains = None
        if baseline_path:
            baseline = evaluate_files(baseline_path, ref_path, lexicon, threads)
            gains = report.relative_to(baseline)
    return report, gains


def run_synth(config: PipelineConfig, out_dir: str, seed: Optional[int] = None) -> Dict[str, str]:
    with stage("synth"):
        return write_synthetic(make_synthetic(config, seed), out_dir)
