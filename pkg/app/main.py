# app/main.py

"""(c) 2025, hybrid-sape authors.


Script Flow:
--------------
1. Set up the project root and update the Python path.
2. Parse the subcommand and its options.
3. Load the pipeline configuration (file, SAPE_* environment, command line).
4. Run the requested pipeline stage:
   - preprocess: tokenize and tag the training corpus
   - align: hybrid word alignment, lexical tables, alignment table
   - extract: hierarchical rule extraction and scoring
   - train-lm: n-gram language model on the post-edited side
   - tune: MERT on the development set
   - decode: post-edit an MT file with a trained model
   - evaluate: BLEU, METEOR and TER of a hypothesis file
   - synth: write a synthetic training/dev/test corpus
   - train: every training stage end to end
5. Exit 0 on success, 1 on usage errors, 2 on data errors.
"""

import sys
from pathlib import Path

# Add the project root directory to the Python path to allow local imports
project_root = str(Path(__file__).parent.parent)
sys.path.insert(0, project_root)

import argparse
from typing import List, Optional

from app.config.logging_config import setup_logger
from app.config.settings import DEFAULT_THREADS, load_config
from app.services.pipeline import (
    run_align,
    run_ape,
    run_evaluate,
    run_extract,
    run_preprocess,
    run_synth,
    run_train,
    run_train_lm,
    run_tune,
)
from app.utils.errors import EXIT_USAGE, SapeError

# Set up the logger using the project's logging configuration
logger = setup_logger(__name__)


class UsageError(Exception):
    """Bad command line arguments (exit code 1)."""


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as exceptions so they map to exit code 1."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="hybrid-sape", description="Statistical automatic post-editing")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' configuration file")
    common.add_argument("--threads", type=int, help=f"worker processes (default {DEFAULT_THREADS})")
    common.add_argument("--model-dir", help="model directory (overrides model_dir)")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    sub.add_parser("preprocess", parents=[common], help="tokenize and tag the training corpus")
    sub.add_parser("align", parents=[common], help="hybrid word alignment")
    sub.add_parser("extract", parents=[common], help="extract and score rules")
    sub.add_parser("train-lm", parents=[common], help="train the language model")
    sub.add_parser("tune", parents=[common], help="MERT on the development set")

    decode = sub.add_parser("decode", parents=[common], help="post-edit an MT file")
    decode.add_argument("--input", required=True, help="tokenized MT output, one sentence per line")
    decode.add_argument("--output", required=True, help="post-edited output file")
    decode.add_argument("--nbest-file", help="also write n-best lists here")

    evaluate = sub.add_parser("evaluate", parents=[common], help="score a hypothesis file")
    evaluate.add_argument("--hyp", required=True)
    evaluate.add_argument("--ref", required=True)
    evaluate.add_argument("--synonyms", help="synonym lexicon for METEOR")
    evaluate.add_argument("--baseline", help="baseline hypotheses to compare against")

    synth = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--seed", type=int)

    train = sub.add_parser("train", parents=[common], help="train a model end to end")
    train.add_argument("--force", action="store_true", help="retrain an up-to-date model")
    train.add_argument("--no-tune", action="store_true", help="keep the default weights")
    return parser


def run(args: argparse.Namespace) -> None:
    config = load_config(args.config, threads=args.threads, model_dir=args.model_dir)

    if args.command == "preprocess":
        stats = run_preprocess(config)
        logger.info(f"📚 {stats}")
    elif args.command == "align":
        run_align(config)
    elif args.command == "extract":
        run_extract(config)
    elif args.command == "train-lm":
        run_train_lm(config)
    elif args.command == "tune":
        result = run_tune(config)
        logger.info(f"🎯 Tuned dev BLEU {result.bleu:.2f}")
    elif args.command == "decode":
        run_ape(config, None, args.input, args.output, args.nbest_file)
    elif args.command == "evaluate":
        report, gains = run_evaluate(
            args.hyp,
            args.ref,
            args.synonyms or config.synonym_lexicon,
            args.baseline,
            config.threads,
        )
        print(report.render())
        if gains is not None:
            print(" ".join(f"{k.upper()}_GAIN={v:+.2f}%" for k, v in gains.items()))
    elif args.command == "synth":
        paths = run_synth(config, args.out_dir, args.seed)
        logger.info(f"🧪 Wrote {len(paths)} files to {args.out_dir}")
    elif args.command == "train":
        run_train(config, force=args.force, tune_weights=not args.no_tune)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(f"❌ {e}")
        return EXIT_USAGE

    try:
        run(args)
    except SapeError as e:
        logger.error(f"❌ {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
