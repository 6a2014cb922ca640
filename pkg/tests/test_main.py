"""(c) 2025, hybrid-sape authors.
"""

import os

from conftest import MT_LINE, write_file

from app.main import main
from app.utils.errors import EXIT_DATA, EXIT_USAGE


def _write_config(tmp_path, example_files, **extra):
    settings = dict(example_files, model_dir=str(tmp_path / "model"), lm_order=3, beam=10)
    settings.update(extra)
    return write_file(tmp_path / "sape.cfg", [f"{k} = {v}" for k, v in settings.items()])


def test_usage_errors_exit_one(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["translate"]) == EXIT_USAGE
    assert main(["decode", "--input", "x"]) == EXIT_USAGE
    config = write_file(tmp_path / "bad.cfg", ["no_such_key = 1"])
    assert main(["train", "--config", config]) == EXIT_USAGE
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_data_errors_exit_two(tmp_path):
    hyp = write_file(tmp_path / "hyp", ["a b"])
    ref = write_file(tmp_path / "ref", ["a b", "c"])
    assert main(["evaluate", "--hyp", hyp, "--ref", ref]) == EXIT_DATA
    paths = {k: write_file(tmp_path / k, []) for k in ("src_path", "mt_path", "pe_path")}
    config = _write_config(tmp_path, paths)
    assert main(["train", "--config", config]) == EXIT_DATA


def test_evaluate_prints_scores(tmp_path, capsys):
    ref = write_file(tmp_path / "ref", ["el perro come mucho ."])
    base = write_file(tmp_path / "base", ["el perro come ."])
    assert main(["evaluate", "--hyp", ref, "--ref", ref]) == 0
    assert capsys.readouterr().out.strip() == "BLEU=100.00 METEOR=99.60 TER=0.00"

    assert main(["evaluate", "--hyp", ref, "--ref", ref, "--baseline", base]) == 0
    scores, gains = capsys.readouterr().out.strip().split("\n")
    assert scores.startswith("BLEU=100.00")
    assert [item.split("=")[0] for item in gains.split()] == [
        "BLEU_GAIN",
        "METEOR_GAIN",
        "TER_GAIN",
    ]


def test_train_then_decode(tmp_path, example_files):
    config = _write_config(tmp_path, example_files)
    assert main(["train", "--config", config]) == 0
    assert os.path.isfile(tmp_path / "model" / "rules.gz")

    source = write_file(tmp_path / "input.mt", [MT_LINE])
    output = tmp_path / "output.pe"
    assert main(["decode", "--config", config, "--input", source, "--output", str(output)]) == 0
    assert len(output.read_text(encoding="utf-8").splitlines()) == 1

    # a model directory without artifacts is a data error
    empty = tmp_path / "empty"
    empty.mkdir()
    args = ["decode", "--config", config, "--model-dir", str(empty)]
    assert main(args + ["--input", source, "--output", str(output)]) == EXIT_DATA


def test_synth(tmp_path):
    out_dir = tmp_path / "synth"
    config = write_file(
        tmp_path / "synth.cfg",
        ["synth_train_size = 10", "synth_dev_size = 2", "synth_test_size = 2"],
    )
    assert main(["synth", "--config", config, "--out-dir", str(out_dir), "--seed", "1"]) == 0
    assert len((out_dir / "train.pe").read_text(encoding="utf-8").splitlines()) == 10
