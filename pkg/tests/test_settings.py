"""(c) 2025, hybrid-sape authors.
"""

import os

import pytest

from app.config.settings import PipelineConfig, load_config
from app.utils.errors import EXIT_USAGE, ConfigError
from app.utils.helpers import generate_hash


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("SAPE_") and key != "SAPE_LOG_LEVEL":
            monkeypatch.delenv(key, raising=False)


def test_defaults():
    config = PipelineConfig()
    assert config.max_phrase_len == 7
    assert config.lm_order == 5
    assert config.search_depth == 7
    assert config.beam == 100
    assert config.nbest == 100
    assert config.alignment_mode == "hybrid"
    assert config.bigram_pairs_to_rules is True


def test_search_depth_follows_phrase_limit():
    assert PipelineConfig(max_phrase_len=4).search_depth == 4
    assert PipelineConfig(max_phrase_len=4, search_depth=9).search_depth == 9


@pytest.mark.parametrize(
    "overrides",
    [
        {"max_phrase_len": 0},
        {"lm_order": 0},
        {"beam": -1},
        {"nbest": 0},
        {"alignment_mode": "berkeley"},
        {"synth_swap_rate": 1.5},
    ],
)
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        PipelineConfig(**overrides)


def test_load_config_file(tmp_path):
    path = tmp_path / "sape.conf"
    path.write_text(
        "# training data\n"
        "mt_path = corpus/train.mt\n"
        "max_phrase_len = 5\n"
        "bigram_pairs_to_rules = false\n"
        "synth_swap_rate = 0.25\n"
        "search_depth = none\n",
        encoding="utf-8",
    )
    config = load_config(str(path))
    assert config.mt_path == os.path.join(str(tmp_path), "corpus", "train.mt")
    assert config.max_phrase_len == 5
    assert config.search_depth == 5
    assert config.bigram_pairs_to_rules is False
    assert config.synth_swap_rate == 0.25


def test_unknown_key_is_an_error(tmp_path):
    path = tmp_path / "sape.conf"
    path.write_text("max_phrase_length = 5\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="max_phrase_length"):
        load_config(str(path))


def test_bad_value_is_an_error(tmp_path):
    path = tmp_path / "sape.conf"
    path.write_text("beam = wide\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(path))
    assert excinfo.value.exit_code == EXIT_USAGE


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/sape.conf")


def test_precedence(tmp_path, monkeypatch):
    path = tmp_path / "sape.conf"
    path.write_text("beam = 10\nnbest = 20\nlm_order = 3\n", encoding="utf-8")
    monkeypatch.setenv("SAPE_BEAM", "30")
    monkeypatch.setenv("SAPE_NBEST", "40")
    config = load_config(str(path), nbest=50, lm_order=None)
    assert config.beam == 30
    assert config.nbest == 50
    assert config.lm_order == 3


def test_fingerprint_ignores_paths_and_threads():
    a = PipelineConfig(mt_path="/a/train.mt", threads=1)
    b = PipelineConfig(mt_path="/b/train.mt", threads=8)
    assert generate_hash(a.fingerprint_items()) == generate_hash(b.fingerprint_items())
    c = PipelineConfig(max_phrase_len=5)
    assert generate_hash(a.fingerprint_items()) != generate_hash(c.fingerprint_items())
