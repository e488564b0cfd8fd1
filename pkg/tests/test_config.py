import pytest

from stf_ee.config import RunConfig, load_config, require_paths
from stf_ee.errors import ConfigError


def test_defaults_without_file():
    config = load_config(None)
    assert config.seed == 0
    assert config.stf.total_epochs == 70
    assert config.stf.stage1_epochs == 10
    assert config.stf.labeled_batch_size == 16
    assert config.stf.stage2_batch_size == 10
    assert config.stf.vanilla_threshold == 0.9
    assert config.corpus.n_labeled == 900
    assert config.corpus.n_unlabeled == 2800
    assert config.corpus.n_heldout == 100
    assert config.scorer.num_attention_layers == 2


def test_file_values_and_types(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        """
[run]
seed = 7
out = "runs/demo"

[corpus]
n_labeled = 50
label_noise_rate = 0.25

[stf]
total_epochs = 12
certainty_threshold = 0.8

[scorer]
use_path = false
"""
    )
    config = load_config(str(path))
    assert config.seed == 7
    assert config.out == "runs/demo"
    assert config.corpus.n_labeled == 50
    assert config.corpus.label_noise_rate == 0.25
    assert config.stf.total_epochs == 12
    assert config.stf.certainty_threshold == 0.8
    assert config.scorer.use_path is False


def test_seed_propagates_to_sections(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[run]\nseed = 5\n")
    config = load_config(str(path))
    assert config.corpus.seed == 5
    assert config.stf.seed == 5


def test_explicit_section_seed_wins(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[run]\nseed = 5\n\n[corpus]\nseed = 9\n")
    config = load_config(str(path))
    assert config.corpus.seed == 9
    assert config.stf.seed == 5


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[stf]\nnot_a_knob = 3\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_invalid_value_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[stf]\ntotal_epochs = banana\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_section_validation_applies(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[stf]\nvanilla_threshold = 0.1\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_file_rejected():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")


def test_overrides():
    config = load_config(None, {"seed": 3, "stf.total_epochs": 4, "corpus.n_labeled": 25})
    assert config.seed == 3
    assert config.stf.total_epochs == 4
    assert config.corpus.n_labeled == 25


def test_hash_covers_semantics_not_output():
    a = load_config(None, {"seed": 1, "out": "runs/a"})
    b = load_config(None, {"seed": 1, "out": "runs/b"})
    c = load_config(None, {"seed": 2, "out": "runs/a"})
    assert a.hash() == b.hash()
    assert a.hash() != c.hash()


def test_require_paths(tmp_path):
    config = RunConfig()
    with pytest.raises(ConfigError):
        require_paths(config, "labeled")
    config.paths.labeled = str(tmp_path / "missing.jsonl")
    with pytest.raises(ConfigError):
        require_paths(config, "labeled")
    (tmp_path / "ok.jsonl").write_text("")
    config.paths.labeled = str(tmp_path / "ok.jsonl")
    require_paths(config, "labeled")
