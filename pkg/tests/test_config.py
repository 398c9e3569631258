import pytest

from config import RunConfig, get_preset, load_run_config, parse_run_config, write_config_echo
from errors import ConfigError


def test_defaults():
    config = parse_run_config("")
    assert config == RunConfig()
    assert config.train.preset == "desk"
    assert config.aug.erode_radius == 3


def test_comments_and_blank_lines_are_ignored():
    config = parse_run_config("# header\n\nepochs = 2  # trailing\n  lr0=0.05\n")
    assert config.train.epochs == 2
    assert config.train.lr0 == 0.05


def test_values_land_in_their_sections():
    config = parse_run_config("size=32\nft_epochs=3\nhue=0.2")
    assert config.synth.size == 32
    assert config.finetune.ft_epochs == 3
    assert config.aug.hue == 0.2


@pytest.mark.parametrize(
    "text",
    [
        "epochs",
        "bogus = 1",
        "epochs = 1\nepochs = 2",
        "epochs = many",
        "size = 48",
        "preset = huge",
        "blur_sigma_min = 3",
        "batch_size = 1\nnum_points = 1",
        "sampling = masked_pool\nbatch_size = 1",
    ],
)
def test_invalid_config(text):
    with pytest.raises(ConfigError):
        parse_run_config(text)


def test_overrides_win_over_file_values():
    config = parse_run_config("size = 32", {"size": 64, "seed": 9})
    assert config.synth.size == 64
    assert config.train.seed == 9


def test_unknown_override():
    with pytest.raises(ConfigError, match="unknown"):
        parse_run_config("", {"nope": 1})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.cfg")


def test_canonical_echo_is_sorted_and_stable():
    a = parse_run_config("epochs = 2\nuse_sd = false")
    b = parse_run_config("use_sd = no\nepochs = 2")
    assert a.canonical() == b.canonical()
    assert a.digest() == b.digest()
    lines = a.canonical().splitlines()
    keys = [line.split("=", 1)[0] for line in lines]
    assert keys == sorted(keys)
    assert "use_sd=false" in lines
    assert "epochs=2" in lines


def test_digest_changes_with_values():
    assert parse_run_config("seed = 1").digest() != parse_run_config("seed = 2").digest()


def test_echo_round_trips(tmp_path):
    config = parse_run_config("epochs = 3\npreset = tiny")
    echo = write_config_echo(config, tmp_path / "out" / "model.ckpt")
    assert echo.name == "model.ckpt.config.txt"
    assert load_run_config(echo) == config


def test_presets():
    assert get_preset("tiny").channels == 8
    with pytest.raises(ConfigError, match="unknown model preset"):
        get_preset("huge")
