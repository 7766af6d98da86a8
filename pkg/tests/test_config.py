import pytest

from magflow.config import (SCHEMAS, ConfigError, config_hash, defaults, dump_config, load_config,
                            parse_config)


@pytest.mark.parametrize("command", sorted(SCHEMAS))
def test_dump_parse_round_trip(command):
    cfg = defaults(command)
    assert parse_config(dump_config(cfg), command) == cfg


def test_parse_values_and_comments():
    text = """
    # a comment
    schema = 1
    ells = 1, 2.5   # trailing comment
    bs = 0.1
    winding = 2
    """
    cfg = parse_config(text, "mls-scaling")
    assert cfg["ells"] == (1.0, 2.5) and cfg["bs"] == (0.1,) and cfg["winding"] == 2
    assert cfg["tolerance"] == defaults("mls-scaling")["tolerance"]


def test_booleans():
    for text, val in (("true", True), ("no", False), ("1", True)):
        assert parse_config(f"schema = 1\nperturbed = {text}", "burns-build")["perturbed"] is val


@pytest.mark.parametrize("text, message", [
    ("b = 0.5", "schema"),
    ("schema = 2", "schema version"),
    ("schema = 1\nbogus = 3", "unknown key"),
    ("schema = 1\nb = abc", "bad float"),
    ("schema = 1\nb = nan", "finite"),
    ("schema = 1\njust text", "key = value"),
])
def test_parse_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text, "simulate")


def test_unknown_command():
    with pytest.raises(ConfigError):
        defaults("nope")


def test_load_config(tmp_path):
    assert load_config(None, "simulate") == defaults("simulate")
    path = tmp_path / "c.txt"
    path.write_text("schema = 1\nhorizon = 2\n")
    assert load_config(str(path), "simulate")["horizon"] == 2.0
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.txt"), "simulate")


def test_hash_is_stable_and_sensitive():
    cfg = defaults("psl-conjugacy")
    h = config_hash("psl-conjugacy", cfg)
    assert h == config_hash("psl-conjugacy", dict(reversed(list(cfg.items()))))
    assert h != config_hash("psl-conjugacy", {**cfg, "seed": 1})
    assert len(h) == 64
