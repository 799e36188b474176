import pytest

from tdlescan.config import ConfigError, RunConfig, parse_ic_range, parse_keyvalue


def test_parse_keyvalue_comments_and_case():
    vals = parse_keyvalue("# ring\nN = 8\n; other\nalpha = 0.5  # strong\n")
    assert vals == {"n": "8", "alpha": "0.5"}


def test_load_and_override(tmp_path):
    p = tmp_path / "ring.cfg"
    p.write_text("n = 8\nradius = 2\nalpha = 0.75\nic_range = 2\nic_seed = 4\n")
    cfg = RunConfig.load(p)
    assert (cfg.n, cfg.radius, cfg.alpha, cfg.ic_range, cfg.ic_seed) == (8, 2, 0.75, (-2.0, 2.0), 4)
    cfg2 = cfg.override({"alpha": 1.5, "radius": None})
    assert cfg2.alpha == 1.5 and cfg2.radius == 2
    spec = cfg2.spec(radius=3)
    assert spec.radius == 3 and spec.n == 8
    assert cfg.run_options().ic_range == (-2.0, 2.0)
    assert cfg.as_dict()["ic_range"] == [-2.0, 2.0]


@pytest.mark.parametrize("text,key", [
    ("n = 6\nradius = 4\n", "radius"),
    ("n = six\n", "n"),
    ("n = 6\nomega = 0\n", "omega"),
    ("n = 6\nf = -1\n", "f"),
    ("n = 6\nbogus = 1\n", "bogus"),
    ("n = 6\nic_range = 1, 0\n", "ic_range"),
    ("n = 1\n", "n"),
    ("n = 6.5\n", "n"),
])
def test_malformed_config_names_key(tmp_path, text, key):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        RunConfig.load(p)
    assert err.value.key == key
    assert key in str(err.value)


def test_ic_range_forms():
    assert parse_ic_range("r", "-1, 3") == (-1.0, 3.0)
    assert parse_ic_range("r", "0.5") == (-0.5, 0.5)
    assert parse_ic_range("r", (0, 1)) == (0.0, 1.0)
