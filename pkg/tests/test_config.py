from __future__ import annotations

import json

import pytest

from monet.config import CountryConfig
from monet.errors import ConfigError, UnknownCountry


def test_unknown_country():
    with pytest.raises(UnknownCountry):
        CountryConfig("XX")


def test_defaults_and_specs():
    cfg = CountryConfig("ca")
    assert cfg.country == "CA"
    assert cfg.spec().formula == "log(M1) ~ log(NGDP) + weibull(log(Gold))"
    assert CountryConfig("BR").spec().family == "gaussian"
    assert CountryConfig("BR").spec().link == "log"
    assert cfg.date_range() == ("1961Q1", "2022Q4")
    filled = cfg.filled_defaults()
    assert filled["family"] == "gamma" and "ml_features" in filled


def test_yaml_and_json_round_trip(tmp_path):
    d = {"country": "UK", "seed": 7, "sampler": {"chains": 2, "warmup": 200, "draws": 300},
         "ml": {"folds": 5, "repeats": 3, "kinds": ["QRF", "BRNN"]}, "reset_replicates": 250}
    (tmp_path / "c.json").write_text(json.dumps(d))
    yml = "country: UK\nseed: 7\nsampler:\n  chains: 2\n  warmup: 200\n  draws: 300\n" \
          "ml:\n  folds: 5\n  repeats: 3\n  kinds: [QRF, BRNN]\nreset_replicates: 250\n"
    (tmp_path / "c.yaml").write_text(yml)
    a, b = CountryConfig.load(tmp_path / "c.json"), CountryConfig.load(tmp_path / "c.yaml")
    assert a == b and a.config_hash() == b.config_hash()
    assert CountryConfig.from_dict(a.as_dict()) == a
    assert a.config_hash() != CountryConfig.from_dict({**a.as_dict(), "seed": 8}).config_hash()


def test_bad_configs(tmp_path):
    with pytest.raises(ConfigError):
        CountryConfig.from_dict({"country": "US", "colour": "red"})
    with pytest.raises(ConfigError):
        CountryConfig.from_dict({"seed": 1})
    with pytest.raises(ConfigError):
        CountryConfig("US", reset_replicates=10)
    (tmp_path / "bad.yaml").write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        CountryConfig.load(tmp_path / "bad.yaml")


def test_data_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MONET_DATA_DIR", str(tmp_path))
    assert CountryConfig("US").resolved_data_path() == tmp_path / "monet_data.csv"
    assert CountryConfig("US", data_path="x.csv").resolved_data_path() == tmp_path / "x.csv"
    assert CountryConfig("US", synthetic=True).resolved_data_path() is None
