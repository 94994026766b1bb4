from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nflas.config import CATALOG, ConfigError, echo_config, load_config, parse_config

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.toml"))

MINIMAL = """
scenario = "E-L2"

[ofdm]
fc = 30e9

[[arrays]]
name = "elaa"
role = "bs"
n_elements = 128
center = [0.0, 0.0, 0.0]

[ue]
position = [2.898, -0.777, 0.0]
"""


def test_minimal_single_bs_config():
    cfg = parse_config(MINIMAL)
    assert cfg.scenario == "E-L2"
    assert cfg.ofdm.bandwidth == 0 and cfg.ofdm.n_subcarriers == 1
    arr = cfg.arrays[0].build(cfg.ofdm.fc)
    assert arr.n_elements == 128
    step = np.linalg.norm(np.diff(arr.element_positions, axis=0), axis=1)
    np.testing.assert_allclose(step, arr.wavelength / 2)
    assert cfg.seeds == (1,)


def test_out_of_scope_and_unknown_ids():
    with pytest.raises(ConfigError, match="declared out of scope"):
        parse_config(MINIMAL.replace('"E-L2"', '"E-L3"'))
    with pytest.raises(ConfigError, match="unknown id"):
        parse_config(MINIMAL.replace('"E-L2"', '"X-9"'))
    assert {e.id for e in CATALOG if e.supported} == {"E-L1", "E-L2", "E-S1", "R-L1"}


@given(n=st.integers(1, 50))
def test_seeds_default_and_echo(n):
    cfg = parse_config(f"n_trials = {n}\n" + MINIMAL)
    assert cfg.seeds == tuple(range(1, n + 1))
    assert "seeds = [" in echo_config(cfg)
    assert parse_config(echo_config(cfg)) == cfg


def test_seed_count_must_match():
    with pytest.raises(ConfigError, match="seeds"):
        parse_config("n_trials = 2\nseeds = [1]\n" + MINIMAL)


@pytest.mark.parametrize("text, where", [
    (MINIMAL + "\n[ofdm2]\nfc = 1.0\n", "ofdm2"),
    (MINIMAL.replace("n_elements = 128", "n_elements = 128\nelements = 3"), "elements"),
])
def test_unknown_keys_are_errors(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text)


def test_semantic_errors_name_the_field():
    with pytest.raises(ConfigError, match=r"arrays\.elaa\.n_elements"):
        parse_config(MINIMAL.replace("n_elements = 128", "n_elements = -1"))
    with pytest.raises(ConfigError, match=r"arrays\.elaa\.role"):
        parse_config(MINIMAL.replace('role = "bs"', 'role = "ap"'))
    with pytest.raises(ConfigError, match="ofdm"):
        parse_config(MINIMAL.replace("fc = 30e9", "fc = -30e9"))


def test_syntax_error_reports_position():
    with pytest.raises(ConfigError, match=r"syntax error.*line 4"):
        parse_config('scenario = "E-L2"\n\n[ofdm]\nfc = = 3\n')


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_bundled_configs_round_trip(path):
    cfg = load_config(path)
    echoed = echo_config(cfg)
    assert parse_config(echoed) == cfg
    assert echo_config(parse_config(echoed)) == echoed


def test_every_supported_id_has_a_bundled_config():
    used = {load_config(p).scenario for p in CONFIGS}
    assert {e.id for e in CATALOG if e.supported} <= used
