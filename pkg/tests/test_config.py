import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opgap.config import ConfigError, RunConfig, load_config, parse_config_text, parse_value

TEXT = """
# qubit rates
w_plus = 4
w_minus = 1
gamma = logspace(1e-4, 1e-2, 3)
g = linspace(0.05, 0.45, 41)
bond_overrides = 1:0.1, 2:0.5
L = auto
use_dressed_rate = false
t = [0, 1, 2.5]
"""


def test_parse_full_config():
    p = parse_config_text(TEXT)
    assert p["w_plus"] == 4.0 and isinstance(p["w_plus"], float)
    np.testing.assert_allclose(p["gamma"], [1e-4, 1e-3, 1e-2])
    assert len(p["g"]) == 41 and p["g"][0] == 0.05
    assert p["bond_overrides"] == {1: 0.1, 2: 0.5}
    assert p["L"] is None
    assert p["use_dressed_rate"] is False
    assert p["t"] == [0.0, 1.0, 2.5]


@pytest.mark.parametrize("text", [
    "nonsense = 1", "w_plus = 1\nw_plus = 2", "w_plus", "gamma = [0.1, 0.01]", "k = 2.5",
    "use_dressed_rate = 1", "bond_overrides = 1-0.1", "gamma = logspace(0, 1, 3)", "g = linspace(0, 1, 0)",
    "fit_window = [2, 1]", "w_plus = abc", "gamma = []",
])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_scalar_grid_promoted():
    assert parse_config_text("gamma = 0.01")["gamma"] == [0.01]
    assert parse_value("linspace(0, 1, 3)") == [0.0, 0.5, 1.0]


@given(wp=st.floats(0.1, 100, allow_nan=False), ratio=st.floats(0.01, 0.99),
       gam=st.lists(st.floats(1e-8, 1.0), min_size=1, max_size=5, unique=True),
       over=st.dictionaries(st.integers(1, 4), st.floats(0.01, 5.0), max_size=3),
       L=st.one_of(st.none(), st.integers(2, 10**6)), k=st.integers(1, 50))
def test_config_text_round_trip(wp, ratio, gam, over, L, k):
    params = {"w_plus": wp, "w_minus": wp * ratio, "gamma": sorted(gam), "L": L, "k": k}
    if over:
        params["bond_overrides"] = over
    cfg = RunConfig("spectrum", params)
    assert parse_config_text(cfg.to_text()) == params


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("bogus", {})
    with pytest.raises(ConfigError):
        RunConfig("spectrum", {}, format="xml")
    with pytest.raises(ConfigError, match="seed"):
        RunConfig("trajectories", {"w_plus": 1.0, "w_minus": 0.5})
    with pytest.raises(ConfigError):
        RunConfig("spectrum", {"w_plus": 1.0}).chain_spec()
    with pytest.raises(ConfigError):
        RunConfig("spectrum", {"w_plus": 1.0, "w_minus": 2.0}).chain_spec()
    with pytest.raises(ConfigError):
        RunConfig("spectrum", {"w_plus": 1.0, "w_minus": 0.5, "gamma": [0.1, 0.2]}).chain_spec()
    with pytest.raises(ConfigError):
        RunConfig("spectrum", {"ruc_q": [2], "w_plus": 1.0}).rates()


def test_circuit_rates_from_config():
    spec = RunConfig("spectrum", {"ruc_q": [2], "gamma": [0.01], "L": 100}).chain_spec()
    assert spec.w_plus == pytest.approx(0.8) and spec.w_minus == pytest.approx(0.2)
    assert spec.use_dressed_rate and spec.gamma_d == pytest.approx(0.0075)


def test_load_config_cli_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("w_plus = 0.8\nw_minus = 0.2\nseed = 1\nthreads = 2\n")
    cfg = load_config(str(path), "trajectories", seed=5, threads=3)
    assert cfg.seed == 5 and cfg.threads == 3
    cfg = load_config(str(path), "trajectories")
    assert cfg.seed == 1 and cfg.threads == 2
    with pytest.raises(OSError):
        load_config(str(tmp_path / "missing.cfg"), "spectrum")
