import math

import numpy as np
import pytest

from rdrs_lab.config import PRESETS, ConfigError, parse_config, parse_config_text, parse_number, preset_path

GOOD = """\
[experiment]
example = 1
paths = 10
horizon = 5
steps = 50
seed = 4

[users]
arrival_rate = 10/3, 5
batch_mean = 3, 1
service_rate = 1/10, 1/20
interarrival_scv = 10, 20
batch_scv = 1, 2
service_scv = 10, 20
drift = -1, -1.2
nominal_rate = 1000, 1000

[prices]
initial = 9, 3
lower = 0.64, 0.8
upper = inf, inf

[capacity]
normals = 1, 0; 0, 1; 1, 1
offsets = 1500, 1500, 2000
sum_index = 3
"""


def test_presets_parse():
    for name in PRESETS:
        assert preset_path(name).exists()
        cfg = parse_config(name)
        assert cfg.name == name and cfg.seed == 20240601


def test_example1_preset_values():
    cfg = parse_config("example1_fig5")
    assert (cfg.example, cfg.paths, cfg.horizon, cfg.steps) == (1, 6000, 200.0, 5000)
    assert cfg.lam[0] == pytest.approx([10 / 3, 5.0], rel=1e-15)
    assert cfg.mu == pytest.approx([0.1, 0.05])
    assert cfg.prices.lower == pytest.approx([0.64, 0.8]) and np.all(np.isinf(cfg.prices.upper))
    assert cfg.baselines == ("constant", "2dqueue", "arbitrary")
    assert cfg.region.slack([1500, 500]).min() == 0 and cfg.region.slack([1500, 501]).min() < 0


def test_example2_presets():
    six, seven = parse_config("example2_fig6"), parse_config("example2_fig7")
    assert six.num_users == seven.num_users == 3
    assert six.horizon == seven.horizon == 20.0
    assert np.all(np.asarray(six.prices.lower) == np.asarray(six.prices.upper))
    assert seven.prices.upper == pytest.approx([4, 2, 4]) and seven.prices.initial == pytest.approx([2.25, 1.5, 2.25])


def test_parse_number():
    assert parse_number("10/3") == 10 / 3
    assert parse_number(" inf ") == math.inf
    assert parse_number("1e3") == 1000.0
    with pytest.raises(ValueError):
        parse_number("ten")


def test_good_text_round_trip():
    cfg = parse_config_text(GOOD, "good.ini")
    assert cfg.name == "good" and cfg.seed == 4 and cfg.env is None
    assert cfg.lam.shape == (1, 2) and cfg.rho[0].tolist() == [1000.0, 1000.0]
    assert cfg.region.sum_capacity_index == 2


def test_empty_file_lists_every_required_key():
    with pytest.raises(ConfigError) as err:
        parse_config_text("", "empty.ini")
    text = "\n".join(err.value.problems)
    for key in ("example", "paths", "horizon", "steps", "arrival_rate", "nominal_rate", "initial", "lower",
                "upper", "normals", "offsets", "sum_index"):
        assert repr(key) in text
    assert "'seed'" not in text and "'constant'" not in text and "holding_rates" not in text
    assert len(err.value.problems) == 18


def test_unknown_key_reports_line():
    text = GOOD.replace("steps = 50\n", "steps = 50\nstepz = 3\n")
    with pytest.raises(ConfigError) as err:
        parse_config_text(text, "x.ini")
    assert err.value.problems == ["x.ini:6: unknown key 'stepz' in [experiment]"]


def test_unknown_section_and_bad_value():
    with pytest.raises(ConfigError) as err:
        parse_config_text(GOOD + "\n[extra]\na = 1\n", "x.ini")
    assert "unknown section [extra]" in err.value.problems[0]
    with pytest.raises(ConfigError) as err:
        parse_config_text(GOOD.replace("paths = 10", "paths = 2.5"), "x.ini")
    assert err.value.problems[0].startswith("x.ini:3: bad value for 'paths'")


def test_duplicate_key():
    with pytest.raises(ConfigError) as err:
        parse_config_text(GOOD.replace("seed = 4", "seed = 4\nseed = 5"), "x.ini")
    assert "duplicate key 'seed'" in err.value.problems[0] and "x.ini:7" in err.value.problems[0]


def test_length_mismatch():
    with pytest.raises(ConfigError) as err:
        parse_config_text(GOOD.replace("batch_mean = 3, 1", "batch_mean = 3"), "x.ini")
    assert err.value.problems == ["x.ini:10: batch_mean needs 2 values, got 1"]


def test_state_overrides():
    text = GOOD + """
[environment]
holding_rates = 1, 2
transitions = 0, 1; 1, 0

[state.2]
arrival_rate = 4, 6
drift = -2, -2
"""
    cfg = parse_config_text(text, "env.ini")
    assert cfg.env.num_states == 2
    assert cfg.lam.tolist() == [[10 / 3, 5.0], [4.0, 6.0]]
    assert cfg.theta.tolist() == [[-1.0, -1.2], [-2.0, -2.0]]
    assert cfg.m.tolist() == [[3.0, 1.0], [3.0, 1.0]]
    with pytest.raises(ConfigError) as err:
        parse_config_text(text.replace("[state.2]", "[state.3]"), "env.ini")
    assert "state 3 outside 2..2" in err.value.problems[0]


def test_invalid_environment_and_region():
    bad_env = GOOD + "\n[environment]\nholding_rates = 1, 2\ntransitions = 0, 0.5; 1, 0\n"
    with pytest.raises(ConfigError):
        parse_config_text(bad_env, "x.ini")
    with pytest.raises(ConfigError):
        parse_config_text(GOOD.replace("sum_index = 3", "sum_index = 1"), "x.ini")
    with pytest.raises(ConfigError):
        parse_config_text(GOOD.replace("upper = inf, inf", "upper = 0.5, inf"), "x.ini")


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/cfg.ini")
