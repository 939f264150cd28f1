import json
import math

import numpy as np
import pytest

from qpol.config import EXAMPLE, load_config, parse_config
from qpol.errors import ConfigError, DataError
from qpol.io import DENSITY_FORMAT, density_from_dict, density_to_dict, dumps, read_density, table_to_csv
from qpol.qmath import random_density


def test_example_config_parses():
    cfg = parse_config(EXAMPLE)
    assert cfg.scenario.name == "lp_nonlocal"
    assert cfg.alpha == pytest.approx(math.radians(37))
    assert cfg.noise.q1 == 1.0 and cfg.noise.sigma == pytest.approx(math.radians(0.25))
    assert cfg.povm == "two_minimal16"
    assert cfg.estimators == ("alpha1", "alpha2")


def test_defaults():
    cfg = parse_config({})
    assert cfg.trials == 1 and cfg.seed == 0
    local = parse_config({"scenario": {"element": "lp", "configuration": "local"}})
    assert local.povm == "single6"


def test_q_sets_both_weights():
    cfg = parse_config({"noise": {"q": 0.2}})
    assert cfg.noise.q1 == pytest.approx(0.8) and cfg.noise.q2 == pytest.approx(0.8)


def test_all_problems_reported_together():
    bad = {
        "scenario": {"element": "hwp", "alpha_deg": 200},
        "noise": {"q": 0.1, "q1": 0.5, "bogus": 1},
        "tomography": {"povm": "x", "method": "svd", "mle": {"method": "cg", "nope": 1}},
        "trials": 0,
        "q_grid": [2],
        "estimators": ["alpha9"],
        "alpha_sweep_deg": [0, 1],
        "extra": True,
    }
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    msg = str(err.value)
    for needle in ["unknown top-level keys", "alpha_deg", "scenario:", "either q or q1/q2", "unknown keys ['bogus']",
                   "tomography.povm", "tomography.method", "tomography.mle: unknown keys", "trials", "q_grid",
                   "estimators", "alpha_sweep_deg"]:
        assert needle in msg, needle


def test_type_errors():
    with pytest.raises(ConfigError, match="expected int"):
        parse_config({"trials": "ten"})
    with pytest.raises(ConfigError, match="does not fit"):
        parse_config({"scenario": {"configuration": "local"}, "tomography": {"povm": "two_minimal16"}})
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config([1])


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)


def test_to_dict_round_trip():
    cfg = parse_config(EXAMPLE)
    again = parse_config({k: v for k, v in cfg.to_dict().items() if v is not None})
    assert again.to_dict() == cfg.to_dict()
    assert cfg.with_seed(99).noise.seed == 99


def test_density_json_round_trip(tmp_path):
    rho = random_density(4, np.random.default_rng(0))
    doc = density_to_dict(rho, note="x")
    assert doc["format"] == DENSITY_FORMAT
    assert doc["conventions"]["basis_order"] == ["HH", "HV", "VH", "VV"]
    assert "circular_handedness" in doc["conventions"] and "fidelity_convention" in doc["conventions"]
    p = tmp_path / "rho.json"
    p.write_text(dumps(doc))
    assert np.array_equal(read_density(p), rho)
    assert json.loads(p.read_text())["metadata"] == {"note": "x"}


def test_density_errors(tmp_path):
    with pytest.raises(DataError):
        density_from_dict({})
    with pytest.raises(DataError):
        density_from_dict({"entries": [[[1, 0]]]})
    p = tmp_path / "x.json"
    p.write_text("nope")
    with pytest.raises(DataError):
        read_density(p)


def test_table_to_csv_exact_floats():
    text = table_to_csv(["a", "b", "c"], [[0.1, True, "s"]])
    assert text == "a,b,c\n0.1,true,s\n"
