import configparser

import pytest

from stochdice.params import (
    SECTIONS, ModelParams, load_params, params_from_config, params_to_config, save_params,
)


def test_every_field_has_a_section():
    listed = [k for names in SECTIONS.values() for k in names]
    assert sorted(listed) == sorted(ModelParams.__dataclass_fields__)
    assert len(listed) == len(set(listed))


def test_config_round_trip(tmp_path):
    p = ModelParams(N=12, alpha=1.2, T_AT_0=0.9)
    path = tmp_path / "p.ini"
    save_params(p, path)
    assert load_params(path) == p


def test_defaults_when_sections_missing():
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["damage"] = {"pi2": "0.003"}
    p = params_from_config(cp)
    assert p.pi2 == 0.003
    assert p.alpha == ModelParams().alpha


def test_unknown_key_named():
    cp = params_to_config(ModelParams())
    cp["damage"]["pi3"] = "1"
    with pytest.raises(ValueError, match="damage.pi3"):
        params_from_config(cp)


def test_bad_value_named():
    cp = params_to_config(ModelParams())
    cp["time"]["N"] = "forty"
    with pytest.raises(ValueError, match="'N'"):
        params_from_config(cp)
    cp["time"]["N"] = "40.5"
    with pytest.raises(ValueError, match="'N'"):
        params_from_config(cp)


def test_year_and_mitigation_cap():
    p = ModelParams()
    assert p.year(0) == 2015
    assert p.year(29) == 2160
    assert p.mu_max(28) == 1.0
    assert p.mu_max(29) == 1.2
