import json

import pytest
from pydantic import ValidationError

from widthlab.exceptions import ConfigError
from widthlab.models import ExperimentConfig, load_config

BASE = {
    "seed": 0,
    "family": {"kind": "linear_threshold", "d": 2},
    "sweep": {"n_values": [1, 2, 4]},
}


def test_minimal_config_has_defaults():
    config = ExperimentConfig.model_validate(BASE)
    assert config.norm.p == 2.0
    assert config.dictionary.mode == "random"
    assert config.require_family().parameter_count == 3


@pytest.mark.parametrize("change", [
    {"unknown": 1},
    {"sweep": {"n_values": [1, 1, 2]}},
    {"sweep": {"n_values": [4, 2]}},
    {"sweep": {}},
    {"norm": {"p": 0.5}},
    {"dictionary": {"mode": "grid"}},
    {"family": {"kind": "linear_threshold", "colour": "red"}},
])
def test_invalid_configs_rejected(change):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({**BASE, **change})


def test_seed_is_required():
    data = dict(BASE)
    del data["seed"]
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(data)


def test_bad_family_is_a_config_error():
    config = ExperimentConfig.model_validate({**BASE, "family": {"kind": "smooth_mother", "k": 3, "d": 2}})
    with pytest.raises(ConfigError):
        config.require_family()
    config = ExperimentConfig.model_validate({**BASE, "family": {"kind": "smooth_mother", "mother_id": "nope"}})
    with pytest.raises(ConfigError):
        config.require_family()


def test_missing_sections():
    config = ExperimentConfig.model_validate({"seed": 1, "sweep": {"n_values": [1]}})
    with pytest.raises(ConfigError):
        config.require_family()
    with pytest.raises(ConfigError):
        config.require_sobolev()


def test_load_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(BASE))
    assert load_config(path).seed == 0

    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    path.write_text(json.dumps({**BASE, "extra": True}))
    with pytest.raises(ConfigError):
        load_config(path)
