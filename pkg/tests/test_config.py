import json

import pytest

from lirec.config import RunConfig, apply_overrides, load
from lirec.synth import ConfigError


def test_defaults_round_trip():
    cfg = RunConfig()
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()


def test_seed_reaches_every_section():
    cfg = RunConfig.from_dict({"seed": 11})
    assert cfg.gen.seed == cfg.train.seed == 11


def test_model_follows_generator_vocabulary():
    cfg = RunConfig.from_dict({"gen": {"n_interactions": 9, "dim_track": 5}})
    assert cfg.train.model.n_interactions == 9 and cfg.train.model.dims["track"] == 5


@pytest.mark.parametrize("d,match", [
    ({"bogus": 1}, "bogus"),
    ({"gen": {"seed": 3}}, "top level"),
    ({"train": {"seed": 3}}, "top level"),
    ({"schema": 2}, "schema"),
    ({"train": {"model": {"wiring": "sideways"}}}, "wiring"),
    ({"train": {"loss": {"lamda": 1.0}}}, "lamda"),
    ({"eval": {"bundle_cap": 0}}, None),
])
def test_rejections(d, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict(d).validate()


def test_validate_wraps_loss_errors():
    cfg = RunConfig.from_dict({"train": {"loss": {"margin_int": 2.0}}})
    with pytest.raises(ConfigError, match="margin_int"):
        cfg.validate()


def test_overrides_parse_json_values():
    d = apply_overrides(RunConfig().to_dict(), ["train.loss.lam=1.0", "train.model.regime=rel",
                                                "train.model.share_encoders=true"])
    cfg = RunConfig.from_dict(d)
    assert cfg.train.loss.lam == 1.0 and cfg.train.model.regime == "rel"
    assert cfg.train.model.share_encoders is True


def test_override_needs_equals():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["train.lr"])


def test_load_missing_names_path(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load(tmp_path / "nope.json")


def test_load_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load(p)
