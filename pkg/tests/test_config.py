import dataclasses
import math

import pytest

from cv2xsim.config import (ConfigError, SimulationConfig, config_to_text,
                            default_config, load_config, save_config)


def test_table_defaults():
    cfg = default_config()
    assert cfg.n_vehicles == 20
    assert cfg.highway_length == 500.0
    assert cfg.comm_radius == 150.0
    assert cfg.queue_capacity == 10
    assert cfg.cam_period == 100
    assert cfg.lambda_arrival == 1e-4
    assert cfg.k_h == 8 and cfg.k_d == 5
    assert cfg.t_h == 100 and cfg.t_d == 500
    assert cfg.lr_q == 5e-4 and cfg.lr_x == 1e-4
    assert cfg.tau_q == 0.01 and cfg.tau_x == 0.01
    assert cfg.replay_size == 2000
    assert cfg.batch_size == 128
    assert cfg.gamma_discount == 0.99
    assert cfg.p_max == 23.0
    assert cfg.v_max == 80.0 and cfg.v_min == 60.0
    assert cfg.slot_ms == 1
    assert cfg.rri_choices == (20, 50, 100)


def test_derived_quantities():
    cfg = default_config()
    assert cfg.subchannel_bandwidth == pytest.approx(2e6)
    assert cfg.p_max_mw == pytest.approx(10 ** 2.3)
    assert cfg.rc_max == 75
    assert cfg.csr(20) == 100 and cfg.csr(100) == 500


def test_load_partial_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text("# comment line\nn_vehicles=30\n")
    cfg = load_config(str(path))
    assert cfg.n_vehicles == 30
    assert cfg.queue_capacity == 10  # untouched default


def test_empty_file_is_default(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    assert load_config(str(path)) == default_config()


def test_validation_error_names_field(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("p_rk=1.5\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    assert err.value.key == "p_rk"


def test_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("n_vehicles=20\nnot a key value line\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    assert err.value.line == 2


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("warp_speed=9\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    assert err.value.key == "warp_speed"


def test_round_trip_exact(tmp_path):
    cfg = dataclasses.replace(
        default_config(), lambda_arrival=0.000123456789, noise_power=3.7e-11,
        n_vehicles=33, rri_choices=(20, 50), single_queue=True, v_max=100.0,
        v_min=80.0, seed=2 ** 63 + 5)
    path = tmp_path / "roundtrip.cfg"
    save_config(cfg, str(path))
    again = load_config(str(path))
    assert again == cfg
    assert config_to_text(again) == config_to_text(cfg)


def test_sim_seed_env_override(tmp_path, monkeypatch):
    path = tmp_path / "scenario.cfg"
    path.write_text("seed=7\n")
    monkeypatch.setenv("SIM_SEED", "4242")
    assert load_config(str(path)).seed == 4242
    monkeypatch.setenv("SIM_SEED", "not-an-int")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_v_min_consistency_check():
    with pytest.raises(ConfigError) as err:
        dataclasses.replace(default_config(), v_min=70.0).validate()
    assert err.value.key == "v_min"


@pytest.mark.parametrize("field,value", [
    ("p_rk", -0.1),
    ("queue_capacity", 0),
    ("n_subchannels", 0),
    ("omega1", -1.0),
    ("rri_fixed", 30),
    ("replay_size", 64),  # below batch_size
    ("noise_power", 0.0),
])
def test_invariant_violations(field, value):
    with pytest.raises(ConfigError):
        dataclasses.replace(default_config(), **{field: value}).validate()


def test_lane_speed_invariant_guard():
    # 8 lanes at v_max=50 would give a negative outermost speed
    with pytest.raises(ConfigError):
        dataclasses.replace(default_config(), lanes=8, v_max=50.0,
                            v_min=-10.0).validate()
