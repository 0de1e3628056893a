import json

import numpy as np
import pytest

from inloop.cli import EXIT_INSTABILITY, EXIT_OK, EXIT_PARAMETER, main, run
from inloop.config import ConfigError, OutputTable, ScenarioConfig, merge_config, parse_rate, parse_time
from inloop.presets import PRESETS, preset

LASER = {
    "cavity": {"kappa": 1.0, "symmetric": True},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": 1.0},
    "grid": {"start": 0.0, "stop": 5.0, "points": 51},
}

COOLING = {
    "cavity": {"kappa1": 1.0, "kappa2": 0.0, "detuning": 1.0},
    "mechanics": {"omega_m": 1.0, "gamma": 1e-4, "n_th": 131.0, "G": 0.2},
    "detector": {"eta": 1.0, "theta_fb": 0.0},
    "filter": {"gain": 0.0, "delay": 0.1},
    "port": "reflection",
}


def test_units():
    assert parse_rate("1 MHz") == pytest.approx(2 * np.pi * 1e6)
    assert parse_rate(3.5) == 3.5
    assert parse_time("2 ns") == pytest.approx(2e-9)
    for bad in ("3 furlongs", "fast", True, [1]):
        with pytest.raises(ConfigError):
            parse_rate(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**LASER, "bogus": 1})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**LASER, "filter": {"gain": 0.1, "dealy": 1.0}})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**LASER, "version": 2})
    cfg = ScenarioConfig.from_dict(LASER)
    assert cfg.hash() == ScenarioConfig.from_dict(json.loads(json.dumps(LASER))).hash()
    assert cfg.hash() != ScenarioConfig.from_dict(merge_config(LASER, {"filter": {"gain": 0.1}})).hash()


def test_merge_is_recursive():
    out = merge_config(LASER, {"filter": {"gain": 0.3}})
    assert out["filter"] == {"gain": 0.3, "delay": 1.0}
    assert LASER["filter"]["gain"] == 0.0


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_table_round_trip(fmt):
    t = run("spectrum", merge_config(LASER, {"options": {"gains": [0.0, 0.2]}}))
    back = OutputTable.from_csv(t.to_csv()) if fmt == "csv" else OutputTable.from_json(t.to_json())
    assert back.columns == t.columns and back.units == t.units
    assert np.array_equal(back.rows, t.rows)
    assert back.metadata["config_hash"] == t.metadata["config_hash"]


def test_zero_gain_gives_shot_noise():
    t = run("spectrum", LASER)
    assert np.allclose(t.rows[:, 1:], 1.0)
    c = run("cavity", merge_config(LASER, {"cavity": {"detuning": 2.0}}))
    assert np.allclose(c.column("S_i[g=0]"), 1.0)
    assert np.allclose(c.column("S_out[g=0]"), 1.0)


def test_laser_preset_has_one_curve_per_gain():
    cmd, cfg = preset("fig2")
    t = run(cmd, cfg)
    gains = t.metadata["gains"]
    assert len(gains) == 11
    assert [c for c in t.columns if c.startswith("S_i")] == [f"S_i[g={g:.6g}]" for g in gains]
    assert max(np.abs(gains)) < 0.5


def test_sideband_column():
    t = run("cooling", merge_config(COOLING, {"options": {"mode": "sideband"}}))
    a_p, a_m, n_m = t.column("A_plus")[0], t.column("A_minus")[0], t.column("n_m")[0]
    assert (a_p, a_m) == pytest.approx((0.016, 0.08))
    assert n_m == pytest.approx((1e-4 * 131 + a_p) / (1e-4 + a_m - a_p))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_run(name):
    cmd, cfg = preset(name)
    t = run(cmd, cfg)
    assert t.rows.shape[0] > 0
    assert t.metadata["command"] == cmd


def test_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(LASER))
    out = tmp_path / "out.csv"
    assert main(["spectrum", "--config", str(good), "--out", str(out)]) == EXIT_OK
    assert OutputTable.from_csv(out.read_text()).rows.shape == (51, 2)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**LASER, "unknown": 1}))
    assert main(["spectrum", "--config", str(bad)]) == EXIT_PARAMETER

    unstable = tmp_path / "unstable.json"
    unstable.write_text(json.dumps(merge_config(LASER, {"filter": {"gain": 0.7}})))
    assert main(["spectrum", "--config", str(unstable)]) == EXIT_INSTABILITY
    assert "stability window" in capsys.readouterr().err

    assert main(["cavity", "--preset", "fig2"]) == EXIT_PARAMETER
    assert main(["spectrum"]) == EXIT_PARAMETER


def test_yaml_config(tmp_path, capsys):
    f = tmp_path / "s.yaml"
    f.write_text("cavity: {kappa: 1.0, symmetric: true}\nfilter: {gain: 0.0, delay: 1.0}\n"
                 "grid: {start: 0, stop: 1, points: 3}\n")
    assert main(["spectrum", "--config", str(f), "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["columns"] == ["omega", "S_i[g=0]"]
