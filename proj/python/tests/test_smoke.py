import math

import numpy as np
import pytest

import transcap


def test_version_and_scenarios():
    assert transcap.__version__
    assert transcap.scenarios() == [
        "esl-gap",
        "rank-decay",
        "threshold-sweep",
        "composition-check",
        "proxy-probe",
    ]


def test_config_round_trip_and_errors():
    cfg = transcap.default_config("rank-decay")
    assert transcap.normalize_config(cfg) == cfg
    assert len(transcap.validate(cfg)) == 64
    with pytest.raises(transcap.ConfigError):
        transcap.normalize_config({"scenario": "rank-decay", "bogus": 1})
    bad = dict(cfg, rule=dict(cfg["rule"], step_size=-1.0))
    with pytest.raises(transcap.ConfigError):
        transcap.validate(bad)


def test_spectral_examples():
    np.testing.assert_allclose(transcap.singular_values(np.diag([3.0, 2.0, 0.0])), [3, 2, 0], atol=1e-14)
    assert transcap.log_gram_volume(2.0 * np.eye(2)) == pytest.approx(4 * math.log(2))
    assert transcap.log_gram_volume(np.diag([1.0, 0.0])) == -math.inf
    assert transcap.stable_rank(np.diag([2.0, 1.0, 1.0])) == pytest.approx(1.5)


def test_rank_diagnostics():
    c = 0.25
    j = np.diag([c, 1.0, 1.0])
    basis = np.eye(3)[:, :2]
    assert transcap.effective_rank([c * np.eye(3)]) == pytest.approx(c * c)
    value, count = transcap.compatible_effective_rank([j], basis)
    assert value == pytest.approx(c)
    assert count == 2
    assert transcap.reconfiguration_dimension(np.diag([2.0, 1.0, 1.0]), np.eye(3)) == pytest.approx(1.5)


def test_w2_translation():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert transcap.w2_gaussian(np.zeros(2), cov, np.array([3.0, 4.0]), cov) == pytest.approx(5.0, abs=1e-7)
    with pytest.raises(transcap.TranscapError):
        transcap.w2_gaussian(np.zeros(2), -np.eye(2), np.zeros(2), np.eye(2))


def test_participation_ratio_rank_one():
    v = np.array([1.0, 2.0, -1.0])
    samples = np.outer(np.linspace(-1, 1, 9), v)
    assert transcap.participation_ratio(samples) == pytest.approx(1.0)


def test_run_scenario_in_memory():
    cfg = transcap.default_config("rank-decay")
    cfg["n_steps"] = 10
    cfg["n_realizations"] = 4
    out = transcap.run_scenario(cfg, workers=1)
    assert out["violations"] == []
    table = out["tables"]["rank_decay"]
    assert "compatible_effective_rank" in table["columns"]
    assert len(table["rows"]) == 11


def test_run_writes_outputs(tmp_path):
    cfg = transcap.default_config("proxy-probe")
    manifest = transcap.run(cfg, output_dir=str(tmp_path))
    assert manifest["schema_version"] == 1
    assert (tmp_path / "proxy_probe.csv").exists()
    assert (tmp_path / "run_manifest.json").exists()
