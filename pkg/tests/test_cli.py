import json

import pytest

from wafergpt.cli import parse_config, run_command
from wafergpt.errors import ConfigError
from wafergpt.model import ModelConfig


def test_empty_config_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("")
    cfg = parse_config(p)
    mc = cfg.model_config(53)
    assert (mc.d_model, mc.n_heads, mc.n_layers, mc.resolution) == (16, 8, 6, 100)
    assert mc.tcn_kernel == 3 and mc.tcn_dilations == (1, 2)
    assert cfg.train.step_size == 1e-3 and cfg.train.epochs == 200 and cfg.train.batch_size == 1
    assert mc == ModelConfig(seq_len=53)


def test_resolution_one_rejected(capsys):
    with pytest.raises(ConfigError):
        parse_config(None, {"resolution": 1})
    assert run_command(["train", "--resolution", "1"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_flag_overrides_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"train": {"epochs": 7}, "seed": 4}))
    assert parse_config(p).train.epochs == 7
    cfg = parse_config(p, {"epochs": 3})
    assert cfg.train.epochs == 3 and cfg.train.seed == 4 and cfg.model_config(10).seed == 4


def test_unknown_keys(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"model": {"d_modle": 8}}))
    with pytest.raises(ConfigError) as err:
        parse_config(p)
    assert err.value.field == "model.d_modle"


def test_unknown_subcommand(capsys):
    assert run_command(["frobnicate"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_missing_data_is_exit_2(tmp_path):
    assert run_command(["train", "--data", str(tmp_path / "nothing.csv"), "--out", str(tmp_path)]) == 2


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = d / "config.json"
    cfg.write_text(json.dumps({"generator": {"n_test_normal": 40}, "model": {"n_layers": 2}}))
    common = ["--config", str(cfg), "--out", str(d), "--data", str(d), "--epochs", "5"]
    for cmd in ("gen-data", "train", "score"):
        assert run_command([cmd] + common) == 0
    assert run_command(["evaluate"] + common + ["--manifest", str(d / "manifest.json")]) == 0
    return d, common


def test_evaluate_json(small_run):
    d, _ = small_run
    m = json.loads((d / "metrics.json").read_text())
    assert {"accuracy", "precision", "recall", "f1"} <= set(m["at_eer"])
    assert 0.0 <= m["auc"] <= 1.0
    assert m["n"] == 48 and m["n_abnormal"] == 8
    assert set(m["breakdown"]["kinds"]) and "three_sigma" in m


def test_ablate_four_rows(small_run, capsys):
    d, common = small_run
    capsys.readouterr()
    assert run_command(["ablate"] + common + ["--epochs", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[0] for ln in lines[1:]] == ["full", "no-PE", "no-TCN", "no-Transformer"]
    report = json.loads((d / "ablation.json").read_text())
    assert set(report) == {"full", "no-PE", "no-TCN", "no-Transformer", "average"}


def test_visualize(small_run):
    d, common = small_run
    assert run_command(["visualize"] + common + ["--index", "45", "--manifest", str(d / "manifest.json")]) == 0
    assert (d / "probabilities.csv").exists() and (d / "loss_histogram.svg").exists()
    assert len(list((d / "attention").glob("*.csv"))) == 2 * 8
    assert run_command(["visualize"] + common + ["--index", "999"]) == 2
