import json

import matplotlib.pyplot as plt
import pytest

from occflow import pipeline
from occflow.cli import main
from occflow.config import load_config
from occflow.errors import ConfigurationError, DependencyError

TINY_CONFIG = {
    "m": 2,
    "widths": [2, 2, 2],
    "scenario": {"days": [[-2, 0.0, 10], [-1, 0.0, 10], [1, 1.0, 3], [2, 0.5, 3], [3, 0.2, 3]]},
    "dcae": {"epochs": 1, "batch_size": 8},
    "dsvdd": {"epochs": 1, "batch_size": 8},
    "iogen": {"epochs": 1, "steps_per_epoch": 1, "batch_size": 4, "eval_samples": 4},
    "gen": {"epochs": 1, "steps_per_epoch": 1, "batch_size": 4, "eval_samples": 4},
    "classifier": {"epochs": 1, "batch_size": 8, "synthetic_pool": 16},
    "ocsvm": {"nu_grid": [0.1, 0.5]},
    "eval": {"windows": [[1, 1], [2, 3], [5, 6]]},
    "ablation_m": [1, 2],
}


def write_config(tmp_path, **changes):
    cfg = json.loads(json.dumps(TINY_CONFIG))
    cfg.update(changes)
    cfg["out_dir"] = str(tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_config_defaults_and_env_override(tmp_path):
    cfg = load_config()
    assert cfg.m == 2 and cfg.iogen.feature_weight == 10.0 and cfg.iogen.sigma == 1.0
    assert cfg.ocsvm.nu_grid == [0.01, 0.05, 0.1, 0.2, 0.5]
    cfg = load_config(write_config(tmp_path), environ={"OCCFLOW_DCAE__EPOCHS": "7", "OCCFLOW_M": "4"})
    assert cfg.dcae.epochs == 7 and cfg.m == 4 and cfg.widths == [2, 2, 2]


@pytest.mark.parametrize("bad", [{"m": 0}, {"bogus": 1}, {"dcae": {"epochs": 1, "nope": 2}},
                                 {"iogen": {"adversarial_loss": "wasserstein"}}, {"ocsvm": {"nu_grid": [0.0]}}])
def test_config_errors(bad):
    with pytest.raises(ConfigurationError):
        load_config(overrides=bad, environ={})


def test_config_digest_ignores_output_dir():
    a = load_config(overrides={"out_dir": "x"}, environ={})
    b = load_config(overrides={"out_dir": "y"}, environ={})
    assert a.digest() == b.digest()
    assert a.digest() != load_config(overrides={"m": 4}, environ={}).digest()


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = write_config(tmp_path)
    assert main(["train", "--config", str(cfg)]) == 3  # no dataset yet
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert main(["train", "--stage", "dsvdd", "--config", str(cfg)]) == 3


def test_dry_run_prints_graph(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["evaluate", "--dry-run", "--config", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["stages"]["classifier"] == ["dsvdd", "iogen"]
    assert out["status"]["dcae"] == {"0": "missing", "1": "missing", "2": "missing"}
    assert not (tmp_path / "out" / "pipeline_state.json").exists()


@pytest.fixture(scope="module")
def trained_ws(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    cfg = load_config(write_config(tmp), environ={})
    ws = pipeline.Workspace.from_config(cfg)
    pipeline.simulate_dataset(ws)
    hashes = pipeline.train(ws)
    return ws, hashes


def test_train_records_every_stage(trained_ws):
    ws, hashes = trained_ws
    assert set(hashes) == set(pipeline.STAGE_ORDER)
    state = ws.read_state()["stages"]
    for stage in pipeline.STAGE_ORDER:
        for k in range(3):
            assert state[stage][str(k)]["hash"] == pipeline.file_hash(ws.artifact(stage, k))
    assert (ws.model_dir(0) / "dcae_history.csv").exists()
    assert all(v == "fresh" for per in ws.status().values() for v in per.values())


def test_rerun_is_idempotent(trained_ws, caplog):
    ws, hashes = trained_ws
    caplog.set_level("INFO")
    again = pipeline.train(ws)
    assert again == hashes
    assert "training" not in caplog.text


def test_stale_upstream_is_reported(trained_ws, tmp_path):
    ws, _ = trained_ws
    other = load_config(overrides={**TINY_CONFIG, "out_dir": str(ws.out), "dcae": {"epochs": 2, "batch_size": 8}},
                        environ={})
    ws2 = pipeline.Workspace.from_config(other)
    assert ws2.status()["dcae"][0] == "stale"
    with pytest.raises(DependencyError, match="occflow train --stage dcae"):
        pipeline.train(ws2, ["dsvdd"])


def test_evaluate_writes_report(trained_ws):
    ws, _ = trained_ws
    run = pipeline.evaluate(ws, jobs=2, timestamp=0)
    report = json.loads((run / "report.json").read_text())
    assert sorted(report["methods"]) == sorted(pipeline.METHODS)
    assert report["config_hash"] == ws.config.digest()
    for name, row in report["methods"].items():
        assert len(row["auc_per_split"]) == 3
        assert all(0 <= a <= 1 for a in row["auc_per_split"])
        assert row["windows"]["D+5..D+6"]["per_split"] == [None, None, None]
    assert set(report["methods"]["ocsvm"]["notes"]["split0"]["auc_by_nu"]) == {"0.1", "0.5"}
    for name in ("report.csv", "auc.svg", "windows.svg", "ofw_series.svg", "split0_distance_hist.csv",
                 "split2_likelihood_hist.svg"):
        assert (run / name).exists(), name
    # same inputs, same numbers
    run2 = pipeline.evaluate(ws, timestamp=1)
    assert json.loads((run2 / "report.json").read_text()) == report


def test_gallery_command(trained_ws):
    ws, _ = trained_ws
    path = pipeline.gallery(ws)
    assert plt.imread(path).shape[:2] == (256, 384)


def test_ablation_table(trained_ws):
    ws, _ = trained_ws
    out = pipeline.ablate(ws)
    rows = json.loads((out / "ablation.json").read_text())["rows"]
    assert [r["m"] for r in rows] == [1, 2]
    for r in rows:
        assert len(r["auc_per_split"]) == 3 and r["failed_splits"] == []
        assert r["auc_std"] >= 0
    assert (out / "ablation.csv").read_text().startswith("m,auc_mean,auc_std,split0")
