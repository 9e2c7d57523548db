import json

import pytest

from netsched.cli import main
from netsched.models import load_model
from netsched.simulator import OracleParams, dump_config, init_cluster
from netsched.telemetry import ClusterSnapshot, NodeTelemetry, save_snapshot

from promstub import fixture_metrics


def files(workdir, sub):
    return {p.name: p.read_bytes() for p in sorted((workdir / sub).iterdir())}


def test_collect_output(cli_pipelines):
    workdir, _ = cli_pipelines[0]
    lines = (workdir / "data" / "dataset.csv").read_text().splitlines()
    assert len(lines) == 3601
    assert lines[0].startswith("run_id,timestamp,node,app_type,")


def test_collect_prints_summary(tmp_path, capsys):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps(dump_config()))
    assert main(["collect", "--seed", "1", "--out", str(tmp_path / "d"), "--config", str(cfg)]) == 0
    assert "3600 rows" in capsys.readouterr().out


def test_collect_missing_config(tmp_path, capsys):
    rc = main(["collect", "--out", str(tmp_path), "--config", str(tmp_path / "missing.json")])
    assert rc == 2
    assert "config file not found" in capsys.readouterr().err


def test_train_outputs(cli_pipelines):
    workdir, _ = cli_pipelines[0]
    for name in ("linear", "forest", "gbdt"):
        load_model(workdir / "models" / f"{name}.model")
    metrics = (workdir / "models" / "model_metrics.csv").read_text().splitlines()
    assert metrics[0] == "model,mse,mae,r2" and len(metrics) == 4


def test_pipeline_idempotent(cli_pipelines):
    (a, _), (b, _) = cli_pipelines
    for sub in ("data", "models", "results"):
        assert files(a, sub) == files(b, sub)


def test_train_bad_dataset(tmp_path):
    bad = tmp_path / "d.csv"
    bad.write_text("x,y\n1,2\n")
    assert main(["train", "--dataset", str(bad), "--model-dir", str(tmp_path / "m")]) == 1
    assert main(["train", "--dataset", str(tmp_path / "nope.csv")]) == 2


def test_evaluate_single_trial(cli_pipelines, tmp_path):
    workdir, _ = cli_pipelines[0]
    rc = main(["evaluate", "--model-dir", str(workdir / "models"), "--out", str(tmp_path), "--trials", "1"])
    assert rc == 0
    rows = (tmp_path / "results.csv").read_text().splitlines()[1:]
    assert len(rows) == 4
    for row in rows:
        _, t1, t2 = row.split(",")
        assert float(t1) in (0.0, 1.0) and float(t2) in (0.0, 1.0)


def test_evaluate_prints_table(cli_pipelines, capsys, tmp_path):
    workdir, _ = cli_pipelines[0]
    main(["evaluate", "--model-dir", str(workdir / "models"), "--out", str(tmp_path), "--trials", "5"])
    out = capsys.readouterr().out
    for label in ("Kubernetes Default", "Linear Regression", "Gradient-Boosted Trees", "Random Forest"):
        assert label in out


def test_evaluate_missing_model(cli_pipelines, tmp_path):
    workdir, _ = cli_pipelines[0]
    models = tmp_path / "models"
    models.mkdir()
    for name in ("linear", "gbdt"):
        (models / f"{name}.model").write_bytes((workdir / "models" / f"{name}.model").read_bytes())
    assert main(["evaluate", "--model-dir", str(models), "--out", str(tmp_path / "r")]) == 2


def sim_snapshot(tmp_path, mutate=None):
    cluster = init_cluster(params=OracleParams().noiseless(), seed=0)
    snap = cluster.sample_snapshot()
    if mutate:
        snap = mutate(snap)
    path = tmp_path / "snap.json"
    save_snapshot(snap, path)
    return path


def schedule(capsys, model, *extra):
    rc = main(["schedule", "--model", str(model), *extra])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_schedule_snapshot(cli_pipelines, tmp_path, capsys):
    workdir, _ = cli_pipelines[0]
    snap = sim_snapshot(tmp_path)
    model = workdir / "models" / "forest.model"
    rc, out, _ = schedule(capsys, model, "--snapshot", str(snap), "--app", "sort")
    assert rc == 0
    doc = json.loads(out)
    assert len(doc["ranking"]) == 6
    assert doc["chosen"] == doc["ranking"][0]["node"]
    assert doc["manifest"]["nodeAffinity"] == doc["chosen"]
    _, again, _ = schedule(capsys, model, "--snapshot", str(snap), "--app", "sort")
    assert again == out


def test_schedule_avoids_degraded_node(cli_pipelines, tmp_path, capsys):
    workdir, _ = cli_pipelines[0]

    def degrade(snap):
        nodes = {}
        for name, tel in snap.nodes.items():
            rtts = {p: (v * 10 if "node-2" in (name, p) else v) for p, v in tel.rtt_to_peers.items()}
            tx = 1.2e9 if name == "node-2" else tel.tx_rate
            rx = 1.2e9 if name == "node-2" else tel.rx_rate
            nodes[name] = NodeTelemetry(rtts, tx, rx, tel.cpu_load, tel.mem_available)
        return ClusterSnapshot(snap.timestamp, nodes)

    snap = sim_snapshot(tmp_path, degrade)
    for app in ("sort", "pagerank", "join"):
        rc, out, _ = schedule(capsys, workdir / "models" / "forest.model", "--snapshot", str(snap),
                              "--app", app, "--input-size", "5000000")
        assert rc == 0
        assert json.loads(out)["ranking"][-1]["node"] == "node-2"


def test_schedule_endpoint(cli_pipelines, prom_server, capsys):
    workdir, _ = cli_pipelines[0]
    url, state = prom_server
    state["metrics"] = fixture_metrics(["node-1", "node-2", "node-3"])
    rc, out, _ = schedule(capsys, workdir / "models" / "gbdt.model", "--endpoint", url, "--app", "join")
    assert rc == 0
    assert {r["node"] for r in json.loads(out)["ranking"]} == {"node-1", "node-2", "node-3"}


def test_schedule_endpoint_failure(cli_pipelines, prom_server, capsys):
    workdir, _ = cli_pipelines[0]
    url, state = prom_server
    state["metrics"] = fixture_metrics(["node-1", "node-2"], drop=("node_load1", "node-2"))
    rc, out, err = schedule(capsys, workdir / "models" / "gbdt.model", "--endpoint", url)
    assert rc == 1 and out == ""
    assert "missing metric node_load1 for node-2" in err


def test_schedule_usage_errors(cli_pipelines, tmp_path, capsys):
    workdir, _ = cli_pipelines[0]
    model = workdir / "models" / "forest.model"
    assert schedule(capsys, model)[0] == 2
    assert schedule(capsys, tmp_path / "none.model", "--snapshot", "x.json")[0] == 2
    snap = sim_snapshot(tmp_path)
    assert schedule(capsys, model, "--snapshot", str(snap), "--input-size", "0")[0] == 2


def test_topology_dump(capsys):
    assert main(["topology", "--dump"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(json.dumps(dump_config()))
    assert doc["oracle"]["noise_sigma"] == 0.08


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("collect", "train", "evaluate", "schedule", "topology"):
        assert cmd in out


def test_bad_usage_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--trials", "many"])
    assert exc.value.code == 2
