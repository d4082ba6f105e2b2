import json

import pytest

from hierwalk.cli import main
from hierwalk.errors import UnknownExperiment
from hierwalk.experiments import (CSV_HEADER, ExperimentRecord, records_to_csv,
                                  run_experiment)


def small_config(tmp_path=None):
    return {"experiment": "scaling_1d",
            "grid": {"n": [5, 7], "degree": 6, "factors": {"2": 1.0, "3": 1.0}},
            "seeds": [0, 1, 2]}


def test_registry_unknown():
    with pytest.raises(UnknownExperiment):
        run_experiment({"experiment": "nope"})


def test_scaling_runs_and_reproduces():
    records = run_experiment(small_config())
    assert len(records) == 6
    assert all(r.ok for r in records)
    csv1 = records_to_csv(records)
    csv2 = records_to_csv(run_experiment(small_config()))
    assert csv1 == csv2
    assert csv1.startswith(CSV_HEADER)
    # threaded execution produces byte-identical output
    csv3 = records_to_csv(run_experiment(small_config(), jobs=3))
    assert csv3 == csv1


def test_record_round_trip():
    rec = ExperimentRecord(experiment="x", params={"n": 3}, measured={"v": 1.5},
                           wall_time=0.25, ok=True, note="")
    blob = json.dumps(rec.to_json_dict())
    back = ExperimentRecord.from_json_dict(json.loads(blob))
    assert back == rec


def test_caps_env_override(monkeypatch):
    from hierwalk.experiments import _caps
    monkeypatch.setenv("HIERWALK_CAP", "500")
    caps = _caps({})
    assert caps["vertices"] == 500
    assert caps["dense_dim"] == 500
    monkeypatch.setenv("HIERWALK_CAP", "10000000")
    caps = _caps({})
    assert caps["vertices"] == 10**6        # only lowers, never raises


def test_lieb_experiments_smoke():
    records = run_experiment({"experiment": "lieb_highd",
                              "grid": {"Nd": [[3, 2], [3, 3]]}})
    assert all(r.ok for r in records)
    records = run_experiment({"experiment": "lieb_2d",
                              "grid": {"N": [3], "fluct": "ice"}, "seeds": [0]})
    assert all(r.ok for r in records)


def test_cli_generate_spectrum_walk(tmp_path):
    spec_path = tmp_path / "spec.json"
    rc = main(["generate", "line", "--n", "6", "--D", "6", "--factors", "2,3",
               "--seed", "1", "--out", str(spec_path)])
    assert rc == 0
    payload = json.loads(spec_path.read_text())
    assert len(payload["spec"]["vertices"]) == 13

    out = tmp_path / "summary.json"
    rc = main(["spectrum", "--in", str(spec_path), "--out", str(out)])
    assert rc == 0
    summary = json.loads(out.read_text())
    assert summary["zero_count"] == 1

    wout = tmp_path / "walk.json"
    rc = main(["walk", "--in", str(spec_path), "--out", str(wout)])
    assert rc == 0
    walk = json.loads(wout.read_text())
    assert walk["satisfied"] is True

    cout = tmp_path / "cl.json"
    rc = main(["classical", "--in", str(spec_path), "--Q", "200",
               "--trials", "20", "--seed", "0", "--out", str(cout)])
    assert rc == 0
    assert 0.0 <= json.loads(cout.read_text())["success_rate"] <= 1.0


def test_cli_lieb_and_sparsify(tmp_path):
    spec_path = tmp_path / "lieb.json"
    rc = main(["generate", "lieb", "--N", "4", "--d", "2", "--D", "30",
               "--f", "10", "--fluct", "ice", "--seed", "0",
               "--out", str(spec_path)])
    assert rc == 0
    payload = json.loads(spec_path.read_text())
    assert len(payload["spec"]["vertices"]) == 16 + 24

    tmat = tmp_path / "t.json"
    tmat.write_text(json.dumps([[0.0, 1.0], [1.0, 0.0]]))
    gout = tmp_path / "graph.json"
    rc = main(["sparsify", "--t", str(tmat), "--N", "16", "--D", "2",
               "--method", "poisson", "--seed", "0", "--out", str(gout)])
    assert rc == 0
    graph = json.loads(gout.read_text())
    assert graph["materialized"]["n"] == 16


def test_cli_experiment(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(small_config(), out=str(tmp_path / "rec"))))
    rc = main(["experiment", "--config", str(cfg)])
    assert rc == 0
    text = (tmp_path / "rec.csv").read_text()
    assert text.startswith(CSV_HEADER)
    rows = json.loads((tmp_path / "rec.json").read_text())
    assert len(rows) == 6


def test_cli_unknown_experiment(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiment": "bogus"}))
    rc = main(["experiment", "--config", str(cfg)])
    assert rc == 2
