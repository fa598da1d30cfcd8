import csv
import io
import json

import numpy as np
import pytest

from labelguard import bench
from labelguard.cli import main
from labelguard.network import LabeledInput, load_dataset, save_dataset, save_network
from labelguard.orchestrator import VerifyConfig
from labelguard.synthetic import fixture_networks, labelled_points, make_rng, speedup_suite, threshold_network


@pytest.fixture
def small_case(tmp_path):
    net = fixture_networks()[1]
    rng = make_rng(5)
    inputs = labelled_points(net, rng.uniform(0, 1, (10, net.input_dim)))[:10]
    save_network(net, tmp_path / "net.txt")
    save_dataset(inputs, tmp_path / "data.csv")
    return net, inputs, tmp_path


def strip_times(obj):
    if isinstance(obj, dict):
        return {k: strip_times(v) for k, v in obj.items()
                if k not in ("t_sort", "t_verify", "elapsed", "t_sort_total", "T_baseline",
                             "T_guided", "ACC", "mean_t_sort", "total_time")}
    if isinstance(obj, list):
        return [strip_times(v) for v in obj]
    return obj


def test_zero_eps_all_valid_rows_robust(small_case):
    net, inputs, _ = small_case
    # one deliberately mislabelled row
    wrong = LabeledInput(inputs[0].values, (inputs[0].label + 1) % net.output_dim, index=len(inputs))
    report = bench.run_verify(net, inputs + [wrong], [0.0], VerifyConfig())
    bench.validate_report(report)
    s = report["runs"][0]["summary"]
    assert s["n"] == 11 and s["valid_count"] == 10
    assert s["robust_count"] == 10 and s["rst"] == "10/11"
    assert report["runs"][0]["per_input"][-1]["verdict"] == "invalid_input"


def test_cli_verify_writes_valid_report(small_case, capsys):
    _, _, d = small_case
    out = d / "report.json"
    rc = main(["verify", "--net", str(d / "net.txt"), "--data", str(d / "data.csv"),
               "--eps", "0", "0.02", "--out", str(out), "--csv", str(d / "t.csv"), "--spot-check", "50"])
    assert rc == 0
    report = json.loads(out.read_text())
    bench.validate_report(report)
    assert [r["eps"] for r in report["runs"]] == [0.0, 0.02]
    for rec in report["runs"][0]["per_input"]:
        assert rec["spot_check_violations"] == 0
    table = list(csv.reader(io.StringIO((d / "t.csv").read_text())))
    assert table[0][0] == "eps" and len(table) == 3


def test_missing_dataset_fails_without_report(small_case, capsys):
    _, _, d = small_case
    out = d / "report.json"
    rc = main(["verify", "--net", str(d / "net.txt"), "--data", str(d / "nope.csv"),
               "--eps", "0.01", "--out", str(out)])
    assert rc != 0
    assert not out.exists()
    assert "nope.csv" in capsys.readouterr().err


def test_bad_network_file_fails(tmp_path, small_case):
    _, _, d = small_case
    (tmp_path / "bad.txt").write_text("2 2 1\n1 2\n")
    rc = main(["verify", "--net", str(tmp_path / "bad.txt"), "--data", str(d / "data.csv"),
               "--eps", "0.01", "--out", str(tmp_path / "r.json")])
    assert rc == 2 and not (tmp_path / "r.json").exists()


def test_cli_requires_eps(small_case):
    _, _, d = small_case
    with pytest.raises(SystemExit):
        main(["verify", "--net", str(d / "net.txt"), "--data", str(d / "data.csv"), "--out", str(d / "r.json")])


def test_eps_pixel_conversion(small_case):
    _, _, d = small_case
    out = d / "r.json"
    assert main(["verify", "--net", str(d / "net.txt"), "--data", str(d / "data.csv"),
                 "--eps-pixel", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["runs"][0]["eps"] == pytest.approx(1 / 255)


def test_compare_acc_recomputes(small_case):
    net, inputs, _ = small_case
    report = bench.run_compare(net, inputs, [0.0, 0.05], VerifyConfig())
    bench.validate_report(report)
    for row in report["rows"]:
        t = sum(r["t_sort"] + r["t_verify"] for r in row["per_input_baseline"])
        t_star = sum(r["t_verify"] for r in row["per_input_guided"])
        t_sort = sum(r["t_sort"] for r in row["per_input_guided"])
        assert row["T_baseline"] == pytest.approx(t, abs=1e-9)
        assert row["ACC"] == pytest.approx((t - t_star - t_sort) / t, abs=1e-9)
        assert row["mismatches"] == []
    assert bench.acc(0.0, 1.0, 1.0) is None


def test_reports_deterministic_apart_from_timing(small_case):
    net, inputs, _ = small_case
    a = bench.run_compare(net, inputs, [0.03], VerifyConfig())
    b = bench.run_compare(net, inputs, [0.03], VerifyConfig(), workers=2)
    assert strip_times(a)["rows"] == strip_times(b)["rows"]


def test_no_valid_inputs_row_omitted():
    net = threshold_network()
    wrong = [LabeledInput(np.array([0.2]), 2, index=0)]
    report = bench.run_compare(net, wrong, [0.1], VerifyConfig())
    bench.validate_report(report)
    assert report["rows"] == []
    assert any("no valid inputs" in w for w in report["warnings"])
    empty = bench.run_compare(net, [], [0.1], VerifyConfig())
    assert "dataset is empty" in empty["warnings"]


def test_mismatch_raises_with_report(monkeypatch, small_case):
    net, inputs, _ = small_case
    from labelguard.orchestrator import RobustnessVerdict, Status

    monkeypatch.setattr(bench, "verify_baseline", lambda *a, **k: RobustnessVerdict(Status.UNKNOWN))
    with pytest.raises(bench.VerdictMismatch) as err:
        bench.run_compare(net, inputs[:2], [0.01], VerifyConfig())
    assert len(err.value.report["rows"][0]["mismatches"]) == 2
    # with a budget the disagreement is only a warning
    report = bench.run_compare(net, inputs[:2], [0.01], VerifyConfig(split_budget=5))
    assert report["warnings"]


def test_non_robust_suite_has_positive_acc():
    suite = speedup_suite(n_inputs=20)
    report = bench.run_compare(suite.net, suite.inputs, [suite.eps], VerifyConfig())
    row = report["rows"][0]
    assert row["ACC"] > 0
    assert row["RST_guided"] == row["RST_baseline"] == "0/20"


def test_all_robust_acc_not_much_worse():
    suite = speedup_suite(n_inputs=20)
    report = bench.run_compare(suite.net, suite.inputs, [0.0], VerifyConfig())
    row = report["rows"][0]
    assert row["robust_guided"] == 20
    assert row["ACC"] >= -0.2


def test_make_fixture_round_trip(tmp_path, capsys):
    assert main(["make-fixture", "--out-dir", str(tmp_path), "--inputs", "5"]) == 0
    inputs = load_dataset(tmp_path / "data.csv")
    assert len(inputs) == 5
    rc = main(["compare", "--net", str(tmp_path / "net.txt"), "--data", str(tmp_path / "data.csv"),
               "--eps", "0.05", "--out", str(tmp_path / "c.json"), "--workers", "2"])
    assert rc == 0
    report = json.loads((tmp_path / "c.json").read_text())
    assert report["kind"] == "compare" and report["rows"][0]["RST_guided"] == "0/5"
    assert "ACC=" in capsys.readouterr().out


def test_schema_rejects_broken_report(small_case):
    net, inputs, _ = small_case
    report = bench.run_verify(net, inputs[:2], [0.01], VerifyConfig())
    del report["runs"][0]["summary"]
    with pytest.raises(Exception):
        bench.validate_report(report)
