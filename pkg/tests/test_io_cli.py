import json
import math

import numpy as np
import pytest

from attrition_conformal.cli import main
from attrition_conformal.data import DataValidationError
from attrition_conformal.io import ColumnMapping, load_csv, save_csv
from attrition_conformal.simulation import DgpSpec, gen_dgp1


def _write_mapping(path, covariates):
    path.write_text(json.dumps({"outcome": "y", "treatment": "d", "response": "r",
                                "covariates": list(covariates)}))


def test_csv_round_trip_exact(tmp_path):
    draw = gen_dgp1(DgpSpec(kind="dgp1", n=200, seed=1))
    ds = draw.dataset
    path = tmp_path / "data.csv"
    mapping = save_csv(ds, path)
    back = load_csv(path, mapping)
    assert np.array_equal(back.x, ds.x)
    assert np.array_equal(back.d, ds.d)
    assert np.array_equal(back.r, ds.r)
    assert np.array_equal(np.isnan(back.y), np.isnan(ds.y))
    assert np.array_equal(back.y[back.r == 1], ds.y[ds.r == 1])


def test_load_csv_well_formed(tmp_path):
    p = tmp_path / "small.csv"
    p.write_text("x1,x2,d,r,y\n0.5,1.0,1,1,2.5\n-0.3,0.2,0,1,1.1\n0.0,0.0,0,0,NA\n")
    mapping = ColumnMapping(outcome_col="y", treatment_col="d", response_col="r",
                            covariate_cols=("x1", "x2"))
    ds = load_csv(p, mapping)
    assert ds.n == 3
    assert math.isnan(ds.y[2])


def test_load_csv_na_outcome_on_responding_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x1,d,r,y\n0.5,1,1,NA\n")
    mapping = ColumnMapping(outcome_col="y", treatment_col="d", response_col="r",
                            covariate_cols=("x1",))
    with pytest.raises(DataValidationError, match="row 0"):
        load_csv(p, mapping)


def test_load_csv_nonnumeric_covariate_names_column(tmp_path):
    p = tmp_path / "bad2.csv"
    p.write_text("x1,d,r,y\nabc,1,1,2.0\n")
    mapping = ColumnMapping(outcome_col="y", treatment_col="d", response_col="r",
                            covariate_cols=("x1",))
    with pytest.raises(DataValidationError, match="x1"):
        load_csv(p, mapping)


def test_mapping_requires_distinct_names():
    with pytest.raises(DataValidationError):
        ColumnMapping(outcome_col="y", treatment_col="y", response_col="r",
                      covariate_cols=("x1",))


def test_cmd_simulate_writes_three_files(tmp_path):
    out = tmp_path / "run"
    rc = main(["simulate", "--dgp", "dgp1", "--n", "500", "--reps", "5",
               "--method", "cise", "--learner", "glm", "--alpha", "0.025",
               "--gamma", "0.025", "--rho", "0", "--seed", "7",
               "--out", str(out)])
    assert rc == 0
    assert (out / "mc_report.json").exists()
    assert (out / "mc_long.csv").exists()
    assert (out / "manifest.json").exists()
    report = json.loads((out / "mc_report.json").read_text())
    assert len(report["reps"]) == 5


def test_cmd_simulate_rerun_is_byte_identical(tmp_path):
    args = ["simulate", "--dgp", "dgp1", "--n", "300", "--reps", "2",
            "--method", "cise", "--learner", "glm", "--alpha", "0.1",
            "--gamma", "0.1", "--seed", "3"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "mc_report.json").read_bytes() == (out2 / "mc_report.json").read_bytes()
    assert (out1 / "mc_long.csv").read_bytes() == (out2 / "mc_long.csv").read_bytes()


def test_cmd_simulate_method_length_ordering(tmp_path):
    # the nested baseline's report shows wider mean length than the two-step
    # method's on the same grid
    base = ["simulate", "--dgp", "dgp1", "--n", "800", "--reps", "5",
            "--learner", "random_forest", "--alpha", "0.025", "--gamma", "0.025",
            "--seed", "7"]
    out_cise = tmp_path / "cise"
    out_wcqr = tmp_path / "wcqr"
    assert main(base + ["--method", "cise", "--out", str(out_cise)]) == 0
    assert main(base + ["--method", "wcqr_nested_exact", "--out", str(out_wcqr)]) == 0
    len_cise = json.loads((out_cise / "mc_report.json").read_text())["aggregate"]["mean_length"]
    len_wcqr = json.loads((out_wcqr / "mc_report.json").read_text())["aggregate"]["mean_length"]
    assert len_cise < len_wcqr


def test_cmd_simulate_rho_with_appendix_e_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--dgp", "appendixE", "--n", "100", "--reps", "1",
              "--method", "cise", "--rho", "0.9", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_cmd_analyze_outputs(tmp_path):
    draw = gen_dgp1(DgpSpec(kind="dgp1", n=800, seed=11))
    data = tmp_path / "exp.csv"
    mapping = save_csv(draw.dataset, data)
    map_path = tmp_path / "map.json"
    _write_mapping(map_path, mapping.covariate_cols)
    out = tmp_path / "res"
    rc = main(["analyze", "--data", str(data), "--map", str(map_path),
               "--method", "cise", "--reps", "3", "--alpha", "0.05",
               "--gamma", "0.05", "--seed", "5", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "ate_summary.json").read_text())
    assert summary["columns"] == ["ATER1", "ATER0", "ATEall", "Length"]
    for key in ("ATER1", "ATER0", "ATEall", "Length"):
        assert summary["estimates"][key] is not None
    assert summary["ipw"]["ATER1"] is not None
    lines = (out / "intervals.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + summary["n_r0"]


def test_cmd_analyze_no_attrition_passthrough(tmp_path):
    rng = np.random.default_rng(0)
    n = 400
    x = rng.standard_normal((n, 2))
    d = (rng.random(n) < 0.5).astype(int)
    y = d + rng.standard_normal(n)
    import csv as _csv

    data = tmp_path / "full.csv"
    with data.open("w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["x1", "x2", "d", "r", "y"])
        for i in range(n):
            w.writerow([repr(float(x[i, 0])), repr(float(x[i, 1])), d[i], 1,
                        repr(float(y[i]))])
    map_path = tmp_path / "map.json"
    _write_mapping(map_path, ["x1", "x2"])
    out = tmp_path / "res"
    rc = main(["analyze", "--data", str(data), "--map", str(map_path),
               "--method", "cise", "--reps", "2", "--alpha", "0.1",
               "--gamma", "0.1", "--seed", "2", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "ate_summary.json").read_text())
    assert summary["estimates"]["ATEall"] == summary["estimates"]["ATER1"]
    assert summary["estimates"]["ATER0"] is None


def test_cmd_analyze_rerun_byte_identical(tmp_path):
    draw = gen_dgp1(DgpSpec(kind="dgp1", n=600, seed=13))
    data = tmp_path / "exp.csv"
    mapping = save_csv(draw.dataset, data)
    map_path = tmp_path / "map.json"
    _write_mapping(map_path, mapping.covariate_cols)
    args = ["analyze", "--data", str(data), "--map", str(map_path),
            "--method", "wcqr_nested_exact", "--reps", "2", "--alpha", "0.05",
            "--gamma", "0.05", "--seed", "9"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "ate_summary.json").read_bytes() == (out2 / "ate_summary.json").read_bytes()
    assert (out1 / "intervals.csv").read_bytes() == (out2 / "intervals.csv").read_bytes()


def test_cmd_report_merges_and_dedups(tmp_path):
    base = ["simulate", "--dgp", "dgp1", "--n", "300", "--reps", "2",
            "--method", "cise", "--learner", "glm", "--alpha", "0.1",
            "--gamma", "0.1"]
    run1, run2 = tmp_path / "r1", tmp_path / "r2"
    assert main(base + ["--seed", "1", "--out", str(run1)]) == 0
    assert main(base + ["--seed", "2", "--out", str(run2)]) == 0
    out = tmp_path / "merged"
    rc = main(["report", "--in", str(run1 / "mc_report.json"),
               str(run2 / "mc_report.json"), "--out", str(out)])
    assert rc == 0
    merged = json.loads((out / "report.json").read_text())
    assert len(merged["rows"]) == 2
    # merging is order-independent
    out_rev = tmp_path / "merged_rev"
    rc = main(["report", "--in", str(run2 / "mc_report.json"),
               str(run1 / "mc_report.json"), "--out", str(out_rev)])
    assert rc == 0
    assert (out / "report.json").read_bytes() == (out_rev / "report.json").read_bytes()
    # duplicate inputs deduplicate by run digest
    rc = main(["report", "--in", str(run1 / "mc_report.json"),
               str(run1 / "mc_report.json"), "--out", str(out)])
    assert rc == 0
    merged = json.loads((out / "report.json").read_text())
    assert len(merged["rows"]) == 1


def test_cmd_report_mixed_levels_rejected(tmp_path):
    base = ["simulate", "--dgp", "dgp1", "--n", "300", "--reps", "1",
            "--method", "cise", "--learner", "glm", "--seed", "1"]
    run1, run2 = tmp_path / "m1", tmp_path / "m2"
    assert main(base + ["--alpha", "0.1", "--gamma", "0.1", "--out", str(run1)]) == 0
    assert main(base + ["--alpha", "0.05", "--gamma", "0.05", "--out", str(run2)]) == 0
    out = tmp_path / "merged"
    rc = main(["report", "--in", str(run1 / "mc_report.json"),
               str(run2 / "mc_report.json"), "--out", str(out)])
    assert rc == 3
    rc = main(["report", "--in", str(run1 / "mc_report.json"),
               str(run2 / "mc_report.json"), "--allow-mixed", "--out", str(out)])
    assert rc == 0


def test_cmd_report_empty_inputs_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["report", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_worker_env_override(monkeypatch):
    from types import SimpleNamespace

    from attrition_conformal.cli import WORKERS_ENV, _workers

    monkeypatch.setenv(WORKERS_ENV, "3")
    assert _workers(SimpleNamespace(threads=None)) == 3
    assert _workers(SimpleNamespace(threads=2)) == 2  # flag beats the env var
    monkeypatch.delenv(WORKERS_ENV)
    assert _workers(SimpleNamespace(threads=None)) == 1


def test_exit_code_for_missing_data(tmp_path):
    map_path = tmp_path / "map.json"
    _write_mapping(map_path, ["x1"])
    rc = main(["analyze", "--data", str(tmp_path / "nope.csv"), "--map", str(map_path),
               "--method", "cise", "--out", str(tmp_path / "o")])
    assert rc == 3  # missing input is a data problem, not a numerical one
