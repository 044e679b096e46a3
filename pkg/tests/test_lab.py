import copy
import json

import pytest

from phlab.lab import (Scenario, ScenarioError, builtin, builtin_catalog, load, run_scenario,
                       validate, verify_inequalities)
from phlab.lab.cli import main
from phlab.lab.runner import EXIT_ERROR, EXIT_OK, EXIT_VERDICT, clean
from phlab.lab.verify import verify_discontinuity

SMALL = {
    "schema_version": 1,
    "name": "small-cat",
    "seed": 3,
    "map": {"kind": "toral", "matrix": [[2, 1], [1, 1]], "unstable_dim": 1},
    "experiments": [
        {"kind": "homology"},
        {"kind": "volume_growth", "seeds": [0, 1], "radii": [0.05], "n_max": 8,
         "inverse": True},
        {"kind": "entropy", "eps_ladder": [0.2], "n_max": 5, "resolution": [256]},
        {"kind": "lyapunov", "N": 1000, "points": 1, "inverse": True},
        {"kind": "jacobian", "samples": 64},
        {"kind": "verify"},
    ],
}


def small(**changes) -> dict:
    doc = copy.deepcopy(SMALL)
    doc.update(changes)
    return doc


@pytest.fixture(scope="module")
def small_report():
    return run_scenario(validate(SMALL))


def test_validate_returns_scenario():
    sc = validate(SMALL)
    assert isinstance(sc, Scenario)
    assert sc.kinds == [e["kind"] for e in SMALL["experiments"]]
    assert validate(sc.to_dict()).to_dict() == sc.to_dict()


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.pop("seed"), "seed"),
    (lambda d: d.update(schema_version=99), "schema_version"),
    (lambda d: d["map"].update(matrix=[[2, 1, 0], [1, 1, 0]]), "square"),
    (lambda d: d["experiments"].append({"kind": "homology"}), "at most once"),
    (lambda d: d["experiments"].append({"kind": "fibers"}), "do not apply"),
    (lambda d: d["experiments"].append({"kind": "current", "n": 1}), "experiments"),
    (lambda d: d["experiments"][2].update(resolution=[64, 64, 64]), "resolution"),
    (lambda d: d.update(seed=-1), "seed"),
])
def test_invalid_scenarios_are_rejected(mutate, fragment):
    doc = small()
    mutate(doc)
    with pytest.raises(ScenarioError, match=fragment):
        validate(doc)


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load(p)


def test_catalog_contents():
    cat = builtin_catalog()
    names = [sc.name for sc in cat]
    assert len(cat) >= 6 and len(set(names)) == len(names)
    for required in ("cat2", "ph3", "ph3-perturbed-0.01", "ph3-perturbed-0.02", "t4-product",
                     "skew-suspension-0"):
        assert required in names
    assert builtin("ph3").map["center_dim"] == 1
    assert builtin("t4-product").map["unstable_dim"] == 2
    for sc in cat:
        assert "verify" in sc.kinds
        validate(sc.to_dict())


def test_catalog_scenarios_are_fresh_copies():
    a = builtin("cat2")
    a.map["matrix"][0][0] = 7
    assert builtin("cat2").map["matrix"][0][0] == 2


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin("no-such-map")


def test_ph3_includes_maximum_identity():
    names = [v.name for v in verify_inequalities(builtin("ph3").map, {})]
    assert "h(f) = max(chi_u(f), chi_s(f))" in names


def test_skew_zero_fibers():
    from phlab.lab.experiments import build_map, fiber_table
    fib = fiber_table(build_map(builtin("skew-suspension-0").map))
    ys = sorted(p["y"] for p in fib)
    assert ys == pytest.approx([0.0, 0.25, 0.5], abs=1e-10)
    speeds = [p["speed"] for p in sorted(fib, key=lambda p: p["y"])]
    assert speeds == pytest.approx([1.0, 2.0, 1.0], abs=1e-10)


def test_small_scenario_passes(small_report):
    assert small_report.status == "pass", small_report.body_json()
    assert small_report.exit_code == EXIT_OK
    h = small_report.body["experiments"]["homology"]["result"]
    assert h["lambda_W"] == pytest.approx(2.618033988749895, abs=1e-12)


def test_report_is_deterministic(small_report):
    again = run_scenario(validate(SMALL))
    assert again.body_json() == small_report.body_json()
    threaded = run_scenario(validate(SMALL), threads=3)
    assert threaded.body_json() == small_report.body_json()


def test_seed_override_changes_report(small_report):
    other = run_scenario(validate(SMALL), seed=11)
    assert other.body["seed"] == 11
    assert other.body_json() != small_report.body_json()


def test_report_files(small_report, tmp_path):
    path = small_report.write(tmp_path)
    doc = json.loads(path.read_text())
    assert "wall_time" in doc and "wall_time" not in small_report.body
    csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert csvs and all(name.startswith("small-cat.") for name in csvs)


def test_saturated_ladder_is_an_execution_error():
    doc = small(experiments=[{"kind": "entropy", "eps_ladder": [0.01], "n_max": 3,
                              "resolution": [16]}, {"kind": "verify"}])
    rep = run_scenario(validate(doc))
    assert rep.status == "error" and rep.exit_code == EXIT_ERROR
    assert "all eps saturated" in rep.body["experiments"]["entropy"]["error"]


def test_singular_matrix_is_an_execution_error():
    doc = small(map={"kind": "toral", "matrix": [[1, 1], [1, 1]], "unstable_dim": 1})
    rep = run_scenario(validate(doc))
    assert rep.exit_code == EXIT_ERROR and "error" in rep.body


def test_injected_violation_fails_refined_inequality():
    # a synthetic result set where the metric entropy exceeds the bound by 0.5
    results = {
        "volume_growth": {"chi_u": 0.962424, "chi_s": 0.962424, "spread": 0.0, "runs": [1, 2]},
        "measure_entropy": {"h_nu": 0.962424 + 0.5},
        "lyapunov": {"center_term": 0.0, "exponents": [0.962424, -0.962424], "total": 0.0},
    }
    v = {x.name: x for x in verify_inequalities(builtin("cat2").map, results)}
    assert v["center_term + chi_u(f) >= h_nu(f)"].status == "fail"
    assert v["h(f) >= chi_u(f)"].status == "skipped"


def test_missing_inputs_are_skipped_not_passed():
    for v in verify_inequalities(builtin("ph3").map, {}):
        assert v.status == "skipped"


def test_discontinuity_verdicts_on_synthetic_rows():
    fixed = [{"y": 0.0, "speed": 1.0}, {"y": 0.25, "speed": 2.0}, {"y": 0.5, "speed": 1.0}]
    rows = [{"epsilon": 0.0, "h_hat": 1.9}, {"epsilon": 0.005, "h_hat": 0.95},
            {"epsilon": -0.005, "h_hat": 1.85}]
    v = verify_discontinuity(rows, 0.95, 1.9, 1, fixed)
    assert all(x.status == "pass" for x in v), v
    rows[1]["h_hat"] = 1.9  # no jump on the annihilation side
    v = verify_discontinuity(rows, 0.95, 1.9, 1, fixed)
    assert any(x.status == "fail" for x in v)


def test_clean_handles_numpy_and_nan():
    import numpy as np
    out = clean({"a": np.float64("nan"), "b": (np.int64(2), np.bool_(True)),
                 "c": np.arange(2)})
    assert out == {"a": None, "b": [2, True], "c": [0, 1]}
    json.dumps(out)


def test_cli_catalog(capsys, tmp_path):
    assert main(["catalog", "--dump", str(tmp_path)]) == EXIT_OK
    assert "cat2" in capsys.readouterr().out
    dumped = sorted(p.stem for p in tmp_path.glob("*.json"))
    assert dumped == sorted(sc.name for sc in builtin_catalog())
    validate(json.loads((tmp_path / "ph3.json").read_text()))


def test_cli_run_and_verify_report(tmp_path, capsys):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "reports"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = out / "small-cat.json"
    assert report.exists()
    assert main(["verify", "--report", str(report)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_cli_verify_report_detects_failure(tmp_path, small_report):
    body = json.loads(small_report.body_json())
    body["experiments"]["entropy"]["result"]["h_hat"] = 0.5
    p = tmp_path / "tampered.json"
    p.write_text(json.dumps(body))
    assert main(["verify", "--report", str(p)]) == EXIT_VERDICT


def test_cli_out_env(tmp_path, monkeypatch):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps(SMALL))
    monkeypatch.setenv("PHLAB_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "env" / "small-cat.json").exists()


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(small(seed=-4)))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["run", "--builtin", "nope", "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "--seed", "-1"])
    with pytest.raises(SystemExit):
        main(["run", "--threads", "0"])
