import json
import math

import numpy as np
import pytest

import stoqease.experiments as ex
from stoqease.cli import main
from stoqease.experiments import (
    AxisSpec,
    ConfigError,
    ResultRow,
    config_from_dict,
    emit_plotdata,
    load_plotdata,
    log_sign_ratio,
    point_seed,
    read_csv,
    resolve_threads,
    run,
    rows_to_csv,
    write_outputs,
)
from stoqease.qmc import DegenerateSignError

TINY_SWEEP = {
    "experiment": "ladder_sweep",
    "model": {"n_rungs": 3},
    "grid": [{"name": "J_perp", "min": 0.5, "max": 1.0, "steps": 2}, {"name": "J_cross", "min": 0.5, "max": 1.0, "steps": 2}],
    "optimizer": {"max_iters": 20},
    "qmc": {"beta": 1.0, "m": 20},
}


def test_axis_parse():
    a = AxisSpec.parse("J2=0:2:5")
    assert a == AxisSpec("J2", 0.0, 2.0, 5)
    assert np.allclose(a.values(), [0, 0.5, 1, 1.5, 2])
    for bad in ("J2=0:2", "J2", "J2=1:0:3", "J2=0:1:0"):
        with pytest.raises(ConfigError):
            AxisSpec.parse(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        config_from_dict({})
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "nope"})
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "measure", "bogus": 1})
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "measure", "optimizer": {"tolerance": 1}})
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "measure", "seed": -1})
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "ladder_sweep", "grid": [{"name": "a", "min": 0, "max": 1, "steps": 2}]})


def test_per_model_defaults():
    assert config_from_dict({"experiment": "ladder_sweep"}).optimizer.alpha == 40.0
    assert config_from_dict({"experiment": "jmodel_sweep"}).optimizer.init == "haar_random"
    assert config_from_dict({"experiment": "benchmark_random"}).optimizer.alpha == 50.0
    axes = config_from_dict({"experiment": "ladder_sweep"}).axes()
    assert [a.steps for a in axes] == [21, 21]


def test_point_seed_is_order_free():
    assert point_seed(7, 1, 2) == point_seed(7, 1, 2)
    assert len({point_seed(7, i, j) for i in range(5) for j in range(5)}) == 25
    assert 0 <= point_seed(2**64 - 1, 3) < 2**64


def test_log_sign_ratio_conventions():
    assert log_sign_ratio(0.0, 0.0) == 1.0
    assert math.isinf(log_sign_ratio(1e-12, 0.5))
    assert log_sign_ratio(2.0, 0.5) == 0.25


def test_csv_formatting():
    rows = [ResultRow("measure", {"mode": "dense", "p": 1.0}, {"nu": -0.0, "stoquastic": True})]
    text = rows_to_csv(rows, "measure")
    assert text.splitlines() == ["experiment,mode,p,nu,stoquastic,seed", "measure,dense,1,0,1,"]
    assert rows_to_csv([ResultRow("measure", {}, {"nu": 0.1})], "measure").splitlines()[1] == "measure,0.10000000000000001,NA,"


def test_tiny_sweep_rows_and_rerun(tmp_path):
    cfg = config_from_dict(TINY_SWEEP)
    res = run(cfg)
    assert len(res.rows) == 4 and not res.failures
    for r in res.rows:
        assert r.values["nu1_after"] <= r.values["nu1_before"] + 1e-12
    m1 = write_outputs(res, tmp_path)
    first = (tmp_path / "ladder_sweep.csv").read_text()
    m2 = write_outputs(run(cfg), tmp_path)
    assert (tmp_path / "ladder_sweep.csv").read_text() == first
    assert m1["checksums"] == m2["checksums"] and "rerun_mismatch" not in m2
    assert [r["J_perp"] for r in read_csv(tmp_path / "ladder_sweep.csv")] == ["0.5", "0.5", "1", "1"]


def test_threads_do_not_change_results():
    a = run(config_from_dict(TINY_SWEEP))
    b = run(config_from_dict(dict(TINY_SWEEP, threads=3)))
    assert rows_to_csv(a.rows, "ladder_sweep") == rows_to_csv(b.rows, "ladder_sweep")


def test_rerun_mismatch_flag(tmp_path):
    cfg = config_from_dict({"experiment": "measure", "model": {"model": "example_sign_free", "n": 2}})
    res = run(cfg)
    write_outputs(res, tmp_path)
    res.rows[0].values["nu"] = 1.5
    manifest = write_outputs(res, tmp_path)
    assert "rerun_mismatch" in manifest
    stored = json.loads((tmp_path / "measure.manifest.json").read_text())
    assert stored["config_sha256"] == manifest["config_sha256"] and len(stored["code_sha256"]) == 64


def test_plotdata_round_trip(tmp_path):
    axes = (AxisSpec("x", 0.0, 1.0, 2), AxisSpec("y", 0.0, 2.0, 3))
    rows = [
        ResultRow("ladder_sweep", {"x": float(x), "y": float(y)}, {"q": 10 * x + y})
        for x in axes[0].values()
        for y in axes[1].values()
    ]
    (path,), code = emit_plotdata(rows, axes, tmp_path, ["q"])
    xs, ys, mat = load_plotdata(path)
    assert code == 0
    assert np.array_equal(xs, [0, 1]) and np.array_equal(ys, [0, 1, 2])
    assert np.array_equal(mat, [[0, 1, 2], [10, 11, 12]])
    (path,), code = emit_plotdata(rows[:-1], axes, tmp_path, ["q"])
    assert code == 2 and math.isnan(load_plotdata(path)[2][1, 2])


def test_failed_point_leaves_gap(tmp_path, monkeypatch):
    real = ex.average_sign
    calls = {"n": 0}

    def flaky(H, qmc):
        calls["n"] += 1
        if calls["n"] == 3:  # the before-sign of the second grid point
            raise DegenerateSignError("forced")
        return real(H, qmc)

    monkeypatch.setattr(ex, "average_sign", flaky)
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(TINY_SWEEP))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2
    rows = read_csv(tmp_path / "out" / "ladder_sweep.csv")
    assert len(rows) == 3
    _, _, mat = load_plotdata(tmp_path / "out" / "plotdata" / "nu1_ratio.dat")
    assert math.isnan(mat[0, 1]) and np.isfinite(mat).sum() == 3
    manifest = json.loads((tmp_path / "out" / "ladder_sweep.manifest.json").read_text())
    assert manifest["failures"][0]["item"] == [0, 1] and manifest["exit_code"] == 2


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("STOQEASE_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("STOQEASE_THREADS", "3")
    assert resolve_threads(None) == 3 and resolve_threads(2) == 2
    monkeypatch.setenv("STOQEASE_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)


# --- command line ----------------------------------------------------------


def test_cli_measure_stoquastic(tmp_path):
    m = tmp_path / "h.txt"
    A = np.random.default_rng(0).standard_normal((4, 4))
    np.savetxt(m, -np.abs(A + A.T))
    assert main(["measure", str(m), "--out", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "measure.csv")
    assert row["nu"] == "0" and row["stoquastic"] == "1"


def test_cli_avgsign_example(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"model": "example_sign_free", "n": 3}, "qmc": {"beta": 1.0, "m": 7}}))
    assert main(["avgsign", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert float(read_csv(tmp_path / "avgsign.csv")[0]["sign"]) == pytest.approx(1.0, abs=1e-12)


def test_cli_numerical_failure(tmp_path):
    m = tmp_path / "h.txt"
    np.savetxt(m, 10 * np.eye(2))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"qmc": {"beta": 1.0, "m": 10}}))
    assert main(["avgsign", str(m), "--config", str(cfg), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["measure", "--grid", "bad"],
        ["measure", "/nonexistent/matrix.txt"],
        ["embed-maxcut"],
        ["sweep", "--grid", "J9=0:1:2"],
    ],
)
def test_cli_config_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 1


def test_cli_unknown_subcommand_exit_code(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1


def test_cli_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "measure", "bogus": True}))
    assert main(["measure", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    cfg.write_text("[1, 2]")
    assert main(["measure", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_cli_embed_and_verify(tmp_path):
    g = tmp_path / "k3.txt"
    g.write_text("0 1\n1 2\n0 2\n")
    assert main(["embed-maxcut", str(g), "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "embed_maxcut.csv")) == 12
    assert main(["verify-reduction", str(g), "--out", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "maxcut_verify.csv")
    assert row["zflip_min"] == "1" and row["clifford_matches"] == "1"


def test_cli_optimize_and_benchmark(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"model": "random_stoquastic", "d": 2, "seed": 1}, "n_sites": 4,
                               "optimizer": {"init": "haar_random", "max_iters": 300}}))
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "optimize.csv")
    assert float(row["nu1_after"]) <= float(row["nu1_before"])
    manifest = json.loads((tmp_path / "optimize.manifest.json").read_text())
    O = np.array(manifest["extras"]["orthogonal"])
    assert np.allclose(O.T @ O, np.eye(2))
    cfg.write_text(json.dumps({"n_instances": 3, "optimizer": {"max_iters": 200}}))
    assert main(["benchmark-random", "--config", str(cfg), "--out", str(tmp_path), "--seed", "5"]) == 0
    rows = read_csv(tmp_path / "benchmark_random.csv")
    assert len(rows) == 3 and all(float(r["nu1_after"]) <= float(r["nu1_before"]) for r in rows)


def test_cli_sign_study(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_instances": 2, "n_sites": 4, "alpha_steps": 5}))
    assert main(["sign-study", "--config", str(cfg), "--out", str(tmp_path), "--threads", "2"]) == 0
    assert len(read_csv(tmp_path / "sign_study.csv")) == 10


def test_sign_study_stoquastic_instance():
    # master seed 0, instance 9 draws a chain that is stoquastic from the start
    rows = ex.sign_study_instance(5, point_seed(0, 9), 4, ex.QmcParams(1.0, 20))
    assert [r.nu1 for r in rows] == [0.0] * 4
    assert all(r.inverse_sign == pytest.approx(1.0) for r in rows)
    assert math.isnan(ex.spearman_or_nan([r.nu1 for r in rows], [math.log(r.inverse_sign) for r in rows]))
