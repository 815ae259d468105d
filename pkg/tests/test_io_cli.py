import json
from dataclasses import asdict
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from gsp_unroll import Hyperparams
from gsp_unroll.cli import main
from gsp_unroll.errors import DimensionError
from gsp_unroll.experiments import ExperimentConfig, run_experiment
from gsp_unroll.io import (
    RECORD_FIELDS,
    RESULT_JSON_SCHEMA,
    ResultRecord,
    dump_model,
    emit_results,
    fmt_float,
    load_csv,
    load_model,
    read_results,
    save_matrix_csv,
)

DATA = Path(__file__).parent / "data"
FIXTURE = DATA / "stations32.csv"
FIXTURE_GRAPH = DATA / "stations32_graph.csv"
TINY = Hyperparams(k_unroll=2, k1=15, k2=5, train_epochs=2)


# --- data CSV ------------------------------------------------------------------

def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_plain(tmp_path):
    x, psi = load_csv(write(tmp_path, "1,2,3\n4,5,6"))
    np.testing.assert_array_equal(x, [[1, 2, 3], [4, 5, 6]])
    np.testing.assert_array_equal(psi, np.ones((2, 3)))


def test_load_csv_missing_cells(tmp_path):
    x, psi = load_csv(write(tmp_path, "1,,3\n4,NaN,6\n"))
    np.testing.assert_array_equal(psi, [[1, 0, 1], [1, 0, 1]])
    assert x[0, 1] == 0 and x[1, 1] == 0


def test_load_csv_header(tmp_path):
    x, psi = load_csv(write(tmp_path, "a,b,c\n1,2,3\n"))
    assert x.shape == (1, 3)


@pytest.mark.parametrize("text, exc", [
    ("1,2,3\n4,5\n", DimensionError),
    ("1,2\n3,oops\n", ValueError),
    ("1\n2\n", DimensionError),
    ("a,b,c\n", ValueError),
])
def test_load_csv_errors(tmp_path, text, exc):
    with pytest.raises(exc):
        load_csv(write(tmp_path, text))


def test_fixture_shape():
    x, psi = load_csv(FIXTURE)
    assert x.shape == (32, 152)
    assert 0 < np.sum(psi == 0) < 0.05 * psi.size
    assert np.all(psi.sum(axis=1) >= 2)


def test_matrix_csv_roundtrip(tmp_path, rng):
    x = rng.standard_normal((3, 5))
    psi = (rng.random((3, 5)) > 0.3).astype(float)
    save_matrix_csv(tmp_path / "m.csv", x, psi)
    x2, psi2 = load_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(psi2, psi)
    np.testing.assert_array_equal(x2, psi * x)


# --- result records ----------------------------------------------------------

def sample_records():
    return [
        ResultRecord("e1", "trial", 0, 0.1, normalized_error=0.1, f_score=2 / 3,
                     alpha=[1.0, 1 / 3, 0.0], seed=123),
        ResultRecord("e1", "trial", 1, 0.1, snr_db=5.0, normalized_error=1e-17,
                     status="failed: DivergenceError", seed=124),
        ResultRecord("e1", "aggregate", None, 0.1, normalized_error=np.pi,
                     normalized_error_std=0.0, stability=0.5, seconds=1.25),
    ]


def test_float_format_is_exact():
    for v in (0.1, 1 / 3, np.pi, 1e-300, -0.0, 123456789.123456789):
        assert float(fmt_float(v)) == v
    assert fmt_float(-0.0) == "0"
    with pytest.raises(ValueError):
        fmt_float(float("nan"))


def test_empty_results_header_only(tmp_path):
    emit_results([], tmp_path / "r.csv", "csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(RECORD_FIELDS) + "\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_results_roundtrip(tmp_path, fmt):
    path = tmp_path / f"r.{fmt}"
    recs = sample_records()
    emit_results(recs, path, fmt)
    assert read_results(path) == recs
    assert b"\r\n" not in path.read_bytes()


def test_json_schema(tmp_path):
    emit_results(sample_records(), tmp_path / "r.json", "json")
    jsonschema.validate(json.loads((tmp_path / "r.json").read_text()), RESULT_JSON_SCHEMA)


def test_emit_errors(tmp_path):
    with pytest.raises(OSError, match="nope"):
        emit_results(sample_records(), tmp_path / "nope" / "r.csv", "csv")
    with pytest.raises(ValueError):
        emit_results(sample_records(), tmp_path / "r.xml", "xml")
    bad = [ResultRecord("e", "trial", 0, 0.1, normalized_error=float("inf"))]
    with pytest.raises(ValueError):
        emit_results(bad, tmp_path / "r.csv", "csv")


def test_model_dump_roundtrip(tmp_path, rng):
    from conftest import random_laplacian

    L = random_laplacian(rng, 5).matrix
    dump_model(tmp_path / "m.json", [1.0, 0.25, 1 / 3], L, extra={"note": "x"})
    alpha, L2 = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(alpha, [1.0, 0.25, 1 / 3])
    np.testing.assert_array_equal(L2, L)


# --- experiment config and driver ----------------------------------------------

def test_config_validation(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig(data_path=str(tmp_path / "missing.csv"))
    with pytest.raises(ValueError):
        ExperimentConfig(fractions=[])
    with pytest.raises(ValueError):
        ExperimentConfig(repeats=0)
    with pytest.raises(ValueError):
        ExperimentConfig(snrs=[])
    with pytest.raises(ValueError):
        ExperimentConfig(mode="fit")


def test_config_file_flags_win(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"repeats": 3, "seed": 5, "hyperparams": {"k1": 7, "lam": 0.5}}))
    c = ExperimentConfig.from_json(cfg, repeats=9, hyperparams={"lam": 2.0})
    assert c.repeats == 9 and c.seed == 5
    assert c.hyperparams.k1 == 7 and c.hyperparams.lam == 2.0
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        ExperimentConfig.from_json(cfg)


def small_config(**kw):
    base = dict(n_vertices=8, n_timestamps=40, edge_prob=0.5, repeats=2, seed=3,
                hyperparams=TINY)
    base.update(kw)
    return ExperimentConfig(**base)


def test_sweep_record_counts():
    recs = run_experiment(small_config(fractions=[0.1, 0.2, 0.3]))
    assert [r.kind for r in recs].count("trial") == 6
    assert [r.kind for r in recs].count("aggregate") == 3
    agg = recs[2]
    assert agg.kind == "aggregate"
    assert agg.normalized_error == pytest.approx(np.mean([recs[0].normalized_error,
                                                          recs[1].normalized_error]))
    assert all(r.f_score is not None for r in recs)


def test_snr_sweep_and_stability():
    recs = run_experiment(small_config(snrs=[0.0, 20.0], stability=True, baselines=True))
    aggs = [r for r in recs if r.kind == "aggregate"]
    assert [a.snr_db for a in aggs] == [0.0, 20.0]
    assert all(0.0 <= a.stability <= 1.0 for a in aggs)
    assert all(a.error_knn_graph is not None for a in aggs)


def test_failed_trials_are_recorded():
    recs = run_experiment(small_config(hyperparams=TINY.replace(eta=1e300)))
    assert all(r.status.startswith("failed") for r in recs)
    assert recs[0].normalized_error is None


def test_workers_do_not_change_results():
    a = run_experiment(small_config(workers=1))
    b = run_experiment(small_config(workers=2))
    assert a == b


def test_inpaint_mode_uses_given_graph():
    recs = run_experiment(small_config(mode="inpaint", alpha0=[0.0, 1.0, 0.0]))
    assert recs[0].alpha == [0.0, 1.0, 0.0]
    assert recs[0].f_score == 1.0  # scored against itself


# --- command line --------------------------------------------------------------

def test_cli_pipeline(tmp_path, capsys):
    d, g = tmp_path / "d.csv", tmp_path / "g.csv"
    assert main(["synth", "--n-vertices", "8", "--n-timestamps", "30", "--seed", "4",
                 "--mask-fraction", "0.1", "--out", str(d), "--graph-out", str(g)]) == 0
    x, psi = load_csv(d)
    assert x.shape == (8, 30) and np.sum(psi == 0) == 24
    assert main(["inpaint", "--data", str(d), "--graph", str(g), "--out",
                 str(tmp_path / "c.csv")]) == 0
    xc, psic = load_csv(tmp_path / "c.csv")
    assert np.all(psic == 1)
    assert main(["train", "--data", str(d), "--epochs", "2", "--k-unroll", "2",
                 "--model-out", str(tmp_path / "m.json")]) == 0
    alpha, L = load_model(tmp_path / "m.json")
    assert alpha.shape == (3,) and L.shape == (8, 8)
    assert main(["learn", "--data", str(d), "--k-unroll", "2", "--out",
                 str(tmp_path / "l.json")]) == 0


def test_cli_sweep_deterministic(tmp_path):
    args = ["sweep", "--data", str(FIXTURE), "--graph", str(FIXTURE_GRAPH),
            "--mask-fraction", "0.1,0.3", "--repeats", "2", "--seed", "11",
            "--k-unroll", "2", "--k1", "20", "--k2", "5", "--epochs", "2",
            "--threshold", "0.2", "--baselines"]
    for fmt in ("csv", "json"):
        outs = [tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"]
        for o in outs:
            assert main(args + ["--format", fmt, "--out", str(o)]) == 0
        assert outs[0].read_bytes() == outs[1].read_bytes()
        recs = read_results(outs[0])
        assert len(recs) == 6 and all(r.status == "ok" for r in recs)
        emit_results(recs, tmp_path / f"c.{fmt}", fmt)
        assert (tmp_path / f"c.{fmt}").read_bytes() == outs[0].read_bytes()


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_vertices": 6, "n_timestamps": 20, "repeats": 1,
                               "hyperparams": asdict(TINY)}))
    out = tmp_path / "r.csv"
    assert main(["sweep", "--config", str(cfg), "--repeats", "2", "--out", str(out)]) == 0
    assert len(read_results(out)) == 3


def test_cli_errors(tmp_path, capsys):
    assert main(["sweep", "--data", str(tmp_path / "none.csv")]) == 2
    assert "no such file" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["sweep", "--format", "xml"])
