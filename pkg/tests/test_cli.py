import csv
import json

import numpy as np
import pytest

from dsparam.birkhoff import spectral_region_contains
from dsparam.cli import AGGREGATE_HEADER, COUNT_HEADER, OUTPUT_ROOT_ENV, main


def run(tmp_path, kind, doc, out="out", extra=()):
    cfg = tmp_path / f"{kind}.json"
    cfg.write_text(json.dumps(doc))
    return main([kind, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config=")
    json.loads(lines[0][len("# config="):])
    return list(csv.reader(lines[1:]))


SMALL_TRAIN = {"method": "go", "d": 3, "s": 2, "task": {"n_samples": 20}, "train": {"epochs": 40, "lr": 1e-2}}


class TestTrain:
    def test_outputs(self, tmp_path):
        assert run(tmp_path, "train", SMALL_TRAIN) == 0
        out = tmp_path / "out"
        rows = read_csv(out / "trace.csv")
        assert rows[0] == ["epoch", "loss", "grad_norm"] and len(rows) == 41
        summary = json.loads((out / "summary.json").read_text())
        assert {"epochs_to_convergence", "final_loss", "floor", "ds_residual", "config"} <= set(summary)
        assert summary["config"]["seed"] == 0
        H = np.array(json.loads((out / "final_matrix.json").read_text())["matrix"])
        assert H.shape == (3, 3) and summary["ds_residual"] < 1e-10

    def test_rerun_is_byte_identical(self, tmp_path):
        assert run(tmp_path, "train", SMALL_TRAIN, out="a") == 0
        assert run(tmp_path, "train", SMALL_TRAIN, out="b") == 0
        for name in ("trace.csv", "summary.json", "final_matrix.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_flag_changes_run(self, tmp_path):
        run(tmp_path, "train", SMALL_TRAIN, out="a")
        run(tmp_path, "train", SMALL_TRAIN, out="b", extra=("--seed", "5"))
        assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()

    @pytest.mark.parametrize("doc", [
        {"method": "nope"},
        {"d": 0},
        {"train": {"lr": -1.0}},
        {"task": {"kind": "other"}},
        {"method": "lite", "d": 9},
        {"method": "krom", "d": 6, "i_k": [2, 2]},
        {"task": {"sparsity": 1.0}},
    ])
    def test_config_errors(self, tmp_path, doc):
        assert run(tmp_path, "train", doc) == 2
        assert not (tmp_path / "out").exists()

    def test_kind_mismatch(self, tmp_path):
        assert run(tmp_path, "train", {"kind": "sweep"}) == 2

    def test_missing_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2

    def test_numeric_failure(self, tmp_path, capsys):
        doc = {"method": "go", "d": 3, "train": {"optimizer": "sgd", "lr": 1e300, "epochs": 5}}
        assert run(tmp_path, "train", doc) == 3
        assert "numeric error in train" in capsys.readouterr().err

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(SMALL_TRAIN))
        assert main(["train", "--config", str(cfg), "--out", "rel"]) == 0
        assert (tmp_path / "root" / "rel" / "trace.csv").exists()


class TestSweep:
    def test_aggregate(self, tmp_path):
        doc = {"grid": {"method": ["go", "lite"], "d": [2, 3]}, "train": {"epochs": 30},
               "task": {"n_samples": 10}}
        assert run(tmp_path, "sweep", doc) == 0
        rows = read_csv(tmp_path / "out" / "aggregate.csv")
        assert rows[0] == AGGREGATE_HEADER and len(rows) == 5
        assert all(r[-1] == "ok" for r in rows[1:])
        assert len(list((tmp_path / "out").glob("run_*/trace.csv"))) == 4

    def test_empty_range(self, tmp_path):
        assert run(tmp_path, "sweep", {"grid": {"d": []}}) == 2
        assert not (tmp_path / "out").exists()

    def test_unknown_key(self, tmp_path):
        assert run(tmp_path, "sweep", {"grid": {"colour": [1]}}) == 2

    def test_too_many_runs(self, tmp_path):
        assert run(tmp_path, "sweep", {"grid": {"eps": list(np.linspace(0, 1, 101)),
                                                 "sigma_p": list(np.linspace(0, 1, 101))}}) == 2

    def test_partial_failure(self, tmp_path):
        doc = {"grid": {"method": ["go", "lite"]}, "d": 3,
               "train": {"optimizer": "sgd", "lr": 1e300, "epochs": 5}}
        assert run(tmp_path, "sweep", doc) == 4
        rows = read_csv(tmp_path / "out" / "aggregate.csv")
        assert rows[1][-1].startswith("error") and rows[2][-1] == "ok"

    def test_parallel_matches_serial(self, tmp_path):
        doc = {"grid": {"d": [2, 3]}, "train": {"epochs": 20}, "task": {"n_samples": 10}}
        run(tmp_path, "sweep", doc, out="a")
        run(tmp_path, "sweep", doc, out="b", extra=("--jobs", "2"))
        assert (tmp_path / "a" / "aggregate.csv").read_bytes() == (tmp_path / "b" / "aggregate.csv").read_bytes()


class TestSpectra:
    def test_outputs(self, tmp_path):
        doc = {"method": "krom", "d": 4, "i_k": 2, "n_targets": 4, "train": {"epochs": 30, "lr": 1e-2}}
        assert run(tmp_path, "spectra", doc) == 0
        rows = read_csv(tmp_path / "out" / "spectra.csv")
        assert rows[0] == ["re", "im", "target_re", "target_im", "run"] and len(rows) == 17
        pts = [complex(float(r[0]), float(r[1])) for r in rows[1:]]
        assert all(abs(z.imag) <= 1e-6 and spectral_region_contains(4, z, 1e-6) for z in pts)
        region = json.loads((tmp_path / "out" / "region.json").read_text())
        assert set(region["polygons"]) == {"1", "2", "3", "4"}
        assert region["polygons"]["1"] == [[1.0, 0.0]]


class TestSample:
    def test_outputs(self, tmp_path):
        assert run(tmp_path, "sample", {"sampler": "haar_unit", "d": 3, "n": 5}) == 0
        body = json.loads((tmp_path / "out" / "samples.json").read_text())
        assert body["method"] == "haar_unit" and len(body["samples"]) == 5
        assert all(s["residual"] <= 1e-8 for s in body["samples"])

    def test_bvn_guard(self, tmp_path, capsys):
        assert run(tmp_path, "sample", {"sampler": "bvn_dirichlet", "d": 9}) == 2
        assert "FactorialOverflow" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        run(tmp_path, "sample", {"sampler": "sk", "d": 4}, out="a")
        run(tmp_path, "sample", {"sampler": "sk", "d": 4}, out="b")
        assert (tmp_path / "a" / "samples.json").read_bytes() == (tmp_path / "b" / "samples.json").read_bytes()


class TestAnalyze:
    def test_depth(self, tmp_path):
        assert run(tmp_path, "analyze", {"analysis": "depth", "d": 3, "depth": 5, "trials": 10}) == 0
        rows = read_csv(tmp_path / "out" / "depth.csv")
        assert rows[0] == ["depth", "median_lambda2"] and len(rows) == 6

    def test_matrices(self, tmp_path):
        doc = {"analysis": "matrices", "d": 2, "W": [[0.5, 0.5], [0.5, 0.5]], "T": [[1, 0], [0, 1]]}
        assert run(tmp_path, "analyze", doc) == 0
        body = json.loads((tmp_path / "out" / "analysis.json").read_text())
        assert body["kl_rows"] == pytest.approx(np.log(2))
        assert body["geodesic"] == pytest.approx(np.pi / 4)

    def test_needs_analysis(self, tmp_path):
        assert run(tmp_path, "analyze", {}) == 2


class TestCounts:
    def test_table(self, tmp_path):
        doc = {"d_values": list(range(2, 33))}
        assert run(tmp_path, "counts", doc) == 0
        rows = read_csv(tmp_path / "out" / "counts.csv")
        assert rows[0] == COUNT_HEADER
        body = rows[1:]
        krom_d = {int(r[1]) for r in body if r[0] == "krom"}
        assert krom_d == {2, 4, 8, 16, 32}
        go = {int(r[1]): int(r[4]) for r in body if r[0] == "go"}
        lite = {int(r[1]): int(r[4]) for r in body if r[0] == "lite"}
        ratios = [lite[d] / go[d] for d in sorted(lite)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        assert go[4] == 73 and lite[4] == 163

    def test_needs_values(self, tmp_path):
        assert run(tmp_path, "counts", {}) == 2
