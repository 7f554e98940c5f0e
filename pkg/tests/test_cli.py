import json
import math

import numpy as np
import pytest

from corrnoise.cli import main, read_matrix_csv, write_matrix_csv
from corrnoise.config import ConfigError, config_from_dict
from corrnoise.spectra import SymmetricMatrix

BLOCKS = {"kind": "constant", "groups": [{"size": 100, "rho": 0.7}, {"size": 50, "rho": 0.7}, {"size": 80, "rho": 0.4}], "delta": 0.25}


def write_config(path, **fields):
    cfg = {"schema_version": 1, **fields}
    path.write_text(json.dumps(cfg))
    return path


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestConfig:
    def test_rejects_unknown_field(self):
        with pytest.raises(ConfigError, match="scenaro"):
            config_from_dict({"schema_version": 1, "scenaro": "hTC1"})

    def test_rejects_wrong_version(self):
        with pytest.raises(ConfigError):
            config_from_dict({"schema_version": 2})

    def test_overrides_win(self):
        cfg = config_from_dict({"schema_version": 1, "seed": 3, "replicates": 4}, seed=9, replicates=2)
        assert (cfg.seed, cfg.replicates) == (9, 2)

    def test_hub_by_range(self):
        cfg = config_from_dict({
            "schema_version": 1,
            "template": {"kind": "hub", "groups": [{"size": 10, "rho_max": 0.7, "rho_min": 0.3}]},
            "noise": {"epsilon": 0.1, "m": 2},
        })
        assert cfg.template.groups[0].rho_min == pytest.approx(0.3)

    def test_hub_fields_on_wrong_kind(self):
        with pytest.raises(ConfigError):
            config_from_dict({"schema_version": 1, "template": {"kind": "constant", "groups": [{"size": 3, "rho": 0.5, "tau": 0.1}]}})

    def test_template_invariants_checked_at_load(self):
        with pytest.raises(ConfigError):
            config_from_dict({"schema_version": 1, "template": {"kind": "constant", "groups": [{"size": 3, "rho": 1.5}]}})

    def test_epsilon_required_without_budget(self):
        with pytest.raises(ConfigError):
            config_from_dict({"schema_version": 1, "noise": {"m": 3}})


class TestMatrixFiles:
    def test_round_trip_is_lossless(self, tmp_path):
        a = np.random.default_rng(0).uniform(-1, 1, (5, 5))
        a = (a + a.T) / 3
        m = SymmetricMatrix.from_dense(a)
        write_matrix_csv(tmp_path / "m.csv", m)
        assert read_matrix_csv(tmp_path / "m.csv").dense.tobytes() == m.dense.tobytes()
        assert "," in (tmp_path / "m.csv").read_text().splitlines()[0]


class TestGenerate:
    def test_s25_replicates(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=5, replicates=3, template=BLOCKS, noise={"epsilon": 0.29, "m": 25})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["replicates"]) == 3
        for row in manifest["replicates"]:
            assert row["positive_definite"] and row["valid"]
            assert row["kappa"] <= row["kappa_bound"]
            assert row["max_deviation"] <= 0.29
            assert main(["validate", str(tmp_path / "out" / row["file"])]) == 0

    def test_inadmissible_epsilon(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", template=BLOCKS, noise={"epsilon": 0.3, "m": 3})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 2
        assert "1 - rho_max" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_deterministic(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json", seed=1, replicates=2, template=BLOCKS, noise={"epsilon": 0.2, "m": 3},
            outputs=["matrix", "validity", "diff_histogram", "spectra"],
        )
        for out in ("a", "b"):
            assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "c"), "--workers", "2"]) == 0
        assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b") == snapshot(tmp_path / "c")

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=1, template=BLOCKS, noise={"epsilon": 0.2, "m": 3})
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
        assert (tmp_path / "a" / "replicate_0000.csv").read_bytes() != (tmp_path / "b" / "replicate_0000.csv").read_bytes()

    def test_budget_fills_epsilon(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", replicates=5, template=BLOCKS, noise={"m": 25}, budget={"kappa_max": 1e4})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["epsilon"] == pytest.approx((3000 - 231) / 10229)
        assert all(r["kappa"] <= 1e4 for r in manifest["replicates"])

    def test_explicit_epsilon_over_budget(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", template=BLOCKS, noise={"m": 25, "epsilon": 0.29}, budget={"kappa_max": 1e4})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_infeasible_budget(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", template=BLOCKS, noise={"m": 25}, budget={"kappa_max": 100})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_nonlinear_hub_uses_computed_bounds(self, tmp_path):
        t = {"kind": "hub", "groups": [{"size": 30, "rho_max": 0.7, "rho_min": 0.1, "gamma": 2.0}]}
        cfg = write_config(tmp_path / "c.json", replicates=2, template=t, noise={"epsilon": 0.05, "m": 3})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["bounds_certified"] is False
        assert all(r["kappa"] <= manifest["kappa_bound"] for r in manifest["replicates"])

    def test_config_error(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{not json")
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_missing_config_is_io_error(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 3


class TestValidate:
    def test_identity(self, tmp_path, capsys):
        p = tmp_path / "m.csv"
        p.write_text("1,0,0\n0,1,0\n0,0,1\n")
        assert main(["validate", str(p)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["condition_number"] == 1.0

    def test_out_of_range(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,1.2\n1.2,1\n")
        assert main(["validate", str(p)]) == 2

    def test_singular_reports_null_kappa(self, tmp_path, capsys):
        p = tmp_path / "m.csv"
        p.write_text("1,1\n1,1\n")
        assert main(["validate", str(p)]) == 0
        assert json.loads(capsys.readouterr().out)["condition_number"] is None

    def test_parse_failure(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,x\n0,1\n")
        assert main(["validate", str(p)]) == 1
        p.write_text("1,0,0\n0,1,0\n")
        assert main(["validate", str(p)]) == 1

    def test_generated_htc4_replicate(self, tmp_path):
        t = {"kind": "hub", "groups": [
            {"size": 100, "rho_max": 0.7, "rho_min": 0.5},
            {"size": 50, "rho_max": 0.7, "rho_min": 0.6},
            {"size": 80, "rho_max": 0.4, "rho_min": 0.2},
        ]}
        cfg = write_config(tmp_path / "c.json", template=t, noise={"epsilon": 0.1, "m": 2})
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert main(["validate", str(tmp_path / "o" / "replicate_0000.csv")]) == 0


TABLE1_ARMS = {
    "method_arms": [
        {"name": "S2", "m": 2, "epsilon": 0.29},
        {"name": "S3", "m": 3, "epsilon": 0.29},
        {"name": "S25", "m": 25, "epsilon": 0.29},
    ],
    "gaussian_arms": [
        {"name": "Gauss25", "sample_size": 25},
        {"name": "Gauss250", "sample_size": 250},
        {"name": "Gauss1000", "sample_size": 1000},
    ],
}


def read_summary(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return {row.split(",")[0]: dict(zip(header, row.split(","))) for row in lines[1:]}


class TestCompare:
    def test_table1(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=3, replicates=3, template=BLOCKS, spectrum_pairs=[["S25", "Gauss250"]], **TABLE1_ARMS)
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        hists = sorted(p.name for p in (tmp_path / "o").glob("*_hist.csv"))
        assert len(hists) == 6
        first = (tmp_path / "o" / "S25_hist.csv").read_text().splitlines()
        assert first[0] == "bin_left,bin_right,count" and len(first) == 82
        s = read_summary(tmp_path / "o" / "summary.csv")
        sd = {k: float(v["sd"]) for k, v in s.items()}
        assert sd["Gauss25"] > sd["Gauss250"] > sd["Gauss1000"]
        assert abs(sd["S25"] / 0.058 - 1) < 0.1
        assert (tmp_path / "o" / "spectrum_gaps.csv").exists()

    def test_deterministic(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=3, replicates=2, template=BLOCKS, **TABLE1_ARMS)
        for out in ("a", "b"):
            main(["compare", "--config", str(cfg), "--out", str(tmp_path / out)])
        assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")

    def test_needs_arms(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", template=BLOCKS)
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_inadmissible_arm(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", template=BLOCKS, method_arms=[{"name": "S", "m": 3, "epsilon": 0.5}])
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestCluster:
    def test_htc3(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=4, replicates=50, scenario="hTC3")
        assert main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        s = read_summary(tmp_path / "o" / "summary.csv")["hTC3"]
        assert float(s["median_k"]) == 3 and float(s["median_adj_rand"]) == 1
        assert len((tmp_path / "o" / "results.csv").read_text().splitlines()) == 51

    def test_iris_noiseless(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", scenario="iris")
        assert main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        s = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert s["median_k"] == 2 and s["median_adj_rand"] == 1

    def test_custom_noiseless(self, tmp_path):
        t = {"kind": "constant", "groups": [{"size": 10, "rho": 0.5}, {"size": 12, "rho": 0.6}, {"size": 9, "rho": 0.4}]}
        cfg = write_config(tmp_path / "c.json", replicates=2, scenario="custom", template=t, noise={"epsilon": 0.0, "m": 3})
        assert main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert float(read_summary(tmp_path / "o" / "summary.csv")["custom"]["median_adj_rand"]) == 1

    def test_deterministic_across_workers(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", seed=2, replicates=4, scenario="hTC5")
        main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"])
        assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")

    def test_unknown_scenario(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", scenario="hTC7")
        assert main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_bad_seed(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", scenario="hTC1")
        assert main(["cluster", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "-1"]) == 1


def test_summary_json_has_no_nan(tmp_path):
    cfg = write_config(tmp_path / "c.json", replicates=1, template=BLOCKS, noise={"epsilon": 0.1, "m": 3}, outputs=["validity"])
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "replicate_0000_validity.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert math.isfinite(json.loads(text)["condition_number"])
