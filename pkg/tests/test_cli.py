import csv
import json
import os

import numpy as np
import pytest

from svsgraph.cli import PRESETS, build_parser, main, parse_grid, resolve_config, ConfigError
from svsgraph.models import generate_derg
from svsgraph.reports import (
    SWEEP_HEADER,
    write_edges_csv,
    write_histogram_csv,
    write_ratios_csv,
    write_spectrum_csv,
)
from svsgraph.spectra import complex_eigenvalues, singular_values
from svsgraph.stats import histogram, pdf_goe_ratio, pdf_pe_ratio, real_spacing_ratios


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGoldenHeaders:
    def test_edges(self, tmp_path):
        g = generate_derg(6, 0.3, 1)
        path = write_edges_csv(g, tmp_path / "g.csv")
        assert header(path) == ["u", "v", "w"]
        data = rows(path)
        assert len(data) == np.count_nonzero(g.adjacency)
        A = np.zeros((6, 6))
        for r in data:
            A[int(r["u"]), int(r["v"])] = float(r["w"])
        assert np.array_equal(A, g.adjacency)

    def test_spectra(self, tmp_path):
        A = generate_derg(5, 0.5, 2).adjacency
        assert header(write_spectrum_csv(singular_values(A), tmp_path / "s.csv")) == ["index", "value"]
        assert header(write_spectrum_csv(complex_eigenvalues(A), tmp_path / "e.csv")) == ["index", "re", "im"]

    def test_ratios_and_histogram(self, tmp_path):
        r = real_spacing_ratios(np.arange(10.0) ** 1.5)
        path = write_ratios_csv(r, tmp_path / "r.csv")
        assert header(path) == ["r"] and len(rows(path)) == 8
        h = histogram(r.values, (0, 1), 5)
        assert header(write_histogram_csv(h, tmp_path / "h.csv")) == ["bin_center", "density"]

    def test_sweep_header(self, tmp_path):
        assert main(["sweep", "--model", "pe", "--n", "12", "--realizations", "3",
                     "--out", str(tmp_path)]) == 0
        assert tuple(header(tmp_path / "sweep_PE.csv")) == SWEEP_HEADER
        assert ",".join(SWEEP_HEADER) == (
            "model,n,param,k_mean,rR_AAT,rC_AAT,rC_A,rR_AAT_norm,rC_AAT_norm,"
            "rC_A_norm,lmin_mean,lmin_meansq,lmin_moment_ratio,samples"
        )


class TestGrid:
    def test_log(self):
        g = parse_grid("log:1e-4:1:5")
        np.testing.assert_allclose(g, [1e-4, 1e-3, 1e-2, 1e-1, 1])

    def test_lin_and_list(self):
        assert parse_grid("lin:0:1:3") == [0.0, 0.5, 1.0]
        assert parse_grid("0.1,0.2") == [0.1, 0.2]

    @pytest.mark.parametrize("bad", ["log:0:1:5", "log:1:0.1:3", "lin:0:1:0", "abc", "log:1:2"])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError, match="--p-grid"):
            parse_grid(bad, "--p-grid")


class TestSweepCommand:
    ARGS = ["sweep", "--model", "derg", "--n", "30", "--p-grid", "log:1e-4:1:20",
            "--realizations", "4", "--seed", "7"]

    def test_rows_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(self.ARGS + ["--out", str(a)]) == 0
        assert main(self.ARGS + ["--out", str(b)]) == 0
        assert len(rows(a / "sweep_dERG.csv")) == 20
        assert (a / "sweep_dERG.csv").read_text() == (b / "sweep_dERG.csv").read_text()

    def test_invalid_grid_exit(self, tmp_path, capsys):
        code = main(["sweep", "--model", "derg", "--p-grid", "log:0:1:5", "--out", str(tmp_path)])
        assert code != 0
        assert "--p-grid" in capsys.readouterr().err

    def test_missing_model(self, tmp_path, capsys):
        assert main(["sweep", "--p-grid", "0.1", "--out", str(tmp_path)]) == 2
        assert "--model" in capsys.readouterr().err

    def test_replay_from_json(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["sweep", "--model", "drrg", "--n", "25", "--rho-grid", "0.1,0.4",
                "--realizations", "5", "--seed", "3", "--histograms", "--bins", "10"]
        assert main(args + ["--out", str(a)]) == 0
        doc = json.loads((a / "sweep_dRRG.json").read_text())
        assert doc["config"]["seed"] == 3 and doc["version"]
        assert doc["constants"]["rR_PEPET"] == 0.386
        assert "histograms" in doc["points"][0]
        assert main(["sweep", "--config", str(a / "sweep_dRRG.json"), "--out", str(b)]) == 0
        ra, rb = rows(a / "sweep_dRRG.csv"), rows(b / "sweep_dRRG.csv")
        for x, y in zip(ra, rb):
            for k in SWEEP_HEADER[3:]:
                assert abs(float(x[k]) - float(y[k])) <= 1e-12

    def test_refs_file(self, tmp_path):
        refs = tmp_path / "refs.json"
        refs.write_text(json.dumps({"constants": {"rR_PEPET": 0.3, "rR_RGERGET": 0.6}}))
        assert main(["sweep", "--model", "rge", "--n", "20", "--realizations", "3",
                     "--stats", "rR_AAT", "--refs", str(refs), "--out", str(tmp_path)]) == 0
        (row,) = rows(tmp_path / "sweep_RGE.csv")
        assert float(row["rR_AAT_norm"]) == pytest.approx((float(row["rR_AAT"]) - 0.3) / 0.3)

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SVSGRAPH_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["sweep", "--model", "pe", "--n", "10", "--realizations", "2",
                     "--format", "csv"]) == 0
        assert (tmp_path / "env" / "sweep_PE.csv").exists()
        assert not (tmp_path / "env" / "sweep_PE.json").exists()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["sweep", "--model", "pe", "--n", "10", "--realizations", "2",
                     "--out", str(blocker / "sub")]) == 1


class TestPrecedence:
    def resolve(self, argv):
        return resolve_config(build_parser().parse_args(argv))

    def test_preset_fig1(self):
        cfg = self.resolve(["sweep", "--preset", "paper-fig1", "--model", "drrg"])
        assert cfg["n"] == [100, 200, 400, 800, 1600]
        assert cfg["ratio_budget"] == 10**6 and cfg["realizations"] is None
        assert cfg["grid"][0] == pytest.approx(1e-3) and cfg["grid"][-1] == pytest.approx(2**0.5)

    def test_flags_override_config_override_preset(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"n": [50], "seed": 11, "realizations": 9}))
        cfg = self.resolve(["sweep", "--preset", "paper-fig4", "--model", "derg",
                            "--config", str(conf), "--seed", "12"])
        assert cfg["n"] == [50]                      # config beats preset
        assert cfg["seed"] == 12                     # flag beats config
        assert cfg["realizations"] == 9 and cfg["ratio_budget"] is None
        assert cfg["stats"] == ["min_singular"]      # preset beats default

    def test_presets_documented(self):
        assert {"paper-fig1", "paper-fig3", "paper-fig4", "paper-fig5"} <= set(PRESETS)

    def test_bad_workers(self, tmp_path):
        assert main(["sweep", "--model", "pe", "--workers", "0", "--out", str(tmp_path)]) == 2


class TestCalibrateCommand:
    def test_small_n(self, tmp_path):
        assert main(["calibrate", "--n", "10", "--realizations", "50", "--seed", "1",
                     "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "constants.json").read_text())
        assert doc["small_n_warning"] is True
        assert set(doc["constants"]) == set(doc["stderr"])
        # the file is accepted by --refs
        assert main(["sweep", "--model", "pe", "--n", "10", "--realizations", "2",
                     "--refs", str(tmp_path / "constants.json"), "--out", str(tmp_path)]) == 0

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["calibrate", "--n", "10", "--realizations", "2",
                     "--out", str(blocker / "x")]) != 0


class TestHistCommand:
    def _hist(self, tmp_path, *args):
        assert main(["hist", "--out", str(tmp_path), "--bins", "10", *args]) == 0

    def test_pe_limit_matches_poisson(self, tmp_path):
        self._hist(tmp_path, "--model", "derg", "--n", "100", "--p", "0.0001", "--stat", "rR_AAT")
        data = rows(tmp_path / "hist_dERG_n100_0.0001_rR_AAT.csv")
        assert list(data[0]) == ["bin_center", "density", "pe_pdf", "goe_pdf"]
        c = np.array([float(r["bin_center"]) for r in data])
        d = np.array([float(r["density"]) for r in data])
        assert np.allclose([float(r["pe_pdf"]) for r in data], pdf_pe_ratio(c))
        assert np.max(np.abs(d - pdf_pe_ratio(c))) < 0.05

    def test_rge_limit_matches_goe(self, tmp_path):
        self._hist(tmp_path, "--model", "derg", "--n", "100", "--p", "0.5", "--stat", "rR_AAT")
        data = rows(tmp_path / "hist_dERG_n100_0.5_rR_AAT.csv")
        c = np.array([float(r["bin_center"]) for r in data])
        d = np.array([float(r["density"]) for r in data])
        assert np.max(np.abs(d - pdf_goe_ratio(c))) < 0.05

    def test_lmin_target(self, tmp_path):
        self._hist(tmp_path, "--stat", "lmin", "--target-rbar", "0.5", "--model", "drrg",
                   "--n", "100", "--realizations", "200")
        path = tmp_path / "hist_dRRG_n100_rbar0.5_lmin.csv"
        assert header(path) == ["bin_center", "density", "exp_pdf"]
        doc = json.loads((tmp_path / "hist_dRRG.json").read_text())
        (entry,) = doc["histograms"]
        assert abs(entry["locate"]["estimate"] - 0.5) <= 0.02

    def test_needs_param(self, tmp_path, capsys):
        assert main(["hist", "--model", "derg", "--out", str(tmp_path)]) == 2
        assert "--p" in capsys.readouterr().err


class TestLocateCommand:
    def test_locate(self, tmp_path, capsys):
        assert main(["locate", "--model", "derg", "--n", "60", "--target-rbar", "1",
                     "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "locate_dERG.json").read_text())
        assert doc["result"]["param"] >= 0.5
        assert "p =" in capsys.readouterr().out

    def test_bracket_failure_exit(self, tmp_path, capsys):
        # with these endpoints the whole curve stays below 0.9
        refs = tmp_path / "refs.json"
        refs.write_text(json.dumps({"rR_PEPET": 0.5, "rR_RGERGET": 0.6}))
        code = main(["locate", "--model", "derg", "--n", "100", "--target-rbar", "0.9",
                     "--refs", str(refs), "--out", str(tmp_path)])
        assert code == 1
        assert "bracket" in capsys.readouterr().err
