import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hflc import anfis, biped, controller, fuzzy
from hflc.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, rule_count_table


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def counts(out):
    return {k: v.split()[0] for k, v in (line.split("=", 1) for line in out.splitlines() if "=" in line)}


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    assert main(["train", "--out", str(d), "--size", "30", "--epochs", "3"]) == EXIT_OK
    return d


class TestCountRules:
    def test_seven(self, capsys):
        code, out, _ = run(["count-rules", "--n", "7", "--m", "3"], capsys)
        assert code == EXIT_OK
        c = counts(out)
        assert c["flat"] == "2187" and c["jellali"] == "54"

    def test_two(self, capsys):
        c = counts(run(["count-rules", "--n", "2"], capsys)[1])
        assert c["flat"] == c["jellali"] == "9"

    def test_twelve(self, capsys):
        assert counts(run(["count-rules", "--n", "12"], capsys)[1])["jellali"] == "99"

    def test_linear_table(self):
        for n in range(2, 13):
            assert rule_count_table(n, 3)["jellali"] == (n - 1) * 9

    def test_overflow_reported(self, capsys):
        code, out, err = run(["count-rules", "--n", "50"], capsys)
        assert code == EXIT_NUMERIC
        assert counts(out)["flat"] == "overflow"
        assert counts(out)["jellali"] == str(49 * 9)
        assert "64-bit" in err

    def test_bad_n(self, capsys):
        assert run(["count-rules", "--n", "1"], capsys)[0] == EXIT_USAGE


class TestGait:
    def test_default(self, tmp_path, capsys):
        code, out, _ = run(["gait", "--out", str(tmp_path)], capsys)
        assert code == EXIT_OK and "frames: 240" in out
        text = (tmp_path / "gait.csv").read_text()
        assert len(text.splitlines()) == 241
        back = biped.gait_from_csv(text)
        assert len(back) == 240

    def test_frames_flag(self, tmp_path):
        assert main(["gait", "--out", str(tmp_path), "--frames", "10"]) == EXIT_OK
        assert len((tmp_path / "gait.csv").read_text().splitlines()) == 11

    def test_byte_identical(self, tmp_path):
        main(["gait", "--out", str(tmp_path / "a"), "--seed", "4"])
        main(["gait", "--out", str(tmp_path / "b"), "--seed", "4"])
        assert (tmp_path / "a" / "gait.csv").read_bytes() == (tmp_path / "b" / "gait.csv").read_bytes()

    def test_unreachable(self, tmp_path, capsys):
        code, _, err = run(["gait", "--out", str(tmp_path), "--step-length", "1.7"], capsys)
        assert code == EXIT_NUMERIC and "step length" in err

    def test_flags_before_command(self, tmp_path):
        assert main(["--out", str(tmp_path), "--frames", "12", "gait"]) == EXIT_OK
        assert len((tmp_path / "gait.csv").read_text().splitlines()) == 13


class TestTrain:
    def test_outputs(self, trained_dir):
        doc = json.loads((trained_dir / "assembly.json").read_text())
        assert sum(len(c["units"]) for c in doc["controllers"].values()) == 12
        assembly = controller.load_assembly((trained_dir / "assembly.json").read_text())
        assert len(assembly) == 12
        summary = json.loads((trained_dir / "reports" / "summary.json").read_text())
        assert len(summary) == 12
        s = summary["HFL3/ankle_Lx"]
        rep = anfis.TrainingReport.from_files((trained_dir / "reports" / "HFL3_ankle_Lx.csv").read_text(), s)
        assert rep.final_sse == s["final_sse"] and rep.index == s["index"]
        assert len(rep.sse) == 4

    def test_size_ten(self, tmp_path):
        assert main(["train", "--out", str(tmp_path), "--size", "10", "--epochs", "2"]) == EXIT_OK

    def test_rerun_identical(self, tmp_path, trained_dir):
        assert main(["train", "--out", str(tmp_path), "--size", "30", "--epochs", "3", "--parallel"]) == EXIT_OK
        for rel in ("assembly.json", "reports/summary.json", "reports/HFL5_beta_L.csv"):
            assert (tmp_path / rel).read_bytes() == (trained_dir / rel).read_bytes()

    def test_seed_recorded(self, tmp_path):
        main(["train", "--out", str(tmp_path), "--size", "10", "--epochs", "1", "--seed", "9"])
        doc = json.loads((tmp_path / "assembly.json").read_text())
        assert doc["provenance"]["seed"] == 9

    def test_size_too_large(self, tmp_path, capsys):
        assert run(["train", "--out", str(tmp_path), "--size", "500"], capsys)[0] == EXIT_USAGE


class TestCurve:
    def test_rows(self, tmp_path):
        assert main(["curve", "--out", str(tmp_path), "--sizes", "10,30", "--epochs", "1"]) == EXIT_OK
        text = (tmp_path / "curve.csv").read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        assert list(rows[0]) == ["controller", "output", "size", "sse"]
        assert len(rows) == 12 * 2
        pairs = {(r["controller"], r["output"]) for r in rows}
        assert len(pairs) == 12
        assert len(controller.curve_from_csv(text)) == 24

    def test_single_size(self, tmp_path):
        main(["curve", "--out", str(tmp_path), "--sizes", "40", "--epochs", "1"])
        rows = controller.curve_from_csv((tmp_path / "curve.csv").read_text())
        assert len(rows) == 12 and {r.size for r in rows} == {40}

    def test_bad_sizes(self, tmp_path, capsys):
        assert run(["curve", "--out", str(tmp_path), "--sizes", "0"], capsys)[0] == EXIT_USAGE
        assert run(["curve", "--sizes", "a,b"], capsys)[0] == EXIT_USAGE


class TestSurface:
    def test_corners_and_sidecar(self, trained_dir):
        argv = ["surface", "--out", str(trained_dir), "--controller", "HFL1", "--output", "gamma_L",
                "--free", "x0,beta_L", "--resolution", "2"]
        assert main(argv) == EXIT_OK
        rows = controller.surface_from_csv((trained_dir / "surface_HFL1_gamma_L.csv").read_text())
        assert len(rows) == 4
        side = json.loads((trained_dir / "surface_HFL1_gamma_L.json").read_text())
        unit = controller.load_assembly((trained_dir / "assembly.json").read_text()).unit("HFL1", "gamma_L")
        U = unit.universes
        assert side["free"] == ["x0", "beta_L"]
        assert side["fixed"] == {"y0": 0.5 * (U[1, 0] + U[1, 1])}

    def test_matches_library(self, trained_dir):
        argv = ["surface", "--out", str(trained_dir), "--controller", "HFL5", "--output", "beta_L",
                "--free", "ankle_Lx,ankle_Ly", "--fixed", "x0=0.25", "--resolution", "11"]
        assert main(argv) == EXIT_OK
        rows = controller.surface_from_csv((trained_dir / "surface_HFL5_beta_L.csv").read_text())
        side = json.loads((trained_dir / "surface_HFL5_beta_L.json").read_text())
        assert side["fixed"]["x0"] == 0.25
        unit = controller.load_assembly((trained_dir / "assembly.json").read_text()).unit("HFL5", "beta_L")
        rng = np.random.default_rng(0)
        for i in rng.choice(len(rows), 10, replace=False):
            u, v, out = rows[i]
            want = fuzzy.infer(unit, [0.25, side["fixed"]["y0"], u, v], clamp=True)
            assert out == pytest.approx(want, abs=1e-14)

    def test_errors(self, trained_dir, tmp_path, capsys):
        base = ["surface", "--out", str(trained_dir), "--output", "gamma_L", "--free", "x0,beta_L"]
        assert run(base + ["--controller", "HFL9"], capsys)[0] == EXIT_USAGE
        assert run(["surface", "--out", str(trained_dir), "--controller", "HFL1", "--output", "gamma_L",
                    "--free", "x0,knee_Lx"], capsys)[0] == EXIT_USAGE
        assert run(base + ["--controller", "HFL1", "--resolution", "1"], capsys)[0] == EXIT_USAGE
        missing = ["surface", "--out", str(tmp_path / "none"), "--controller", "HFL1", "--output", "gamma_L",
                   "--free", "x0,beta_L"]
        assert run(missing, capsys)[0] == EXIT_IO


class TestConfig:
    def test_config_and_override(self, tmp_path):
        cfg = {"gait": {"frames": 24}, "training": {"epochs": 1}, "sizes": [12], "seed": 2, "out": str(tmp_path / "c")}
        path = tmp_path / "run.json"
        path.write_text(json.dumps(cfg))
        assert main(["gait", "--config", str(path)]) == EXIT_OK
        assert len((tmp_path / "c" / "gait.csv").read_text().splitlines()) == 25
        assert main(["gait", "--config", str(path), "--frames", "8"]) == EXIT_OK
        assert len((tmp_path / "c" / "gait.csv").read_text().splitlines()) == 9

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run(["gait", "--config", str(path)], capsys)[0] == EXIT_USAGE
        path.write_text(json.dumps({"colour": 1}))
        assert run(["gait", "--config", str(path)], capsys)[0] == EXIT_USAGE
        assert run(["gait", "--config", str(tmp_path / "missing.json")], capsys)[0] == EXIT_IO


def test_console_entry():
    res = subprocess.run([sys.executable, "-m", "hflc", "count-rules", "--n", "7"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "jellali=54" in res.stdout
