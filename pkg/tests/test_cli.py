import csv
import json
import shutil
import subprocess

import pytest

from mse_adjust import graph_to_dict, preset, sample, write_dataset_csv
from mse_adjust.cli import build_parser, main


@pytest.fixture()
def m1_json(tmp_path, m1):
    path = tmp_path / "m1.json"
    path.write_text(json.dumps(graph_to_dict(m1.dag, m1)))
    return str(path)


@pytest.fixture()
def g3_json(tmp_path):
    m = preset("g3-demo")
    path = tmp_path / "g3.json"
    path.write_text(json.dumps(graph_to_dict(m.dag, m)))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestClassifyCommand:
    def test_g3_flags(self, capsys, g3_json):
        code, out = run_cli(capsys, "classify", "--graph", g3_json)
        assert code == 0
        payload = json.loads(out)
        assert payload["irrelevant"] == ["I1"]
        assert payload["suboptimal_precision"] == [
            {"var": "S2", "witness": "O2"},
            {"var": "S3", "witness": "O2"},
        ]
        assert payload["suboptimal_confounding"] == [{"var": "S1", "witness": "O1"}]

    def test_missing_file_exit_2(self, capsys, tmp_path):
        code = main(["classify", "--graph", str(tmp_path / "nope.json")])
        assert code == 2

    def test_byte_identical_reruns(self, capsys, g3_json):
        _, first = run_cli(capsys, "classify", "--graph", g3_json)
        _, second = run_cli(capsys, "classify", "--graph", g3_json)
        assert first == second


class TestPruneCommand:
    def test_g1_nine_candidates(self, capsys, m1_json):
        code, out = run_cli(capsys, "prune", "--graph", m1_json)
        assert code == 0
        payload = json.loads(out)
        assert payload["header"]["initial_count"] == 16
        assert payload["header"]["final_count"] == 9
        assert len(payload["candidates"]) == 9
        assert ["O1", "O2"] in payload["candidates"]
        rules = {e["rule"] for e in payload["pruning_log"]}
        assert "thm3-forbidden-combination" in rules
        assert "thm4-suboptimal-valid" in rules

    def test_g3_counts(self, capsys, g3_json):
        code, out = run_cli(capsys, "prune", "--graph", g3_json)
        payload = json.loads(out)
        assert payload["header"]["initial_count"] == 512
        assert payload["header"]["final_count"] == 28


class TestAnalyzeCommand:
    def test_matrix_and_argmin(self, capsys, m1_json, tmp_path):
        summaries = tmp_path / "rows.csv"
        code, out = run_cli(
            capsys, "analyze", "--graph", m1_json, "--n", "50,1000",
            "--summaries", str(summaries),
        )
        assert code == 0
        rows = list(csv.reader(out.splitlines()))
        assert rows[0] == ["set", "mse_n50", "mse_n1000"]
        argmin = rows[-1]
        assert argmin == ["argmin", "O1", "W2"]
        with open(summaries) as fh:
            header = fh.readline().strip()
        assert header == "set,bias,avar,n,fs_var,mse"


class TestCrossoverCommand:
    def test_m1_o1_vs_w2(self, capsys, m1_json):
        code, out = run_cli(capsys, "crossover", "--graph", m1_json,
                            "--k", "O1", "--l", "W2")
        assert code == 0
        assert 500 < int(out.strip()) <= 1000

    def test_identical_sets_none(self, capsys, m1_json):
        code, out = run_cli(capsys, "crossover", "--graph", m1_json,
                            "--k", "O1", "--l", "O1")
        assert code == 0 and out.strip() == "none"

    def test_unknown_label_exit_2(self, capsys, m1_json):
        code = main(["crossover", "--graph", m1_json, "--k", "BOGUS", "--l", "O1"])
        assert code == 2


class TestSelectCommand:
    def test_select_with_audit(self, capsys, tmp_path, m1, m1_json):
        data_path = tmp_path / "d.csv"
        write_dataset_csv(sample(m1, 100, seed=5), data_path)
        audit = tmp_path / "audit.csv"
        code, out = run_cli(
            capsys, "select", "--graph", m1_json, "--data", str(data_path),
            "--bootstrap", "100", "--seed", "7", "--audit", str(audit),
        )
        assert code == 0
        payload = json.loads(out)
        assert "chosen" in payload and "tau_hat" in payload
        with open(audit) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["set"] for r in rows} <= {
            "", "O1", "O2", "O1+O2", "O2+W1", "O2+W2", "W1", "W2", "W1+W2"
        }
        assert len(rows) >= 1

    def test_deterministic_output(self, capsys, tmp_path, m1, m1_json):
        data_path = tmp_path / "d.csv"
        write_dataset_csv(sample(m1, 80, seed=6), data_path)
        args = ("select", "--graph", m1_json, "--data", str(data_path),
                "--bootstrap", "120", "--seed", "3")
        _, first = run_cli(capsys, *args)
        _, second = run_cli(capsys, *args)
        assert first == second

    def test_min_variance_rule_flag(self, capsys, tmp_path, m1, m1_json):
        data_path = tmp_path / "d.csv"
        write_dataset_csv(sample(m1, 200, seed=8), data_path)
        code, out = run_cli(
            capsys, "select", "--graph", m1_json, "--data", str(data_path),
            "--rule", "min-variance",
        )
        assert code == 0
        assert json.loads(out)["rule"] == "min-variance"


class TestSimulateCommand:
    def test_stdout_tidy(self, capsys):
        code, out = run_cli(
            capsys, "simulate", "--preset", "m1", "--n", "20",
            "--seeds", "25", "--rules", "fixed-O",
        )
        assert code == 0
        rows = list(csv.DictReader(out.splitlines()))
        assert rows[0]["rule"] == "fixed-O"
        assert rows[0]["valid"] == "1"

    def test_output_files(self, capsys, tmp_path):
        prefix = str(tmp_path / "exp")
        code, _ = run_cli(
            capsys, "simulate", "--preset", "m1", "--n", "20,30",
            "--seeds", "20", "--rules", "fixed-O", "ground-truth-On",
            "--out", prefix,
        )
        assert code == 0
        for suffix in ("wide", "tidy", "plot"):
            assert (tmp_path / f"exp_{suffix}.csv").exists()
        with open(prefix + "_plot.csv") as fh:
            header = fh.readline().strip()
        assert header == "rule,n,rmse"

    def test_config_file(self, capsys, tmp_path):
        cfg = {"preset": "m2", "sample_sizes": [20], "seeds": 15,
               "rules": ["fixed-O"], "bootstrap_b": 50}
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(cfg))
        code, out = run_cli(capsys, "simulate", "--config", str(cfg_path))
        assert code == 0
        assert "fixed-O" in out

    def test_missing_model_exit_2(self, capsys):
        code = main(["simulate", "--n", "20"])
        assert code == 2


class TestHelp:
    @pytest.mark.parametrize(
        "command,flags",
        [
            ("classify", ["--graph", "--force"]),
            ("prune", ["--graph", "--force"]),
            ("analyze", ["--graph", "--n", "--summaries", "--force"]),
            ("crossover", ["--graph", "--k", "--l", "--horizon"]),
            ("select", ["--graph", "--data", "--bootstrap", "--seed", "--rule", "--audit"]),
            ("simulate", ["--config", "--preset", "--graph", "--n", "--seeds",
                          "--bootstrap", "--rules", "--per-set-curves", "--out"]),
        ],
    )
    def test_every_flag_documented(self, capsys, command, flags):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text

    def test_installed_entry_point(self, tmp_path):
        exe = shutil.which("mse-adjust")
        if exe is None:
            pytest.skip("console script not on PATH")
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "classify" in proc.stdout
