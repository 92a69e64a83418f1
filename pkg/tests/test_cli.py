import csv
import subprocess
import sys

import numpy as np
import pytest

from complearn.cli import main, read_config
from complearn.data import read_complementary_csv, read_ordinary_csv
from complearn.model import load_checkpoint
from complearn.priors import read_priors_csv


def run(*argv):
    return main([str(a) for a in argv])


def curves(path):
    with open(path) as fh:
        return [float(r["train_risk"]) for r in csv.DictReader(fh)]


@pytest.fixture
def data10(tmp_path):
    out = tmp_path / "train.csv"
    assert run("gen-data", "--q", 10, "--n-per-class", 20, "--d", 10, "--out", out) == 0
    return out


class TestGenerate:
    def test_gen_data(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("gen-data", "--q", 3, "--n-per-class", 7, "--d", 2, "--out", out) == 0
        ds = read_ordinary_csv(out)
        assert (ds.n, ds.d, ds.q) == (21, 2, 3)
        assert out.read_text().splitlines()[0] == "f0,f1,y"

    def test_test_stream_differs(self, tmp_path):
        run("gen-data", "--out", tmp_path / "a.csv")
        run("gen-data", "--stream", "test", "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_text() != (tmp_path / "b.csv").read_text()

    def test_uniform_single_label(self, tmp_path, data10):
        out = tmp_path / "cl.csv"
        assert run("gen-cl", "--data", data10, "--spec", "uniform", "--out", out) == 0
        cds = read_complementary_csv(out, 10)
        truth = read_ordinary_csv(data10)
        np.testing.assert_array_equal(cds.comp_labels.sum(axis=1), 1)
        assert not cds.comp_labels[np.arange(cds.n), truth.labels].any()

    @pytest.mark.parametrize("spec", ["biased-a", "biased-b", "scar-a", "scar-b"])
    def test_builtin_specs(self, tmp_path, data10, spec):
        assert run("gen-cl", "--data", data10, "--spec", spec, "--out", tmp_path / "cl.csv") == 0

    def test_scar_independent(self, tmp_path, data10):
        probs = ",".join(["0.3"] * 10)
        assert run("gen-cl", "--data", data10, "--spec", "scar-independent", "--flag-probs", probs,
                   "--out", tmp_path / "cl.csv") == 0

    def test_scar_needs_flag_probs(self, tmp_path, data10, capsys):
        assert run("gen-cl", "--data", data10, "--spec", "scar-single", "--out", tmp_path / "cl.csv") == 1
        assert "--flag-probs" in capsys.readouterr().err

    def test_idempotent(self, tmp_path, data10):
        for name in ("a.csv", "b.csv"):
            run("gen-cl", "--data", data10, "--seed", 3, "--out", tmp_path / name)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestErrors:
    def test_malformed_csv_names_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("f0,f1,y\n0.1,0.2,1\n0.3,oops,2\n")
        assert run("gen-cl", "--data", bad, "--out", tmp_path / "cl.csv") == 1
        assert "bad.csv:3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert run("gen-cl", "--data", tmp_path / "nope.csv", "--out", tmp_path / "cl.csv") == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code != 0

    def test_given_priors_required(self, tmp_path, data10, capsys):
        run("gen-cl", "--data", data10, "--out", tmp_path / "cl.csv")
        assert run("train", "--data", tmp_path / "cl.csv", "--q", 10, "--out-dir", tmp_path / "m") == 1
        assert "--priors" in capsys.readouterr().err

    def test_unknown_suite(self, tmp_path):
        assert run("reproduce", "--suite", "nothing", "--out-dir", tmp_path) == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "complearn", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "reproduce" in proc.stdout


class TestConfig:
    def test_read_config(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\nn-per-class = 4\n\nq=2  # trailing\n")
        assert read_config(cfg) == {"n_per_class": "4", "q": "2"}

    def test_config_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("q=2\nn-per-class=3\nd=5\n")
        assert run("gen-data", "--config", cfg, "--d", 4, "--out", tmp_path / "d.csv") == 0
        ds = read_ordinary_csv(tmp_path / "d.csv")
        assert (ds.n, ds.d, ds.q) == (6, 4, 2)

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("colour=blue\n")
        with pytest.raises(SystemExit):
            main(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "d.csv")])


class TestPipeline:
    @pytest.fixture
    def overfit_files(self, tmp_path):
        common = ["--q", 4, "--n-per-class", 125, "--d", 10, "--separation", 2.5]
        run("gen-data", *common, "--out", tmp_path / "train.csv")
        run("gen-data", *common, "--stream", "test", "--out", tmp_path / "test.csv")
        run("gen-cl", "--data", tmp_path / "train.csv", "--out", tmp_path / "cl.csv")
        return tmp_path

    def train(self, base, risk, out):
        return run("train", "--data", base / "cl.csv", "--q", 4, "--test", base / "test.csv",
                   "--priors-source", "uniform", "--risk", risk, "--hidden", "128,128", "--epochs", 60,
                   "--out-dir", base / out)

    def test_ure_goes_negative_and_conu_does_not(self, overfit_files):
        assert self.train(overfit_files, "ure", "ure") == 0
        assert self.train(overfit_files, "conu", "conu") == 0
        assert min(curves(overfit_files / "ure" / "curves.csv")) < 0
        assert min(curves(overfit_files / "conu" / "curves.csv")) >= 0

    def test_train_outputs_idempotent(self, overfit_files):
        for out in ("a", "b"):
            run("train", "--data", overfit_files / "cl.csv", "--q", 4, "--priors-source", "uniform",
                "--arch", "linear", "--epochs", 3, "--out-dir", overfit_files / out)
        for name in ("model.ckpt", "curves.csv"):
            assert (overfit_files / "a" / name).read_bytes() == (overfit_files / "b" / name).read_bytes()
        assert load_checkpoint(overfit_files / "a" / "model.ckpt").config.arch == "linear"

    def test_estimate_train_eval(self, tmp_path):
        run("gen-data", "--q", 3, "--n-per-class", 1000, "--out", tmp_path / "train.csv")
        run("gen-data", "--q", 3, "--n-per-class", 100, "--stream", "test", "--out", tmp_path / "test.csv")
        run("gen-cl", "--data", tmp_path / "train.csv", "--spec", "scar-independent",
            "--flag-probs", "0.5,0.5,0.5", "--out", tmp_path / "cl.csv")
        assert run("estimate-priors", "--data", tmp_path / "cl.csv", "--q", 3, "--pvu-hidden", 32,
                   "--pvu-epochs", 30, "--out", tmp_path / "priors.csv") == 0
        priors = read_priors_csv(tmp_path / "priors.csv")
        assert priors.pi.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(priors.pi, 1 / 3, atol=0.05)
        for source in ("given", "corrupted"):
            assert run("train", "--data", tmp_path / "cl.csv", "--q", 3, "--priors", tmp_path / "priors.csv",
                       "--priors-source", source, "--arch", "linear", "--epochs", 20, "--lr", 0.01,
                       "--out-dir", tmp_path / source) == 0
        assert run("eval", "--checkpoint", tmp_path / "given" / "model.ckpt", "--test", tmp_path / "test.csv",
                   "--out-dir", tmp_path / "ev") == 0
        with open(tmp_path / "ev" / "results.csv") as fh:
            (row,) = list(csv.DictReader(fh))
        assert float(row["acc"]) >= 0.9

    def test_eval_trials(self, tmp_path):
        assert run("eval", "--q", 3, "--n-per-class", 40, "--test-per-class", 40, "--seeds", 2,
                   "--methods", "conu,supervised", "--epochs", 3, "--hidden", 8,
                   "--out-dir", tmp_path) == 0
        with open(tmp_path / "results.csv") as fh:
            assert len(list(csv.DictReader(fh))) == 4
        with open(tmp_path / "summary.csv") as fh:
            assert [r["method"] for r in csv.DictReader(fh)] == ["conu", "supervised"]

    def test_reproduce_identity(self, tmp_path, capsys):
        assert run("reproduce", "--suite", "identity", "--out-dir", tmp_path) == 0
        text = (tmp_path / "reproduce_summary.txt").read_text()
        assert text.startswith("[PASS] identity")
        assert text.strip() in capsys.readouterr().out
