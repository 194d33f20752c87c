import subprocess
import sys

import numpy as np
import pytest

from pdvol.cli import main, parse_config_file
from pdvol.dataset import read_dataset_csv
from pdvol.errors import ConfigError

STATS_OK = """\
# segmentation summary
 1  4  7911 7890.1 Left-Lateral-Ventricle
 2 24  1240 1234.5 CSF
 3  5   900  880.0 Left-Hippocampus
"""

STATS_BAD = """\
 1  4  7911 abc Left-Lateral-Ventricle
"""


@pytest.fixture
def stats_tree(tmp_path):
    stats = tmp_path / "stats"
    stats.mkdir()
    for sid in ("s1", "s2", "s3"):
        (stats / f"{sid}.stats").write_text(STATS_OK)
    demo = tmp_path / "demographics.csv"
    demo.write_text(
        "subject_id,age,sex,label\n"
        "s1,61.2,M,PD\n"
        "s2,55.0,F,HC\n"
        "s3,70.1,M,PD\n"
    )
    return tmp_path


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestIngest:
    def test_clean_directory(self, stats_tree):
        out = stats_tree / "out"
        code = run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", stats_tree / "demographics.csv",
            "--output-dir", out,
        )
        assert code == 0
        ds = read_dataset_csv(out / "dataset.csv")
        assert ds.n_rows == 3
        assert "age" not in ds.feature_names
        manifest = (out / "manifest.csv").read_text()
        assert "excluded" not in manifest

    def test_include_age_sex_columns(self, stats_tree):
        out = stats_tree / "out"
        run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", stats_tree / "demographics.csv",
            "--include-age-sex", "true", "--output-dir", out,
        )
        ds = read_dataset_csv(out / "dataset.csv")
        assert ds.feature_names[-2:] == ("age", "sex")

    def test_missing_demographics_row_excluded(self, stats_tree):
        (stats_tree / "stats" / "s4.stats").write_text(STATS_OK)
        out = stats_tree / "out"
        code = run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", stats_tree / "demographics.csv",
            "--output-dir", out,
        )
        assert code == 0
        assert "s4,excluded,MissingLabel" in (out / "manifest.csv").read_text()

    def test_parse_failure_becomes_hard_failure(self, stats_tree, capsys):
        (stats_tree / "stats" / "s5.stats").write_text(STATS_BAD)
        out = stats_tree / "out"
        code = run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", stats_tree / "demographics.csv",
            "--output-dir", out,
        )
        assert code == 0
        assert "s5,excluded,HardFailure" in (out / "manifest.csv").read_text()
        assert "s5" in capsys.readouterr().err

    def test_exclusion_list_soft_failure(self, stats_tree):
        (stats_tree / "soft.txt").write_text("# operator review\ns2\n")
        out = stats_tree / "out"
        run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", stats_tree / "demographics.csv",
            "--exclusions", stats_tree / "soft.txt",
            "--output-dir", out,
        )
        assert "s2,excluded,SoftFailure" in (out / "manifest.csv").read_text()

    def test_unreadable_input_exits_nonzero(self, stats_tree, capsys):
        missing = stats_tree / "nope.csv"
        code = run_cli(
            "ingest", "--stats-dir", stats_tree / "stats",
            "--demographics", missing,
            "--output-dir", stats_tree / "out",
        )
        assert code == 1
        assert "nope.csv" in capsys.readouterr().err


class TestSynthAndAugment:
    def test_synth_writes_counts(self, tmp_path):
        code = run_cli(
            "synth", "--n-pd", 12, "--n-hc", 9, "--n-features", 3,
            "--informative", "0:1.5", "--synth-seed", 4, "--output-dir", tmp_path,
        )
        assert code == 0
        ds = read_dataset_csv(tmp_path / "synth.csv")
        n_hc, n_pd = ds.class_counts()
        assert (n_pd, n_hc) == (12, 9)

    def test_synth_spec_file(self, tmp_path):
        spec = tmp_path / "cohort.cfg"
        spec.write_text("n_pd = 7\nn_hc = 6\nn_features = 2\nsynth_seed = 9\n")
        code = run_cli("synth", "--spec", spec, "--output-dir", tmp_path)
        assert code == 0
        ds = read_dataset_csv(tmp_path / "synth.csv")
        assert ds.n_rows == 13

    def test_augment_doubles_negatives(self, tmp_path):
        run_cli("synth", "--n-pd", 10, "--n-hc", 7, "--n-features", 2,
                "--synth-seed", 0, "--output-dir", tmp_path)
        code = run_cli(
            "augment", "--dataset-csv", tmp_path / "synth.csv", "--output-dir", tmp_path,
        )
        assert code == 0
        ds = read_dataset_csv(tmp_path / "augmented.csv")
        n_hc, n_pd = ds.class_counts()
        assert (n_pd, n_hc) == (10, 14)
        assert any(s.endswith("+aug") for s in ds.subject_ids)


@pytest.fixture
def synth_spec(tmp_path):
    spec = tmp_path / "cohort.cfg"
    spec.write_text(
        "n_pd = 30\nn_hc = 24\nn_features = 3\ninformative = 0:2.0\nsynth_seed = 1\n"
    )
    return spec


def run_args(tmp_path, spec, out, *extra):
    return (
        "run", "--synth-spec", spec, "--classifiers", "LR",
        "--outer-k", 3, "--inner-k", 2, "--seed", 3, "--jobs", 1,
        "--output-dir", out, *extra,
    )


class TestRun:
    def test_outputs_and_rerun_byte_identical(self, tmp_path, synth_spec):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run_cli(*run_args(tmp_path, synth_spec, out1)) == 0
        assert run_cli(*run_args(tmp_path, synth_spec, out2)) == 0
        report = (out1 / "report.csv").read_bytes()
        assert report == (out2 / "report.csv").read_bytes()
        assert (out1 / "per_fold.csv").read_bytes() == (out2 / "per_fold.csv").read_bytes()
        svg1 = out1 / "roc_LR_without_age_sex.svg"
        assert svg1.exists()
        assert svg1.read_bytes() == (out2 / "roc_LR_without_age_sex.svg").read_bytes()
        assert (out1 / "roc_LR_without_age_sex_fold00.csv").exists()

    def test_report_structure(self, tmp_path, synth_spec):
        out = tmp_path / "r"
        run_cli(*run_args(tmp_path, synth_spec, out))
        lines = (out / "report.csv").read_text().splitlines()
        comments = [l for l in lines if l.startswith("#")]
        assert any("341 PD / 332 HC" in c for c in comments)
        assert any("340 PD / 334 HC" in c for c in comments)
        rows = [l for l in lines if not l.startswith("#")]
        assert rows[0] == "classifier,with_age_sex,mean_train_acc,mean_test_acc,mean_auc"
        assert len(rows) == 2  # header + a single LR aggregate row
        assert rows[1].startswith("LR,false,")

    def test_parallel_jobs_byte_identical(self, tmp_path, synth_spec):
        out1, out2 = tmp_path / "j1", tmp_path / "j2"
        run_cli(*run_args(tmp_path, synth_spec, out1))
        assert run_cli(
            "run", "--synth-spec", synth_spec, "--classifiers", "LR",
            "--outer-k", 3, "--inner-k", 2, "--seed", 3, "--jobs", 2,
            "--output-dir", out2,
        ) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_age_sex_both_doubles_rows(self, tmp_path, synth_spec):
        out = tmp_path / "r"
        run_cli(*run_args(tmp_path, synth_spec, out, "--include-age-sex", "both"))
        rows = [
            l for l in (out / "report.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        assert len(rows) == 3
        assert rows[1].startswith("LR,false,")
        assert rows[2].startswith("LR,true,")

    def test_config_file_with_flag_override(self, tmp_path, synth_spec):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"synth_spec = {synth_spec}\nclassifiers = LR\nouter_k = 3\n"
            "inner_k = 2\nseed = 3\njobs = 1\n"
        )
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        assert run_cli("run", "--config", cfg, "--output-dir", out1) == 0
        # Same config via flags only; the files must agree byte for byte.
        run_cli(*run_args(tmp_path, synth_spec, out2))
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_two_input_sources_rejected(self, tmp_path, synth_spec, capsys):
        code = run_cli(
            "run", "--synth-spec", synth_spec, "--dataset-csv", synth_spec,
            "--output-dir", tmp_path,
        )
        assert code == 1
        assert "input source" in capsys.readouterr().err

    def test_failure_removes_partial_outputs(self, tmp_path, synth_spec, monkeypatch):
        import pdvol.cli as cli_mod

        def boom(*args, **kwargs):
            raise OSError("disk full")

        monkeypatch.setattr(cli_mod.plots, "plot_roc", boom)
        out = tmp_path / "r"
        code = run_cli(*run_args(tmp_path, synth_spec, out))
        assert code == 1
        assert not list(out.iterdir())  # report.csv etc were rolled back

    def test_env_var_output_dir(self, tmp_path, synth_spec, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("PDVOL_OUT_DIR", str(target))
        code = run_cli(
            "run", "--synth-spec", synth_spec, "--classifiers", "LR",
            "--outer-k", 3, "--inner-k", 2, "--seed", 3, "--jobs", 1,
        )
        assert code == 0
        assert (target / "report.csv").exists()


class TestPlot:
    def test_feature_dist_on_age(self, tmp_path, synth_spec):
        run_cli("synth", "--spec", synth_spec, "--output-dir", tmp_path)
        code = run_cli(
            "plot", "--kind", "feature-dist", "--dataset-csv", tmp_path / "synth.csv",
            "--feature", "age", "--output-dir", tmp_path,
        )
        assert code == 0
        svg = (tmp_path / "dist_age.svg").read_text()
        assert svg.startswith("<?xml")
        assert "PD" in svg and "HC" in svg

    def test_pair_scatter(self, tmp_path, synth_spec):
        run_cli("synth", "--spec", synth_spec, "--output-dir", tmp_path)
        code = run_cli(
            "plot", "--kind", "pair-scatter", "--dataset-csv", tmp_path / "synth.csv",
            "--x-feature", "f000", "--y-feature", "f001", "--output-dir", tmp_path,
        )
        assert code == 0
        assert (tmp_path / "scatter_f000_vs_f001.svg").exists()

    def test_plot_rerun_byte_identical(self, tmp_path, synth_spec):
        run_cli("synth", "--spec", synth_spec, "--output-dir", tmp_path)
        args = (
            "plot", "--kind", "feature-dist", "--dataset-csv", tmp_path / "synth.csv",
            "--feature", "f000", "--output-dir", tmp_path,
        )
        run_cli(*args)
        first = (tmp_path / "dist_f000.svg").read_bytes()
        run_cli(*args)
        assert (tmp_path / "dist_f000.svg").read_bytes() == first

    def test_unknown_feature_lists_available(self, tmp_path, synth_spec, capsys):
        run_cli("synth", "--spec", synth_spec, "--output-dir", tmp_path)
        code = run_cli(
            "plot", "--kind", "feature-dist", "--dataset-csv", tmp_path / "synth.csv",
            "--feature", "foo", "--output-dir", tmp_path,
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "foo" in err and "f000" in err

    def test_roc_kind_from_csv(self, tmp_path, synth_spec):
        out = tmp_path / "r"
        run_cli(*run_args(tmp_path, synth_spec, out))
        code = run_cli(
            "plot", "--kind", "roc",
            "--roc-csv", out / "roc_LR_without_age_sex_fold00.csv",
            "--output-dir", tmp_path,
        )
        assert code == 0
        assert (tmp_path / "roc.svg").exists()


class TestConfigFile:
    def test_parse_and_comments(self, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("# comment\nseed = 4  # trailing\n\nouter_k = 3\n")
        assert parse_config_file(cfg) == {"seed": "4", "outer_k": "3"}

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("not a pair\n")
        with pytest.raises(ConfigError):
            parse_config_file(cfg)


def test_console_script_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "pdvol.cli", "synth", "--n-pd", "5", "--n-hc", "4",
         "--n-features", "2", "--output-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "synth.csv").exists()
