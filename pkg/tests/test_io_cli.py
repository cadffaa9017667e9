import json

import numpy as np
import pytest

from mallowspair import io
from mallowspair.cli import main
from mallowspair.partition import build_table
from mallowspair.sampler import Tuning, run_chain
from mallowspair.simulate import SimConfig, generate_dataset

PAPER_CSV = """assessor,preferred,other
1,2,1
1,5,4
1,5,3
1,5,2
1,5,1
1,3,2
1,1,3
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParsePreferences:
    def test_single_assessor(self, tmp_path):
        ds = io.parse_preferences(write(tmp_path, "d.csv", PAPER_CSV))
        assert ds.n_items == 5
        assert ds.n_assessors == 1
        assert ds.preference_sets[0].n_pairs == 7

    def test_cycle_flagged(self, tmp_path):
        ds = io.parse_preferences(write(tmp_path, "d.csv", PAPER_CSV))
        summ = io.transitivity_summary(ds)
        assert summ["n_assessors"] == 1
        assert summ["n_non_transitive"] == 1

    def test_bad_field_count(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,2\n")
        with pytest.raises(io.DataError, match=r"d\.csv:2"):
            io.parse_preferences(p)

    def test_non_integer(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,2,x\n")
        with pytest.raises(io.DataError, match=":2"):
            io.parse_preferences(p)

    def test_self_comparison(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,3,3\n")
        with pytest.raises(io.DataError, match="self-comparison"):
            io.parse_preferences(p)

    def test_duplicate_pair(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,2,1\n1,1,2\n")
        with pytest.raises(io.DataError, match="duplicate"):
            io.parse_preferences(p)

    def test_zero_based_rejected(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,0,2\n")
        with pytest.raises(io.DataError, match="1-based"):
            io.parse_preferences(p)

    def test_empty_file(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n")
        with pytest.raises(io.DataError, match="no preference rows"):
            io.parse_preferences(p)

    def test_n_override(self, tmp_path):
        p = write(tmp_path, "d.csv", "assessor,preferred,other\n1,2,1\n")
        ds = io.parse_preferences(p, n_items=6)
        assert ds.n_items == 6
        with pytest.raises(io.DataError, match="exceeds"):
            io.parse_preferences(p, n_items=1)

    def test_comments_and_blank_lines(self, tmp_path):
        p = write(
            tmp_path, "d.csv", "# config: {}\nassessor,preferred,other\n\n1,2,1\n"
        )
        assert io.parse_preferences(p).n_assessors == 1


class TestRoundTrips:
    def test_preferences(self, tmp_path):
        cfg = SimConfig(6, 10, 8, 3.0, theta_true=0.1, seed=4)
        ds, _ = generate_dataset(cfg)
        path = tmp_path / "prefs.csv"
        io.write_preferences(ds, path, {"seed": 4})
        back = io.parse_preferences(path, n_items=6)
        assert back.n_assessors == ds.n_assessors
        for a, b in zip(ds.preference_sets, back.preference_sets):
            assert set(a.pairs()) == set(b.pairs())

    def test_truth(self, tmp_path):
        cfg = SimConfig(5, 4, 6, 2.0, theta_true=0.2, seed=5)
        _, truth = generate_dataset(cfg)
        path = tmp_path / "truth.json"
        io.write_truth(truth, path)
        back = io.read_truth(path)
        assert np.array_equal(back.rho_true, truth.rho_true)
        assert np.array_equal(back.latent_true, truth.latent_true)
        assert all(np.array_equal(a, b) for a, b in zip(back.flips, truth.flips))
        assert back.config.theta_true == 0.2

    def run_log(self, model="BM", G=1):
        cfg = SimConfig(5, 4, 6, 3.0, theta_true=0.1, seed=6)
        ds, _ = generate_dataset(cfg)
        logz = build_table("footrule", 5)
        return run_chain(
            ds,
            model=model,
            n_clusters=G,
            tuning=Tuning(n_iterations=200, burn_in=40, thinning=4, seed=1),
            logz=logz,
        )

    @pytest.mark.parametrize("model,G", [("BM", 1), ("BM", 2), ("LM", 1)])
    def test_samples(self, tmp_path, model, G):
        log = self.run_log(model, G)
        io.save_samples(log, tmp_path / "s", {"note": "test"})
        back = io.load_samples(tmp_path / "s")
        assert back.model == model and back.n_clusters == G
        assert np.allclose(back.alphas, log.alphas)
        assert np.array_equal(back.rhos, log.rhos)
        assert np.array_equal(back.latent, log.latent)
        assert np.array_equal(back.labels, log.labels)
        assert np.allclose(back.weights, log.weights)
        if model == "BM":
            assert np.allclose(back.thetas, log.thetas)
        else:
            assert np.allclose(back.betas, log.betas)
        meta = json.loads((tmp_path / "s" / "meta.json").read_text())
        assert meta["config"]["note"] == "test"


def run_cli(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = run_cli(
        [
            "simulate", "--n-items", 6, "--assessors", 8, "--lambda-pairs", 8,
            "--alpha", 3, "--theta", 0.1, "--seed", 1, "--out", out,
        ]
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    rc = run_cli(
        [
            "fit", "--data", sim_dir / "preferences.csv", "--out", out,
            "--iterations", 1300, "--burn-in", 100, "--thin", 1, "--seed", 2,
            "--logz-cache", out / "logz.txt",
        ]
    )
    assert rc == 0
    return out


class TestCli:
    def test_simulate_outputs(self, sim_dir):
        assert (sim_dir / "preferences.csv").exists()
        assert (sim_dir / "truth.json").exists()
        ds = io.parse_preferences(sim_dir / "preferences.csv", n_items=6)
        assert ds.n_assessors == 8

    def test_fit_outputs(self, fit_dir):
        assert (fit_dir / "summary.txt").exists()
        assert (fit_dir / "samples" / "meta.json").exists()
        assert (fit_dir / "logz.txt").exists()
        log = io.load_samples(fit_dir / "samples")
        assert log.n_samples == 1200
        text = (fit_dir / "summary.txt").read_text()
        assert "CP ordering" in text and "alpha:" in text and "theta:" in text

    def test_predict(self, fit_dir, tmp_path):
        pairs = write(tmp_path, "pairs.csv", "assessor,item_a,item_b\n0,1,2\n3,5,6\n")
        out = tmp_path / "pred.csv"
        rc = run_cli(["predict", "--samples", fit_dir / "samples",
                      "--pairs", pairs, "--out", out])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "assessor,item_a,item_b,prob_a_preferred"
        for line in lines[1:]:
            p = float(line.split(",")[-1])
            assert 0.0 <= p <= 1.0

    def test_diagnose(self, fit_dir, tmp_path):
        out = tmp_path / "diag.csv"
        rc = run_cli(["diagnose", "--samples", fit_dir / "samples", "--out", out])
        assert rc == 0
        body = out.read_text().strip().splitlines()
        assert body[0] == "parameter,iat"
        names = {line.split(",")[0] for line in body[1:]}
        assert {"alpha_1", "theta"} <= names

    def test_score(self, sim_dir, fit_dir, tmp_path):
        out = tmp_path / "score.json"
        rc = run_cli(
            [
                "score", "--samples", fit_dir / "samples",
                "--truth", sim_dir / "truth.json",
                "--data", sim_dir / "preferences.csv", "--out", out,
            ]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert 0.0 <= report["top3_in_top5_pct"] <= 100.0
        assert report["consensus_df_median"] >= 0.0

    def test_same_seed_identical_samples(self, sim_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = run_cli(
                [
                    "fit", "--data", sim_dir / "preferences.csv", "--out", out,
                    "--iterations", 320, "--burn-in", 20, "--thin", 2,
                    "--seed", 9,
                ]
            )
            assert rc == 0
            outs.append(out)
        for fname in ("scalars.csv", "rho.csv", "latent.csv", "labels.csv"):
            a = (outs[0] / "samples" / fname).read_bytes()
            b = (outs[1] / "samples" / fname).read_bytes()
            assert a == b

    def test_cluster_range_fit(self, sim_dir, tmp_path):
        out = tmp_path / "range"
        rc = run_cli(
            [
                "fit", "--data", sim_dir / "preferences.csv", "--out", out,
                "--clusters", "1-2", "--iterations", 600, "--burn-in", 50,
                "--thin", 5, "--seed", 3,
            ]
        )
        assert rc == 0
        assert (out / "cluster_fit.csv").exists()
        assert (out / "summary_G1.txt").exists()
        assert (out / "summary_G2.txt").exists()
        body = (out / "cluster_fit.csv").read_text().splitlines()
        header_idx = next(i for i, l in enumerate(body) if l.startswith("G,"))
        gs = {line.split(",")[0] for line in body[header_idx + 1:]}
        assert gs == {"1", "2"}

    def test_config_error_exit_code(self, sim_dir, tmp_path):
        rc = run_cli(
            [
                "fit", "--data", sim_dir / "preferences.csv",
                "--out", tmp_path / "x", "--model", "lm", "--clusters", "2",
                "--iterations", 50, "--burn-in", 10,
            ]
        )
        assert rc == 1

    def test_data_error_exit_code(self, tmp_path):
        bad = write(tmp_path, "bad.csv", "assessor,preferred,other\n1,2,2\n")
        rc = run_cli(
            ["fit", "--data", bad, "--out", tmp_path / "y", "--iterations", 50,
             "--burn-in", 10]
        )
        assert rc == 2

    def test_missing_file_exit_code(self, tmp_path):
        rc = run_cli(
            ["fit", "--data", tmp_path / "nope.csv", "--out", tmp_path / "z"]
        )
        assert rc == 1

    def test_simulate_requires_one_error_model(self, tmp_path):
        rc = run_cli(
            [
                "simulate", "--n-items", 5, "--assessors", 3,
                "--lambda-pairs", 5, "--alpha", 2, "--out", tmp_path / "s",
            ]
        )
        assert rc == 1

    def test_logz_cache_reused(self, sim_dir, tmp_path):
        cache = tmp_path / "cache" / "logz.txt"
        for out in (tmp_path / "f1", tmp_path / "f2"):
            rc = run_cli(
                [
                    "fit", "--data", sim_dir / "preferences.csv", "--out", out,
                    "--iterations", 120, "--burn-in", 10, "--thin", 1,
                    "--logz-cache", cache,
                ]
            )
            assert rc == 0
        assert cache.exists()
