import csv
import hashlib
import json

import numpy as np
import pytest
import yaml

from rmtlab.experiments import cli
from rmtlab.experiments.config import ConfigError, config_from_dict, load_config
from rmtlab.experiments.runner import (
    CoverageError,
    ResumeError,
    fit_samples,
    read_fits,
    read_samples,
    run_fit,
    run_report,
    run_sampling,
    run_theory_table,
)
from rmtlab.experiments.seeding import MASK64, derive_seed, pack_indices, splitmix64


def base(**kw):
    raw = {
        "master_seed": 7,
        "replicates": 100,
        "n_list": [8],
        "statistic": "hard_edge_min",
        "ensembles": [{"name": "g", "kind": "covariance_factor", "entry": {"class": "complex", "form": "gaussian"}}],
    }
    raw.update(kw)
    return raw


def three_kappa(**kw):
    ens = [
        {"name": f"k{k}", "kind": "covariance_factor", "entry": {"class": "complex", "kappa4": k}}
        for k in (-1.0, 0.0, 1.0)
    ]
    return base(ensembles=ens, n_list=[4, 6, 8], replicates=300, **kw)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- seeding -----------------------------------------------------------------


def test_splitmix_reference_vector():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_seeds_distinct_on_index_space():
    seeds = {derive_seed(99, e, n, r) for e in range(3) for n in (8, 16, 32, 64) for r in range(2000)}
    assert len(seeds) == 3 * 4 * 2000
    assert all(0 <= s <= MASK64 for s in seeds)


def test_pack_range_checks():
    with pytest.raises(ValueError):
        pack_indices(256, 1, 0)
    with pytest.raises(ValueError):
        pack_indices(0, 1 << 16, 0)


# -- config ------------------------------------------------------------------


def test_unknown_keys_are_errors():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict(base(replicate=100))
    raw = base()
    raw["ensembles"][0]["tt"] = 1
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict(raw)


@pytest.mark.parametrize("patch", [
    {"replicates": 99},
    {"statistic": "bulk_gap"},
    {"n_list": []},
    {"threads": 0},
    {"ensembles": [{"kind": "covariance_factor", "entry": {"class": "real", "kappa4": -3}}]},
])
def test_invalid_configs(patch):
    with pytest.raises(ConfigError):
        config_from_dict(base(**patch))


def test_yaml_loading_and_thread_env(tmp_path, monkeypatch):
    p = tmp_path / "c.yaml"
    p.write_text("# comment\n" + yaml.safe_dump(base(threads="auto")))
    cfg = load_config(p)
    monkeypatch.setenv("RMT_THREADS", "3")
    assert cfg.resolved_threads() == 3
    monkeypatch.delenv("RMT_THREADS")
    assert cfg.resolved_threads() >= 1
    (tmp_path / "bad.yaml").write_text("a: [")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")


# -- sampling ----------------------------------------------------------------


def test_row_count_and_schema(tmp_path):
    path = run_sampling(config_from_dict(base()), tmp_path / "a")
    lines = path.read_text().splitlines()
    assert lines[0] == "ensemble_id,n,replicate,seed,statistic_kind,value"
    assert len(lines) == 101
    first = lines[1].split(",")
    assert first[:3] == ["g", "8", "0"] and int(first[3]) == derive_seed(7, 0, 8, 0)


def test_repeat_and_thread_determinism(tmp_path):
    cfg = config_from_dict(three_kappa())
    a = run_sampling(cfg, tmp_path / "a", threads=1)
    b = run_sampling(cfg, tmp_path / "b", threads=1)
    c = run_sampling(cfg, tmp_path / "c", threads=4)
    assert sha(a) == sha(b) == sha(c)


def test_rows_sorted(tmp_path):
    samples = run_sampling(config_from_dict(three_kappa()), tmp_path)
    rows = [line.split(",") for line in samples.read_text().splitlines()[1:]]
    keys = [(r[0], int(r[1]), int(r[2])) for r in rows]
    assert keys == sorted(keys)


def test_resume_and_refuse(tmp_path):
    cfg = config_from_dict(three_kappa())
    out = tmp_path / "run"
    first = sha(run_sampling(cfg, out))
    # drop one block: the rerun recomputes it and reproduces the same file
    blocks = sorted((out / "blocks").iterdir())
    blocks[1].unlink()
    assert sha(run_sampling(cfg, out)) == first
    with pytest.raises(ResumeError):
        run_sampling(config_from_dict(three_kappa(master_seed=8)), out)
    other = tmp_path / "other"
    other.mkdir()
    (other / "junk.txt").write_text("x")
    with pytest.raises(ResumeError):
        run_sampling(cfg, other)


def test_bulk_statistics_run(tmp_path):
    ens = [{"name": "w", "kind": "wigner", "entry": {"class": "complex", "form": "gaussian"}}]
    for stat in ("bulk_gap", "bulk_count"):
        cfg = config_from_dict(base(statistic=stat, ensembles=ens))
        v = read_samples(run_sampling(cfg, tmp_path / stat))[("w", 8)]
        assert v.size == 100 and np.all(v >= 0)


# -- fitting -----------------------------------------------------------------


def test_fit_writes_schema_and_report(tmp_path):
    samples = run_sampling(config_from_dict(three_kappa()), tmp_path)
    fits_path, report_path = run_fit(samples, "paper")
    assert fits_path.read_text().splitlines()[0] == "ensemble_id,x,c_hat,c_se,r2"
    report = report_path.read_text().splitlines()
    assert report[0] == "x,kurtosis_slope,kurtosis_intercept,r2"
    fits = read_fits(fits_path)
    assert set(fits) == {"k-1.0", "k0.0", "k1.0"}
    grid = fits["k0.0"].x_grid
    assert len(report) - 1 == grid.size
    again, rows = run_report(fits_path)
    assert again == report_path and len(rows) == grid.size


def test_single_n_errors_without_output(tmp_path):
    samples = run_sampling(config_from_dict(base()), tmp_path / "s")
    out = tmp_path / "fit_out"
    with pytest.raises(CoverageError, match="N axis"):
        run_fit(samples, "null", out)
    assert not out.exists()
    assert not (tmp_path / "s" / "fits.csv").exists()


def test_two_kappa_errors_without_output(tmp_path):
    raw = three_kappa()
    raw["ensembles"] = raw["ensembles"][:2]
    samples = run_sampling(config_from_dict(raw), tmp_path)
    with pytest.raises(CoverageError, match="kappa4 axis"):
        run_fit(samples, "null")
    assert not (tmp_path / "fits.csv").exists()


def test_null_model_on_exact_limit_samples():
    rng = np.random.default_rng(0)
    samples = {("e", n): rng.exponential(size=20_000) for n in (16, 32, 64)}
    manifest = {"config": {"statistic": "hard_edge_min"}, "grid": [0.1 * k for k in range(1, 10)],
                "ensembles": {"e": {"index": 0, "effective_kappa4": 0.0, "diagonal_variance": 1.0}}}
    fits, grid = fit_samples(samples, manifest, "null")
    fit = fits["e"]
    assert grid.size == 9
    assert np.all(np.abs(fit.c_hat) <= 5 * fit.c_se)


# -- theory table ------------------------------------------------------------


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


@pytest.mark.filterwarnings("ignore::rmtlab.theory.ClippedProbabilityWarning")
def test_theory_table(tmp_path):
    cfg = config_from_dict(three_kappa())
    null = read_table(run_theory_table(cfg, "null", tmp_path / "null.csv"))
    cols = [c for c in null if c.startswith("corrected")]
    assert len(cols) == 9
    for c in cols:
        np.testing.assert_array_equal(null[c], null["limit"])
    assert np.all(np.diff(null["limit"]) >= 0)
    paper = read_table(run_theory_table(cfg, "paper", tmp_path / "paper.csv"))
    plus = paper["corrected_n8_kappa1"] - paper["limit"]
    minus = paper["corrected_n8_kappa-1"] - paper["limit"]
    inner = paper["x"] > 0
    assert np.all(np.sign(plus[inner]) == -np.sign(minus[inner]))


# -- command line ------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(three_kappa(output_dir=str(tmp_path / "out"))))
    assert cli.main(["sample", "--config", str(cfg)]) == 0
    samples = tmp_path / "out" / "samples.csv"
    assert cli.main(["fit", "--samples", str(samples), "--model", "paper"]) == 0
    assert cli.main(["report", "--fits", str(tmp_path / "out" / "fits.csv")]) == 0
    assert cli.main(["theory", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "theory.csv").exists()

    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(base(colour="red")))
    assert cli.main(["sample", "--config", str(bad)]) == 2
    assert "unknown" in capsys.readouterr().err


def test_cli_numerical_failure_reports_seed(tmp_path, monkeypatch, capsys):
    from rmtlab.experiments import runner

    def boom(config, n, mats):
        return np.full(len(mats), np.nan)

    monkeypatch.setattr(runner, "_statistics", boom)
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(base(output_dir=str(tmp_path / "o"))))
    assert cli.main(["sample", "--config", str(cfg)]) == 3
    assert str(derive_seed(7, 0, 8, 0)) in capsys.readouterr().err


def test_manifest_records_kappa(tmp_path):
    run_sampling(config_from_dict(three_kappa()), tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["ensembles"]["k1.0"]["effective_kappa4"] == 1.0
