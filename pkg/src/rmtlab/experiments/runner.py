"""Replicate farms, CSV emission and the fit/report/theory stages.

Output of :func:`run_sampling` is a pure function of the sampling part of
the config: each replicate draws from its own generator seeded by
:func:`~rmtlab.experiments.seeding.derive_seed`, and rows are written in
index order no matter which worker produced them.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import shutil
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable

import numpy as np

from .. import estimator, theory
from ..ensembles import draw
from ..spectra import bulk_counting_statistic, bulk_gap_statistic, hard_edge_statistics
from .config import ConfigError, ExperimentConfig
from .seeding import derive_seed

log = logging.getLogger(__name__)

SAMPLES_HEADER = ("ensemble_id", "n", "replicate", "seed", "statistic_kind", "value")
FITS_HEADER = ("ensemble_id", "x", "c_hat", "c_se", "r2")
REPORT_HEADER = ("x", "kurtosis_slope", "kurtosis_intercept", "r2")
MANIFEST = "manifest.json"
CHUNK = 250


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (seed {seed})")
        self.seed = seed


class ResumeError(ConfigError):
    """Output directory holds a run with a different configuration."""


class CoverageError(ConfigError):
    """Samples do not span enough N or kappa4 values for a fit."""


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _statistics(config: ExperimentConfig, n: int, mats: np.ndarray) -> np.ndarray:
    if config.statistic == "hard_edge_min":
        return hard_edge_statistics(mats)
    eigs = np.linalg.eigvalsh(mats)
    if config.statistic == "bulk_count":
        return np.array([bulk_counting_statistic(e, config.bulk_center, config.bulk_width, n) for e in eigs],
                        dtype=float)
    return np.array([bulk_gap_statistic(e, config.bulk_center, n) for e in eigs])


def sample_chunk(config: ExperimentConfig, ensemble_index: int, n: int, start: int, stop: int) -> list[str]:
    """CSV rows for replicates ``start..stop-1`` of one (ensemble, n) block."""
    ens = config.ensembles[ensemble_index]
    spec = ens.spec(n)
    seeds = [derive_seed(config.master_seed, ensemble_index, n, r) for r in range(start, stop)]
    mats = np.stack([draw(spec, np.random.Generator(np.random.PCG64(s))) for s in seeds])
    try:
        values = _statistics(config, n, mats)
    except np.linalg.LinAlgError:
        for s, m in zip(seeds, mats):
            try:
                _statistics(config, n, m[None])
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"decomposition failed for {ens.name}, n={n}: {exc}", s) from None
        raise
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalFailure(f"non-finite statistic for {ens.name}, n={n}", seeds[bad[0]])
    kind = config.statistic
    return [
        f"{ens.name},{n},{r},{s},{kind},{fmt(v)}\n"
        for r, s, v in zip(range(start, stop), seeds, values)
    ]


def _manifest(config: ExperimentConfig) -> dict:
    return {
        "fingerprint": config.fingerprint(),
        "config": config.sampling_dict(),
        "ensembles": {
            e.name: {"index": i, "kappa4": e.entry.kappa4, "t": e.t, "effective_kappa4": e.effective_kappa4,
                     "field_class": e.entry.field_class, "diagonal_variance": e.diagonal_variance}
            for i, e in enumerate(config.ensembles)
        },
        "grid": list(config.grid),
        "bootstrap": config.bootstrap,
    }


def _atomic_write(path: Path, lines: Iterable[str]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.writelines(lines)
    os.replace(tmp, path)


def _prepare_output(config: ExperimentConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST
    manifest = _manifest(config)
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("fingerprint") != manifest["fingerprint"]:
            raise ResumeError(
                f"{out} holds samples from a different configuration; "
                "use a fresh output directory or remove the old one"
            )
        log.info("resuming run in %s", out)
    elif any(out.iterdir()):
        raise ResumeError(f"{out} is not empty and has no manifest; refusing to mix runs")
    else:
        _atomic_write(manifest_path, [json.dumps(manifest, indent=2, sort_keys=True)])
    blocks = out / "blocks"
    blocks.mkdir(exist_ok=True)
    return blocks


def run_sampling(config: ExperimentConfig, out_dir: str | Path | None = None, threads: int | None = None) -> Path:
    """Write ``samples.csv`` (and a manifest) for every (ensemble, n, replicate).

    Completed (ensemble, n) blocks are kept under ``blocks/``; rerunning
    with the same config reuses them, a different config is refused.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir)
    threads = threads or config.resolved_threads()
    blocks = _prepare_output(config, out)
    todo = []
    for e_idx in range(len(config.ensembles)):
        for n in sorted(set(config.n_list)):
            path = blocks / f"{e_idx:03d}_{n:05d}.csv"
            todo.append((e_idx, n, path))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for e_idx, n, path in todo:
            if path.exists():
                continue
            log.info("sampling %s n=%d (%d replicates)", config.ensembles[e_idx].name, n, config.replicates)
            starts = range(0, config.replicates, CHUNK)
            jobs = [(config, e_idx, n, s, min(s + CHUNK, config.replicates)) for s in starts]
            if threads == 1:
                chunks = [sample_chunk(*job) for job in jobs]
            else:
                chunks = list(pool.map(lambda job: sample_chunk(*job), jobs))
            _atomic_write(path, (row for chunk in chunks for row in chunk))

    samples = out / "samples.csv"
    tmp = samples.with_name("samples.csv.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(SAMPLES_HEADER) + "\n")
        for _, _, path in todo:
            with open(path) as src:
                shutil.copyfileobj(src, fh)
    os.replace(tmp, samples)
    return samples


# -- fitting ------------------------------------------------------------------


def read_samples(path: str | Path) -> dict[tuple[str, int], np.ndarray]:
    """Statistic values keyed by ``(ensemble_id, n)``, in replicate order."""
    values: dict[tuple[str, int], list[float]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != SAMPLES_HEADER:
            raise ConfigError(f"{path} does not have the samples.csv header")
        for row in reader:
            values[(row[0], int(row[1]))].append(float(row[5]))
    return {k: np.asarray(v) for k, v in values.items()}


def _load_manifest(directory: Path) -> dict:
    path = directory / MANIFEST
    if not path.exists():
        raise ConfigError(f"no {MANIFEST} next to {directory}; it records kappa4 for each ensemble")
    return json.loads(path.read_text())


def _model_for(name: str, manifest: dict, ensemble: str):
    cfg = manifest["config"]
    info = manifest["ensembles"][ensemble]
    params = {}
    if cfg["statistic"] != "hard_edge_min":
        params = {"width": cfg["bulk_width"]}
        if name == "paper":
            params.update(center=cfg["bulk_center"], diagonal_variance=info["diagonal_variance"])
    return theory.get_model(name, cfg["statistic"], **params)


def fit_samples(samples: dict[tuple[str, int], np.ndarray], manifest: dict, model: str = "null",
                levels=None, bootstrap: int | None = None) -> tuple[dict[str, estimator.CorrectionFit], np.ndarray]:
    """Fit ``c(x)`` per ensemble on a grid of pooled-sample quantiles."""
    by_ens: dict[str, dict[int, np.ndarray]] = defaultdict(dict)
    for (ens, n), v in samples.items():
        by_ens[ens][n] = v
    for ens, blocks in by_ens.items():
        if len(blocks) < 3:
            raise CoverageError(f"N axis: ensemble {ens} has samples for n={sorted(blocks)}; need at least 3 distinct N")
        if ens not in manifest["ensembles"]:
            raise ConfigError(f"ensemble {ens} is missing from the manifest")
    levels = manifest.get("grid", estimator.DEFAULT_QUANTILES) if levels is None else levels
    bootstrap = manifest.get("bootstrap", 0) if bootstrap is None else bootstrap
    pooled = np.concatenate([v for v in samples.values()])
    grid = np.unique(estimator.quantile_grid(pooled, levels))
    inside = np.ones(grid.shape, dtype=bool)
    for v in samples.values():
        inside &= (grid > v.min()) & (grid < v.max())
    if not inside.all():
        log.warning("dropping %d grid points outside some sample range", int((~inside).sum()))
        grid = grid[inside]
    if grid.size == 0:
        raise CoverageError("x axis: no grid point lies inside every sample range")

    fits = {}
    for ens in sorted(by_ens, key=lambda e: manifest["ensembles"][e]["index"]):
        m = _model_for(model, manifest, ens)
        kappa = manifest["ensembles"][ens]["effective_kappa4"]
        devs = {}
        for n, v in sorted(by_ens[ens].items()):
            ref = lambda x, n=n: theory.corrected_cdf(x, n, kappa, m)  # noqa: E731
            rng = np.random.default_rng(n) if bootstrap else None
            devs[n] = estimator.deviation_curve(estimator.ecdf(v), ref, grid, bootstrap=bootstrap, rng=rng)
        fits[ens] = estimator.fit_one_over_n(devs)
    return fits, grid


def kurtosis_rows(fits: dict[str, estimator.CorrectionFit], manifest: dict) -> list[tuple[float, ...]]:
    pairs = [(manifest["ensembles"][e]["effective_kappa4"], f) for e, f in fits.items()]
    distinct = sorted({k for k, _ in pairs})
    if len(distinct) < 3:
        raise CoverageError(f"kappa4 axis: ensembles cover kappa4={distinct}; need at least 3 distinct values")
    grid = next(iter(fits.values())).x_grid
    rows = []
    for x in grid:
        reg = estimator.kurtosis_regression(pairs, float(x))
        rows.append((float(x), reg.slope, reg.intercept, reg.r_squared))
    return rows


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header) + "\n"]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")
    _atomic_write(path, lines)


def _fit_rows(fits):
    for ens, fit in fits.items():
        for i, x in enumerate(fit.x_grid):
            yield (ens, x, fit.c_hat[i], fit.c_se[i], fit.r_squared[i])


def run_fit(samples_path: str | Path, model: str = "null", out_dir: str | Path | None = None) -> tuple[Path, Path]:
    """Write ``fits.csv`` and ``report.csv``; nothing is written if coverage is insufficient."""
    samples_path = Path(samples_path)
    out = Path(out_dir) if out_dir is not None else samples_path.parent
    manifest = _load_manifest(samples_path.parent)
    fits, _ = fit_samples(read_samples(samples_path), manifest, model)
    rows = kurtosis_rows(fits, manifest)
    out.mkdir(parents=True, exist_ok=True)
    if out.resolve() != samples_path.parent.resolve():
        _atomic_write(out / MANIFEST, [json.dumps(manifest, indent=2, sort_keys=True)])
    fits_path, report_path = out / "fits.csv", out / "report.csv"
    _write_csv(fits_path, FITS_HEADER, _fit_rows(fits))
    _write_csv(report_path, REPORT_HEADER, rows)
    return fits_path, report_path


def read_fits(path: str | Path) -> dict[str, estimator.CorrectionFit]:
    cols: dict[str, list[list[float]]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != FITS_HEADER:
            raise ConfigError(f"{path} does not have the fits.csv header")
        for row in reader:
            cols[row[0]].append([float(c) for c in row[1:]])
    fits = {}
    for ens, rows in cols.items():
        a = np.asarray(rows)
        nan = np.full(len(a), np.nan)
        fits[ens] = estimator.CorrectionFit(a[:, 0], a[:, 1], a[:, 2], (), a[:, 3], nan, nan)
    return fits


def run_report(fits_path: str | Path) -> tuple[Path, list[tuple[float, ...]]]:
    """Kurtosis regression across the ensembles of an existing ``fits.csv``."""
    fits_path = Path(fits_path)
    manifest = _load_manifest(fits_path.parent)
    rows = kurtosis_rows(read_fits(fits_path), manifest)
    path = fits_path.parent / "report.csv"
    _write_csv(path, REPORT_HEADER, rows)
    return path, rows


# -- theory -------------------------------------------------------------------


def theory_grid(config: ExperimentConfig) -> np.ndarray:
    if config.theory_x is not None:
        start, stop, num = config.theory_x
        return np.linspace(start, stop, num)
    if config.statistic == "hard_edge_min":
        return np.linspace(0.0, 5.0, 101)
    if config.statistic == "bulk_gap":
        return np.linspace(0.0, 3.0, 61)
    return np.arange(0.0, 6.0)


def run_theory_table(config: ExperimentConfig, model: str = "paper", out_path: str | Path | None = None) -> Path:
    """``x``, the limit cdf, and the corrected cdf for every (n, kappa4) of the config."""
    x = theory_grid(config)
    pairs = []
    for e in config.ensembles:
        for n in sorted(set(config.n_list)):
            key = (n, e.effective_kappa4, e.diagonal_variance)
            if key not in pairs:
                pairs.append(key)
    params = {}
    if config.statistic != "hard_edge_min":
        params = {"width": config.bulk_width}
    header = ["x", "limit"]
    columns = []
    base = None
    for n, kappa, dv in pairs:
        extra = dict(params)
        if model == "paper" and config.statistic != "hard_edge_min":
            extra.update(center=config.bulk_center, diagonal_variance=dv)
        m = theory.get_model(model, config.statistic, **extra)
        if base is None:
            base = np.asarray(m.limit_cdf(x), dtype=float)
        name = f"corrected_n{n}_kappa{kappa:g}"
        if len(set(e.diagonal_variance for e in config.ensembles)) > 1:
            name += f"_d{dv:g}"
        header.append(name)
        columns.append(np.asarray(theory.corrected_cdf(x, max(n, 2), kappa, m), dtype=float))
    out = Path(out_path) if out_path is not None else Path(config.output_dir) / "theory.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [(xi, base[i], *(c[i] for c in columns)) for i, xi in enumerate(x)]
    _write_csv(out, header, rows)
    return out
