"""Empirical distributions, DKW bands and 1/N correction fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

DEFAULT_QUANTILES = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step function ``#{samples <= x} / n``."""

    sorted_samples: np.ndarray

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted_samples, x, side="right") / self.n
        return out[()] if out.ndim == 0 else out

    def ks_distance(self, cdf: Callable) -> float:
        """``sup_x |F_hat(x) - F(x)|`` for a continuous reference ``F``."""
        xs = self.sorted_samples
        f = np.asarray(cdf(xs), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(max(np.max(i / self.n - f), np.max(f - (i - 1) / self.n)))


def ecdf(samples) -> EmpiricalCdf:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("ecdf needs at least one sample")
    s.setflags(write=False)
    return EmpiricalCdf(s)


@dataclass(frozen=True)
class ConfidenceBand:
    epsilon: float
    alpha: float
    n: int

    def contains(self, ecdf_: EmpiricalCdf, cdf: Callable) -> bool:
        return ecdf_.ks_distance(cdf) <= self.epsilon


def dkw_band(n: int, alpha: float) -> ConfidenceBand:
    """Uniform band half-width ``sqrt(ln(2/alpha) / (2n))``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return ConfidenceBand(math.sqrt(math.log(2.0 / alpha) / (2.0 * n)), alpha, n)


@dataclass(frozen=True)
class DeviationCurve:
    x: np.ndarray
    delta: np.ndarray
    se: np.ndarray

    def __iter__(self):
        return iter(zip(self.x.tolist(), self.delta.tolist(), self.se.tolist()))

    def __len__(self) -> int:
        return int(self.x.size)


def deviation_curve(ecdf_: EmpiricalCdf, reference: Callable, x_grid, *, bootstrap: int = 0,
                    rng: np.random.Generator | None = None) -> DeviationCurve:
    """``F_hat(x) - F_ref(x)`` on a grid, with binomial standard errors.

    Grid points must lie strictly inside the sample range.  With
    ``bootstrap > 0`` the errors come from that many multinomial resamples
    of the counts instead.
    """
    x = np.asarray(x_grid, dtype=float)
    lo, hi = ecdf_.sorted_samples[0], ecdf_.sorted_samples[-1]
    if np.any(x <= lo) or np.any(x >= hi):
        raise ValueError(f"grid must lie strictly inside the sample range ({lo:g}, {hi:g})")
    f = np.asarray(ecdf_(x), dtype=float)
    ref = np.broadcast_to(np.asarray(reference(x), dtype=float), x.shape)
    if bootstrap:
        rng = rng if rng is not None else np.random.default_rng(0)
        order = np.argsort(x)
        counts = np.diff(np.concatenate([[0], np.searchsorted(ecdf_.sorted_samples, x[order], side="right"),
                                         [ecdf_.n]]))
        draws = rng.multinomial(ecdf_.n, counts / ecdf_.n, size=bootstrap)
        fb = np.cumsum(draws, axis=1)[:, :-1] / ecdf_.n
        se = np.empty_like(f)
        se[order] = fb.std(axis=0, ddof=1)
    else:
        se = np.sqrt(f * (1.0 - f) / ecdf_.n)
    return DeviationCurve(x, f - ref, se)


@dataclass(frozen=True)
class CorrectionFit:
    """Per-grid-point slope of ``Delta_N(x)`` against ``1/N``.

    ``intercept``/``intercept_se`` come from the unconstrained fit and
    ``intercept_flag`` marks points where ``|intercept| > 3 se``, which
    usually means the reference law is off.
    """

    x_grid: np.ndarray
    c_hat: np.ndarray
    c_se: np.ndarray
    n_list: tuple[int, ...]
    r_squared: np.ndarray
    intercept: np.ndarray
    intercept_se: np.ndarray

    @property
    def intercept_flag(self) -> np.ndarray:
        return np.abs(self.intercept) > 3.0 * self.intercept_se

    def at(self, x: float) -> int:
        idx = np.flatnonzero(np.isclose(self.x_grid, x, rtol=1e-12, atol=0.0))
        if idx.size == 0:
            raise KeyError(f"x={x!r} is not on the fit grid")
        return int(idx[0])


def _stack(deviations: Mapping[int, DeviationCurve]):
    ns = sorted(deviations)
    if len(set(ns)) < 3:
        raise ValueError(f"need at least 3 distinct N values, got {ns}")
    x = np.asarray(deviations[ns[0]].x, dtype=float)
    for n in ns[1:]:
        if not np.array_equal(np.asarray(deviations[n].x, dtype=float), x):
            raise ValueError("deviation curves must share one grid")
    d = np.array([np.asarray(deviations[n].delta, dtype=float) for n in ns])
    se = np.array([np.asarray(deviations[n].se, dtype=float) for n in ns])
    if np.any(~np.isfinite(se)) or np.any(se <= 0):
        raise ValueError("zero or non-finite standard errors give zero/undefined weights")
    return ns, x, d, se


def fit_one_over_n(deviations: Mapping[int, DeviationCurve]) -> CorrectionFit:
    """Weighted least squares ``Delta_N(x) = c(x) / N`` through the origin.

    Weights are ``1/se^2``.  ``r_squared`` is the uncentred weighted R^2
    appropriate for a fit without intercept.
    """
    ns, x, d, se = _stack(deviations)
    u = 1.0 / np.asarray(ns, dtype=float)[:, None]
    w = 1.0 / se**2
    suu = np.sum(w * u * u, axis=0)
    c = np.sum(w * u * d, axis=0) / suu
    c_se = 1.0 / np.sqrt(suu)
    ss_res = np.sum(w * (d - c * u) ** 2, axis=0)
    ss_tot = np.sum(w * d * d, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, np.where(ss_res > 0, 0.0, 1.0))

    # unconstrained straight line for the diagnostic
    sw = np.sum(w, axis=0)
    su = np.sum(w * u, axis=0)
    sd = np.sum(w * d, axis=0)
    sud = np.sum(w * u * d, axis=0)
    det = sw * suu - su * su
    intercept = (suu * sd - su * sud) / det
    intercept_se = np.sqrt(suu / det)
    return CorrectionFit(x, c, c_se, tuple(ns), r2, intercept, intercept_se)


def scaling_exponent(deviations: Mapping[int, DeviationCurve], weighted: bool = True,
                     iterations: int = 10) -> np.ndarray:
    """Slope of ``log|Delta_N(x)|`` against ``log N`` at each grid point, intercept free.

    With ``weighted`` the line is refit with delta-method weights
    ``(fitted |Delta_N| / se_N)^2``, so noisy large-N points count less;
    the first pass is unweighted.
    """
    ns, _, d, se = _stack(deviations)
    logn = np.log(np.asarray(ns, dtype=float))[:, None]
    with np.errstate(divide="ignore"):
        logd = np.log(np.abs(d))
    w = np.ones_like(d)
    slope = np.zeros(d.shape[1])
    for _ in range(iterations if weighted else 1):
        sw = w.sum(axis=0)
        mx = (w * logn).sum(axis=0) / sw
        my = (w * logd).sum(axis=0) / sw
        slope = (w * (logn - mx) * (logd - my)).sum(axis=0) / (w * (logn - mx) ** 2).sum(axis=0)
        fitted = np.exp(my + slope * (logn - mx))
        w = (fitted / se) ** 2
    return slope


class KurtosisRegression(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    slope_se: float
    intercept_se: float


def kurtosis_regression(fits: Mapping[float, CorrectionFit] | Iterable[tuple[float, CorrectionFit]],
                        x: float) -> KurtosisRegression:
    """Weighted straight-line fit of ``c_hat(x)`` against ``kappa4``.

    ``fits`` maps kappa4 to a fit, or is a sequence of ``(kappa4, fit)``
    pairs when several ensembles share a kappa4.  Weights are
    ``1/c_se^2``; the slope is the kurtosis sensitivity of the 1/N
    correction at ``x``.
    """
    pairs = list(fits.items()) if isinstance(fits, Mapping) else list(fits)
    distinct = sorted({float(k) for k, _ in pairs})
    if len(distinct) < 3:
        raise ValueError(f"need at least 3 distinct kappa4 values, got {distinct}")
    k = np.array([kap for kap, _ in pairs], dtype=float)
    c = np.empty_like(k)
    se = np.empty_like(k)
    for i, (_, fit) in enumerate(pairs):
        j = fit.at(x)
        c[i], se[i] = fit.c_hat[j], fit.c_se[j]
    if np.any(se <= 0) or np.any(~np.isfinite(se)):
        raise ValueError("zero or non-finite standard errors")
    w = 1.0 / se**2
    sw, sk, skk = w.sum(), (w * k).sum(), (w * k * k).sum()
    sc, skc = (w * c).sum(), (w * k * c).sum()
    det = sw * skk - sk * sk
    slope = (sw * skc - sk * sc) / det
    intercept = (skk * sc - sk * skc) / det
    resid = c - intercept - slope * k
    cbar = sc / sw
    ss_tot = float(np.sum(w * (c - cbar) ** 2))
    ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return KurtosisRegression(float(slope), float(intercept), float(r2),
                              float(math.sqrt(sw / det)), float(math.sqrt(skk / det)))


def quantile_grid(samples, levels=DEFAULT_QUANTILES) -> np.ndarray:
    """Grid at the given quantile levels of the pooled samples."""
    return np.quantile(np.asarray(samples, dtype=float), np.asarray(levels, dtype=float))
