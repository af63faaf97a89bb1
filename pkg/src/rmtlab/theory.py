"""Limit laws, Fredholm determinants and first-order 1/N correction models.

All formulas use the sampling convention of :mod:`rmtlab.spectra`: unit
entry variance, hard-edge variable ``x = n lambda_min(X X*)``, bulk
quantities in units of the local mean spacing (sine kernel with
``K(x, x) = 1``).

Correction models
-----------------
A :class:`CorrectionModel` is a limit cdf plus the coefficient of ``1/n``.
Two families ship:

``null``
    zero correction.
``paper``
    first-order kurtosis corrections.  At the complex square hard edge the
    Gaussian law ``1 - exp(-x)`` is exact for every ``n``, and a fourth
    cumulant ``kappa4`` acts to first order as the rescaling
    ``x -> x (1 + kappa4 / n)``, giving the coefficient
    ``kappa4 * x * exp(-x)``.  In the bulk, ``kappa4`` and the diagonal
    variance shift the mean density, ``rho_n = rho (1 + delta / n)``, so a
    statistic measured in semicircle spacings sees ``s -> s (1 + delta / n)``.
    ``delta`` comes from the 1/N term of the mean Stieltjes transform,
    ``m1 = ((d - 1) m^3 + kappa4 m^5) / (1 - m^2)`` with ``d`` the
    diagonal variance; at the centre ``delta = (kappa4 - d + 1) / 2``.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.special

from .spectra import STATISTIC_KINDS


class ClippedProbabilityWarning(UserWarning):
    """A corrected cdf left [0, 1] and was clipped."""


# -- hard edge ---------------------------------------------------------------


def hard_edge_limit_cdf(x, field_class: str = "complex"):
    """Limit cdf of ``n lambda_min(X X*)`` for square ``n x n`` factors.

    Complex: ``1 - exp(-x)``.  Real: ``1 - exp(-x/2 - sqrt(x))``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("hard-edge cdf is defined for x >= 0")
    if field_class == "complex":
        out = -np.expm1(-x)
    elif field_class == "real":
        out = -np.expm1(-0.5 * x - np.sqrt(x))
    else:
        raise ValueError(f"unknown field class {field_class!r}")
    return out[()] if out.ndim == 0 else out


def hard_edge_limit_mean(field_class: str = "complex") -> float:
    """Mean of the limit law by quadrature of the survival function."""
    val, _ = scipy.integrate.quad(lambda t: 1.0 - hard_edge_limit_cdf(t, field_class), 0.0, np.inf)
    return val


# -- correction models -------------------------------------------------------


@dataclass(frozen=True)
class CorrectionModel:
    """``F_n(x) ~ limit_cdf(x) + correction_term(x, kappa4) / n``."""

    name: str
    limit_cdf: Callable
    correction_term: Callable
    provenance: str = ""
    params: dict = field(default_factory=dict)

    def corrected(self, x, n: int, kappa4: float):
        return corrected_cdf(x, n, kappa4, self)


def _zero(x, kappa4):
    return np.zeros_like(np.asarray(x, dtype=float))


def _clip(value):
    value = np.asarray(value, dtype=float)
    if np.any((value < 0.0) | (value > 1.0)):
        warnings.warn("corrected probability outside [0, 1] was clipped", ClippedProbabilityWarning,
                      stacklevel=3)
        value = np.clip(value, 0.0, 1.0)
    return value[()] if value.ndim == 0 else value


def corrected_cdf(x, n: int, kappa4: float, model: CorrectionModel):
    if n < 2:
        raise ValueError("n must be at least 2")
    x = np.asarray(x, dtype=float)
    return _clip(np.asarray(model.limit_cdf(x)) + np.asarray(model.correction_term(x, kappa4)) / n)


def hard_edge_corrected_cdf(x, n: int, kappa4: float, model: CorrectionModel):
    """``limit_cdf(x) + correction_term(x, kappa4) / n`` clipped to [0, 1].

    Clipping emits :class:`ClippedProbabilityWarning`.
    """
    if np.any(np.asarray(x) < 0):
        raise ValueError("hard-edge cdf is defined for x >= 0")
    return corrected_cdf(x, n, kappa4, model)


def hard_edge_kurtosis_correction(x, kappa4):
    """Coefficient of ``1/n`` in the complex square hard-edge cdf."""
    x = np.asarray(x, dtype=float)
    return kappa4 * x * np.exp(-x)


def null_hard_edge_model(field_class: str = "complex") -> CorrectionModel:
    return CorrectionModel(
        "null",
        functools.partial(hard_edge_limit_cdf, field_class=field_class),
        _zero,
        provenance="limit law only",
    )


def paper_hard_edge_model() -> CorrectionModel:
    return CorrectionModel(
        "paper",
        hard_edge_limit_cdf,
        hard_edge_kurtosis_correction,
        provenance="complex square hard edge: first-order term of 1 - exp(-x (1 + kappa4/n))",
    )


# -- kernels and Fredholm determinants -----------------------------------------


@functools.lru_cache(maxsize=64)
def _gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[a, b]``."""
    x, w = _gauss_legendre(nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sine_kernel(x, y):
    """``sin(pi (x - y)) / (pi (x - y))``; ``np.sinc`` supplies the diagonal value 1."""
    return np.sinc(np.subtract.outer(np.asarray(x), np.asarray(y)))


def bessel_kernel(x, y, alpha: float = 0.0):
    """Hard-edge Bessel kernel in the variable ``4 n lambda``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, sy = np.sqrt(x), np.sqrt(y)
    jx, jy = scipy.special.jv(alpha, sx), scipy.special.jv(alpha, sy)
    djx, djy = scipy.special.jvp(alpha, sx), scipy.special.jvp(alpha, sy)
    num = np.multiply.outer(jx, sy * djy) - np.multiply.outer(sx * djx, jy)
    diff = np.subtract.outer(x, y)
    same = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        k = num / (2.0 * np.where(same, 1.0, diff))
    if np.any(same):
        diag = 0.25 * (jx**2 - scipy.special.jv(alpha + 1, sx) * scipy.special.jv(alpha - 1, sx))
        k = np.where(same, np.broadcast_to(diag[:, None], k.shape), k)
    return k


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is ``"sine"`` or ``"bessel"`` (with parameter ``alpha``)."""

    kind: str = "sine"
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("sine", "bessel"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def __call__(self, x, y):
        if self.kind == "sine":
            return sine_kernel(x, y)
        return bessel_kernel(x, y, self.alpha)


def nystrom_matrix(kernel: Callable, interval, nodes: int, order=None) -> np.ndarray:
    """``sqrt(w_i) K(x_i, x_j) sqrt(w_j)`` on Gauss-Legendre nodes."""
    if np.isscalar(interval):
        a, b = 0.0, float(interval)
    else:
        a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must have positive length")
    if nodes < 4:
        raise ValueError("need at least 4 quadrature nodes")
    x, w = gauss_legendre(a, b, nodes)
    if order is not None:
        x, w = x[order], w[order]
    sw = np.sqrt(w)
    return sw[:, None] * np.asarray(kernel(x, x)) * sw[None, :]


def fredholm_det(kernel: Callable, interval, nodes: int = 40, *, order=None) -> float:
    """Nystrom approximation of ``det(I - K)`` on ``L^2(interval)``.

    ``interval`` is ``(a, b)`` or a scalar ``s`` meaning ``(0, s)``.
    ``order`` permutes the nodes (for invariance checks).
    """
    m = nystrom_matrix(kernel, interval, nodes, order)
    return float(np.linalg.det(np.eye(m.shape[0]) - m))


def sine_gap_probability(s: float, nodes: int = 40) -> float:
    """Probability of no sine-process point in an interval of ``s`` mean spacings."""
    if s <= 0:
        raise ValueError("s must be positive")
    return fredholm_det(sine_kernel, (0.0, s), nodes)


def sine_count_distribution(s: float, kmax: int, nodes: int = 40) -> np.ndarray:
    """``P(#points in (0, s) = k)`` for ``k = 0..kmax`` under the sine process.

    The count of a determinantal process on an interval is a sum of
    independent Bernoulli variables whose success probabilities are the
    eigenvalues of the restricted kernel.
    """
    if s <= 0:
        return np.eye(1, kmax + 1).ravel()
    mu = np.clip(np.linalg.eigvalsh(nystrom_matrix(sine_kernel, (0.0, s), nodes)), 0.0, 1.0)
    probs = np.array([1.0])
    for p in mu:
        probs = np.convolve(probs, [1.0 - p, p])
    out = np.zeros(kmax + 1)
    k = min(kmax + 1, probs.size)
    out[:k] = probs[:k]
    return out


def hard_edge_gap_probability(x: float, alpha: float = 0.0, nodes: int = 40) -> float:
    """``P(n lambda_min > x)`` from the Bessel-kernel determinant on ``(0, 4x)``."""
    if x <= 0:
        return 1.0
    return fredholm_det(KernelSpec("bessel", alpha), (0.0, 4.0 * x), nodes)


# -- bulk ---------------------------------------------------------------------


def _semicircle_stieltjes(u: float) -> complex:
    return complex(-u, math.sqrt(max(4.0 - u * u, 0.0))) / 2.0


def bulk_density_shift(kappa4: float, center: float = 0.0, diagonal_variance: float = 1.0) -> float:
    """Relative 1/N correction ``delta`` of the mean density at ``center`` (complex Hermitian)."""
    if not -2.0 < center < 2.0:
        raise ValueError("center must lie inside (-2, 2)")
    m = _semicircle_stieltjes(center)
    m1 = ((diagonal_variance - 1.0) * m**3 + kappa4 * m**5) / (1.0 - m * m)
    return m1.imag / m.imag


def _derivative(f: Callable[[float], float], s: float, h: float = 1e-4) -> float:
    # fourth-order central difference
    return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12.0 * h)


def sine_gap_cdf(s, nodes: int = 40):
    """cdf of the centred gap statistic: ``1 - E(0; s)``."""
    s = np.asarray(s, dtype=float)
    out = np.array([0.0 if v <= 0 else 1.0 - sine_gap_probability(v, nodes) for v in s.ravel()])
    out = out.reshape(s.shape)
    return out[()] if out.ndim == 0 else out


def _gap_correction(s, kappa4, center, diagonal_variance):
    delta = bulk_density_shift(kappa4, center, diagonal_variance)
    s = np.asarray(s, dtype=float)
    dens = [0.0 if v <= 0 else v * _derivative(sine_gap_cdf, v, min(1e-3, v / 4)) for v in s.ravel()]
    return (delta * np.array(dens)).reshape(s.shape)


def _count_cdf_factory(width: float, kmax: int = 64):
    def cdf(k, s=width):
        k = np.floor(np.asarray(k, dtype=float))
        probs = np.cumsum(sine_count_distribution(s, kmax))
        idx = np.clip(k, -1, kmax).astype(int)
        out = np.where(idx < 0, 0.0, probs[np.clip(idx, 0, kmax)])
        return out[()] if out.ndim == 0 else out

    return cdf


def null_bulk_model(statistic: str = "bulk_gap", width: float = 1.0) -> CorrectionModel:
    limit = sine_gap_cdf if statistic == "bulk_gap" else _count_cdf_factory(width)
    return CorrectionModel("null", limit, _zero, provenance="sine-process limit only")


def paper_bulk_model(statistic: str = "bulk_gap", *, center: float = 0.0, diagonal_variance: float = 1.0,
                     width: float = 1.0) -> CorrectionModel:
    """Density-shift model ``s -> s (1 + delta / n)`` for the bulk statistics."""
    if statistic == "bulk_gap":
        def corr(s, kappa4):
            return _gap_correction(s, kappa4, center, diagonal_variance)

        limit = sine_gap_cdf
    else:
        count_cdf = _count_cdf_factory(width)

        def corr(k, kappa4):
            delta = bulk_density_shift(kappa4, center, diagonal_variance)
            return delta * width * _derivative(lambda w: count_cdf(k, s=w), width, min(1e-3, width / 4))

        limit = count_cdf
    return CorrectionModel(
        "paper",
        limit,
        corr,
        provenance="bulk: mean-density shift rho (1 + delta/n) from the 1/N resolvent term",
        params={"center": center, "diagonal_variance": diagonal_variance, "width": width},
    )


def bulk_corrected_statistic(s, n: int, kappa4: float, model: CorrectionModel):
    """Bulk limit value plus ``correction_term / n``, clipped to [0, 1]."""
    return corrected_cdf(s, n, kappa4, model)


def get_model(name: str, statistic: str = "hard_edge_min", **params) -> CorrectionModel:
    """Look up a shipped model by name (``"null"`` or ``"paper"``)."""
    if statistic not in STATISTIC_KINDS:
        raise ValueError(f"unknown statistic {statistic!r}")
    if name not in ("null", "paper"):
        raise ValueError(f"unknown model {name!r}; expected 'null' or 'paper'")
    if statistic == "hard_edge_min":
        return null_hard_edge_model() if name == "null" else paper_hard_edge_model()
    if name == "null":
        return null_bulk_model(statistic, params.get("width", 1.0))
    return paper_bulk_model(statistic, **params)
