"""Wigner and sample-covariance draws, and the Gaussian-divisible interpolation.

Draws are raw: entries have variance 1 and no ``1/sqrt(N)`` factor is applied
here.  Rescaling to local statistics happens in :mod:`rmtlab.spectra`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .entry_dist import EntryDistribution

KINDS = ("wigner", "covariance_factor")


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for one random matrix.

    ``diagonal_variance`` sets the variance of the (real) Wigner diagonal;
    it is ignored for covariance factors.
    """

    kind: str
    n: int
    entry: EntryDistribution
    m: int | None = None
    field_class: str | None = None
    diagonal_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.m is None:
            object.__setattr__(self, "m", self.n)
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.kind == "wigner" and self.m != self.n:
            raise ValueError("wigner matrices are square; m must equal n")
        if self.field_class is None:
            object.__setattr__(self, "field_class", self.entry.field_class)
        elif self.field_class != self.entry.field_class:
            raise ValueError(
                f"field_class {self.field_class!r} does not match entry class {self.entry.field_class!r}"
            )
        if self.diagonal_variance < 0:
            raise ValueError("diagonal_variance must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.m)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "n": self.n, "m": self.m, "t": 0.0, "entry": self.entry.to_dict()}


@dataclass(frozen=True)
class GaussianDivisibleSpec:
    """``(A + sqrt(t) G) / sqrt(1 + t)`` with ``A`` drawn from ``base``."""

    base: EnsembleSpec
    t: float

    def __post_init__(self) -> None:
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise ValueError(f"t must be a finite nonnegative number, got {self.t!r}")

    @property
    def effective_kappa4(self) -> float:
        return self.base.entry.kappa4 / (1.0 + self.t) ** 2

    def to_dict(self) -> dict[str, Any]:
        d = self.base.to_dict()
        d["t"] = self.t
        return d


def _diagonal(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    d = np.asarray(spec.entry.sample(rng, spec.n))
    if spec.entry.is_complex:
        # Re x has variance 1/2 for every complex law in entry_dist
        d = math.sqrt(2.0) * d.real
    if spec.diagonal_variance != 1.0:
        d = d * math.sqrt(spec.diagonal_variance)
    return d


def sample_wigner(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """Hermitian ``n x n`` matrix, exactly conjugate-symmetric.

    Above-diagonal entries come from ``spec.entry``; the diagonal is real
    with variance ``spec.diagonal_variance``.
    """
    if spec.kind != "wigner":
        raise ValueError(f"sample_wigner needs kind='wigner', got {spec.kind!r}")
    n = spec.n
    iu = np.triu_indices(n, 1)
    upper = np.asarray(spec.entry.sample(rng, iu[0].size))
    dtype = np.complex128 if spec.entry.is_complex else np.float64
    h = np.zeros((n, n), dtype=dtype)
    h[iu] = upper
    h[iu[1], iu[0]] = upper.conjugate()
    h[np.diag_indices(n)] = _diagonal(spec, rng)
    return h


def sample_covariance_factor(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """``n x m`` matrix of i.i.d. entries; the study object is ``X X*``."""
    if spec.kind != "covariance_factor":
        raise ValueError(f"sample_covariance_factor needs kind='covariance_factor', got {spec.kind!r}")
    return np.asarray(spec.entry.sample(rng, (spec.n, spec.m)))


def gaussian_matrix(shape, rng, *, complex_: bool, hermitian: bool, diagonal_variance: float = 1.0):
    """Pure Gaussian reference of the given shape and symmetry class."""
    base = EnsembleSpec(
        "wigner" if hermitian else "covariance_factor",
        shape[0],
        EntryDistribution.gaussian("complex" if complex_ else "real"),
        m=shape[1],
        diagonal_variance=diagonal_variance,
    )
    return sample_wigner(base, rng) if hermitian else sample_covariance_factor(base, rng)


def gaussian_divisible(a, t: float, rng: np.random.Generator, *, hermitian: bool | None = None,
                       diagonal_variance: float = 1.0) -> np.ndarray:
    """Return ``(a + sqrt(t) G) / sqrt(1 + t)`` with ``G`` an independent Gaussian matrix.

    ``G`` matches ``a`` in shape and field; it is Hermitian when ``a`` is
    (auto-detected unless ``hermitian`` is given).  Entry variance stays 1
    and the fourth cumulant is diluted by ``(1 + t)^2``.  ``t = 0`` returns
    a copy of ``a`` without touching ``rng``.
    """
    if not (t >= 0 and math.isfinite(t)):
        raise ValueError(f"t must be a finite nonnegative number, got {t!r}")
    a = np.asarray(a)
    if t == 0:
        return a.copy()
    if hermitian is None:
        hermitian = a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.array_equal(a, a.conj().T))
    g = gaussian_matrix(a.shape, rng, complex_=np.iscomplexobj(a), hermitian=hermitian,
                        diagonal_variance=diagonal_variance)
    return (a + math.sqrt(t) * g) / math.sqrt(1.0 + t)


def draw(spec: EnsembleSpec | GaussianDivisibleSpec, rng: np.random.Generator) -> np.ndarray:
    """One matrix from either kind of spec; the base draw consumes ``rng`` first."""
    if isinstance(spec, GaussianDivisibleSpec):
        base = spec.base
        a = sample_wigner(base, rng) if base.kind == "wigner" else sample_covariance_factor(base, rng)
        return gaussian_divisible(a, spec.t, rng, hermitian=base.kind == "wigner",
                                  diagonal_variance=base.diagonal_variance)
    if spec.kind == "wigner":
        return sample_wigner(spec, rng)
    return sample_covariance_factor(spec, rng)
