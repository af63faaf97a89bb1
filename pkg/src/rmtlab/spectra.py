"""Dense spectral computations and rescaling to local statistics.

Convention used everywhere in the package: matrix entries have variance 1,
the hard-edge statistic is ``x = n * sigma_min(X)^2 = n * lambda_min(X X*)``
and bulk statistics divide Wigner eigenvalues by ``sqrt(n)`` so the limiting
density is the semicircle ``sqrt(4 - u^2) / (2 pi)`` on ``[-2, 2]``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

STATISTIC_KINDS = ("hard_edge_min", "bulk_count", "bulk_gap")

MAX_DIM = 4096


@dataclass(frozen=True)
class SpectralSample:
    statistic: float
    kind: str
    n: int
    replicate_index: int
    seed: int

    def __post_init__(self) -> None:
        if self.kind not in STATISTIC_KINDS:
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if self.kind == "hard_edge_min" and self.statistic < 0:
            raise ValueError("hard-edge statistic must be nonnegative")


def _check_size(*dims: int) -> None:
    if max(dims) > MAX_DIM:
        raise ValueError(f"dense decompositions are limited to dimension {MAX_DIM}")


def is_hermitian(h: np.ndarray, rtol: float = 1e-13) -> bool:
    h = np.asarray(h)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        return False
    hh = np.conj(np.swapaxes(h, -1, -2))
    scale = np.max(np.abs(h)) if h.size else 0.0
    return bool(np.max(np.abs(h - hh), initial=0.0) <= rtol * scale)


def hermitian_eigenvalues(h) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (or a stack of them)."""
    h = np.asarray(h)
    if not is_hermitian(h):
        raise ValueError("input is not Hermitian")
    _check_size(h.shape[-1])
    return np.linalg.eigvalsh(h)


def eigenpair_residual(h) -> float:
    """Largest ``||H v - lambda v|| / ||H||_2`` over all eigenpairs."""
    h = np.asarray(h)
    if not is_hermitian(h):
        raise ValueError("input is not Hermitian")
    w, v = np.linalg.eigh(h)
    norm = max(np.max(np.abs(w)), np.finfo(float).tiny)
    res = np.linalg.norm(h @ v - v * w, axis=0)
    return float(np.max(res) / norm)


def singular_values(x) -> np.ndarray:
    """Descending singular values (batched over leading axes)."""
    x = np.asarray(x)
    _check_size(*x.shape[-2:])
    return np.linalg.svd(x, compute_uv=False)


def _inverse_subspace_iteration(x: np.ndarray, block: int, tol: float, maxiter: int) -> float | None:
    n = x.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            lu = scipy.linalg.lu_factor(x, check_finite=False)
        except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError, ValueError):
            return None
    if np.any(np.diag(lu[0]) == 0):
        return None
    k = min(block, n)
    # Deterministic start keeps the fast path a pure function of x.
    start = np.random.default_rng(0x5EED).standard_normal((n, k))
    v = np.linalg.qr(start.astype(x.dtype))[0]
    adjoint = 2 if np.iscomplexobj(x) else 1
    prev = None
    for _ in range(maxiter):
        # X^{-1} X^{-*} = V diag(sigma^-2) V*, so v converges to the smallest right singular vectors
        w = scipy.linalg.lu_solve(lu, v, trans=adjoint, check_finite=False)
        s = np.linalg.svd(w, compute_uv=False)[0]
        if not np.isfinite(s):
            return None
        if prev is not None and abs(s - prev) <= tol * s:
            return 1.0 / s
        prev = s
        z = scipy.linalg.lu_solve(lu, w, trans=0, check_finite=False)
        v, _ = np.linalg.qr(z)
    return None


def smallest_singular_value(x, method: str = "auto", *, tol: float = 1e-14, maxiter: int = 200) -> float:
    """Smallest singular value of a single matrix.

    ``method="svd"`` takes the last entry of the full decomposition.
    ``"inverse"`` runs block inverse iteration on ``X* X`` from one LU
    factorization, which is cheaper for large square inputs.  ``"auto"``
    uses the inverse path for square matrices and falls back to the full
    decomposition when the LU is singular or iteration stalls.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("smallest_singular_value takes a single matrix; use singular_values for stacks")
    _check_size(*x.shape)
    if method not in ("auto", "svd", "inverse"):
        raise ValueError(f"unknown method {method!r}")
    if method != "svd" and x.shape[0] == x.shape[1]:
        x = x.astype(np.complex128 if np.iscomplexobj(x) else np.float64)
        s = _inverse_subspace_iteration(x, block=4, tol=tol, maxiter=maxiter)
        if s is not None:
            return float(s)
        if method == "inverse":
            raise np.linalg.LinAlgError("inverse iteration failed (singular or not converged)")
    elif method == "inverse":
        raise ValueError("inverse iteration needs a square matrix")
    return float(np.linalg.svd(x, compute_uv=False)[-1])


def hard_edge_statistics(xs) -> np.ndarray:
    """``n * sigma_min^2`` for a stack of square factors of shape ``(..., n, n)``."""
    xs = np.asarray(xs)
    n = xs.shape[-1]
    if xs.shape[-2] != n:
        raise ValueError("hard-edge rescaling needs square factors")
    return rescale_hard_edge(singular_values(xs)[..., -1], n)


def rescale_hard_edge(sigma_min, n: int):
    """Hard-edge variable ``n * sigma_min^2``."""
    return n * np.square(sigma_min)


def semicircle_density(u):
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.clip(4.0 - u * u, 0.0, None)) / (2.0 * np.pi)


def mean_spacing(center: float, n: int) -> float:
    """Local mean eigenvalue spacing at ``center`` in ``sqrt(n)``-normalized units."""
    if not -2.0 < center < 2.0:
        raise ValueError(f"center {center} is outside the semicircle support (-2, 2)")
    return 1.0 / (n * float(semicircle_density(center)))


def bulk_counting_statistic(eigs, center: float, width: float, n: int, *, units: str = "spacings") -> int:
    """Number of eigenvalues in a closed interval centred at ``center``.

    With ``units="spacings"`` the eigenvalues are raw Wigner eigenvalues,
    ``center`` is in ``sqrt(n)``-normalized units and ``width`` counts local
    mean spacings.  With ``units="absolute"`` all three are used as given.
    """
    eigs = np.asarray(eigs, dtype=float)
    if width < 0:
        raise ValueError("width must be nonnegative")
    if width == 0:
        return 0
    if units == "spacings":
        half = 0.5 * width * mean_spacing(center, n)
        u = eigs / math.sqrt(n)
    elif units == "absolute":
        half = 0.5 * width
        u = eigs
    else:
        raise ValueError(f"unknown units {units!r}")
    lo, hi = center - half, center + half
    return int(np.searchsorted(u, hi, side="right") - np.searchsorted(u, lo, side="left"))


def bulk_gap_statistic(eigs, center: float, n: int) -> float:
    """Width, in local mean spacings, of the largest eigenvalue-free interval centred at ``center``.

    ``P(statistic > s)`` is the probability that an interval of ``s`` mean
    spacings around ``center`` holds no eigenvalue, i.e. the bulk gap
    probability.
    """
    u = np.asarray(eigs, dtype=float) / math.sqrt(n)
    return float(2.0 * np.min(np.abs(u - center)) / mean_spacing(center, n))
