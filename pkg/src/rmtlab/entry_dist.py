"""Scalar entry laws with exactly controlled mean, variance and fourth cumulant.

Every law here has mean 0 and variance 1 (``E|x|^2 = 1``).  The experimental
knob is the fourth cumulant ``kappa4``:

* real class:    ``kappa4 = E[x^4] - 3``
* complex class: ``kappa4 = E[|x|^4] - 2``, for laws with ``E[x^2] = 0``

Both Gaussians have ``kappa4 = 0``.  The offsets are the module constants
:data:`REAL_KURTOSIS_OFFSET` and :data:`COMPLEX_KURTOSIS_OFFSET`.

The tunable family is the symmetric three-point law.  In the real class it
puts mass ``p`` on each of ``-a`` and ``+a`` and the rest on 0, with
``2 p a^2 = 1`` so ``kappa4 = a^2 - 3``.  In the complex class the analogue is
radial: ``|x| = a`` with probability ``p = 1/a^2`` (uniform phase) and
``x = 0`` otherwise, so ``kappa4 = a^2 - 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

REAL_KURTOSIS_OFFSET = 3.0
COMPLEX_KURTOSIS_OFFSET = 2.0

FIELD_CLASSES = ("real", "complex")
FORMS = ("gaussian", "rademacher", "three_point", "uniform", "unit_circle_discrete")

# Lower end of the feasible kappa4 interval, attained by |x| = 1 a.s.
KAPPA4_MIN = {"real": -2.0, "complex": -1.0}

_FIXED_KAPPA4 = {
    ("real", "gaussian"): 0.0,
    ("real", "rademacher"): -2.0,
    ("real", "uniform"): -6.0 / 5.0,
    ("complex", "gaussian"): 0.0,
    ("complex", "uniform"): -2.0 / 3.0,
    ("complex", "unit_circle_discrete"): -1.0,
}


@dataclass(frozen=True)
class MomentSpec:
    """Target moments of an entry law.

    Mean and variance are fixed by the normalization; only the fourth
    cumulant is free.
    """

    field_class: str
    fourth_cumulant: float
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self) -> None:
        if self.field_class not in FIELD_CLASSES:
            raise ValueError(f"field_class must be one of {FIELD_CLASSES}, got {self.field_class!r}")
        if self.mean != 0.0 or self.variance != 1.0:
            raise ValueError("entry laws are normalized to mean 0 and variance 1")
        _check_feasible(self.field_class, self.fourth_cumulant)


def _check_feasible(field_class: str, kappa4: float) -> None:
    lo = KAPPA4_MIN[field_class]
    if not (math.isfinite(kappa4) and kappa4 >= lo):
        raise ValueError(
            f"kappa4={kappa4!r} is infeasible for the {field_class} class; "
            f"feasible interval is [{lo:g}, inf)"
        )


class CumulantEstimate(NamedTuple):
    mean: complex | float
    variance: float
    fourth_cumulant: float
    se_mean: float
    se_variance: float
    se_fourth_cumulant: float
    degenerate: bool


@dataclass(frozen=True)
class EntryDistribution:
    """An immutable scalar law, parametrized by its fourth cumulant.

    Storing ``kappa4`` (rather than the atom) keeps
    ``exact_cumulants(make_with_kurtosis(c, k))[2] == k`` exact in floating
    point.  Use :meth:`three_point` to build from an atom instead.
    """

    field_class: str
    form: str
    kappa4: float
    points: int | None = None

    def __post_init__(self) -> None:
        if self.field_class not in FIELD_CLASSES:
            raise ValueError(f"field_class must be one of {FIELD_CLASSES}, got {self.field_class!r}")
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}; expected one of {FORMS}")
        key = (self.field_class, self.form)
        if self.form == "three_point":
            _check_feasible(self.field_class, self.kappa4)
        elif key in _FIXED_KAPPA4:
            if self.kappa4 != _FIXED_KAPPA4[key]:
                raise ValueError(
                    f"{self.field_class} {self.form} has kappa4={_FIXED_KAPPA4[key]:g}, "
                    f"not {self.kappa4!r}"
                )
        else:
            raise ValueError(f"form {self.form!r} is not available in the {self.field_class} class")
        if self.form == "unit_circle_discrete":
            if self.points is None or self.points < 3:
                raise ValueError("unit_circle_discrete needs points >= 3 so that E[x^2] = 0")
        elif self.points is not None:
            raise ValueError("points only applies to unit_circle_discrete")

    # -- constructors -----------------------------------------------------

    @classmethod
    def gaussian(cls, field_class: str = "real") -> EntryDistribution:
        return cls(field_class, "gaussian", 0.0)

    @classmethod
    def rademacher(cls) -> EntryDistribution:
        return cls("real", "rademacher", -2.0)

    @classmethod
    def uniform(cls, field_class: str = "real") -> EntryDistribution:
        """Uniform on ``[-sqrt 3, sqrt 3]`` (real) or on the disc of radius ``sqrt 2`` (complex)."""
        return cls(field_class, "uniform", _FIXED_KAPPA4[(field_class, "uniform")])

    @classmethod
    def unit_circle_discrete(cls, points: int) -> EntryDistribution:
        return cls("complex", "unit_circle_discrete", -1.0, points=points)

    @classmethod
    def three_point(cls, atom: float, field_class: str = "real") -> EntryDistribution:
        """Three-point (real) or radial (complex) law with the given nonzero atom."""
        offset = REAL_KURTOSIS_OFFSET if field_class == "real" else COMPLEX_KURTOSIS_OFFSET
        return cls(field_class, "three_point", atom * atom - offset)

    # -- derived parameters -----------------------------------------------

    @property
    def spec(self) -> MomentSpec:
        return MomentSpec(self.field_class, self.kappa4)

    @property
    def is_complex(self) -> bool:
        return self.field_class == "complex"

    @property
    def atom_squared(self) -> float:
        """``a^2`` of the three-point/radial family."""
        offset = REAL_KURTOSIS_OFFSET if self.field_class == "real" else COMPLEX_KURTOSIS_OFFSET
        return self.kappa4 + offset

    @property
    def atom(self) -> float:
        return math.sqrt(self.atom_squared)

    @property
    def weight(self) -> float:
        """Mass on each of ``+-a`` (real) or on the circle ``|x| = a`` (complex)."""
        if self.field_class == "real":
            return 1.0 / (2.0 * self.atom_squared)
        return 1.0 / self.atom_squared

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | tuple[int, ...] | None = None):
        """Draw i.i.d. values; a Python scalar when ``size`` is None."""
        out = self._draw(rng, 1 if size is None else size)
        if size is None:
            return out.reshape(-1)[0].item()
        return out

    def _draw(self, rng: np.random.Generator, size) -> np.ndarray:
        form = self.form
        if self.field_class == "real":
            if form == "gaussian":
                return rng.standard_normal(size)
            if form == "rademacher":
                return 2.0 * rng.integers(0, 2, size=size).astype(np.float64) - 1.0
            if form == "uniform":
                s3 = math.sqrt(3.0)
                return rng.uniform(-s3, s3, size)
            # three_point
            a, p = self.atom, self.weight
            u = rng.random(size)
            return np.where(u < p, a, np.where(u < 2.0 * p, -a, 0.0))

        if form == "gaussian":
            re = rng.standard_normal(size)
            im = rng.standard_normal(size)
            return (re + 1j * im) * math.sqrt(0.5)
        if form == "unit_circle_discrete":
            k = rng.integers(0, self.points, size=size)
            return np.exp(2j * np.pi * k / self.points)
        if form == "uniform":
            radius = np.sqrt(2.0 * rng.random(size))
            return radius * np.exp(2j * np.pi * rng.random(size))
        # three_point: radial two-level law
        a, p = self.atom, self.weight
        if p == 1.0:
            return np.exp(2j * np.pi * rng.random(size))
        radius = np.where(rng.random(size) < p, a, 0.0)
        return radius * np.exp(2j * np.pi * rng.random(size))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"class": self.field_class, "form": self.form, "kappa4": self.kappa4}
        if self.points is not None:
            d["points"] = self.points
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EntryDistribution:
        unknown = set(d) - {"class", "form", "kappa4", "points"}
        if unknown:
            raise ValueError(f"unknown entry keys: {sorted(unknown)}")
        if "class" not in d:
            raise ValueError("entry descriptor needs a 'class'")
        field_class = d["class"]
        form = d.get("form")
        if form is None:
            if "kappa4" not in d:
                raise ValueError("entry descriptor needs a 'form' or a 'kappa4'")
            return make_with_kurtosis(field_class, float(d["kappa4"]))
        if form == "three_point":
            if "kappa4" not in d:
                raise ValueError("three_point entry needs 'kappa4'")
            return cls(field_class, form, float(d["kappa4"]))
        kappa4 = d.get("kappa4", _FIXED_KAPPA4.get((field_class, form), 0.0))
        return cls(field_class, form, float(kappa4), points=d.get("points"))


def make_with_kurtosis(field_class: str, kappa4: float) -> EntryDistribution:
    """Entry law with mean 0, variance 1 and fourth cumulant exactly ``kappa4``.

    Real ``kappa4 = -2`` gives the Rademacher law (the three-point law with
    no mass at 0).  Everything else is three-point/radial.
    """
    if field_class not in FIELD_CLASSES:
        raise ValueError(f"field_class must be one of {FIELD_CLASSES}, got {field_class!r}")
    _check_feasible(field_class, kappa4)
    if field_class == "real" and kappa4 == -2.0:
        return EntryDistribution.rademacher()
    return EntryDistribution(field_class, "three_point", float(kappa4))


def sample(dist: EntryDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


def exact_cumulants(dist: EntryDistribution) -> tuple[float, float, float]:
    """Closed-form ``(mean, variance, fourth_cumulant)`` of ``dist``."""
    return 0.0, 1.0, dist.kappa4


def atoms(dist: EntryDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Support points and probabilities of a discrete real law, or of ``|x|`` for a complex one.

    Only defined for the atomic forms; used for brute-force moment sums.
    """
    if dist.form == "rademacher":
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    if dist.form == "unit_circle_discrete":
        return np.array([1.0]), np.array([1.0])
    if dist.form != "three_point":
        raise ValueError(f"{dist.form} is not atomic")
    a, p = dist.atom, dist.weight
    if dist.field_class == "real":
        return np.array([-a, 0.0, a]), np.array([p, 1.0 - 2.0 * p, p])
    return np.array([0.0, a]), np.array([1.0 - p, p])


# -- empirical cumulants -------------------------------------------------------


def _real_kstats(n, s1, s2, s3, s4):
    """Unbiased k-statistics k1, k2, k4 from power sums (works elementwise)."""
    k1 = s1 / n
    k2 = (n * s2 - s1 * s1) / (n * (n - 1.0))
    num = (
        -6.0 * s1**4
        + 12.0 * n * s1 * s1 * s2
        - 3.0 * n * (n - 1.0) * s2 * s2
        - 4.0 * n * (n + 1.0) * s1 * s3
        + n * n * (n + 1.0) * s4
    )
    k4 = num / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
    return k1, k2, k4


def _complex_plugin(n, s1, s20, s11, s21, s22):
    """Plug-in mean, variance and complex fourth cumulant from raw power sums.

    ``s20 = sum x^2``, ``s11 = sum |x|^2``, ``s21 = sum |x|^2 x``,
    ``s22 = sum |x|^4``.  The cumulant is
    ``E|y|^4 - 2 (E|y|^2)^2 - |E y^2|^2`` for ``y = x - mean``.
    """
    mu = s1 / n
    m20, m11, m21, m22 = s20 / n, s11 / n, s21 / n, s22 / n
    mu2 = (mu * mu.conjugate()).real
    var = m11 - mu2
    c20 = m20 - mu * mu
    c22 = (
        m22
        - 4.0 * (mu.conjugate() * m21).real
        + 2.0 * (mu.conjugate() ** 2 * m20).real
        + 4.0 * mu2 * m11
        - 3.0 * mu2 * mu2
    )
    k4 = c22 - 2.0 * var * var - (c20 * c20.conjugate()).real
    return mu, var, k4


def _jackknife_se(theta_loo: np.ndarray) -> float:
    n = theta_loo.shape[0]
    dev = theta_loo - theta_loo.mean()
    return float(np.sqrt((n - 1.0) / n * np.sum((dev * np.conj(dev)).real)))


def empirical_cumulants(samples) -> CumulantEstimate:
    """Mean, variance and fourth cumulant of a sample with delete-one jackknife errors.

    Real input uses k-statistics.  Complex input uses plug-in central
    moments and the complex cumulant ``E|y|^4 - 2 (E|y|^2)^2 - |E y^2|^2``,
    which reduces to ``E|x|^4 - 2`` for the laws of this module.  All
    leave-one-out estimates come from adjusted power sums, so the cost is
    linear in the sample size.
    """
    x = np.asarray(samples).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    if np.iscomplexobj(x):
        shift = x.mean()
        y = x - shift
        a2 = (y * y.conjugate()).real
        pw = {"s1": y, "s20": y * y, "s11": a2, "s21": a2 * y, "s22": a2 * a2}
        tot = {k: v.sum() for k, v in pw.items()}
        mu, var, k4 = _complex_plugin(float(n), *tot.values())
        loo = _complex_plugin(float(n - 1), *(tot[k] - pw[k] for k in pw))
        mean = complex(mu + shift)
    else:
        x = x.astype(np.float64)
        shift = x.mean()
        y = x - shift
        pw = [y, y * y, y**3, y**4]
        tot = [v.sum() for v in pw]
        mu, var, k4 = _real_kstats(float(n), *tot)
        loo = _real_kstats(float(n - 1), *(t - v for t, v in zip(tot, pw)))
        mean = float(mu + shift)
    var = float(var)
    scale = float(np.max(np.abs(x))) ** 2
    degenerate = var <= 1e-14 * scale or scale == 0.0
    return CumulantEstimate(
        mean=mean,
        variance=var,
        fourth_cumulant=float(k4),
        se_mean=_jackknife_se(np.asarray(loo[0])),
        se_variance=_jackknife_se(np.asarray(loo[1])),
        se_fourth_cumulant=_jackknife_se(np.asarray(loo[2])),
        degenerate=bool(degenerate),
    )
