import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from rmtlab.theory import (
    ClippedProbabilityWarning,
    CorrectionModel,
    KernelSpec,
    bessel_kernel,
    bulk_corrected_statistic,
    bulk_density_shift,
    fredholm_det,
    get_model,
    hard_edge_corrected_cdf,
    hard_edge_gap_probability,
    hard_edge_limit_cdf,
    hard_edge_limit_mean,
    null_hard_edge_model,
    paper_bulk_model,
    paper_hard_edge_model,
    sine_count_distribution,
    sine_gap_probability,
    sine_kernel,
)

XS = np.linspace(0.0, 6.0, 25)


def test_limit_cdf_endpoints():
    assert hard_edge_limit_cdf(0.0) == 0.0
    assert hard_edge_limit_cdf(60.0) == pytest.approx(1.0, abs=1e-15)
    assert hard_edge_limit_cdf(0.0, "real") == 0.0
    assert np.all(np.diff(hard_edge_limit_cdf(XS)) > 0)
    with pytest.raises(ValueError):
        hard_edge_limit_cdf(-0.1)


def test_limit_mean_by_quadrature():
    assert hard_edge_limit_mean() == pytest.approx(1.0, rel=1e-10)


def test_bessel_determinant_reproduces_limit_law():
    for x in (0.25, 1.0, 3.0):
        assert hard_edge_gap_probability(x, nodes=40) == pytest.approx(1 - hard_edge_limit_cdf(x), abs=1e-12)


def test_bessel_kernel_symmetric_and_diagonal_limit():
    pts = np.array([0.3, 1.7, 4.0])
    k = bessel_kernel(pts, pts)
    np.testing.assert_allclose(k, k.T, atol=1e-15)
    near = bessel_kernel(pts, pts + 1e-7)
    np.testing.assert_allclose(np.diag(near), np.diag(k), rtol=1e-5)


def test_null_model_is_identity():
    m = null_hard_edge_model()
    for n in (2, 10, 1000):
        np.testing.assert_array_equal(hard_edge_corrected_cdf(XS, n, 0.7, m), hard_edge_limit_cdf(XS))


def test_corrected_cdf_linear_in_kappa():
    m = paper_hard_edge_model()
    a = hard_edge_corrected_cdf(XS, 50, 1.0, m)
    b = hard_edge_corrected_cdf(XS, 50, -1.0, m)
    expected = (m.correction_term(XS, 1.0) - m.correction_term(XS, -1.0)) / 50
    np.testing.assert_allclose(a - b, expected, atol=1e-15)


def test_gaussian_reference_reduces_to_limit():
    m = paper_hard_edge_model()
    np.testing.assert_array_equal(hard_edge_corrected_cdf(XS, 64, 0.0, m), hard_edge_limit_cdf(XS))


def test_corrected_is_first_order_of_rescaled_exponential():
    # F_n(x) = 1 - exp(-x (1 + k/n)) expanded to first order in 1/n
    m = paper_hard_edge_model()
    x, k = 1.3, 0.8
    for n in (1e3, 1e4):
        exact = -math.expm1(-x * (1 + k / n))
        assert abs(m.corrected(x, int(n), k) - exact) < 2 * (x * k / n) ** 2


def test_clipping_warns_and_bounds():
    bad = CorrectionModel("bad", hard_edge_limit_cdf, lambda x, k: k * np.ones_like(np.asarray(x, float)))
    with pytest.warns(ClippedProbabilityWarning):
        out = hard_edge_corrected_cdf(XS, 2, 5.0, bad)
    assert np.all((out >= 0) & (out <= 1))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        hard_edge_corrected_cdf(XS, 100, 1.0, paper_hard_edge_model())
    with pytest.raises(ValueError):
        hard_edge_corrected_cdf(1.0, 1, 0.0, bad)
    with pytest.raises(ValueError):
        hard_edge_corrected_cdf(-1.0, 10, 0.0, bad)


def test_fredholm_zero_kernel():
    assert fredholm_det(lambda x, y: np.zeros((len(x), len(y))), 2.0) == 1.0


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
def test_fredholm_rank_one(s):
    phi = lambda t: np.exp(-t) * np.cos(t)  # noqa: E731
    det = fredholm_det(lambda x, y: np.multiply.outer(phi(x), phi(y)), (0.0, s), nodes=40)
    q, _ = integrate.quad(lambda t: phi(t) ** 2, 0.0, s, epsabs=1e-14, epsrel=1e-14)
    assert det == pytest.approx(1.0 - q, abs=1e-10)


def test_fredholm_errors():
    with pytest.raises(ValueError):
        fredholm_det(sine_kernel, 0.0)
    with pytest.raises(ValueError):
        fredholm_det(sine_kernel, (1.0, 0.5))
    with pytest.raises(ValueError):
        fredholm_det(sine_kernel, 1.0, nodes=3)
    with pytest.raises(ValueError):
        KernelSpec("airy")


def test_fredholm_permutation_invariance():
    order = np.random.default_rng(0).permutation(40)
    for s in (0.5, 2.0, 4.0):
        assert fredholm_det(sine_kernel, s, order=order) == pytest.approx(fredholm_det(sine_kernel, s), abs=1e-12)


def test_sine_gap_examples():
    assert sine_gap_probability(1e-8) == pytest.approx(1.0, abs=1e-7)
    assert sine_gap_probability(0.01) == pytest.approx(0.99, abs=1e-4)
    assert sine_gap_probability(1.0) > sine_gap_probability(2.0)
    # independent literature values of the sine-kernel gap probability
    assert sine_gap_probability(1.0) == pytest.approx(0.17022, abs=5e-5)
    with pytest.raises(ValueError):
        sine_gap_probability(0.0)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 3.0, 4.0])
def test_sine_gap_node_convergence(s):
    assert abs(sine_gap_probability(s, 32) - sine_gap_probability(s, 64)) < 1e-10
    assert abs(sine_gap_probability(s, 20) - sine_gap_probability(s, 40)) < 1e-10


def test_kernel_diagonal_and_symmetry():
    pts = np.array([0.0, 0.4, 1.3])
    k = KernelSpec("sine")(pts, pts)
    np.testing.assert_array_equal(np.diag(k), 1.0)
    np.testing.assert_allclose(k, k.T)


def test_count_distribution():
    p = sine_count_distribution(1.5, 10)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p[0] == pytest.approx(sine_gap_probability(1.5), abs=1e-12)
    assert np.dot(np.arange(11), p) == pytest.approx(1.5, abs=1e-10)


def test_bulk_density_shift_center():
    # at the centre the shift is (kappa4 - d + 1) / 2 with d the diagonal variance
    assert bulk_density_shift(0.0) == pytest.approx(0.0, abs=1e-15)
    assert bulk_density_shift(-1.0) == pytest.approx(-0.5, abs=1e-14)
    assert bulk_density_shift(1.0, 0.0, 2.0) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        bulk_density_shift(0.0, 2.0)


def test_bulk_null_and_linearity():
    s = np.array([0.5, 1.0, 2.0])
    null = get_model("null", "bulk_gap")
    np.testing.assert_allclose(bulk_corrected_statistic(s, 50, 1.0, null),
                               [1 - sine_gap_probability(v) for v in s], atol=1e-15)
    m = paper_bulk_model("bulk_gap")
    a, b, c = (bulk_corrected_statistic(s, 50, k, m) for k in (-1.0, 0.0, 1.0))
    np.testing.assert_allclose(a + c, 2 * b, atol=1e-12)


def test_bulk_gap_correction_matches_rescaled_law():
    # correction_term / n is the first-order term of F(s (1 + delta/n))
    m = paper_bulk_model("bulk_gap")
    s, k, n = 1.2, -1.0, 2000
    delta = bulk_density_shift(k)
    exact = 1 - sine_gap_probability(s * (1 + delta / n))
    assert m.corrected(s, n, k) == pytest.approx(exact, abs=1e-6)


def test_get_model_errors():
    with pytest.raises(ValueError):
        get_model("other")
    with pytest.raises(ValueError):
        get_model("null", "bulk_moment")
    assert get_model("paper", "bulk_count", width=1.0).name == "paper"
