import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from spectrakde.kde import (
    GAUSSIAN,
    BandwidthRule,
    EmpiricalSpectrum,
    KernelSpec,
    bandwidth,
    check_kernel,
    gaussian_kernel,
    kde_cdf,
    kde_density,
)

# frozen extended-precision values
K0 = 0.398942280401432678
K1 = 0.241970724519143350
CDF_TWO_POINTS = 0.250015835620916560  # (Phi(0) + Phi(-4)) / 2
H200 = 0.0854987973338348495
H3200 = 0.0339302202074363321


def spec(values, n=100):
    return EmpiricalSpectrum(np.asarray(values, dtype=float), n)


def box_kernel():
    return KernelSpec("box", lambda u: np.where(np.abs(np.asarray(u)) <= 1.0, 0.5, 0.0))


def test_gaussian_values():
    k = gaussian_kernel()
    assert k(0.0) == pytest.approx(K0, rel=1e-15)
    for x in (0.5, 1.0, 2.0):
        assert k(x) == k(-x)


def test_gaussian_passes_all_checks():
    report = check_kernel(GAUSSIAN)
    assert report.passed
    assert len(report.checks) == 4
    mass = report.checks[2].measured
    assert abs(mass - 1.0) <= 1e-6
    assert all(line.startswith("PASS") for line in report.lines())


def test_box_kernel_flags_derivative():
    report = check_kernel(box_kernel())
    verdicts = {c.condition: c.passed for c in report.checks}
    assert not report.passed
    assert [c.passed for c in report.checks][:3] == [True, True, True]
    assert not report.checks[3].passed, verdicts


def test_scaled_kernel_fails_normalization():
    doubled = KernelSpec("double", lambda u: 2.0 * GAUSSIAN(u), lambda u: 2.0 * GAUSSIAN.derivative(u))
    report = check_kernel(doubled)
    assert not report.checks[2].passed
    assert report.checks[2].measured == pytest.approx(2.0, abs=1e-6)


def test_bandwidth_examples():
    assert bandwidth(BandwidthRule(), 200) == pytest.approx(H200, rel=1e-14)
    assert bandwidth(BandwidthRule(), 3200) == pytest.approx(H3200, rel=1e-14)
    assert bandwidth(BandwidthRule.fixed(0.1), 10) == 0.1
    assert bandwidth(BandwidthRule.power(1.0, 0.4), 200) == pytest.approx(200 ** -0.4)
    with pytest.raises(ValueError):
        bandwidth(BandwidthRule(), 0)
    with pytest.raises(ValueError):
        BandwidthRule.fixed(0.0)
    with pytest.raises(ValueError):
        bandwidth(BandwidthRule.power(-1.0, 0.3), 10)


def test_bandwidth_parse_and_label():
    for text in ("default", "fixed:0.25", "power:1.0:0.4"):
        assert BandwidthRule.parse(text).label() == text
    assert BandwidthRule.parse("power:1:0.4").satisfies_band_condition() is False
    assert BandwidthRule.parse("power:1:0.3").satisfies_band_condition()
    for bad in ("fixed", "power:1", "fixed:abc", "silverman"):
        with pytest.raises(ValueError):
            BandwidthRule.parse(bad)


def test_density_examples():
    assert kde_density(spec([1.0]), GAUSSIAN, 1.0, 1.0) == pytest.approx(K0, rel=1e-15)
    assert kde_density(spec([0.0, 2.0]), GAUSSIAN, 1.0, 1.0) == pytest.approx(K1, rel=1e-15)


def test_density_errors():
    with pytest.raises(ValueError):
        kde_density(spec([1.0]), GAUSSIAN, 0.0, 1.0)
    with pytest.raises(ValueError):
        spec([])
    with pytest.raises(ValueError):
        spec([1.0, np.inf])


def test_cdf_examples():
    assert kde_cdf(spec([1.0]), GAUSSIAN, 1.0, 1.0) == 0.5
    assert kde_cdf(spec([1.0]), GAUSSIAN, 1.0, 1.0 - 20.0) <= 1e-6
    assert kde_cdf(spec([0.0, 2.0]), GAUSSIAN, 0.5, 0.0) == pytest.approx(CDF_TWO_POINTS, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=40), st.floats(0.01, 1.0))
def test_normalization(values, h):
    s = spec(values)
    grid = np.linspace(s.eigenvalues[0] - 10 * h, s.eigenvalues[-1] + 10 * h, 20001)
    assert abs(trapezoid(kde_density(s, GAUSSIAN, h, grid), grid) - 1.0) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=40), st.floats(0.01, 1.0))
def test_cdf_monotone_and_derivative(values, h):
    s = spec(values)
    grid = np.linspace(s.eigenvalues[0] - 3.0, s.eigenvalues[-1] + 3.0, 101)
    cdf = kde_cdf(s, GAUSSIAN, h, grid)
    assert np.all(np.diff(cdf) >= 0)
    step = h / 100
    deriv = (kde_cdf(s, GAUSSIAN, h, grid + step) - kde_cdf(s, GAUSSIAN, h, grid - step)) / (2 * step)
    f = kde_density(s, GAUSSIAN, h, grid)
    # central-difference truncation scales with the density's own size
    assert np.max(np.abs(deriv - f)) <= 1e-4 * max(1.0, f.max())


def test_cdf_limits():
    s = spec([0.3, 1.1, 2.0])
    assert kde_cdf(s, GAUSSIAN, 0.2, -10.0) <= 1e-3
    assert kde_cdf(s, GAUSSIAN, 0.2, 12.0) >= 1 - 1e-3


def test_smoothing_limit():
    s = spec([0.0, 1.0, 3.0, 7.0])
    h = 1e-4 * 7.0
    x = np.array([0.5, 2.0, 5.0, 8.0, -1.0])
    np.testing.assert_allclose(kde_cdf(s, GAUSSIAN, h, x), s.esd(x), atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=20), st.floats(-3, 3), st.floats(0.05, 1.0))
def test_translation_equivariance(values, x, h):
    a = kde_density(spec(values), GAUSSIAN, h, x)
    b = kde_density(spec(np.asarray(values) + 5.0), GAUSSIAN, h, x + 5.0)
    assert abs(a - b) <= 1e-12 * max(1.0, a)


def test_generic_kernel_cdf_by_quadrature():
    no_cdf = KernelSpec("gauss-quad", GAUSSIAN.evaluator, GAUSSIAN.derivative)
    s = spec([0.2, 0.9, 1.4])
    x = np.array([-2.0, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(kde_cdf(s, no_cdf, 0.3, x), kde_cdf(s, GAUSSIAN, 0.3, x), atol=1e-8)


def test_empirical_spectrum():
    s = EmpiricalSpectrum.from_matrix(np.diag([3.0, 1.0, 2.0]), 12)
    assert s.eigenvalues.tolist() == [1.0, 2.0, 3.0]
    assert s.p == 3 and s.ratio == 0.25
    assert s.esd(2.0) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        s.eigenvalues[0] = 5.0
