"""Self-contained special functions against scipy and quadrature."""

import math

import numpy as np
import pytest
from scipy import integrate, special

from evtcvar.errors import DomainError, ParameterError
from evtcvar.numerics import norm_cdf, norm_ppf, upper_incomplete_gamma


class TestNormPpf:
    def test_accuracy_against_scipy(self):
        p = np.concatenate(
            [
                np.linspace(1e-12, 1e-4, 200),
                np.linspace(1e-4, 1 - 1e-4, 2000),
                1.0 - np.linspace(1e-12, 1e-4, 200),
            ]
        )
        ours = norm_ppf(p)
        ref = special.ndtri(p)
        rel = np.abs(ours - ref) / np.maximum(1e-300, np.abs(ref))
        assert rel.max() < 1e-9

    def test_tails(self):
        assert norm_ppf(0.0) == -math.inf
        assert norm_ppf(1.0) == math.inf
        assert norm_ppf(0.5) == 0.0

    def test_scalar_and_array_agree(self):
        p = np.array([0.01, 0.3, 0.975])
        arr = norm_ppf(p)
        for i, v in enumerate(p):
            assert norm_ppf(float(v)) == arr[i]


class TestNormCdf:
    def test_against_scipy(self):
        x = np.linspace(-8, 8, 400)
        np.testing.assert_allclose(norm_cdf(x), special.ndtr(x), atol=1e-15)

    def test_inverse_round_trip(self):
        for p in (1e-6, 0.025, 0.5, 0.9, 1 - 1e-6):
            assert norm_cdf(norm_ppf(p)) == pytest.approx(p, rel=1e-12)


class TestUpperIncompleteGamma:
    def test_against_scipy(self):
        for a in (0.5, 1.0, 1.57, 2.33, 5.0):
            for x in (0.0, 0.3, 1.0, 3.0, 6.9, 20.0):
                ours = upper_incomplete_gamma(a, x)
                ref = special.gammaincc(a, x) * math.gamma(a)
                assert ours == pytest.approx(ref, rel=1e-12)

    def test_against_quadrature(self):
        for a, x in [(1.8, 2.5), (2.33, 6.9), (1.0, 6.9)]:
            val, _ = integrate.quad(
                lambda t: t ** (a - 1) * math.exp(-t), x, np.inf, limit=200
            )
            assert upper_incomplete_gamma(a, x) == pytest.approx(val, rel=1e-10)

    def test_exponential_reduction(self):
        # Gamma(2, b) = (1 + b) e^-b
        b = -math.log(0.001)
        assert upper_incomplete_gamma(2.0, b) == pytest.approx(
            (1 + b) * math.exp(-b), rel=1e-13
        )

    def test_domain(self):
        with pytest.raises(ParameterError):
            upper_incomplete_gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            upper_incomplete_gamma(1.0, -0.5)
