import math

import numpy as np
import pytest

from sph_trunc.kernels import (
    FAMILIES, LAGUERRE_GAUSS, WENDLAND, WENDLAND_TRUNCATED,
    cutoff_radius, kernel_grad_magnitude, kernel_spec, kernel_value,
    tail_mass, unity_integral,
)


def radial_unity_oracle(spec, n=10_000):
    """Independent midpoint quadrature of W over the support ball."""
    surface = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[spec.dim]
    cut = cutoff_radius(spec)
    r = (np.arange(n) + 0.5) * (cut / n)
    w = kernel_value(spec, r)
    return float(np.sum(w * r ** (spec.dim - 1)) * (cut / n) * surface)


class TestKernelSpec:
    def test_kappa_per_family(self):
        assert kernel_spec(WENDLAND, 1.0, 2).kappa == 2.0
        assert kernel_spec(WENDLAND_TRUNCATED, 1.0, 2).kappa == 1.6
        assert kernel_spec(LAGUERRE_GAUSS, 1.0, 2).kappa == 2.0

    def test_wendland_alpha_2d(self):
        # alpha_2 = 7 / (4 pi h^2)
        spec = kernel_spec(WENDLAND, 1.0, 2)
        assert spec.alpha == pytest.approx(7.0 / (4.0 * math.pi))

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_unity(self, family, dim):
        spec = kernel_spec(family, 1.3, dim)
        unity = radial_unity_oracle(spec)
        if family == WENDLAND_TRUNCATED:
            # the truncated kernel keeps the standard normalization; its
            # support integral is 1 minus the documented tail mass
            assert unity == pytest.approx(1.0 - tail_mass(dim), abs=1e-5)
            assert 0.0 < tail_mass(dim) < 0.01
        else:
            assert unity == pytest.approx(1.0, abs=1e-5)
        assert unity_integral(spec) == pytest.approx(unity, abs=1e-6)

    def test_laguerre_gauss_published_constant_fails_unity(self):
        # the published constants are recorded but do not satisfy unity
        spec = kernel_spec(LAGUERRE_GAUSS, 1.0, 2)
        assert spec.paper_alpha == pytest.approx(3.0 / math.pi)
        ratio = spec.paper_alpha / spec.alpha
        assert abs(ratio - 1.0) > 0.5

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            kernel_spec("gauss", 1.0, 2)
        with pytest.raises(ValueError):
            kernel_spec(WENDLAND, -1.0, 2)
        with pytest.raises(ValueError):
            kernel_spec(WENDLAND, 1.0, 4)


class TestKernelValue:
    def test_center_value_2d(self):
        spec = kernel_spec(WENDLAND, 1.0, 2)
        assert kernel_value(spec, 0.0) == pytest.approx(7.0 / (4.0 * math.pi), rel=1e-12)

    def test_compact_support(self):
        sw = kernel_spec(WENDLAND, 1.0, 2)
        tw = kernel_spec(WENDLAND_TRUNCATED, 1.0, 2)
        assert kernel_value(sw, 2.0) == 0.0
        assert kernel_value(sw, 2.0 + 1e-12) == 0.0
        assert kernel_value(tw, 1.7) == 0.0

    def test_truncated_value_at_cut(self):
        # direct polynomial evaluation at q = 1.6: alpha * 0.2^4 * 4.2
        spec = kernel_spec(WENDLAND, 1.0, 2)
        expected = spec.alpha * 0.2**4 * 4.2
        assert expected == pytest.approx(3.743e-3, abs=2e-6)
        assert kernel_value(spec, 1.6) == pytest.approx(expected, rel=1e-12)
        tw = kernel_spec(WENDLAND_TRUNCATED, 1.0, 2)
        assert kernel_value(tw, 1.6) == pytest.approx(expected, rel=1e-12)

    def test_negative_radius_rejected(self):
        spec = kernel_spec(WENDLAND, 1.0, 2)
        with pytest.raises(ValueError):
            kernel_value(spec, -0.1)
        with pytest.raises(ValueError):
            kernel_grad_magnitude(spec, -0.1)

    def test_truncation_consistency(self):
        sw = kernel_spec(WENDLAND, 1.3, 2)
        tw = kernel_spec(WENDLAND_TRUNCATED, 1.3, 2)
        r = np.linspace(0.0, 1.6 * 1.3, 400)
        assert np.allclose(kernel_value(sw, r), kernel_value(tw, r), rtol=0, atol=0)
        assert np.allclose(kernel_grad_magnitude(sw, r), kernel_grad_magnitude(tw, r))

    def test_delta_property(self):
        # W(r, h) -> 0 for fixed r > 0 as h -> 0
        r = 0.05
        vals = [kernel_value(kernel_spec(WENDLAND, h, 2), r) for h in (0.1, 0.01, 0.001)]
        assert vals[0] > 0.0
        assert vals[1] == 0.0 and vals[2] == 0.0


class TestKernelGradient:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_matches_finite_difference(self, family):
        spec = kernel_spec(family, 1.0, 2)
        for r in (0.2, 0.5, 1.0, 1.3, 1.55):
            fd = (kernel_value(spec, r + 1e-6) - kernel_value(spec, r - 1e-6)) / 2e-6
            assert kernel_grad_magnitude(spec, r) == pytest.approx(fd, abs=1e-8)

    def test_wendland_closed_form(self):
        # dW/dq = -5 q alpha (1 - q/2)^3 at q = 1
        spec = kernel_spec(WENDLAND, 1.0, 2)
        assert kernel_grad_magnitude(spec, 1.0) == pytest.approx(-0.625 * spec.alpha, rel=1e-12)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_nonpositive_and_zero_outside(self, family):
        spec = kernel_spec(family, 1.0, 2)
        r = np.linspace(0.0, 2.5, 500)
        g = kernel_grad_magnitude(spec, r)
        assert np.all(g <= 0.0)
        assert np.all(g[r > spec.kappa] == 0.0)

    def test_zero_at_origin(self):
        for family in FAMILIES:
            assert kernel_grad_magnitude(kernel_spec(family, 1.0, 2), 0.0) == 0.0


class TestCutoff:
    def test_values(self):
        assert cutoff_radius(kernel_spec(WENDLAND, 1.3, 2)) == pytest.approx(2.6)
        assert cutoff_radius(kernel_spec(WENDLAND_TRUNCATED, 1.3, 2)) == pytest.approx(2.08)
        assert cutoff_radius(kernel_spec(LAGUERRE_GAUSS, 1.0, 2)) == pytest.approx(2.0)
