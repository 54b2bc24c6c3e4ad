import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sph_trunc.geometry import (
    Box3, Circle, Rectangle, SemiCircle, lattice_fill, sdf_gradient, signed_distance,
)


class TestSignedDistance:
    def test_circle_center(self):
        c = Circle(center=(0.0, 0.0), diameter=2.0)
        assert signed_distance(c, (0.0, 0.0)) == pytest.approx(-1.0)

    def test_rectangle_outside(self):
        r = Rectangle(lo=(0.0, 0.0), hi=(1.0, 1.0))
        assert signed_distance(r, (0.5, 2.0)) == pytest.approx(1.0)

    def test_semicircle_flat_edge(self):
        s = SemiCircle(center=(0.0, 0.0), radius=0.5, flat_normal=(0.0, 1.0))
        assert signed_distance(s, (0.0, 0.0)) == pytest.approx(0.0, abs=1e-14)
        assert signed_distance(s, (0.0, -0.5)) == pytest.approx(0.0, abs=1e-14)
        assert signed_distance(s, (0.0, -0.25)) < 0.0
        assert signed_distance(s, (0.0, 0.25)) == pytest.approx(0.25)
        # beyond the corner
        assert signed_distance(s, (0.6, 0.1)) == pytest.approx(np.hypot(0.1, 0.1))

    def test_box3(self):
        b = Box3(lo=(0, 0, 0), hi=(1, 1, 1))
        assert signed_distance(b, (0.5, 0.5, 0.5)) == pytest.approx(-0.5)
        assert signed_distance(b, (2.0, 0.5, 0.5)) == pytest.approx(1.0)

    @given(st.floats(-2, 2), st.floats(-2, 2))
    @settings(max_examples=30)
    def test_circle_sdf_is_distance(self, x, y):
        c = Circle(center=(0.25, -0.5), diameter=1.5)
        d = signed_distance(c, (x, y))
        assert d == pytest.approx(np.hypot(x - 0.25, y + 0.5) - 0.75, abs=1e-12)

    def test_gradient_is_unit_outward(self):
        c = Circle(center=(0.0, 0.0), diameter=2.0)
        g = sdf_gradient(c, [(0.5, 0.0), (0.0, -0.3)])
        assert g[0] == pytest.approx([1.0, 0.0], abs=1e-6)
        assert g[1] == pytest.approx([0.0, -1.0], abs=1e-6)

    def test_invalid_shapes(self):
        with pytest.raises(ValueError):
            Circle(center=(0, 0), diameter=-1.0)
        with pytest.raises(ValueError):
            Rectangle(lo=(0, 0), hi=(0, 1))
        with pytest.raises(ValueError):
            SemiCircle(center=(0, 0), radius=0.5, flat_normal=(0, 2.0))


class TestLatticeFill:
    def test_unit_square_counts(self):
        pts = lattice_fill(Rectangle(lo=(0, 0), hi=(1, 1)), 0.25)
        assert pts.shape == (16, 2)
        assert sorted(set(np.round(pts[:, 0], 12))) == [0.125, 0.375, 0.625, 0.875]

    def test_unit_cube(self):
        pts = lattice_fill(Box3(lo=(0, 0, 0), hi=(1, 1, 1)), 0.5)
        assert pts.shape == (8, 3)

    def test_circle_count_matches_membership_oracle(self):
        shape = Circle(center=(0.0, 0.0), diameter=2.0)
        dp = 0.2
        pts = lattice_fill(shape, dp)
        # brute-force membership over the bounding lattice
        axes = -1.0 + (np.arange(10) + 0.5) * dp
        xx, yy = np.meshgrid(axes, axes)
        inside = np.hypot(xx, yy) < 1.0
        assert pts.shape[0] == int(inside.sum())

    def test_points_strictly_inside(self):
        shape = Circle(center=(0.3, -0.2), diameter=1.4)
        pts = lattice_fill(shape, 0.07)
        assert np.all(shape.signed_distance(pts) < 0.0)

    def test_count_scaling(self):
        shape = Circle(center=(0.0, 0.0), diameter=2.0)
        n1 = lattice_fill(shape, 0.1).shape[0]
        n2 = lattice_fill(shape, 0.025).shape[0]
        assert n2 / n1 == pytest.approx(16.0, rel=0.05)

    def test_too_small_shape(self):
        with pytest.raises(ValueError):
            lattice_fill(Circle(center=(0, 0), diameter=0.1), 0.5)

    def test_row_major_determinism(self):
        shape = Rectangle(lo=(0, 0), hi=(1, 1))
        a = lattice_fill(shape, 0.2)
        b = lattice_fill(shape, 0.2)
        assert np.array_equal(a, b)
        assert a[0] == pytest.approx([0.1, 0.1])
        assert a[1] == pytest.approx([0.1, 0.3])  # row-major: x outer, y inner
