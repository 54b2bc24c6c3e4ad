import numpy as np
import pytest

from sph_trunc.correction import (
    correction_matrices, corrected_gradient, moment_matrices, pair_gradients,
)
from sph_trunc.geometry import lattice_points
from sph_trunc.kernels import WENDLAND, WENDLAND_TRUNCATED, kernel_spec
from sph_trunc.neighbors import build_neighbors


def lattice_setup(family, n=13, h_ratio=1.3):
    pos = lattice_points((0, 0), (float(n), float(n)), 1.0)
    vols = np.ones(len(pos))
    spec = kernel_spec(family, h_ratio, 2)
    nlist = build_neighbors(pos, spec.kappa * spec.h)
    center = int(np.argmin(np.linalg.norm(pos - 0.5 * n, axis=1)))
    return pos, vols, spec, nlist, center


class TestMomentMatrix:
    def test_interior_lattice_isotropic(self):
        _, vols, spec, nlist, c = lattice_setup(WENDLAND)
        m = moment_matrices(nlist, vols, spec)[c]
        assert m[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert m[0, 0] == pytest.approx(m[1, 1], rel=1e-12)
        # the discrete gradient moment on a lattice at h = 1.3 dp is close to
        # but measurably below -I; B absorbs exactly this deficit
        assert m[0, 0] == pytest.approx(-0.9739, abs=2e-4)

    def test_truncated_moment_smaller(self):
        _, vols, spec_t, nlist, c = lattice_setup(WENDLAND_TRUNCATED)
        m_t = moment_matrices(nlist, vols, spec_t)[c]
        assert m_t[0, 0] == pytest.approx(-0.9204, abs=2e-4)


class TestCorrectionMatrix:
    def test_interior_lattice_scaled_identity(self):
        # on a symmetric stencil B is a multiple of the identity; the scale
        # compensates the discrete-gradient deficit (1.027 standard, 1.086
        # truncated at h = 1.3 dp)
        for family, scale in ((WENDLAND, 1.0268), (WENDLAND_TRUNCATED, 1.0864)):
            _, vols, spec, nlist, c = lattice_setup(family)
            b = correction_matrices(nlist, vols, spec).B[c]
            assert b[0, 1] == pytest.approx(0.0, abs=1e-10)
            assert b[1, 0] == pytest.approx(0.0, abs=1e-10)
            assert b[0, 0] == pytest.approx(b[1, 1], rel=1e-12)
            assert b[0, 0] == pytest.approx(scale, abs=2e-3)

    def test_half_plane_inverse_identity(self):
        # stencil with all neighbors in a half plane: B != I but the moment
        # identity sum r (x) (B grad W) V = -I holds to round-off
        pos, vols, spec, nlist, c = lattice_setup(WENDLAND)
        keep = pos[:, 1] <= pos[c, 1]
        pos_h = pos[keep]
        vols_h = vols[keep]
        nlist_h = build_neighbors(pos_h, spec.kappa * spec.h)
        c_h = int(np.argmin(np.linalg.norm(pos_h - pos[c], axis=1)))
        res = correction_matrices(nlist_h, vols_h, spec)
        b = res.B[c_h]
        assert not np.allclose(b, np.eye(2), atol=0.05)
        m = moment_matrices(nlist_h, vols_h, spec)[c_h]
        assert m @ b.T == pytest.approx(-np.eye(2), abs=1e-10)

    def test_collinear_degrades_to_identity(self):
        # all neighbors on a line: singular moment matrix in 2D
        pos = np.column_stack([np.linspace(0, 2, 9), np.zeros(9)])
        vols = np.full(9, 0.25**2)
        spec = kernel_spec(WENDLAND, 0.33, 2)
        nlist = build_neighbors(pos, spec.kappa * spec.h)
        res = correction_matrices(nlist, vols, spec)
        assert res.n_regularized >= 1
        b = res.B[4]
        # second row (degenerate direction) falls back toward identity
        assert np.isfinite(b).all()
        assert b[1, 1] == pytest.approx(1.0, abs=1e-6)

    def test_regularization_counter_zero_in_interior(self):
        _, vols, spec, nlist, c = lattice_setup(WENDLAND, n=9)
        res = correction_matrices(nlist, vols, spec)
        assert res.det_neg_m[c] == pytest.approx(0.9485, abs=1e-3)


class TestCorrectedGradient:
    def test_identity_matrices_passthrough(self):
        g = np.array([0.3, -0.7])
        assert corrected_gradient(np.eye(2), np.eye(2), g) == pytest.approx(g)

    def test_mean_of_matrices(self):
        g = np.array([1.0, 2.0])
        out = corrected_gradient(2.0 * np.eye(2), np.zeros((2, 2)), g)
        assert out == pytest.approx(g)

    def test_random_oracle(self, rng):
        for _ in range(20):
            bi = rng.standard_normal((3, 3))
            bi = 0.5 * (bi + bi.T)
            bj = rng.standard_normal((3, 3))
            bj = 0.5 * (bj + bj.T)
            g = rng.standard_normal(3)
            expected = (0.5 * (bi + bj)) @ g
            assert corrected_gradient(bi, bj, g) == pytest.approx(expected)

    def test_pairwise_antisymmetry(self, rng):
        # grad'W_ij = -grad'W_ji given r_ij = -r_ji
        pos = rng.uniform(0, 1, size=(40, 2))
        vols = np.full(40, 1.0 / 40)
        spec = kernel_spec(WENDLAND, 0.2, 2)
        nlist = build_neighbors(pos, spec.kappa * spec.h)
        b = correction_matrices(nlist, vols, spec).B
        gw = pair_gradients(nlist, spec, b)
        lookup = {}
        for i in range(nlist.n):
            for k in range(nlist.starts[i], nlist.starts[i + 1]):
                lookup[(i, int(nlist.idx[k]))] = gw[k]
        for (i, j), g in lookup.items():
            assert lookup[(j, i)] == pytest.approx(-g, rel=1e-12, abs=1e-15)


class TestFirstOrderConsistency:
    def test_uniform_b_moment_identity(self):
        # where B_i = B_j for all pairs of the stencil, the corrected moment
        # sum is -I within 1e-8 (periodic lattice: all B identical)
        pos = lattice_points((0, 0), (8, 8), 1.0)
        vols = np.ones(len(pos))
        spec = kernel_spec(WENDLAND_TRUNCATED, 1.3, 2)
        nlist = build_neighbors(pos, spec.kappa * spec.h, box=(8.0, 8.0))
        b = correction_matrices(nlist, vols, spec).B
        gw = pair_gradients(nlist, spec, b)
        i = 27
        m = np.zeros((2, 2))
        for k in range(nlist.starts[i], nlist.starts[i + 1]):
            m += np.outer(nlist.r[k] * nlist.e[k], gw[k]) * vols[nlist.idx[k]]
        assert m == pytest.approx(-np.eye(2), abs=1e-8)
