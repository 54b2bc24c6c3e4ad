import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sph_trunc.geometry import lattice_points
from sph_trunc.neighbors import build_neighbors, interior_mask, neighbor_count_ratio


def brute_force_pairs(pos, cutoff, box=None):
    """O(N^2) reference with optional minimum image."""
    n = pos.shape[0]
    pairs = set()
    for i in range(n):
        d = pos[i] - pos
        if box is not None:
            d -= np.round(d / box) * box
        r = np.linalg.norm(d, axis=1)
        for j in np.where((r <= cutoff) & (r > 0.0))[0]:
            pairs.add((i, int(j)))
    return pairs


def pairs_of(nlist):
    out = set()
    for i in range(nlist.n):
        for j in nlist.neighbors_of(i):
            out.add((i, int(j)))
    return out


def test_out_of_range_pair_empty():
    pos = np.array([[0.0, 0.0], [3.0, 0.0]])
    nl = build_neighbors(pos, 2.6)
    assert nl.counts.tolist() == [0, 0]


def test_lattice_counts_and_ratio():
    pos = lattice_points((0, 0), (9, 9), 1.0)
    nl_sw = build_neighbors(pos, 2.6)
    nl_tw = build_neighbors(pos, 2.08)
    center = np.argmin(np.linalg.norm(pos - 4.5, axis=1))
    assert nl_sw.counts[center] == 20
    assert nl_tw.counts[center] == 12
    assert neighbor_count_ratio(pos, 2.08, 2.6) == pytest.approx(0.60)


def test_lattice_ratio_3d():
    pos = lattice_points((0, 0, 0), (9, 9, 9), 1.0)
    # h = 1.15 dp: cutoffs 2.3 and 1.84
    ratio = neighbor_count_ratio(pos, 1.84, 2.3)
    assert abs(ratio - (1.6 / 2.0) ** 3) <= 0.12


def test_exact_cutoff_pair_included():
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    nl = build_neighbors(pos, 1.0)
    assert nl.counts.tolist() == [1, 1]


def test_oracle_equivalence_random(rng):
    pos = rng.uniform(0, 1, size=(500, 2))
    cutoff = 0.11
    nl = build_neighbors(pos, cutoff)
    assert pairs_of(nl) == brute_force_pairs(pos, cutoff)


def test_oracle_equivalence_periodic(rng):
    pos = rng.uniform(0, 1, size=(300, 2))
    cutoff = 0.13
    box = np.array([1.0, 1.0])
    nl = build_neighbors(pos, cutoff, box=box)
    assert pairs_of(nl) == brute_force_pairs(pos, cutoff, box=box)
    # minimum-image distances and unit vectors
    for i in (0, 17, 250):
        for k in range(nl.starts[i], nl.starts[i + 1]):
            j = nl.idx[k]
            d = pos[i] - pos[j]
            d -= np.round(d / box) * box
            assert nl.r[k] == pytest.approx(np.linalg.norm(d))
            assert nl.e[k] == pytest.approx(d / np.linalg.norm(d))


@given(st.integers(0, 2**31 - 1), st.integers(10, 120))
@settings(max_examples=12)
def test_oracle_equivalence_property(seed, n):
    rng = np.random.default_rng(seed)
    dim = rng.integers(1, 4)
    pos = rng.uniform(-1, 1, size=(n, dim))
    cutoff = float(rng.uniform(0.2, 0.8))
    nl = build_neighbors(pos, cutoff)
    assert pairs_of(nl) == brute_force_pairs(pos, cutoff)


def test_symmetry_and_self_exclusion(rng):
    pos = rng.uniform(0, 1, size=(200, 3))
    nl = build_neighbors(pos, 0.25)
    pairs = pairs_of(nl)
    for i, j in pairs:
        assert (j, i) in pairs
        assert i != j


def test_unit_vector_convention(rng):
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    nl = build_neighbors(pos, 1.5)
    k = nl.starts[0]
    assert nl.idx[k] == 1
    # e_ij = (x_i - x_j) / r points from j toward i
    assert nl.e[k] == pytest.approx([-1.0, 0.0])


def test_rebuild_determinism(rng):
    pos = rng.uniform(0, 1, size=(400, 2))
    a = build_neighbors(pos, 0.1)
    b = build_neighbors(pos, 0.1)
    assert np.array_equal(a.starts, b.starts)
    assert np.array_equal(a.idx, b.idx)


def test_input_validation():
    with pytest.raises(ValueError):
        build_neighbors(np.array([[np.nan, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        build_neighbors(np.zeros((3, 2)), -1.0)
    with pytest.raises(ValueError):
        neighbor_count_ratio(np.zeros((0, 2)), 1.0, 2.0)
    with pytest.raises(ValueError):
        neighbor_count_ratio(np.zeros((4, 2)), 1.0, 2.0)  # no interior


def test_identical_cutoffs_ratio_one():
    pos = lattice_points((0, 0), (9, 9), 1.0)
    assert neighbor_count_ratio(pos, 2.6, 2.6) == 1.0
