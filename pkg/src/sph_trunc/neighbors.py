"""Cell-linked-list neighbor search over fixed particle sets.

The list is CSR-shaped: per-particle slices into flat arrays of neighbor
index, distance and unit vector e_ij = (x_i - x_j) / r_ij (pointing from j
toward i).  Pairs at exactly r = cutoff are included; the self pair is not.
Optionally a periodic box (lengths per axis, origin at 0) switches distances
to the minimum image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass
class NeighborList:
    starts: np.ndarray  # (n+1,) int64 CSR offsets
    idx: np.ndarray     # (m,) int32 neighbor indices
    r: np.ndarray       # (m,) float64 pair distances
    e: np.ndarray       # (m, d) float64 unit vectors from j toward i
    cutoff: float

    @property
    def n(self) -> int:
        return self.starts.shape[0] - 1

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.idx[self.starts[i]:self.starts[i + 1]]


@njit(cache=True)
def _cell_index(pos, inv_cell, ncell, periodic):
    n, d = pos.shape
    cells = np.empty((n, d), dtype=np.int64)
    for i in range(n):
        for a in range(d):
            c = int(np.floor(pos[i, a] * inv_cell[a]))
            if periodic:
                c = c % ncell[a]
            else:
                if c < 0:
                    c = 0
                elif c >= ncell[a]:
                    c = ncell[a] - 1
            cells[i, a] = c
    return cells


@njit(cache=True)
def _search(pos, wrapped, cells, ncell, strides, box, periodic, cutoff):
    n, d = pos.shape
    ntot = 1
    for a in range(d):
        ntot *= ncell[a]

    # counting sort of particles into cells
    flat = np.zeros(n, dtype=np.int64)
    for i in range(n):
        f = 0
        for a in range(d):
            f += cells[i, a] * strides[a]
        flat[i] = f
    head = np.full(ntot, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for i in range(n - 1, -1, -1):  # reversed so chains run in ascending index
        nxt[i] = head[flat[i]]
        head[flat[i]] = i

    cut2 = cutoff * cutoff
    counts = np.zeros(n, dtype=np.int64)

    noff = 3 ** d
    offs = np.empty((noff, d), dtype=np.int64)
    for k in range(noff):
        rem = k
        for a in range(d):
            offs[k, a] = rem % 3 - 1
            rem //= 3

    # pass 1: count
    for i in range(n):
        ci = 0
        for k in range(noff):
            ok = True
            f = 0
            for a in range(d):
                c = cells[i, a] + offs[k, a]
                if periodic:
                    c = c % ncell[a]
                else:
                    if c < 0 or c >= ncell[a]:
                        ok = False
                        break
                f += c * strides[a]
            if not ok:
                continue
            j = head[f]
            while j >= 0:
                if j != i:
                    r2 = 0.0
                    for a in range(d):
                        dx = wrapped[i, a] - wrapped[j, a]
                        if periodic:
                            if dx > 0.5 * box[a]:
                                dx -= box[a]
                            elif dx < -0.5 * box[a]:
                                dx += box[a]
                        r2 += dx * dx
                    if r2 <= cut2 and r2 > 0.0:
                        ci += 1
                j = nxt[j]
        counts[i] = ci

    starts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        starts[i + 1] = starts[i] + counts[i]
    m = starts[n]
    idx = np.empty(m, dtype=np.int32)
    rr = np.empty(m, dtype=np.float64)
    ee = np.empty((m, d), dtype=np.float64)

    # pass 2: fill
    for i in range(n):
        w = starts[i]
        for k in range(noff):
            ok = True
            f = 0
            for a in range(d):
                c = cells[i, a] + offs[k, a]
                if periodic:
                    c = c % ncell[a]
                else:
                    if c < 0 or c >= ncell[a]:
                        ok = False
                        break
                f += c * strides[a]
            if not ok:
                continue
            j = head[f]
            while j >= 0:
                if j != i:
                    r2 = 0.0
                    dxv = np.empty(d)
                    for a in range(d):
                        dx = wrapped[i, a] - wrapped[j, a]
                        if periodic:
                            if dx > 0.5 * box[a]:
                                dx -= box[a]
                            elif dx < -0.5 * box[a]:
                                dx += box[a]
                        dxv[a] = dx
                        r2 += dx * dx
                    if r2 <= cut2 and r2 > 0.0:
                        dist = np.sqrt(r2)
                        idx[w] = j
                        rr[w] = dist
                        for a in range(d):
                            ee[w, a] = dxv[a] / dist
                        w += 1
                j = nxt[j]
    return starts, idx, rr, ee


def build_neighbors(positions, cutoff: float, box=None) -> NeighborList:
    """All pairs with 0 < r_ij <= cutoff; minimum image when a box is given."""
    pos = np.ascontiguousarray(np.asarray(positions, dtype=float))
    if pos.ndim != 2:
        raise ValueError("positions must have shape (n, dim)")
    if not np.all(np.isfinite(pos)):
        raise ValueError("positions must be finite")
    if not (cutoff > 0.0 and np.isfinite(cutoff)):
        raise ValueError("cutoff must be positive and finite")
    n, d = pos.shape

    periodic = box is not None
    if periodic:
        box_arr = np.asarray(box, dtype=float)
        if box_arr.shape != (d,) or np.any(box_arr <= 0.0):
            raise ValueError("periodic box must give a positive length per axis")
        if np.any(box_arr < 2.0 * cutoff):
            raise ValueError("periodic box must be at least two cutoffs wide")
        wrapped = pos % box_arr
        lo = np.zeros(d)
        extent = box_arr
    else:
        box_arr = np.ones(d)
        lo = pos.min(axis=0)
        wrapped = pos - lo
        extent = np.maximum(wrapped.max(axis=0), cutoff)

    ncell = np.maximum((extent / cutoff).astype(np.int64), 1)
    if periodic:
        # cells must tile the box exactly and stay >= cutoff wide
        inv_cell = ncell / box_arr
    else:
        inv_cell = np.full(d, 1.0 / cutoff)
    strides = np.ones(d, dtype=np.int64)
    for a in range(1, d):
        strides[a] = strides[a - 1] * ncell[a - 1]

    cells = _cell_index(wrapped, inv_cell, ncell, periodic)
    starts, idx, rr, ee = _search(pos, wrapped, cells, ncell, strides, box_arr, periodic, cutoff)
    return NeighborList(starts=starts, idx=idx, r=rr, e=ee, cutoff=float(cutoff))


def interior_mask(positions, margin: float) -> np.ndarray:
    """Particles at least `margin` away from the axis-aligned bounding box."""
    pos = np.asarray(positions, dtype=float)
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    return np.all((pos >= lo + margin) & (pos <= hi - margin), axis=1)


def neighbor_count_ratio(positions, cutoff_tw: float, cutoff_sw: float) -> float:
    """Mean truncated-kernel neighbor count over mean standard count.

    Both means run over interior particles only (at least one standard
    cutoff away from the bounding box), where counts are unaffected by the
    edge of the particle set.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.size == 0:
        raise ValueError("empty particle set")
    if not (cutoff_tw > 0.0 and cutoff_sw > 0.0):
        raise ValueError("cutoffs must be positive")
    inner = interior_mask(pos, cutoff_sw)
    if not np.any(inner):
        raise ValueError("no interior particles at this cutoff")
    counts_tw = build_neighbors(pos, cutoff_tw).counts[inner]
    counts_sw = build_neighbors(pos, cutoff_sw).counts[inner]
    mean_sw = counts_sw.mean()
    if mean_sw == 0.0:
        raise ValueError("standard-cutoff neighborhoods are empty")
    return float(counts_tw.mean() / mean_sw)
