"""Shape primitives (signed distance, negative inside) and lattice fill.

Only the four primitives the benchmark cases need: circle, rectangle,
semicircle (flat side given by an outward normal), and a 3D box.  Lattice
fill places particles at cell centers so a unit box at dp = 1/N holds
exactly N**dim particles; every particle starts with volume dp**dim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Circle:
    center: tuple
    diameter: float

    def __post_init__(self):
        if self.diameter <= 0.0:
            raise ValueError("diameter must be positive")

    @property
    def dim(self):
        return len(self.center)

    @property
    def radius(self):
        return 0.5 * self.diameter

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class Rectangle:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("rectangle needs hi > lo componentwise")

    @property
    def dim(self):
        return len(self.lo)

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds()
        # distance to the box: standard exact SDF
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        q = np.abs(x - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside


class Box3(Rectangle):
    """3D axis-aligned box; same SDF as Rectangle, named for config clarity."""

    def __post_init__(self):
        super().__post_init__()
        if len(self.lo) != 3:
            raise ValueError("Box3 is three-dimensional")


@dataclass(frozen=True)
class SemiCircle:
    """Half disk: points of the disk on the negative side of `flat_normal`.

    The flat face passes through the center; `flat_normal` is the outward
    unit normal of that face (e.g. (0, 1) for a cavity whose lid is on top).
    """

    center: tuple
    radius: float
    flat_normal: tuple

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        n = np.asarray(self.flat_normal, dtype=float)
        if not np.isclose(np.linalg.norm(n), 1.0):
            raise ValueError("flat_normal must be a unit vector")

    @property
    def dim(self):
        return len(self.center)

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center, dtype=float)
        n = np.asarray(self.flat_normal, dtype=float)
        p = x - c
        a = p @ n                                    # height above flat face
        t = p - np.multiply.outer(a, n)              # in-face component
        tnorm = np.linalg.norm(t, axis=-1)
        d_disk = np.linalg.norm(p, axis=-1) - self.radius
        below = a <= 0.0
        # below the face the region is convex with faces {arc, plane}
        d_in = np.maximum(d_disk, a)
        # above the face the nearest point lies on the face segment / corner
        tc = np.minimum(tnorm, self.radius)
        d_out = np.sqrt(np.maximum(tnorm - tc, 0.0) ** 2 + a**2)
        return np.where(below, d_in, d_out)


SHAPES = (Circle, Rectangle, Box3, SemiCircle)


def signed_distance(shape, x):
    """Signed distance to the shape boundary; negative inside."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("query point must be finite")
    return shape.signed_distance(x)


def sdf_gradient(shape, x, eps: float = 1e-7):
    """Outward unit gradient of the signed distance (central differences)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for a in range(x.shape[1]):
        step = np.zeros(x.shape[1])
        step[a] = eps
        g[:, a] = (shape.signed_distance(x + step) - shape.signed_distance(x - step)) / (2 * eps)
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    return g / norm


def lattice_points(lo, hi, dp: float):
    """Cell centers of a dp-lattice anchored at `lo`, row-major order."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    counts = np.maximum(np.round((hi - lo) / dp).astype(int), 1)
    axes = [lo[a] + (np.arange(counts[a]) + 0.5) * dp for a in range(len(lo))]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def lattice_fill(shape, dp: float) -> np.ndarray:
    """Lattice particles strictly inside the shape (signed distance < 0)."""
    if dp <= 0.0:
        raise ValueError("dp must be positive")
    lo, hi = shape.bounds()
    pts = lattice_points(lo, hi, dp)
    inside = shape.signed_distance(pts) < 0.0
    out = pts[inside]
    if out.shape[0] == 0:
        raise ValueError("shape is smaller than one lattice cell at this dp")
    return out
