"""SPH function/derivative approximation and the kernel error analysis.

Holds the discrete unity sum, the conservative weak-form gradient (optionally
with kernel-gradient correction), relative L2 error, the convergence study of
the exponential-derivative benchmark on a circle, and the smoothing-order
check by fine quadrature.

Error norms for the circle studies run over particles whose full standard
support (2h) lies inside the circle, so boundary-deficient stencils do not
mask the interior convergence behavior; the same particle set is used for
both kernels at a given resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from sph_trunc import geometry, relaxation
from sph_trunc.correction import correction_matrices, pair_gradients
from sph_trunc.kernels import (
    LAGUERRE_GAUSS,
    WENDLAND,
    WENDLAND_TRUNCATED,
    KernelSpec,
    kernel_spec,
    kernel_value,
    profile,
)
from sph_trunc.neighbors import NeighborList, build_neighbors

LATTICE = "lattice"
RELAXED_WENDLAND = "relaxed-wendland"
RELAXED_LAGUERRE_GAUSS = "relaxed-laguerre-gauss"
DISTRIBUTIONS = (LATTICE, RELAXED_WENDLAND, RELAXED_LAGUERRE_GAUSS)


@njit(cache=True)
def _unity_sums(starts, idx, r, vols, code, h, alpha, kappa):
    n = starts.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        acc = alpha * profile(code, 0.0) * vols[i]
        for k in range(starts[i], starts[i + 1]):
            q = r[k] / h
            if q <= kappa:
                acc += alpha * profile(code, q) * vols[idx[k]]
        out[i] = acc
    return out


def sph_unity_sum(nlist: NeighborList, vols, spec: KernelSpec) -> np.ndarray:
    """Discrete normalization check W(0) V_i + sum_j W_ij V_j per particle."""
    vols = np.asarray(vols, dtype=float)
    return _unity_sums(nlist.starts, nlist.idx, nlist.r, vols, spec.code, spec.h, spec.alpha, spec.kappa)


@njit(cache=True)
def _weak_gradient(starts, idx, f, vols, gw):
    n = starts.shape[0] - 1
    d = gw.shape[1]
    out = np.zeros((n, d))
    for i in range(n):
        for k in range(starts[i], starts[i + 1]):
            j = idx[k]
            fbar_v = 0.5 * (f[i] + f[j]) * vols[j]
            for a in range(d):
                out[i, a] += 2.0 * fbar_v * gw[k, a]
    return out


def weak_gradient(nlist: NeighborList, field_values, vols, spec: KernelSpec, b=None) -> np.ndarray:
    """Conservative weak-form gradient 2 sum_j fbar_ij grad'W_ij V_j.

    With e_ij pointing from j toward i, grad W_ij = dW/dr e_ij is the
    gradient with respect to x_i and the positive sign reproduces grad f
    (checked against linear fields); `b` switches on the corrected pairwise
    gradient.
    """
    f = np.asarray(field_values, dtype=float)
    vols = np.asarray(vols, dtype=float)
    gw = pair_gradients(nlist, spec, b)
    return _weak_gradient(nlist.starts, nlist.idx, f, vols, gw)


def l2_error(numerical, analytical) -> float:
    """Relative l2 norm ||num - ana|| / ||ana||."""
    num = np.asarray(numerical, dtype=float).ravel()
    ana = np.asarray(analytical, dtype=float).ravel()
    if num.shape != ana.shape:
        raise ValueError("sample arrays must have equal length")
    denom = float(np.linalg.norm(ana))
    if denom == 0.0:
        raise ValueError("analytical reference has zero norm")
    return float(np.linalg.norm(num - ana) / denom)


# --- circle study ----------------------------------------------------------

DIAMETER = 2.0
H_RATIO = 1.3


def exp_function(x):
    """Test function exp(-x^2 / 0.1); depends on the x coordinate alone."""
    return np.exp(-(x**2) / 0.1)


def exp_function_ddx(x):
    return -(20.0 * x) * np.exp(-(x**2) / 0.1)


# Study relaxation protocols, recorded here for reproducibility.  The
# Wendland relaxation runs at the operative 1.3 dp with a step large enough
# to settle into a generic disordered packing.  The Laguerre-Gauss pair
# dynamics is unstable against particle pairing at 1.3 dp, so its relaxation
# kernel uses 1.1 dp and a smaller step, where the dynamics holds a stable
# near-lattice state (the best-residual state is returned either way).
RELAX_PROTOCOL = {
    RELAXED_WENDLAND: {"family": WENDLAND, "h_ratio": 1.3, "step_scale": 0.3},
    RELAXED_LAGUERRE_GAUSS: {"family": LAGUERRE_GAUSS, "h_ratio": 1.1, "step_scale": 0.1},
}


def circle_distribution(kind: str, dp: float, relax_overrides: dict | None = None):
    """Particle positions on the D=2 circle for one study distribution."""
    shape = geometry.Circle(center=(0.0, 0.0), diameter=DIAMETER)
    if kind == LATTICE:
        return geometry.lattice_fill(shape, dp)
    if kind not in RELAX_PROTOCOL:
        raise ValueError(f"unknown distribution {kind!r}")
    proto = dict(RELAX_PROTOCOL[kind])
    family = proto.pop("family")
    h_ratio = proto.pop("h_ratio")
    proto.update(relax_overrides or {})
    cfg = relaxation.RelaxationConfig(
        shape=shape, dp=dp,
        kernel=kernel_spec(family, h_ratio * dp, 2),
        **proto,
    )
    return relaxation.relax(cfg).positions


def study_interior_mask(positions, dp: float) -> np.ndarray:
    """Support ball (standard 2h) fully inside the circle."""
    r = np.linalg.norm(positions, axis=1)
    return r <= DIAMETER / 2.0 - 2.0 * H_RATIO * dp


def common_interior_mask(positions, dp_coarsest: float) -> np.ndarray:
    """Interior mask shared by every resolution of a convergence study.

    Convergence comparisons need the error measured over one region, so the
    support-inside restriction of the coarsest resolution is applied to all
    finer ones.
    """
    return study_interior_mask(positions, dp_coarsest)


def unity_error(positions, dp: float, family: str) -> float:
    """L2 error of the unity sum over interior particles (Table-1 quantity)."""
    spec = kernel_spec(family, H_RATIO * dp, 2)
    vols = np.full(positions.shape[0], dp**2)
    nlist = build_neighbors(positions, 2.0 * spec.h)
    sums = sph_unity_sum(nlist, vols, spec)
    mask = study_interior_mask(positions, dp)
    if not np.any(mask):
        raise ValueError("no interior particles at this resolution")
    return l2_error(sums[mask], np.ones(int(mask.sum())))


def gradient_error(positions, dp: float, family: str, correction: bool,
                   mask_dp: float | None = None) -> float:
    """L2 error of the weak-form x-derivative of the exponential function.

    `mask_dp` sets the resolution whose support margin defines the
    evaluation region (defaults to the run's own dp).
    """
    spec = kernel_spec(family, H_RATIO * dp, 2)
    vols = np.full(positions.shape[0], dp**2)
    nlist = build_neighbors(positions, spec.kappa * spec.h)
    b = correction_matrices(nlist, vols, spec).B if correction else None
    grad = weak_gradient(nlist, exp_function(positions[:, 0]), vols, spec, b)
    mask = study_interior_mask(positions, mask_dp if mask_dp is not None else dp)
    return l2_error(grad[mask, 0], exp_function_ddx(positions[mask, 0]))


@dataclass
class StudyRow:
    distribution: str
    family: str
    correction: bool
    dp: float
    error: float
    observed_order: float | None = None


def convergence_study(distribution: str, family: str, correction: bool,
                      resolutions=(DIAMETER / 10, DIAMETER / 20, DIAMETER / 40),
                      positions_by_dp: dict | None = None) -> list[StudyRow]:
    """Gradient L2 errors per resolution plus observed orders log2(E(dp)/E(dp/2)).

    `positions_by_dp` lets callers reuse one relaxed distribution across the
    kernel/correction variants so all four study lines see identical particles.
    """
    rows: list[StudyRow] = []
    dp_coarsest = max(resolutions)
    for dp in resolutions:
        pos = None if positions_by_dp is None else positions_by_dp.get(dp)
        if pos is None:
            pos = circle_distribution(distribution, dp)
        rows.append(StudyRow(distribution, family, correction, dp,
                             gradient_error(pos, dp, family, correction, mask_dp=dp_coarsest)))
    for a, b in zip(rows[:-1], rows[1:]):
        if np.isclose(a.dp / b.dp, 2.0):
            b.observed_order = math.log2(a.error / b.error)
    return rows


# --- smoothing order -------------------------------------------------------

def smoothing_error(family: str, h: float, x0: float = 0.15, points_per_h: int = 50) -> float:
    """|integral f W dx / integral W dx - f(x0)| by 1D midpoint quadrature.

    The unity renormalization isolates the smoothing (moment) error so the
    truncated kernel is measured against its own support mass.
    """
    spec = kernel_spec(family, h, 1)
    cut = spec.kappa * h
    dp = h / points_per_h
    n = int(round(2.0 * cut / dp))
    x = x0 - cut + (np.arange(n) + 0.5) * dp
    w = kernel_value(spec, np.abs(x - x0))
    fw = float(np.sum(exp_function(x) * w) * dp)
    wsum = float(np.sum(w) * dp)
    return abs(fw / wsum - exp_function(x0))


def smoothing_order_check(family: str, h_list=(0.2, 0.1, 0.05)) -> float:
    """Fitted exponent of the smoothing error against h (expected near 2)."""
    errs = [smoothing_error(family, h) for h in h_list]
    slope, _ = np.polyfit(np.log(np.asarray(h_list)), np.log(np.asarray(errs)), 1)
    return float(slope)
