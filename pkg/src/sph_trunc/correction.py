"""Kernel-gradient correction matrices restoring first-order consistency.

B_i = -(sum_j r_ij (x) grad W_ij V_j)^-1 with r_ij = x_i - x_j.  Pairwise
gradients are corrected with the symmetrized matrix (B_i + B_j) / 2, which
keeps grad'W_ij = -grad'W_ji and with it discrete momentum conservation.

Deficient stencils are handled by a singular-value-clamped pseudo-inverse
blended toward the identity when det(-M) collapses; the blend threshold is
chosen so that any stencil of full rank (half-plane neighborhoods included)
still gets the exact inverse and satisfies sum_j r_ij (x) (B_i grad W_ij)
V_j = -I to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from sph_trunc.kernels import KernelSpec, profile_deriv
from sph_trunc.neighbors import NeighborList

EPS_SV = 1e-4     # singular values clamped at EPS_SV * sigma_max
EPS_DET = 1e-6    # full inverse above this det(-M); blend to identity below


@dataclass
class CorrectionResult:
    B: np.ndarray            # (n, d, d)
    det_neg_m: np.ndarray    # (n,) det(-M) diagnostic
    n_regularized: int       # particles that hit the clamp or the blend


@njit(cache=True)
def _moment_matrices(starts, idx, r, e, vols, code, h, alpha, kappa):
    n = starts.shape[0] - 1
    d = e.shape[1]
    m = np.zeros((n, d, d))
    scale = alpha / h
    for i in range(n):
        for k in range(starts[i], starts[i + 1]):
            j = idx[k]
            q = r[k] / h
            if q > kappa:
                continue
            dw = scale * profile_deriv(code, q)
            w = dw * vols[j] * r[k]
            for a in range(d):
                for b in range(d):
                    m[i, a, b] += w * e[k, a] * e[k, b]
    return m


def moment_matrices(nlist: NeighborList, vols, spec: KernelSpec) -> np.ndarray:
    """M_i = sum_j r_ij (x) grad W_ij V_j; approaches -I on full stencils."""
    vols = np.asarray(vols, dtype=float)
    return _moment_matrices(
        nlist.starts, nlist.idx, nlist.r, nlist.e, vols,
        spec.code, spec.h, spec.alpha, spec.kappa,
    )


def correction_matrices(nlist: NeighborList, vols, spec: KernelSpec) -> CorrectionResult:
    """Per-particle correction matrices with regularized fallback."""
    m = moment_matrices(nlist, vols, spec)
    n, d, _ = m.shape

    u, s, vt = np.linalg.svd(m)
    smax = s[:, :1]
    clamped = np.any(s < EPS_SV * np.maximum(smax, 1e-300), axis=1)
    s_reg = np.maximum(s, EPS_SV * np.maximum(smax, 1e-300))
    minv = np.einsum("nba,nb,ncb->nac", vt, 1.0 / s_reg, u)

    det_neg = np.linalg.det(-m)
    theta = np.clip(det_neg / EPS_DET, 0.0, 1.0)
    eye = np.eye(d)
    b = theta[:, None, None] * (-minv) + (1.0 - theta)[:, None, None] * eye

    regularized = clamped | (theta < 1.0)
    return CorrectionResult(B=b, det_neg_m=det_neg, n_regularized=int(regularized.sum()))


def corrected_gradient(b_i, b_j, grad_w):
    """Symmetrized corrected pair gradient ((B_i + B_j)/2) grad W_ij."""
    return 0.5 * (np.asarray(b_i) + np.asarray(b_j)) @ np.asarray(grad_w)


@njit(cache=True)
def _pair_gradients(starts, idx, r, e, code, h, alpha, kappa, b, use_b):
    m = idx.shape[0]
    d = e.shape[1]
    gw = np.zeros((m, d))
    scale = alpha / h
    n = starts.shape[0] - 1
    for i in range(n):
        for k in range(starts[i], starts[i + 1]):
            j = idx[k]
            q = r[k] / h
            if q > kappa:
                continue
            dw = scale * profile_deriv(code, q)
            if use_b:
                for a in range(d):
                    acc = 0.0
                    for c in range(d):
                        acc += 0.5 * (b[i, a, c] + b[j, a, c]) * e[k, c]
                    gw[k, a] = dw * acc
            else:
                for a in range(d):
                    gw[k, a] = dw * e[k, a]
    return gw


def pair_gradients(nlist: NeighborList, spec: KernelSpec, b: np.ndarray | None = None) -> np.ndarray:
    """Per-pair (corrected) kernel gradients, precomputed once for static particles."""
    use_b = b is not None
    bb = b if use_b else np.zeros((1, nlist.e.shape[1], nlist.e.shape[1]))
    return _pair_gradients(
        nlist.starts, nlist.idx, nlist.r, nlist.e,
        spec.code, spec.h, spec.alpha, spec.kappa, bb, use_b,
    )
