"""Smoothing kernels: standard Wendland, truncated Wendland, Laguerre-Gauss.

All kernels are evaluated in the normalized argument q = r/h and carry a
dimensional factor alpha ~ h**-dim, so W(r) = alpha * P(q).  The truncated
Wendland kernel uses the standard Wendland polynomial and normalization but
cuts the support at q = 1.6 instead of 2.0; the mass left in the discarded
tail is reported by `tail_mass` rather than renormalized away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

WENDLAND = "wendland"
WENDLAND_TRUNCATED = "wendland-truncated"
LAGUERRE_GAUSS = "laguerre-gauss"

FAMILIES = (WENDLAND, WENDLAND_TRUNCATED, LAGUERRE_GAUSS)

# integer codes for the numba kernels (truncation is carried by kappa)
_CODE_WENDLAND = 0
_CODE_LAGUERRE_GAUSS = 1

_SPHERE_SURFACE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

# Published Laguerre-Gauss normalizations.  They fail the unity quadrature
# under the stated profile, so specs carry a numerically computed alpha and
# keep these only as a diagnostic (see `kernel_spec`).
_LG_PUBLISHED_ALPHA = {
    1: lambda h: 8.0 / (5.0 * math.sqrt(math.pi) * h),
    2: lambda h: 3.0 / (math.pi * h**2),
    3: lambda h: 8.0 / (math.pi**1.5 * h**3),
}


@njit(cache=True)
def profile(code, q):
    """Dimensionless kernel profile P(q); support clipping is the caller's job."""
    if code == _CODE_WENDLAND:
        t = 1.0 - 0.5 * q
        return t * t * t * t * (2.0 * q + 1.0)
    # Laguerre-Gauss
    q2 = q * q
    return (1.0 - 0.5 * q2 + q2 * q2 / 6.0) * math.exp(-q2)


@njit(cache=True)
def profile_deriv(code, q):
    """dP/dq of the kernel profile."""
    if code == _CODE_WENDLAND:
        t = 1.0 - 0.5 * q
        return -5.0 * q * t * t * t
    q2 = q * q
    return q * (-3.0 + (5.0 / 3.0) * q2 - q2 * q2 / 3.0) * math.exp(-q2)


@dataclass(frozen=True)
class KernelSpec:
    """One kernel family at a fixed smoothing length.

    alpha carries the h**-dim normalization; kappa*h is the cut-off radius.
    For the Laguerre-Gauss family `paper_alpha` records the published
    constant that fails the unity check, for comparison in reports.
    """

    family: str
    h: float
    dim: int
    alpha: float
    kappa: float
    paper_alpha: float | None = None

    @property
    def code(self) -> int:
        return _CODE_LAGUERRE_GAUSS if self.family == LAGUERRE_GAUSS else _CODE_WENDLAND


@lru_cache(maxsize=None)
def _profile_moment(code: int, kappa: float, power: int, n: int = 200_000) -> float:
    """Midpoint quadrature of P(q) * q**power over [0, kappa]."""
    q = (np.arange(n) + 0.5) * (kappa / n)
    if code == _CODE_WENDLAND:
        t = 1.0 - 0.5 * q
        p = t**4 * (2.0 * q + 1.0)
    else:
        p = (1.0 - 0.5 * q**2 + q**4 / 6.0) * np.exp(-(q**2))
    return float(np.sum(p * q**power) * (kappa / n))


def kernel_spec(family: str, h: float, dim: int) -> KernelSpec:
    """Build a KernelSpec, computing the normalization for the family.

    Wendland uses the closed-form constants; the truncated variant keeps the
    standard constant (no renormalization over [0, 1.6]).  Laguerre-Gauss is
    normalized numerically so the unity condition holds.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"smoothing length must be positive, got {h}")
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")

    if family == LAGUERRE_GAUSS:
        kappa = 2.0
        integral = _SPHERE_SURFACE[dim] * _profile_moment(_CODE_LAGUERRE_GAUSS, 2.0, dim - 1)
        alpha = 1.0 / (integral * h**dim)
        return KernelSpec(family, h, dim, alpha, kappa, _LG_PUBLISHED_ALPHA[dim](h))

    kappa = 1.6 if family == WENDLAND_TRUNCATED else 2.0
    if dim == 1:
        alpha = 3.0 / (4.0 * h)
    elif dim == 2:
        alpha = 7.0 / (4.0 * math.pi * h**2)
    else:
        alpha = 21.0 / (16.0 * math.pi * h**3)
    return KernelSpec(family, h, dim, alpha, kappa)


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("kernel argument r must be non-negative")
    return r


def kernel_value(spec: KernelSpec, r):
    """W(r) = alpha * P(r/h) inside the support, exactly 0 beyond kappa*h."""
    r = _check_radius(r)
    q = r / spec.h
    if q.ndim == 0:
        return spec.alpha * profile(spec.code, float(q)) if q <= spec.kappa else 0.0
    out = np.zeros_like(q)
    inside = q <= spec.kappa
    qi = q[inside]
    if spec.code == _CODE_WENDLAND:
        t = 1.0 - 0.5 * qi
        out[inside] = spec.alpha * t**4 * (2.0 * qi + 1.0)
    else:
        out[inside] = spec.alpha * (1.0 - 0.5 * qi**2 + qi**4 / 6.0) * np.exp(-(qi**2))
    return out


def kernel_grad_magnitude(spec: KernelSpec, r):
    """Radial derivative dW/dr; non-positive everywhere, 0 beyond the cut-off."""
    r = _check_radius(r)
    q = r / spec.h
    scale = spec.alpha / spec.h
    if q.ndim == 0:
        return scale * profile_deriv(spec.code, float(q)) if q <= spec.kappa else 0.0
    out = np.zeros_like(q)
    inside = q <= spec.kappa
    qi = q[inside]
    if spec.code == _CODE_WENDLAND:
        t = 1.0 - 0.5 * qi
        out[inside] = scale * (-5.0 * qi * t**3)
    else:
        out[inside] = scale * qi * (-3.0 + (5.0 / 3.0) * qi**2 - qi**4 / 3.0) * np.exp(-(qi**2))
    return out


def cutoff_radius(spec: KernelSpec) -> float:
    return spec.kappa * spec.h


def unity_integral(spec: KernelSpec, n: int = 10_000) -> float:
    """Quadrature of W over its own support ball (radial midpoint rule).

    Equals 1 for the normalized families; for the truncated Wendland kernel
    it equals 1 - tail_mass by construction.
    """
    return (
        _SPHERE_SURFACE[spec.dim]
        * spec.alpha
        * spec.h**spec.dim
        * _profile_moment(spec.code, spec.kappa, spec.dim - 1, n)
    )


def tail_mass(dim: int, n: int = 200_000) -> float:
    """Wendland kernel mass in the truncated band q in (1.6, 2]; diagnostic only."""
    spec = kernel_spec(WENDLAND, 1.0, dim)
    full = _profile_moment(_CODE_WENDLAND, 2.0, dim - 1, n)
    kept = _profile_moment(_CODE_WENDLAND, 1.6, dim - 1, n)
    return _SPHERE_SURFACE[dim] * spec.alpha * (full - kept)
