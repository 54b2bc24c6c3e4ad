"""Total Lagrangian SPH for nearly incompressible elastic solids.

All kernel sums run over the fixed reference configuration with corrected
reference gradients; stresses follow the St. Venant-Kirchhoff law (PK2 from
the Green-Lagrange strain).  Velocities and the deformation gradient are
advanced with a kick-drift-kick scheme; clamped particles hold position and
velocity but keep evolving their deformation gradient so the constraint
transmits stress.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from sph_trunc.correction import correction_matrices, pair_gradients
from sph_trunc.kernels import KernelSpec
from sph_trunc.neighbors import build_neighbors


class SolidStateError(RuntimeError):
    """Raised when the deformation gradient loses invertibility."""


def lame_params(E: float, nu: float) -> tuple[float, float]:
    """First Lame parameter and shear modulus from Young's modulus and Poisson ratio."""
    if not E > 0.0:
        raise ValueError("Young's modulus must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson ratio must lie in (-1, 0.5); 0.5 makes lambda singular")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    g = E / (2.0 * (1.0 + nu))
    return lam, g


@dataclass(frozen=True)
class Material:
    rho0: float
    E: float
    nu: float

    @property
    def lame(self) -> tuple[float, float]:
        return lame_params(self.E, self.nu)

    @property
    def sound_speed(self) -> float:
        lam, g = self.lame
        return float(np.sqrt((lam + 2.0 * g) / self.rho0))


def pk2_stress(F, material: Material):
    """Second Piola-Kirchhoff stress lam tr(E) I + 2 G E, E = (F^T F - I)/2."""
    F = np.asarray(F, dtype=float)
    lam, g = material.lame
    single = F.ndim == 2
    Fb = F[None] if single else F
    d = Fb.shape[-1]
    eye = np.eye(d)
    strain = 0.5 * (np.einsum("nba,nbc->nac", Fb, Fb) - eye)
    tr = np.trace(strain, axis1=1, axis2=2)
    s = lam * tr[:, None, None] * eye + 2.0 * g * strain
    return s[0] if single else s


def von_mises(F, S):
    """Von Mises stress of the Cauchy tensor J^-1 F S F^T."""
    F = np.asarray(F, dtype=float)
    S = np.asarray(S, dtype=float)
    single = F.ndim == 2
    Fb = F[None] if single else F
    Sb = S[None] if single else S
    J = np.linalg.det(Fb)
    sigma = np.einsum("nab,nbc,ndc->nad", Fb, Sb, Fb) / J[:, None, None]
    d = sigma.shape[-1]
    if d == 2:
        # pad with sigma_zz = 0 (plane-stress reading for 2D diagnostics)
        padded = np.zeros((sigma.shape[0], 3, 3))
        padded[:, :2, :2] = sigma
        sigma = padded
    dev = sigma - (np.trace(sigma, axis1=1, axis2=2) / 3.0)[:, None, None] * np.eye(3)
    vm = np.sqrt(1.5 * np.einsum("nab,nab->n", dev, dev))
    return float(vm[0]) if single else vm


@njit(cache=True)
def _accelerations(n, starts, idx, g0, q, rho0, acc):
    """acc_i = sum_j (Q_i + Q_j) g0_ij / rho0 with Q = P B^T, g0 = grad0 W V0."""
    d = g0.shape[1]
    for i in range(n):
        for a in range(d):
            acc[i, a] = 0.0
        for k in range(starts[i], starts[i + 1]):
            j = idx[k]
            for a in range(d):
                t = 0.0
                for b in range(d):
                    t += (q[i, a, b] + q[j, a, b]) * g0[k, b]
                acc[i, a] += t / rho0
    return


@njit(cache=True)
def _deformation_rates(n, starts, idx, g0, v, b0, dF):
    """dF_i = [sum_j V0 (v_j - v_i) (x) grad0 W_ij] B0_i."""
    d = g0.shape[1]
    for i in range(n):
        m = np.zeros((d, d))
        for k in range(starts[i], starts[i + 1]):
            j = idx[k]
            for a in range(d):
                dv = v[j, a] - v[i, a]
                for b in range(d):
                    m[a, b] += dv * g0[k, b]
        for a in range(d):
            for b in range(d):
                t = 0.0
                for c in range(d):
                    t += m[a, c] * b0[i, c, b]
                dF[i, a, b] = t
    return


class SolidSystem:
    """Reference-configuration state and kernels for one solid body."""

    def __init__(self, X0, material: Material, kernel: KernelSpec, dp: float,
                 *, fixed=None, correction: bool = True, cfl: float = 0.6):
        self.X0 = np.ascontiguousarray(X0, dtype=float)
        self.n, self.dim = self.X0.shape
        self.material = material
        self.kernel = kernel
        self.cfl = float(cfl)
        self.dp = float(dp)
        self.vol0 = np.full(self.n, self.dp**self.dim)
        self.rho0 = material.rho0

        self.nlist0 = build_neighbors(self.X0, kernel.kappa * kernel.h)
        corr = correction_matrices(self.nlist0, self.vol0, kernel)
        self.B0 = corr.B if correction else np.tile(np.eye(self.dim), (self.n, 1, 1))
        self.n_regularized = corr.n_regularized if correction else 0
        # reference gradients are uncorrected; correction enters through B0
        gw = pair_gradients(self.nlist0, kernel, None)
        self.g0 = gw * self.vol0[self.nlist0.idx][:, None]

        self.x = self.X0.copy()
        self.v = np.zeros_like(self.X0)
        self.F = np.tile(np.eye(self.dim), (self.n, 1, 1))
        self.fixed = np.zeros(self.n, dtype=bool) if fixed is None else np.asarray(fixed, bool)
        self.t = 0.0
        self.steps = 0
        self._acc = np.zeros_like(self.X0)
        self._dF = np.zeros_like(self.F)
        self._acc_valid = False

    # -- force evaluation -------------------------------------------------------

    def first_pk(self):
        s = pk2_stress(self.F, self.material)
        return np.einsum("nab,nbc->nac", self.F, s), s

    def accelerations(self):
        """Corrected total Lagrangian momentum rate divided by rho0."""
        P, _ = self.first_pk()
        q = np.einsum("nab,ncb->nac", P, self.B0)  # P B0^T
        _accelerations(self.n, self.nlist0.starts, self.nlist0.idx, self.g0,
                       q, self.rho0, self._acc)
        self._acc[self.fixed] = 0.0
        return self._acc

    def deformation_rates(self):
        _deformation_rates(self.n, self.nlist0.starts, self.nlist0.idx, self.g0,
                           self.v, self.B0, self._dF)
        return self._dF

    def stable_dt(self):
        vmax = float(np.linalg.norm(self.v, axis=1).max()) if self.n else 0.0
        return self.cfl * self.kernel.h / (self.material.sound_speed + vmax)

    def step(self, dt: float | None = None):
        """Kick-drift-kick update of (v, x, F); clamped particles stay put."""
        if dt is None:
            dt = self.stable_dt()
        if not self._acc_valid:
            self.accelerations()
            self._acc_valid = True
        acc0 = self._acc

        self.v += 0.5 * dt * acc0
        self.v[self.fixed] = 0.0
        self.x += dt * self.v
        dF = self.deformation_rates()
        self.F += dt * dF
        J = np.linalg.det(self.F)
        if not np.all(J > 0.0):
            bad = np.where(J <= 0.0)[0]
            raise SolidStateError(f"deformation gradient inverted at particles {bad[:8]}")
        self.accelerations()
        self.v += 0.5 * dt * self._acc
        self.v[self.fixed] = 0.0
        self._acc_valid = True
        self.t += dt
        self.steps += 1
        return dt

    # -- diagnostics -------------------------------------------------------------

    def von_mises_field(self):
        _, s = self.first_pk()
        return von_mises(self.F, s)

    def energies(self):
        """Kinetic and strain energy (0.5 integral S:E dV0)."""
        _, s = self.first_pk()
        eye = np.eye(self.dim)
        strain = 0.5 * (np.einsum("nba,nbc->nac", self.F, self.F) - eye)
        e_strain = 0.5 * float(np.sum(self.vol0 * np.einsum("nab,nab->n", s, strain)))
        e_kin = 0.5 * float(np.sum(self.rho0 * self.vol0 * np.sum(self.v**2, axis=1)))
        return e_kin, e_strain

    def momentum(self):
        return (self.rho0 * self.vol0[:, None] * self.v).sum(axis=0)


# --- case initial velocities ---------------------------------------------------

TWIST = "twist"
BEND = "bend"


def init_case_velocity(kind: str, X0, *, length: float, omega0: float = 105.0,
                       v0=(10.0 * np.sqrt(3.0) / 2.0, 5.0, 0.0), axis_center=(0.0, 0.0)):
    """Initial velocity fields of the column cases (column along +y, base at y=0).

    Twist: sinusoidal rotation about the y axis, angular speed
    omega0 sin(pi y / (2 L)); Bend: uniform translational velocity.
    """
    X0 = np.asarray(X0, dtype=float)
    if kind == BEND:
        return np.tile(np.asarray(v0, dtype=float)[:X0.shape[1]], (X0.shape[0], 1))
    if kind != TWIST:
        raise ValueError(f"unknown case kind {kind!r}")
    if X0.shape[1] != 3:
        raise ValueError("twist initial condition is three-dimensional")
    w = omega0 * np.sin(0.5 * np.pi * X0[:, 1] / length)
    dx = X0[:, 0] - axis_center[0]
    dz = X0[:, 2] - axis_center[1]
    # omega y-hat cross r: (w x r) with w = (0, w, 0)
    v = np.zeros_like(X0)
    v[:, 0] = w * dz
    v[:, 2] = -w * dx
    return v
