"""Benchmark harness: timed runs, paired standard/truncated comparisons,
profile metrics against reference data, drag/lift reduction, CSV reports.

Timing protocol: the wall clock covers the solver loop only; setup
(relaxation, neighbor search, correction matrices, JIT warm-up) and output
writing are excluded.  Paired runs execute the standard-kernel leg first,
then the truncated leg, in the same process with the same worker count.
"""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from sph_trunc.approx import l2_error
from sph_trunc.cases import CaseConfig, EulerianCase, SolidCase, build_case
from sph_trunc.correction import pair_gradients
from sph_trunc.eulerian import ConfigError, eos_eval
from sph_trunc.kernels import WENDLAND, WENDLAND_TRUNCATED, KernelSpec, kernel_spec, kernel_value
from sph_trunc.neighbors import build_neighbors

FLOAT_FMT = "%.17g"


@dataclass
class RunReport:
    name: str
    kernel_family: str
    wall_clock_s: float
    steps: int
    t_end: float
    neighbor_stats: dict
    conservation: dict
    metrics: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "kernel_family": self.kernel_family,
            "wall_clock_s": self.wall_clock_s,
            "steps": self.steps,
            "t_end": self.t_end,
            "neighbor_stats": self.neighbor_stats,
            "conservation": self.conservation,
            "metrics": self.metrics,
            "diagnostics": self.diagnostics,
        }


def alpha_ratio(t_tw: float, t_sw: float) -> float:
    """Wall-clock ratio truncated / standard; the headline efficiency metric."""
    if t_sw <= 0.0 or t_tw <= 0.0:
        raise ValueError("wall-clock times must be positive")
    return t_tw / t_sw


def write_csv(path, header, array):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.atleast_2d(array), delimiter=",", fmt=FLOAT_FMT)


def _snapshot_header(case):
    if isinstance(case, SolidCase):
        return ("X0x", "X0y", "X0z", "x", "y", "z", "vx", "vy", "vz", "von_mises")
    d = case.solver.dim
    axes = ("x", "y", "z")[:d]
    vels = ("u", "v", "w")[:d]
    return axes + case.labels[:1] + vels + case.labels[1 + d:]


def run_case(cfg: CaseConfig, out_dir=None, workers: int = 1, seed: int | None = None):
    """Build, warm up, run to t_end with snapshots, and report."""
    import numba

    numba.set_num_threads(max(1, workers))
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg.seed = seed

    case = build_case(cfg)
    out = Path(out_dir) if out_dir is not None else None

    # JIT warm-up so compilation never lands inside the timed loop
    if isinstance(case, EulerianCase):
        case.solver.rhs()
        nstats = _neighbor_stats(case.solver.nlist, case.solver.n_int)
        diag = {"n_regularized_correction": case.solver.n_regularized,
                "workers": workers, "seed": cfg.seed}
    else:
        case.system.accelerations()
        case.system.deformation_rates()
        nstats = _neighbor_stats(case.system.nlist0, case.system.n)
        diag = {"n_regularized_correction": case.system.n_regularized,
                "workers": workers, "seed": cfg.seed}

    totals0 = case.totals()
    next_out = cfg.output_every if cfg.output_every > 0 else math.inf
    snap_id = 0
    if out is not None:
        _write_snapshot(case, out, snap_id, 0.0)
        snap_id += 1

    dts = []
    t0 = time.perf_counter()
    while case.t < cfg.t_end - 1e-12:
        dt = min(case.stable_dt(), cfg.t_end - case.t)
        case.advance(dt)
        dts.append(dt)
        if isinstance(case, SolidCase) and case.t >= next_out - 1e-12:
            case.record_outputs()
        if case.t >= next_out - 1e-12:
            if out is not None:
                _write_snapshot(case, out, snap_id, case.t)
                snap_id += 1
            next_out += cfg.output_every
    wall = time.perf_counter() - t0

    totals1 = case.totals()
    conservation = _conservation(totals0, totals1)
    metrics = _case_metrics(case)
    if isinstance(case, SolidCase):
        case.record_outputs()
        metrics["von_mises_max"] = case.vm_max

    report = RunReport(
        name=cfg.name,
        kernel_family=cfg.kernel_family,
        wall_clock_s=wall,
        steps=case.solver.steps if isinstance(case, EulerianCase) else case.system.steps,
        t_end=case.t,
        neighbor_stats=nstats,
        conservation=conservation,
        metrics=metrics,
        diagnostics={**diag, "dt_min": min(dts) if dts else 0.0,
                     "dt_max": max(dts) if dts else 0.0},
    )
    if out is not None:
        _write_snapshot(case, out, None, case.t, final=True)
        if isinstance(case, SolidCase):
            write_csv(out / f"{cfg.name}-tip.csv", ("t", "x", "y", "z"),
                      np.asarray(case.tip_track))
        with open(out / f"{cfg.name}-report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, default=_json_default)
    return report, case


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _neighbor_stats(nlist, n_lead):
    counts = nlist.counts[:n_lead]
    return {"mean": float(counts.mean()), "min": int(counts.min()),
            "max": int(counts.max()), "pairs": int(counts.sum())}


def _conservation(t0, t1, mom_scale=None):
    """Relative drifts; momentum normalized by total mass (unit-speed scale),
    since the net momentum of symmetric flows is legitimately zero."""
    mass0, mom0, e0 = t0
    mass1, mom1, e1 = t1
    if mom_scale is None:
        mom_scale = max(float(np.abs(mom0).max()), abs(mass0), 1e-30)
    out = {
        "mass_rel_drift": abs(mass1 - mass0) / max(abs(mass0), 1e-30),
        "momentum_rel_drift": float(np.abs(np.asarray(mom1) - np.asarray(mom0)).max()) / mom_scale,
    }
    if e0 is not None:
        out["energy_rel_drift"] = abs(e1 - e0) / max(abs(e0), 1e-30)
    return out


def _write_snapshot(case, out: Path, snap_id, t, final=False):
    tag = "final" if final else f"{snap_id:04d}"
    name = f"{case.config.name}-{tag}.csv"
    write_csv(out / name, _snapshot_header(case), case.snapshot_array())


def _case_metrics(case) -> dict:
    cfg = case.config
    if cfg.case == "dmr":
        st = case.solver.state
        ni = case.solver.n_int
        return {"rho_min": float(st.rho[:ni].min()), "rho_max": float(st.rho[:ni].max())}
    if cfg.case == "cavity":
        return cavity_profile_metrics(case)
    if cfg.case == "twist":
        return {}
    return {}


# --- SPH interpolation and profile comparison -----------------------------------

def sph_interpolate(positions, values, vols, spec: KernelSpec, targets):
    """Shepard-normalized kernel interpolation of particle fields onto points."""
    positions = np.asarray(positions, float)
    targets = np.atleast_2d(np.asarray(targets, float))
    values = np.asarray(values, float)
    out = np.zeros((targets.shape[0],) + values.shape[1:])
    cut = spec.kappa * spec.h
    from scipy.spatial import cKDTree

    tree = cKDTree(positions)
    for k, xq in enumerate(targets):
        idx = tree.query_ball_point(xq, cut)
        if not idx:
            out[k] = np.nan
            continue
        idx = np.asarray(idx)
        w = kernel_value(spec, np.linalg.norm(positions[idx] - xq, axis=1)) * vols[idx]
        wsum = w.sum()
        out[k] = (w[..., None] * values[idx]).sum(axis=0) / wsum if values.ndim > 1 \
            else (w * values[idx]).sum() / wsum
    return out


def load_reference_profile(name: str):
    """Bundled reference CSV (columns: coordinate, value)."""
    ref = resources.files("sph_trunc").joinpath(f"data/{name}")
    if not ref.is_file():
        raise ConfigError(f"reference data {name} not found")
    rows = []
    for line in ref.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line[0].isalpha():
            continue
        rows.append([float(tok) for tok in line.split(",")])
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


def compare_profiles(sample_coords, sample_values, ref_coords, ref_values,
                     skip_boundary: tuple = ()):
    """L2/Linf of sampled values against a reference table.

    Points whose coordinate appears in `skip_boundary` (prescribed boundary
    values, not solution values) are excluded from the metric.
    """
    sample_coords = np.asarray(sample_coords, float)
    keep = np.ones(sample_coords.shape[0], dtype=bool)
    for b in skip_boundary:
        keep &= ~np.isclose(sample_coords, b)
    diff = np.asarray(sample_values, float)[keep] - np.asarray(ref_values, float)[keep]
    return {
        "l2": float(np.linalg.norm(diff) / math.sqrt(diff.size)),
        "linf": float(np.abs(diff).max()),
    }


def cavity_profile_metrics(case: EulerianCase) -> dict:
    """Centerline velocity profiles vs the bundled Ghia Re=400 tables."""
    cfg = case.config
    size = float(cfg.geometry.get("size", 1.0))
    s = case.solver
    st = s.state
    v = st.velocity()[:s.n_int]
    pos = s.pos[:s.n_int]
    vols = st.vol[:s.n_int]
    spec = s.kernel

    y_ref, u_ref = load_reference_profile("ghia_re400_u.csv")
    x_ref, v_ref = load_reference_profile("ghia_re400_v.csv")
    u_line = sph_interpolate(pos, v[:, 0], vols, spec,
                             np.column_stack([np.full_like(y_ref, 0.5 * size), y_ref * size]))
    v_line = sph_interpolate(pos, v[:, 1], vols, spec,
                             np.column_stack([x_ref * size, np.full_like(x_ref, 0.5 * size)]))
    um = compare_profiles(y_ref, u_line, y_ref, u_ref, skip_boundary=(0.0, 1.0))
    vm = compare_profiles(x_ref, v_line, x_ref, v_ref, skip_boundary=(0.0, 1.0))
    return {
        "u_centerline": {"y": y_ref.tolist(), "u": u_line.tolist(), "ref": u_ref.tolist()},
        "v_centerline": {"x": x_ref.tolist(), "v": v_line.tolist(), "ref": v_ref.tolist()},
        "u_vs_ghia": um,
        "v_vs_ghia": vm,
    }


def vorticity(case: EulerianCase):
    """Weak-form vorticity of the interior velocity field (run's own gradients)."""
    from sph_trunc.approx import _weak_gradient

    s = case.solver
    v = s.state.velocity()
    gw = s.gwv / s.state.vol[s.nlist.idx][:, None]
    gvy = _weak_gradient(s.nlist.starts, s.nlist.idx, np.ascontiguousarray(v[:, 1]),
                         s.state.vol, gw)
    gvx = _weak_gradient(s.nlist.starts, s.nlist.idx, np.ascontiguousarray(v[:, 0]),
                         s.state.vol, gw)
    return gvy[:s.n_int, 0] - gvx[:s.n_int, 1]


# --- paired runs ------------------------------------------------------------------

@dataclass
class PairReport:
    sw: RunReport
    tw: RunReport
    alpha: float
    field_diff: dict

    def to_dict(self):
        return {"sw": self.sw.to_dict(), "tw": self.tw.to_dict(),
                "alpha": self.alpha, "field_diff": self.field_diff}


def paired_run(cfg: CaseConfig, out_dir=None, workers: int = 1):
    """Standard- then truncated-kernel legs of the same case; alpha and field diff."""
    cfg_sw = copy.deepcopy(cfg)
    cfg_sw.kernel_family = WENDLAND
    cfg_sw.name = cfg.name + "-sw"
    cfg_tw = copy.deepcopy(cfg)
    cfg_tw.kernel_family = WENDLAND_TRUNCATED
    cfg_tw.name = cfg.name + "-tw"

    rep_sw, case_sw = run_case(cfg_sw, out_dir=out_dir, workers=workers)
    rep_tw, case_tw = run_case(cfg_tw, out_dir=out_dir, workers=workers)
    alpha = alpha_ratio(rep_tw.wall_clock_s, rep_sw.wall_clock_s)

    field_diff: dict = {}
    if isinstance(case_sw, EulerianCase):
        v_sw = case_sw.solver.state.velocity()[:case_sw.solver.n_int]
        v_tw = case_tw.solver.state.velocity()[:case_tw.solver.n_int]
        denom = float(np.linalg.norm(v_sw))
        if denom > 0:
            field_diff["velocity_l2"] = float(np.linalg.norm(v_tw - v_sw) / denom)
        if cfg.case == "shear-layer":
            w_sw = vorticity(case_sw)
            w_tw = vorticity(case_tw)
            field_diff["vorticity_l2"] = l2_error(w_tw, w_sw)
    else:
        vm_sw = case_sw.system.von_mises_field()
        vm_tw = case_tw.system.von_mises_field()
        field_diff["von_mises_l2"] = l2_error(vm_tw, vm_sw)
        tip_sw = np.asarray(case_sw.tip_track)
        tip_tw = np.asarray(case_tw.tip_track)
        field_diff["tip_trajectory"] = {"sw": tip_sw.tolist(), "tw": tip_tw.tolist()}

    pair = PairReport(sw=rep_sw, tw=rep_tw, alpha=alpha, field_diff=field_diff)
    if out_dir is not None:
        with open(Path(out_dir) / f"{cfg.name}-pair.json", "w") as fh:
            json.dump(pair.to_dict(), fh, indent=2, default=_json_default)
    return pair, case_sw, case_tw


# --- drag / lift ------------------------------------------------------------------

def drag_lift(times, forces, rho_inf: float, u_inf: float, area: float):
    """Coefficient series 2F/(rho u^2 A) and Strouhal number from lift peaks.

    The Strouhal number uses the mean peak spacing of C_L over the trailing
    60% of the series; with less than one full shedding period it is None
    and flagged unavailable.
    """
    times = np.asarray(times, float)
    forces = np.asarray(forces, float)
    if forces.ndim != 2 or forces.shape[1] < 2:
        raise ValueError("forces must be (n, >=2) with drag and lift columns")
    scale = 2.0 / (rho_inf * u_inf**2 * area)
    cd = forces[:, 0] * scale
    cl = forces[:, 1] * scale

    start = int(0.4 * len(times))
    t_tail = times[start:]
    cl_tail = cl[start:]
    peaks = _peak_times(t_tail, cl_tail)
    if len(peaks) >= 2:
        period = float(np.mean(np.diff(peaks)))
        d_over_u = area / u_inf  # frontal size over speed
        st = d_over_u / period
    else:
        st = None
    return {"cd": cd, "cl": cl, "strouhal": st,
            "cd_mean_tail": float(cd[start:].mean()) if len(cd) else float("nan"),
            "cl_amplitude_tail": float(0.5 * (cl_tail.max() - cl_tail.min())) if len(cl_tail) else float("nan")}


def _peak_times(t, x):
    peaks = []
    for i in range(1, len(x) - 1):
        if x[i] > x[i - 1] and x[i] >= x[i + 1]:
            peaks.append(t[i])
    return peaks
