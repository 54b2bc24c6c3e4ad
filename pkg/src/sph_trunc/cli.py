"""Command-line interface: run, pair, relax, error-study.

Exit codes: 0 success, 2 solver abort, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _add_common(sub):
    sub.add_argument("config", help="case/study TOML file")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--workers", type=int, default=1, help="worker threads")
    sub.add_argument("--seed", type=int, default=None, help="run seed (recorded)")


def build_parser():
    ap = argparse.ArgumentParser(prog="sph-trunc",
                                 description="Truncated-Wendland SPH benchmark harness")
    subs = ap.add_subparsers(dest="command", required=True)
    for name, desc in (("run", "run one case"),
                       ("pair", "run standard and truncated legs, report alpha"),
                       ("relax", "relax a particle distribution, write CSV"),
                       ("error-study", "kernel error table / convergence study")):
        _add_common(subs.add_parser(name, help=desc))
    return ap


def cmd_run(args) -> int:
    from sph_trunc.bench import run_case
    from sph_trunc.cases import load_config

    cfg = load_config(args.config)
    report, _ = run_case(cfg, out_dir=args.out, workers=args.workers, seed=args.seed)
    print(json.dumps(report.to_dict(), indent=2, default=str))
    return 0


def cmd_pair(args) -> int:
    from sph_trunc.bench import paired_run
    from sph_trunc.cases import load_config

    cfg = load_config(args.config)
    pair, _, _ = paired_run(cfg, out_dir=args.out, workers=args.workers)
    print(f"T_SW = {pair.sw.wall_clock_s:.3f} s, T_TW = {pair.tw.wall_clock_s:.3f} s, "
          f"alpha = {pair.alpha:.3f}")
    for key, val in pair.field_diff.items():
        if not isinstance(val, dict):
            print(f"{key}: {val:.4e}")
    return 0


def cmd_relax(args) -> int:
    from sph_trunc.bench import write_csv
    from sph_trunc.cases import load_config, _shape_from_geometry
    from sph_trunc.kernels import kernel_spec
    from sph_trunc.relaxation import RelaxationConfig, relax

    cfg = load_config(args.config)
    shape = _shape_from_geometry(cfg.geometry)
    params = dict(cfg.relax)
    h_ratio = float(params.pop("h_ratio", 1.3))
    rc = RelaxationConfig(shape=shape, dp=cfg.dp,
                          kernel=kernel_spec(cfg.kernel_family, h_ratio * cfg.dp, shape.dim),
                          **params)
    res = relax(rc)
    out = Path(args.out)
    dim = res.positions.shape[1]
    header = ("x", "y", "z")[:dim] + ("volume",)
    vols = np.full(res.positions.shape[0], cfg.dp**dim)
    write_csv(out / f"{cfg.name}-positions.csv", header,
              np.column_stack([res.positions, vols]))
    write_csv(out / f"{cfg.name}-residuals.csv", ("step", "residual"),
              np.column_stack([np.arange(len(res.residuals)), res.residuals]))
    print(f"relaxed {res.positions.shape[0]} particles in {res.steps} steps "
          f"(converged={res.converged}, best residual {res.best_residual:.3e} "
          f"at step {res.best_step})")
    return 0


def cmd_error_study(args) -> int:
    from sph_trunc.approx import (DISTRIBUTIONS, circle_distribution, convergence_study,
                                  unity_error)
    from sph_trunc.bench import write_csv
    from sph_trunc.cases import _load_raw_toml
    from sph_trunc.kernels import WENDLAND, WENDLAND_TRUNCATED

    raw = _load_raw_toml(args.config)
    study = raw.get("study", {})
    resolutions = [float(x) for x in study.get("resolutions", [0.2, 0.1, 0.05])]
    distributions = study.get("distributions", list(DISTRIBUTIONS))
    kernels = study.get("kernels", [WENDLAND, WENDLAND_TRUNCATED])
    corrections = study.get("corrections", [True, False])

    rows = []
    for dist in distributions:
        posmap = {dp: circle_distribution(dist, dp) for dp in resolutions}
        for fam in kernels:
            for corr in corrections:
                for row in convergence_study(dist, fam, corr, tuple(resolutions), posmap):
                    rows.append((dist, fam, int(corr), row.dp, row.error,
                                 row.observed_order if row.observed_order is not None else np.nan))
        u_sw = unity_error(posmap[max(resolutions)], max(resolutions), WENDLAND)
        u_tw = unity_error(posmap[max(resolutions)], max(resolutions), WENDLAND_TRUNCATED)
        print(f"{dist}: unity L2 at coarsest dp: SW {u_sw:.4f}, TW {u_tw:.4f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "error-study.csv", "w") as fh:
        fh.write("distribution,kernel,correction,dp,l2,observed_order\n")
        for r in rows:
            fh.write("%s,%s,%d,%.17g,%.17g,%.17g\n" % r)
    print(f"wrote {out / 'error-study.csv'} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from sph_trunc.eulerian import ConfigError, SolverError
    from sph_trunc.relaxation import RelaxationError
    from sph_trunc.tlsph import SolidStateError

    handlers = {"run": cmd_run, "pair": cmd_pair, "relax": cmd_relax,
                "error-study": cmd_error_study}
    try:
        return handlers[args.command](args)
    except (SolverError, SolidStateError, RelaxationError) as ex:
        print(f"solver abort: {ex}", file=sys.stderr)
        return 2
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
