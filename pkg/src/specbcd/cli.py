"""Experiment command line: batch runs, result tables, and plot data.

Exit codes: 0 on success, 1 on configuration errors, 2 when any instance hit
a numeric error (partial results are still written).  Reruns with the same
configuration and seeds produce byte-identical results files; the manifest
carries the timestamp so the data files stay reproducible.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .apps import gensdp, qcqp
from .exceptions import NumericError
from .solver import SolverConfig

UNDERFLOW = 1e-20  # summary entries below this print as 0


def fmt3(x):
    """Three significant digits in scientific notation, tiny values as 0."""
    x = float(x)
    if abs(x) < UNDERFLOW:
        return "0"
    return f"{x:.2e}"


def median_even(values):
    """Median with the even-count convention: mean of the two middle order
    statistics."""
    v = sorted(float(x) for x in values)
    n = len(v)
    if n == 0:
        raise ValueError("median of empty list")
    mid = n // 2
    if n % 2:
        return v[mid]
    return 0.5 * (v[mid - 1] + v[mid])


def parse_seeds(text):
    """Seed list syntax: '0..9', '3', or '0,2,5'."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(t) for t in text.split(",") if t.strip()]
    return [int(text)] if text else []


@dataclass
class ExperimentConfig:
    experiment: str = "selftest"
    n: list = field(default_factory=lambda: [5])
    m: list = field(default_factory=lambda: [10])
    seeds: list = field(default_factory=lambda: list(range(10)))
    deltas: list = field(default_factory=lambda: [1e-1, 1e-3, 1e-6])
    eps: float = 1e-6
    restarts: int = 3
    samples: int = 20
    out: str = "runs"
    format: str = "csv"
    trace: str = ""
    region: bool = False
    region_grid: int = 201

    def validate(self):
        if self.experiment not in ("gensdp", "qcqp", "selftest"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.experiment == "gensdp" and not self.n:
            raise ValueError("need at least one problem size n")
        if self.experiment == "qcqp" and not self.m:
            raise ValueError("need at least one constraint count m")
        if any(d < 0 for d in self.deltas) or not self.deltas:
            raise ValueError("deltas must be a nonempty list of nonnegatives")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.restarts < 1 or self.samples < 1:
            raise ValueError("restarts and samples must be at least 1")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")

    def solver_config(self):
        return SolverConfig(eps_y=self.eps, eps_x=self.eps, eps_kkt=self.eps)


def build_parser():
    p = argparse.ArgumentParser(
        prog="specbcd",
        description="Run the generalized-SDP and QCQP benchmark experiments.",
    )
    p.add_argument("--config", help="JSON file with defaults for the flags below")
    p.add_argument("--experiment", choices=["gensdp", "qcqp", "selftest"])
    p.add_argument("--n", help="problem sizes for gensdp, e.g. '5,10,25'")
    p.add_argument("--m", help="constraint counts for qcqp, e.g. '5,10'")
    p.add_argument("--seeds", help="seed list: '0..9' or '0,3,5'")
    p.add_argument("--delta", help="band widths for qcqp, e.g. '1e-1,1e-3,1e-6'")
    p.add_argument("--eps", type=float, help="solver measure tolerance")
    p.add_argument("--restarts", type=int, help="starts per qcqp solve")
    p.add_argument("--samples", type=int, help="randomization sample count")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"], help="results encoding")
    p.add_argument("--trace", help="write per-iteration solver trace to this file")
    p.add_argument("--region", action="store_true", default=None,
                   help="emit region/level-set point clouds for qcqp instances")
    return p


def config_from_args(args):
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    if args.experiment is not None:
        cfg.experiment = args.experiment
    if args.n is not None:
        cfg.n = [int(t) for t in str(args.n).split(",") if t.strip()]
    if args.m is not None:
        cfg.m = [int(t) for t in str(args.m).split(",") if t.strip()]
    if args.seeds is not None:
        cfg.seeds = parse_seeds(args.seeds)
    if args.delta is not None:
        cfg.deltas = [float(t) for t in str(args.delta).split(",") if t.strip()]
    if args.eps is not None:
        cfg.eps = args.eps
    if args.restarts is not None:
        cfg.restarts = args.restarts
    if args.samples is not None:
        cfg.samples = args.samples
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.format = args.format
    if args.trace is not None:
        cfg.trace = args.trace
    if args.region is not None:
        cfg.region = args.region
    if isinstance(cfg.seeds, str):
        cfg.seeds = parse_seeds(cfg.seeds)
    return cfg


def write_rows(rows, header, out_dir, fmt):
    """Write per-instance rows; floats via repr so parsing recovers them
    exactly."""
    if fmt == "json":
        path = out_dir / "results.json"
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=1, sort_keys=True)
        return path
    path = out_dir / "results.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k]
                        for k in header])
    return path


def write_manifest(cfg, out_dir, extra=None):
    blob = json.dumps(asdict(cfg), sort_keys=True)
    manifest = {
        "config": asdict(cfg),
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "created": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "specbcd": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


GENSDP_HEADER = [
    "experiment", "n", "s", "seed", "status", "iterations",
    "f_final", "f_star", "dist_to_opt", "residual_eq", "residual_ineq",
    "solved", "error",
]


def run_gensdp(cfg, out_dir, trace_sink):
    rows = []
    failures = 0
    for n in cfg.n:
        for seed in cfg.seeds:
            row = {
                "experiment": "gensdp", "n": n, "s": n, "seed": seed,
                "status": "", "iterations": 0, "f_final": float("nan"),
                "f_star": float("nan"), "dist_to_opt": float("nan"),
                "residual_eq": float("nan"), "residual_ineq": float("nan"),
                "solved": 0, "error": "",
            }
            try:
                inst = gensdp.gen_sdp_instance(n, seed=seed)
                run = gensdp.solve_gen_sdp_instance(
                    inst, cfg.solver_config(), trace_sink=trace_sink
                )
                row.update(
                    status=run.result.status,
                    iterations=run.result.iterations,
                    f_final=run.result.f_final,
                    f_star=inst.f_star,
                    dist_to_opt=run.dist_to_opt,
                    residual_eq=run.residual_eq,
                    residual_ineq=run.residual_ineq,
                    solved=int(run.solved),
                )
            except NumericError as exc:
                row["error"] = str(exc)
                failures += 1
            rows.append(row)
    write_rows(rows, GENSDP_HEADER, out_dir, cfg.format)

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "n", "solved",
            "dist_min", "dist_median", "dist_max",
            "eq_min", "eq_median", "eq_max",
            "ineq_min", "ineq_median", "ineq_max",
        ])
        for n in cfg.n:
            sub = [r for r in rows if r["n"] == n and not r["error"]]
            if not sub:
                w.writerow([n] + ["nan"] * 10)
                continue
            cols = {
                key: [r[key] for r in sub]
                for key in ("dist_to_opt", "residual_eq", "residual_ineq")
            }
            w.writerow(
                [n, sum(r["solved"] for r in sub)]
                + [fmt3(f(cols["dist_to_opt"])) for f in (min, median_even, max)]
                + [fmt3(f(cols["residual_eq"])) for f in (min, median_even, max)]
                + [fmt3(f(cols["residual_ineq"])) for f in (min, median_even, max)]
            )
    return failures


QCQP_HEADER = [
    "experiment", "m", "seed", "delta", "oracle_opt",
    "sdr_orig", "sdr_random", "solved_sdr_random",
    "ours_orig", "ours_random", "ours_project",
    "solved_random", "solved_project", "error",
]


def run_qcqp(cfg, out_dir, trace_sink):
    rows = []
    failures = 0
    for m in cfg.m:
        for seed in cfg.seeds:
            try:
                inst = qcqp.qcqp_instance(m, seed=seed)
                out = qcqp.run_qcqp_comparison(
                    inst, deltas=tuple(cfg.deltas), restarts=cfg.restarts,
                    n_samples=cfg.samples, cfg=cfg.solver_config(),
                )
            except NumericError as exc:
                failures += 1
                for delta in cfg.deltas:
                    rows.append({
                        "experiment": "qcqp", "m": m, "seed": seed,
                        "delta": float(delta), "oracle_opt": float("nan"),
                        "sdr_orig": float("nan"), "sdr_random": float("nan"),
                        "solved_sdr_random": 0, "ours_orig": float("nan"),
                        "ours_random": float("nan"), "ours_project": float("nan"),
                        "solved_random": 0, "solved_project": 0,
                        "error": str(exc),
                    })
                continue
            for delta in cfg.deltas:
                d = out.per_delta[delta]
                rows.append({
                    "experiment": "qcqp", "m": m, "seed": seed,
                    "delta": float(delta), "oracle_opt": out.oracle_opt,
                    "sdr_orig": out.sdr_orig, "sdr_random": out.sdr_random,
                    "solved_sdr_random": int(out.solved_sdr_random),
                    "ours_orig": d.orig, "ours_random": d.random,
                    "ours_project": d.project,
                    "solved_random": int(d.solved_random),
                    "solved_project": int(d.solved_project),
                    "error": "",
                })
            if cfg.region:
                emit_region_data(
                    inst, cfg.region_grid,
                    out_dir / f"region_m{m}_s{seed}.csv",
                    delta=min(cfg.deltas), restarts=cfg.restarts,
                    n_samples=cfg.samples, cfg=cfg.solver_config(),
                )
    write_rows(rows, QCQP_HEADER, out_dir, cfg.format)

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "m", "delta", "instances", "solved_project", "solved_random",
            "solved_sdr_random", "proj_gap_min", "proj_gap_median",
            "proj_gap_max",
        ])
        for m in cfg.m:
            for delta in cfg.deltas:
                sub = [
                    r for r in rows
                    if r["m"] == m and r["delta"] == float(delta) and not r["error"]
                ]
                if not sub:
                    w.writerow([m, fmt3(delta)] + ["nan"] * 7)
                    continue
                gaps = [abs(r["ours_project"] - r["oracle_opt"]) for r in sub]
                w.writerow([
                    m, fmt3(delta), len(sub),
                    sum(r["solved_project"] for r in sub),
                    sum(r["solved_random"] for r in sub),
                    sum(r["solved_sdr_random"] for r in sub),
                    fmt3(min(gaps)), fmt3(median_even(gaps)), fmt3(max(gaps)),
                ])
    return failures


def emit_region_data(inst, grid, out_path, delta=1e-6, restarts=3,
                     n_samples=20, cfg=None, seed=None):
    """Point-cloud CSV for one planar instance: feasibility grid samples,
    objective level-set circles, and the candidate points of each method.

    Classes: feas/infeas (grid), level (objective contours), R (relaxation
    randomization), G (band-method randomization), P (band-method
    projections), S (grid-oracle optimum).
    """
    out = qcqp.run_qcqp_comparison(
        inst, deltas=(delta,), restarts=restarts, n_samples=n_samples,
        seed=seed, cfg=cfg,
    )
    d = out.per_delta[delta]
    _, r2 = qcqp._polar_scan(inst, 4096)
    radius = 1.05 * float(np.sqrt(r2.max()))
    oracle_val, oracle_x = qcqp.grid_oracle_argmin(inst)

    rows = []
    axis = np.linspace(-radius, radius, int(grid))
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    quad = np.einsum("li,kij,lj->lk", pts, inst.mats, pts)
    feas = quad.min(axis=1) >= 1.0
    for (x1, x2), ok in zip(pts, feas):
        rows.append((x1, x2, "feas" if ok else "infeas"))
    angles = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    for level in (1.0, 2.0, 3.0):
        r = np.sqrt(level * oracle_val)
        for a in angles:
            rows.append((r * np.cos(a), r * np.sin(a), "level"))
    for x1, x2 in out.sdr_samples:
        rows.append((x1, x2, "R"))
    for x1, x2 in d.random_samples:
        rows.append((x1, x2, "G"))
    for x1, x2 in d.project_points:
        rows.append((x1, x2, "P"))
    rows.append((oracle_x[0], oracle_x[1], "S"))

    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "class"])
        for x1, x2, label in rows:
            w.writerow([repr(float(x1)), repr(float(x2)), label])
    return out_path


def run_selftest(cfg, out_dir):
    """Quick internal consistency pass: gradient audits, measure certificates,
    projection idempotence."""
    from . import directions, projections
    from .spectral import decompose, eig_sorted

    checks = []
    inst = gensdp.gen_sdp_instance(4, seed=cfg.seeds[0])
    mp = gensdp.build_gen_sdp_problem(inst)
    try:
        mp.audit_gradients(rng=0, cases=4)
        checks.append(("gradient-audit", True, ""))
    except NumericError as exc:
        checks.append(("gradient-audit", False, str(exc)))
    block = decompose(mp)
    p0 = eig_sorted(inst.planted)
    q0, lam0 = p0.q.factor, p0.lam
    try:
        res = directions.measure_kkt(block, q0, lam0, 1e-6)
        checks.append(("measure-certificate", res.measure >= 0, ""))
    except NumericError as exc:
        checks.append(("measure-certificate", False, str(exc)))
    rng = np.random.default_rng(cfg.seeds[0])
    lam_off = lam0 + 0.05 * rng.standard_normal(4)
    rep = projections.project_y(lam_off, q0, block)
    rep2 = projections.project_y(rep.lam, q0, block)
    checks.append(("projection-idempotent", rep.ok and rep2.moved <= 1e-8, ""))

    ok = all(c[1] for c in checks)
    with open(out_dir / "selftest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "passed", "detail"])
        for name, passed, detail in checks:
            w.writerow([name, int(passed), detail])
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name} {detail}")
    return 0 if ok else 2


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trace_sink = None
    if cfg.trace:
        trace_sink = open(cfg.trace, "w")
    try:
        if cfg.experiment == "selftest":
            code = run_selftest(cfg, out_dir)
            write_manifest(cfg, out_dir)
            return code
        if cfg.experiment == "gensdp":
            failures = run_gensdp(cfg, out_dir, trace_sink)
        else:
            failures = run_qcqp(cfg, out_dir, trace_sink)
    finally:
        if trace_sink is not None:
            trace_sink.close()
    write_manifest(cfg, out_dir, extra={"instance_errors": failures})
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
