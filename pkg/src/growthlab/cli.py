"""The ``growthlab`` experiment driver.

Every subcommand reads a flat INI config (section [run]), optionally
overridden by --seed / --out, writes plot-ready CSV artifacts plus a JSON
manifest (full config echo, seed, content hash, wall time), and honors the
exit-code contract: 0 success, 2 threshold failure, 1 error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .env import RngSpec, SpeedFunction, sample_loggamma_grid, sample_two_phase_corner
from .lattice import last_passage_terminal, log_partition, log_partition_terminal
from .loggamma import (
    LogGammaParams,
    cube_root_expansion_exponent,
    dual_rate,
    free_energy,
    point_rate,
    stationary_mean_logZ,
)
from .mc import Estimate, ks_test, run_replicas
from .hydro import (
    TwoPhaseProfile,
    closed_form_velocity,
    entropy_check,
    two_phase_shape,
    variational_v,
    weak_solution_residual,
)
from .specfun import digamma
from .tasep import lpp_coupling_check, run_envelope_experiment, simulate

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


@dataclass
class RunConfig:
    subcommand: str
    params: Dict[str, object]
    seed: int
    out_dir: Path
    config_path: Optional[Path] = None

    def get(self, key: str, default=None):
        return self.params.get(key, default)


def _coerce(value: str):
    v = value.strip()
    low = v.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        pass
    return v


def load_config(subcommand: str, path: Optional[str], seed: Optional[int],
                out: Optional[str]) -> RunConfig:
    params: Dict[str, object] = {}
    cfg_path = None
    if path:
        cfg_path = Path(path)
        parser = configparser.ConfigParser()
        read = parser.read(cfg_path)
        if not read:
            raise FileNotFoundError(f"config file {path} not found")
        section = "run" if parser.has_section("run") else parser.sections()[0]
        for key, value in parser.items(section):
            params[key] = _coerce(value)
    if seed is not None:
        params["seed"] = seed
    params.setdefault("seed", 12345)
    out_dir = Path(out) if out else Path(params.get("out", f"runs/{subcommand}"))
    return RunConfig(subcommand=subcommand, params=params, seed=int(params["seed"]),
                     out_dir=out_dir, config_path=cfg_path)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GROWTHLAB_WORKERS", "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: str, rows: List[str]) -> None:
    path.write_text("\n".join([header] + rows) + "\n")


def _write_manifest(cfg: RunConfig, results: dict, outputs: List[Path], t0: float,
                    status: str) -> Path:
    digest = hashlib.sha256()
    digest.update(json.dumps(cfg.params, sort_keys=True, default=str).encode())
    if cfg.config_path and cfg.config_path.exists():
        digest.update(cfg.config_path.read_bytes())
    manifest = {
        "subcommand": cfg.subcommand,
        "params": {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.params.items()},
        "seed": cfg.seed,
        "version": __version__,
        "content_hash": digest.hexdigest(),
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": [str(p) for p in outputs],
        "results": results,
        "status": status,
    }
    path = cfg.out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=float))
    return path


def _parse_points(spec, default) -> List:
    if not spec:
        return default
    pts = []
    for chunk in str(spec).split(";"):
        xs = chunk.split(",")
        if len(xs) != 2:
            raise ValueError(f"bad point spec {chunk!r}")
        pts.append((float(xs[0]), float(xs[1])))
    return pts


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_shape(cfg: RunConfig) -> int:
    """Monte Carlo corner-growth shape vs the closed form Phi."""
    c1 = float(cfg.get("c1", 1.0))
    c2 = float(cfg.get("c2", 1.0))
    n = int(cfg.get("n", 200))
    reps = int(cfg.get("reps", 100))
    rel_tol = float(cfg.get("rel_tol", 0.05))
    check = bool(cfg.get("check", True))
    points = _parse_points(cfg.get("points"), [(1.0, 1.0)])
    if c1 < c2:
        raise ValueError("config requires c1 >= c2")
    t0 = time.time()
    rows = []
    results = {}
    worst_rel = 0.0
    for (x, y) in points:
        m_sites = max(int(n * x), 1)
        n_sites = max(int(n * y), 1)
        vals = np.empty(reps)
        for r in range(reps):
            g = sample_two_phase_corner(c1, c2, m_sites, n_sites, RngSpec(cfg.seed, r))
            vals[r] = last_passage_terminal(g.values, include_origin=True) / n
        est = Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps)), reps, cfg.seed)
        closed = two_phase_shape(x, y, c1, c2)
        abs_err = abs(est.mean - closed)
        worst_rel = max(worst_rel, abs_err / abs(closed))
        rows.append(f"{x},{y},{n},{_fmt(est.mean)},{_fmt(est.stderr)},{_fmt(closed)},{_fmt(abs_err)}")
        results[f"point_{x}_{y}"] = {"estimate": est.mean, "stderr": est.stderr,
                                     "closed_form": closed, "abs_err": abs_err}
    out = cfg.out_dir / "shape.csv"
    _write_csv(out, "x,y,n,estimate,stderr,closed_form,abs_err", rows)
    results["worst_rel_err"] = worst_rel
    ok = (not check) or worst_rel <= rel_tol
    _write_manifest(cfg, results, [out], t0, "ok" if ok else "threshold-failure")
    print(f"shape: worst relative error {worst_rel:.4f} (tol {rel_tol}) -> "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_burke(cfg: RunConfig) -> int:
    """Stationary mean identity and Burke boundary marginals."""
    from scipy import stats as sps

    mu = float(cfg.get("mu", 2.0))
    theta = float(cfg.get("theta", 0.8))
    m = int(cfg.get("m", 200))
    n = int(cfg.get("n", 200))
    reps = int(cfg.get("reps", 500))
    t0 = time.time()
    params = LogGammaParams(mu, theta)
    vals = np.empty(reps)
    for r in range(reps):
        g = sample_loggamma_grid(mu, theta, m, n, True, RngSpec(cfg.seed, r))
        vals[r] = log_partition(np.log(g.values), 1.0).values[m, n]
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(reps))
    expect = stationary_mean_logZ(m, n, params)
    mean_ok = abs(mean - expect) <= 3 * stderr

    # U along the top row from the ratio identity U_{i,n} = Z_{i,n}/Z_{i-1,n}.
    g = sample_loggamma_grid(mu, theta, m, n, True, RngSpec(cfg.seed, 0))
    lz = log_partition(np.log(g.values), 1.0).values
    log_u = np.diff(lz[:, n])
    ks = ks_test(np.exp(-log_u), lambda x: sps.gamma.cdf(x, a=theta))
    ks_ok = ks.p_value > 0.01

    out = cfg.out_dir / "burke.csv"
    _write_csv(out, "replica,log_z",
               [f"{r},{_fmt(vals[r])}" for r in range(reps)])
    results = {"mean_log_z": mean, "stderr": stderr, "expected": expect,
               "mean_ok": mean_ok, "ks_statistic": ks.statistic, "ks_p": ks.p_value,
               "ks_ok": ks_ok}
    ok = mean_ok and ks_ok
    _write_manifest(cfg, results, [out], t0, "ok" if ok else "threshold-failure")
    print(f"burke: mean log Z = {mean:.3f} vs {expect:.3f} (3se = {3*stderr:.3f}) "
          f"[{'PASS' if mean_ok else 'FAIL'}]; U-marginal KS p = {ks.p_value:.4f} "
          f"[{'PASS' if ks_ok else 'FAIL'}]")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_rate(cfg: RunConfig) -> int:
    """Rate-function tables: J_{s,t}(r) and its dual J*(xi)."""
    mu = float(cfg.get("mu", 2.0))
    s = float(cfg.get("s", 1.0))
    t = float(cfg.get("t", 1.0))
    n_r = int(cfg.get("n_r", 41))
    t0 = time.time()
    p = free_energy(s, t, mu)
    r_lo = float(cfg.get("r_lo", p - 0.5))
    r_hi = float(cfg.get("r_hi", p + 2.0))
    rs = np.unique(np.concatenate([np.linspace(r_lo, r_hi, n_r), [p]]))
    rows = [f"{s},{t},{_fmt(r)},{_fmt(point_rate(s, t, float(r), mu))},{_fmt(p)},{mu}" for r in rs]
    out = cfg.out_dir / "rate.csv"
    _write_csv(out, "s,t,r,J,p_mu,mu", rows)
    outputs = [out]
    if bool(cfg.get("dual", True)):
        xis = np.linspace(0.0, mu - float(cfg.get("xi_margin", 0.1)),
                          int(cfg.get("n_xi", 21)))
        drows = [f"{s},{t},{_fmt(xi)},{_fmt(dual_rate(s, t, float(xi), mu))}" for xi in xis]
        dout = cfg.out_dir / "dual.csv"
        _write_csv(dout, "s,t,xi,J_star", drows)
        outputs.append(dout)
    results = {"p_mu": p, "J_at_p": point_rate(s, t, p, mu)}
    _write_manifest(cfg, results, outputs, t0, "ok")
    print(f"rate: p_mu({s},{t}) = {p:.6f}, J(p_mu) = {results['J_at_p']:.2e}")
    return EXIT_OK


def cmd_polymer(cfg: RunConfig) -> int:
    """Free-energy law of large numbers for the bulk polymer."""
    mu = float(cfg.get("mu", 2.0))
    n = int(cfg.get("n", 400))
    reps = int(cfg.get("reps", 50))
    tol = float(cfg.get("tol", 0.05))
    t0 = time.time()
    vals = np.empty(reps)
    for r in range(reps):
        g = sample_loggamma_grid(mu, None, n, n, False, RngSpec(cfg.seed, r))
        vals[r] = log_partition_terminal(np.log(g.values), 1.0) / n
    p = free_energy(1.0, 1.0, mu)
    err = abs(float(vals.mean()) - p)
    ok = err <= tol
    out = cfg.out_dir / "polymer.csv"
    _write_csv(out, "replica,free_energy_estimate", [f"{r},{_fmt(vals[r])}" for r in range(reps)])
    results = {"mean": float(vals.mean()), "expected": p, "abs_err": err, "tol": tol}
    _write_manifest(cfg, results, [out], t0, "ok" if ok else "threshold-failure")
    print(f"polymer: |mean - p_mu| = {err:.4f} (tol {tol}) -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_tasep(cfg: RunConfig) -> int:
    """One exclusion trajectory: snapshots and a density histogram."""
    c = _speed_from_cfg(cfg)
    n = int(cfg.get("n", 500))
    horizon = float(cfg.get("horizon", 1.0))
    a = float(cfg.get("window_lo", -1.5))
    b = float(cfg.get("window_hi", 1.5))
    initial = cfg.get("initial", "step")
    if isinstance(initial, (int, float)) and not isinstance(initial, bool):
        initial = float(initial)
    bin_w = float(cfg.get("bin_width", 0.1))
    t0 = time.time()
    traj = simulate(c, n, initial, horizon, (a, b), RngSpec(cfg.seed, 0))
    t_micro = horizon * n
    snap = cfg.out_dir / "trajectory.csv"
    traj.to_csv(snap, t_micro)
    eta = traj.eta_at(t_micro)
    base = traj.sites[0]
    rows = []
    edges = np.arange(a, b + bin_w / 2, bin_w)
    for lo, hi in zip(edges, edges[1:]):
        i_lo = math.floor(n * lo) + 1
        i_hi = math.floor(n * hi)
        dens = float(np.sum(eta[i_lo - base:i_hi - base + 1])) / max(i_hi - i_lo + 1, 1)
        rows.append(f"{_fmt(lo)},{_fmt(hi)},{_fmt(dens)}")
    hist = cfg.out_dir / "density.csv"
    _write_csv(hist, "bin_lo,bin_hi,density", rows)
    _write_manifest(cfg, {"events": "see trajectory"}, [snap, hist], t0, "ok")
    print(f"tasep: wrote {snap.name} and {hist.name}")
    return EXIT_OK


def cmd_envelope(cfg: RunConfig) -> int:
    """Exact envelope identity on shared clocks, with a negative control."""
    c = _speed_from_cfg(cfg)
    n = int(cfg.get("n", 1))
    window = int(cfg.get("window", 40))
    horizon = float(cfg.get("horizon", 2.5))
    t0 = time.time()
    rep = run_envelope_experiment(c, n, window, horizon, seed=cfg.seed)
    control = run_envelope_experiment(c, n, window, max(horizon, 12.0), seed=cfg.seed,
                                      mismatch_clocks=True)
    ok = rep.ok and not control.ok
    results = {
        "violations": len(rep.violations),
        "n_sites": rep.n_sites,
        "n_times": rep.n_times,
        "argmax_touched_boundary": rep.argmax_touched_boundary,
        "negative_control_failed_as_expected": not control.ok,
    }
    _write_manifest(cfg, results, [], t0, "ok" if ok else "threshold-failure")
    print(f"envelope: {rep.summary()}")
    print(f"envelope negative control: {'FAIL (expected)' if not control.ok else 'PASS (BUG!)'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_couple(cfg: RunConfig) -> int:
    """TASEP <-> last-passage distributional coupling."""
    m = int(cfg.get("m", 8))
    n_particles = int(cfg.get("n_particles", 8))
    reps = int(cfg.get("reps", 5000))
    t0 = time.time()
    rep = lpp_coupling_check(m, n_particles, reps, cfg.seed)
    ok = rep.p_value > 0.01 and rep.means_compatible
    out = cfg.out_dir / "couple.csv"
    _write_csv(out, "metric,value", [
        f"ks_statistic,{_fmt(rep.ks_statistic)}",
        f"p_value,{_fmt(rep.p_value)}",
        f"mean_dp,{_fmt(rep.mean_dp)}",
        f"mean_sim,{_fmt(rep.mean_sim)}",
        f"mean_diff,{_fmt(rep.mean_diff)}",
        f"pooled_stderr,{_fmt(rep.pooled_stderr)}",
    ])
    _write_manifest(cfg, {"p_value": rep.p_value, "mean_diff": rep.mean_diff,
                          "pooled_stderr": rep.pooled_stderr}, [out], t0,
                    "ok" if ok else "threshold-failure")
    print("couple: " + rep.summary() + f" -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_profile(cfg: RunConfig) -> int:
    """Empirical TASEP density vs the closed-form two-phase profile."""
    c1 = float(cfg.get("c1", 1.0))
    c2 = float(cfg.get("c2", 0.5))
    rho = float(cfg.get("rho", 0.3))
    n = int(cfg.get("n", 2000))
    t = float(cfg.get("t", 1.0))
    reps = int(cfg.get("reps", 3))
    bin_w = float(cfg.get("bin_width", 0.2))
    a = float(cfg.get("window_lo", -1.6))
    b = float(cfg.get("window_hi", 1.6))
    excl = float(cfg.get("exclusion_halfwidth", 0.05))
    tol = float(cfg.get("tol", 0.05))
    t0 = time.time()
    c = SpeedFunction.two_phase(c1, c2)
    prof = TwoPhaseProfile(rho, c1, c2)
    edges = np.arange(a, b + bin_w / 2, bin_w)
    counts = np.zeros(len(edges) - 1)
    for r in range(reps):
        traj = simulate(c, n, rho, t, (a, b), RngSpec(cfg.seed, r))
        eta = traj.eta_at(t * n)
        base = traj.sites[0]
        for k, (lo, hi) in enumerate(zip(edges, edges[1:])):
            i_lo = math.floor(n * lo) + 1
            i_hi = math.floor(n * hi)
            counts[k] += float(np.sum(eta[i_lo - base:i_hi - base + 1])) / (i_hi - i_lo + 1)
    counts /= reps
    interfaces = prof.breakpoints(t)
    rows = []
    sup_err = 0.0
    for k, (lo, hi) in enumerate(zip(edges, edges[1:])):
        sub = np.linspace(lo, hi, 65)
        closed = float(np.mean(prof.values(0.5 * (sub[:-1] + sub[1:]), t)))
        excluded = any(lo - excl < p < hi + excl for p in interfaces)
        if not excluded:
            sup_err = max(sup_err, abs(counts[k] - closed))
        rows.append(f"{_fmt(lo)},{_fmt(hi)},{_fmt(counts[k])},{_fmt(closed)},{int(excluded)}")
    out = cfg.out_dir / "profile.csv"
    _write_csv(out, "bin_lo,bin_hi,empirical,closed_form,excluded", rows)
    ok = sup_err <= tol
    results = {"sup_err_outside_exclusions": sup_err, "tol": tol, "case": prof.case()}
    _write_manifest(cfg, results, [out], t0, "ok" if ok else "threshold-failure")
    print(f"profile (case {prof.case()}): sup bin error {sup_err:.4f} (tol {tol}) -> "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_entropy(cfg: RunConfig) -> int:
    """Entropy conditions and weak-form residual of the closed-form profile."""
    c1 = float(cfg.get("c1", 1.0))
    c2 = float(cfg.get("c2", 0.5))
    rho = float(cfg.get("rho", 0.3))
    t = float(cfg.get("t", 1.0))
    v_check = bool(cfg.get("variational_check", False))
    t0 = time.time()
    prof = TwoPhaseProfile(rho, c1, c2)
    rep = entropy_check(prof, c1, c2, t)
    residual = weak_solution_residual(prof, c1, c2)
    ok = rep.interior_ok and rep.boundary_ok and rep.flux_residual <= 1e-10 \
        and residual <= 1e-3
    lines = [rep.summary(), f"weak-form residual = {residual:.3e}"]
    results = {"interior_ok": rep.interior_ok, "boundary_ok": rep.boundary_ok,
               "boundary_case": rep.boundary_case, "flux_residual": rep.flux_residual,
               "weak_residual": residual}
    if v_check:
        c = SpeedFunction.two_phase(c1, c2)
        worst = 0.0
        for x in np.linspace(-1.0, 1.0, 9):
            worst = max(worst, abs(variational_v(x, t, rho, c)
                                   - closed_form_velocity(x, t, rho, c1, c2)))
        results["variational_vs_closed_form"] = worst
        ok = ok and worst <= 1e-3
        lines.append(f"variational vs closed form: {worst:.2e}")
    out = cfg.out_dir / "entropy.txt"
    out.write_text("\n".join(lines) + "\n")
    _write_manifest(cfg, results, [out], t0, "ok" if ok else "threshold-failure")
    for line in lines:
        print("entropy: " + line)
    return EXIT_OK if ok else EXIT_THRESHOLD


def _speed_from_cfg(cfg: RunConfig) -> SpeedFunction:
    if "c" in cfg.params:
        return SpeedFunction.constant(float(cfg.get("c")))
    c1 = float(cfg.get("c1", 1.0))
    c2 = float(cfg.get("c2", c1))
    if c1 == c2:
        return SpeedFunction.constant(c1)
    return SpeedFunction.two_phase(c1, c2)


_COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "shape": cmd_shape,
    "burke": cmd_burke,
    "rate": cmd_rate,
    "polymer": cmd_polymer,
    "tasep": cmd_tasep,
    "envelope": cmd_envelope,
    "couple": cmd_couple,
    "profile": cmd_profile,
    "entropy": cmd_entropy,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="growthlab",
        description="Reproducible experiments on polymers, last passage, and TASEP",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").splitlines()[0])
        p.add_argument("--config", default=None, help="INI config file ([run] section)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.subcommand, args.config, args.seed, args.out)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.subcommand](cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
