"""Batch runner: ``polaron-reset {ground-state,decouple,lqr,validate}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import integrate

from . import lqr, oracle, tdvp
from .bath import spectral_density, sum_f2
from .config import ConfigError, ExperimentConfig, load_config
from .io import dumps, write_csv, write_json
from .polaron import (correlation_profile, excited_population, fixed_point_residual,
                      ground_state, variational_energy)
from .switching import SwitchProfile

log = logging.getLogger("polaron_reset")


def _log10(p: float) -> float:
    return math.log10(p) if p > 0 else float("-inf")


def _log10_arr(p):
    with np.errstate(divide="ignore"):
        return np.log10(p)


def _prepare(out: Path, cfg: ExperimentConfig, kind: str) -> Dict[str, Any]:
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfg.to_dict()
    resolved["kind"] = kind
    resolved["output_dir"] = None  # outputs must not depend on where they were written
    write_json(out / "config.json", resolved)
    return resolved


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def continuum_sum_f2(cfg: ExperimentConfig) -> float:
    """Adaptive-quadrature value of ``int_0^inf J(w) / (4 (w + w_q)^2) dw``."""
    params = cfg.bath.params
    wq = cfg.bath.omega_q
    val, _ = integrate.quad(lambda w: spectral_density(w, params) / (4 * (w + wq) ** 2),
                            0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def run_ground_state(cfg: ExperimentConfig, out: Path, threads: int = 1) -> Dict[str, Any]:
    resolved = _prepare(out, cfg, "ground-state")
    bath = cfg.bath.build()
    wq = cfg.bath.omega_q
    gs = cfg.ground_state
    state = ground_state(bath, wq, gs.self_consistent, gs.tol, gs.max_iter)
    weak = state if not gs.self_consistent else ground_state(bath, wq)
    p = excited_population(state)
    omegas, gf = correlation_profile(state, bath)
    write_csv(out / "spectrum.csv",
              {"omega_rad_per_ns": omegas, "re_f": state.displacements.real,
               "im_f": state.displacements.imag, "re_gf_rad_per_ns": gf.real,
               "im_gf_rad_per_ns": gf.imag},
              resolved, ["relaxed polaron displacements and qubit-bath correlation g_k f_k"])
    summary = {
        "config": resolved,
        "n_modes": bath.n_modes,
        "sum_f2": state.sum_abs2,
        "sum_f2_weak_coupling": sum_f2(bath, wq),
        "sum_f2_continuum": continuum_sum_f2(cfg),
        "P_plus": p,
        "log10_P_plus": _log10(p),
        "P_plus_weak_coupling": excited_population(weak),
        "energy_rad_per_ns": variational_energy(state, wq, bath),
        "max_self_consistency_residual": float(np.max(fixed_point_residual(state, bath, wq), initial=0.0)),
    }
    write_json(out / "summary.json", summary)
    return summary


def run_decouple_sweep(cfg: ExperimentConfig, out: Path, threads: int = 1) -> Dict[str, Any]:
    resolved = _prepare(out, cfg, "decouple")
    dc = cfg.decouple
    bath = cfg.bath.build()
    wq = cfg.bath.omega_q
    profiles = tdvp.lambda_profiles(dc.lambdas, dc.t_f)

    def one(p):
        return tdvp.decoupling_experiment(bath, wq, [p], dc.dt, dc.probe_omegas, dc.full_nonlinear)

    results = _map(one, profiles, threads)
    rows, finals = [], {"omega_rad_per_ns": bath.omegas}
    for p, res in zip(profiles, results):
        key = p.describe()
        rec = res.records[key]
        rows.extend(res.summary())
        tag = f"lambda_{p.lam:g}"
        write_csv(out / f"trajectory_{tag}.csv",
                  {"t_ns": rec.times, "u": rec.u_values, "P_plus": rec.p_plus,
                   "log10_P_plus": _log10_arr(rec.p_plus)}, resolved, [f"decoupling {key}"])
        for idx in res.probe_indices:
            traj = rec.mode(int(idx))
            write_csv(out / f"mode_{tag}_k{int(idx)}.csv",
                      {"t_ns": rec.times, "re_f": traj.real, "im_f": traj.imag}, resolved,
                      [f"displacement of mode k={int(idx)} at omega={bath.omegas[idx]:.17g} rad/ns"])
        finals[f"abs_f_final_{tag}"] = np.abs(rec.final_displacements)
    write_csv(out / "final_displacements.csv", finals, resolved, ["|f_k(t_f)| per profile"])

    scan = []
    if dc.t_f_scan:
        initial = ground_state(bath, wq)
        for lam in dc.lambdas:
            for t_f in dc.t_f_scan:
                rec = tdvp.evolve(initial, bath, wq, SwitchProfile.rational(lam, t_f), dc.dt,
                                  full_nonlinear=dc.full_nonlinear, store_modes=None)
                scan.append({"lambda": lam, "t_f": t_f, "final_p_plus": rec.final_p_plus,
                             "log10_final_p_plus": _log10(rec.final_p_plus)})
    summary = {"config": resolved, "initial_P_plus": results[0].initial_p_plus if results else None,
               "profiles": rows, "t_f_scan": scan}
    write_json(out / "summary.json", summary)
    return summary


def run_lqr(cfg: ExperimentConfig, out: Path, threads: int = 1) -> Dict[str, Any]:
    resolved = _prepare(out, cfg, "lqr")
    lc = cfg.lqr
    wq = cfg.bath.omega_q
    coarse = cfg.bath.build(lc.n_modes_coarse)
    fine = cfg.bath.build(lc.replay_n_modes or cfg.bath.n_modes)
    n, h = tdvp.step_grid(lc.t_f, lc.dt)
    system = lqr.build_system(coarse, wq, h)
    x0 = system.relaxed_state()
    t_mid = (np.arange(n) + 0.5) * h
    smooth_u = SwitchProfile.rational(2.0, lc.t_f)(t_mid)

    def one(R):
        sol = lqr.optimize(coarse, wq, R, lc.t_f, lc.dt)
        sol.extra["fine_replay_P_plus"] = lqr.evaluate_on_fine_bath(sol.control, fine, wq, h)
        sol.extra["fine_replay_n_modes"] = fine.n_modes
        sol.extra["lambda2_cost"] = lqr.cost(system, smooth_u, x0, R)
        return sol

    sols = _map(one, lc.R, threads)
    rows = []
    for R, sol in zip(lc.R, sols):
        tag = f"R_{R:g}"
        write_csv(out / f"control_{tag}.csv", {"t_ns": t_mid, "u": sol.control}, resolved,
                  [f"LQR control, R={R:.17g} (per-step weight), samples at step midpoints"])
        write_csv(out / f"trajectory_{tag}.csv",
                  {"t_ns": sol.times, "P_plus": sol.p_plus, "log10_P_plus": _log10_arr(sol.p_plus)},
                  resolved, [f"closed-loop population, R={R:.17g}"])
        row = sol.summary()
        row["log10_final_P_plus"] = _log10(sol.final_p_plus)
        rows.append(row)
    summary = {"config": resolved, "relaxed_P_plus": lqr.relaxed_population(coarse, wq), "runs": rows}
    write_json(out / "summary.json", summary)
    return summary


def run_oracle(cfg: ExperimentConfig, out: Path, threads: int = 1) -> Dict[str, Any]:
    resolved = _prepare(out, cfg, "validate")
    oc = cfg.oracle
    wq = cfg.bath.omega_q
    bath = oracle.oracle_bath(oc.n_modes, oc.target_sum_f2, cfg.bath.params)
    profile = SwitchProfile.rational(oc.lam, oc.t_f)
    scales = [0.5 ** k for k in range(oc.halvings + 1)]

    def one(c):
        return oracle.compare_with_tdvp(bath.scaled(c), wq, profile, oc.dt, oc.fock_cutoff, c)

    comps = _map(one, scales, threads)
    disc = [c.relative_discrepancy for c in comps]
    monotone = all(b < a for a, b in zip(disc, disc[1:])) or all(d == 0 for d in disc)
    summary = {"config": resolved, "omegas": bath.omegas, "couplings": bath.couplings,
               "comparisons": [c.as_dict() for c in comps],
               "all_valid": all(c.valid for c in comps), "discrepancy_monotone": monotone}

    # full trajectory at the unscaled coupling for diffing against TDVP output
    initial = ground_state(bath, wq)
    system = oracle.TruncatedSystem.from_bath(bath, wq, oc.fock_cutoff)
    exact = oracle.exact_evolve(system, oracle.prepare_polaron(system, initial.displacements).psi,
                                profile, oc.dt)
    approx = tdvp.evolve(initial, bath, wq, profile, oc.dt)
    write_csv(out / "trajectory.csv",
              {"t_ns": exact.times, "u": approx.u_values, "P_plus_exact": exact.p_plus,
               "P_plus_tdvp": approx.p_plus, "log10_P_plus_exact": _log10_arr(exact.p_plus),
               "log10_P_plus_tdvp": _log10_arr(approx.p_plus)},
              resolved, ["" if exact.valid else "INVALID: Fock-cutoff leakage above limit"])
    write_json(out / "summary.json", summary)
    return summary


COMMANDS = {"ground-state": run_ground_state, "decouple": run_decouple_sweep,
            "lqr": run_lqr, "validate": run_oracle}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polaron-reset", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        p.add_argument("--out", help="output directory (overrides output_dir in the config)")
        p.add_argument("--threads", type=int, default=1, help="parallel jobs for sweeps")
    dump = sub.add_parser("default-config", help="print the default configuration")
    dump.add_argument("--kind", choices=list(COMMANDS))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.command == "default-config":
        cfg = ExperimentConfig(kind=args.kind)
        print(dumps(cfg.to_dict()))
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.kind is not None and cfg.kind != args.command:
        print(f"error: config is for {cfg.kind!r}, not {args.command!r}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output_dir or f"out-{args.command}")
    try:
        summary = COMMANDS[args.command](cfg, out, max(1, args.threads))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = {k: v for k, v in summary.items() if k != "config"}
    log.info("wrote %s", out)
    log.info(dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
