"""Command-line orchestration of the check/evolve/perturb/favard/transport/
convergence pipelines.

Exit codes: 0 all verdicts pass, 1 at least one verdict fails (witnesses in
the report), 2 configuration or IO error.  Runs are deterministic given the
config and seed; `--stable` drops wall-clock timings so that two identical
runs produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import assumptions as asm
from . import config as cfg
from . import evolution as evo
from . import perturbation as per
from . import transport as trn
from .errors import ConfigurationError, ConvergenceError, DomainError, NumericError
from .reporting import (StageTimer, config_hash, dump_json, environment_stamp,
                        write_csv)
from .semigroup import FrozenOperator, favard_norm
from .spectral import (GridFunction, extrapolated_norm, norm, save_function,
                       spectral_tail_fraction, xminus1_model_ratio)

TAIL_WARN = 1e-8


def _witness_row(check: str, constant: str, value, refined, delta, w: dict):
    lam = w.get("lambda") or [None, None]
    xi = w.get("xi")
    return [check, constant, value, refined, delta,
            w.get("t"), w.get("s"), w.get("tau"),
            lam[0] if lam else None, lam[1] if lam else None,
            ";".join(format(float(v), ".17g") for v in xi) if xi else None]


def run_check(config: dict, out: Path, seed: int, refine: int):
    spec = cfg.build_symbol(config["symbol"])
    grid = cfg.build_grid(config["grid"])
    theta = float(config.get("theta", 3.0 * np.pi / 4.0))
    plan = cfg.build_plan(config.get("plans"), seed)
    if refine > 1:
        plan = plan.refined(refine)
    rng = np.random.default_rng(seed)
    vec_cfg = config.get("vectors", {})
    from .spectral import random_band_limited
    vectors = [random_band_limited(grid, rng, band=int(vec_cfg.get("band", 4)))
               for _ in range(int(vec_cfg.get("count", 4)))]

    timer = StageTimer()
    from .symbols import certify_ellipticity
    flat_xi = np.stack([c.reshape(-1) for c in
                        (np.broadcast_to(ax, grid.shape) for ax in grid.xi_axes())],
                       axis=1)
    ellip = certify_ellipticity(spec, time_samples=plan.time_samples,
                                frequencies=flat_xi)
    timer.mark("ellipticity")
    a1 = asm.check_sector(spec, grid, theta, plan)
    timer.mark("a1_sector")
    a2 = asm.check_norm_equivalence(spec, grid, plan)
    timer.mark("a2_equivalence")
    a3 = asm.check_operator_lipschitz(spec, grid, plan)
    timer.mark("a3_lipschitz")
    kato = asm.check_kato_stability(spec, grid, plan)
    timer.mark("kato")
    cprime = asm.check_resolvent_lipschitz(spec, grid, theta, plan)
    timer.mark("resolvent_lipschitz")
    csemi = asm.check_semigroup_lipschitz(spec, grid, plan)
    timer.mark("semigroup_lipschitz")
    commuting = asm.check_commuting(spec, grid, vectors, seed=seed)
    timer.mark("commuting")
    cd = asm.certify_cd_system(spec, grid, vectors, plan)
    timer.mark("cd_system")
    # the dual-scale model comparison needs an invertible reference symbol
    models = xminus1_model_ratio(spec, grid, vectors) if ellip.verdict else None
    thin = asm.SamplePlan(seed=seed, time_samples=max(plan.time_samples // 4, 8),
                          moduli_per_ray=max(plan.moduli_per_ray // 2, 8))
    theta_star = asm.largest_passing_theta(spec, grid, thin)
    timer.mark("theta_scan")

    chain_ok = bool(cprime.value <= a1.m**2 * a3.value * 1.05 + 1e-12)
    deltas = {
        "a1": a1.refinement_delta, "a2": a2.refinement_delta,
        "a3": a3.refinement_delta, "kato": kato.refinement_delta,
        "resolvent_lipschitz": cprime.refinement_delta,
        "semigroup_lipschitz": csemi.refinement_delta,
    }
    stable = bool(all(d <= 0.05 for d in deltas.values()))
    verdicts = {
        "ellipticity": ellip.verdict,
        "a1": a1.verdict, "a2": a2.verdict, "a3": a3.verdict,
        "kato": kato.verdict,
        "resolvent_lipschitz": cprime.verdict,
        "semigroup_lipschitz": csemi.verdict,
        "lemma_chain": chain_ok,
        "commuting": bool(commuting <= 1e-12),
        "cd_system_x": cd.pass_x, "cd_system_xminus1": cd.pass_xminus1,
        "refinement_stable": stable,
    }

    assumptions_doc = {
        "a1": {"theta": theta, "M": a1.m, "pass": a1.verdict,
               "witness": a1.witness},
        "a2": {"kappa": a2.kappa, "pass": a2.verdict},
        "a3": {"L": a3.value, "pass": a3.verdict},
        "kato": {"M": kato.m, "omega": kato.omega, "kmax": kato.kmax,
                 "pass": kato.verdict},
        "resolvent_lipschitz": {"Cprime": cprime.value, "pass": cprime.verdict},
        "cd_system": {"pass_X": cd.pass_x, "pass_Xminus1": cd.pass_xminus1},
    }
    dump_json(assumptions_doc, out / "assumptions.json")

    header = ["check", "constant", "value", "refined_value", "rel_delta",
              "t", "s", "tau", "lambda_re", "lambda_im", "xi"]
    rows = [
        _witness_row("a1", "M", a1.m, a1.refined_m, a1.refinement_delta, a1.witness),
        _witness_row("a2_upper", "kappa", a2.kappa, a2.refined_kappa,
                     a2.refinement_delta, a2.witness_upper),
        _witness_row("a2_lower", "kappa", a2.kappa, a2.refined_kappa,
                     a2.refinement_delta, a2.witness_lower),
        _witness_row("a3", "L", a3.value, a3.refined_value,
                     a3.refinement_delta, a3.witness),
        _witness_row("resolvent_lipschitz", "Cprime", cprime.value,
                     cprime.refined_value, cprime.refinement_delta, cprime.witness),
        _witness_row("semigroup_lipschitz", "C", csemi.value,
                     csemi.refined_value, csemi.refinement_delta, csemi.witness),
        _witness_row("cd_strong_lipschitz", "quotient", cd.strong_lipschitz,
                     None, None, cd.witness),
        _witness_row("ellipticity_c", "c", ellip.constant, None, None,
                     {"t": ellip.witness_constant[0]}),
        _witness_row("ellipticity_omega", "omega", ellip.lower_bound, None, None,
                     {"t": ellip.witness_lower[0]}),
    ]
    write_csv(out / "extrema.csv", header, rows)

    report = {
        "ellipticity": ellip, "a1": a1, "a2": a2, "a3": a3, "kato": kato,
        "resolvent_lipschitz": cprime, "semigroup_lipschitz": csemi,
        "lemma_chain": {"Cprime": cprime.value, "M2L": a1.m**2 * a3.value,
                        "pass": chain_ok},
        "commuting_defect": commuting, "cd_system": cd,
        "xminus1_models": models, "largest_passing_theta": theta_star,
        "refinement_deltas": deltas,
        "verdicts": verdicts,
    }
    return (0 if all(verdicts.values()) else 1), report, timer


def run_evolve(config: dict, out: Path, seed: int, refine: int):
    spec = cfg.build_symbol(config["symbol"])
    grid = cfg.build_grid(config["grid"])
    engine = cfg.build_engine(config.get("engine"), spec, grid)
    section = config.get("evolve")
    if section is None:
        raise ConfigurationError("config has no 'evolve' section")
    s, t = float(section["s"]), float(section["t"])
    rng = np.random.default_rng(seed)
    initial = cfg.build_initial(section["initial"], grid, rng)
    tail = spectral_tail_fraction(initial)

    timer = StageTimer()
    result = engine.propagate(s, t, initial)
    save_function(result, out / "evolved")
    timer.mark("propagate")

    mid = 0.5 * (s + t)
    triples = [(s, mid, t)]
    triples += [tuple(np.sort(rng.uniform(s, t, 3))) for _ in range(4)]
    cocycle = max(evo.cocycle_defect(engine, *tr, initial) for tr in triples)

    h0 = evo.default_derivative_step(s, t)
    inner_t = min(t, spec.horizon - 2 * h0)
    inner_s = max(s, 2 * h0) if s > 0 else s
    d_dt = [evo.derivative_defect(engine, s, inner_t, initial, h=h, which="dt")
            for h in (h0, h0 / 2)]
    ds_point = max(inner_s, 2 * h0)
    d_ds = [evo.derivative_defect(engine, ds_point, t, initial, h=h, which="ds")
            for h in (h0, h0 / 2)]
    timer.mark("defects")

    ts = np.linspace(0.0, spec.horizon, 64)
    a = spec.time_matrix(ts, grid.xi_axes()).reshape(len(ts), -1)
    omega = -float(np.min(a.real))
    pairs = [tuple(np.sort(rng.uniform(0.0, spec.horizon, 2))) for _ in range(16)]
    growth = evo.growth_bound(engine, pairs, m=1.0, omega=omega)
    timer.mark("growth")

    step_counts = [16, 32, 64, 128]
    conv_rows, orders = [], {}
    for rule in ("left", "midpoint"):
        errs = evo.product_formula_errors(spec, grid, s, t, initial, rule,
                                          step_counts)
        orders[rule] = evo.observed_orders(errs)
        for n, e in zip(step_counts, errs):
            conv_rows.append([rule, n, e])
    write_csv(out / "evolution_convergence.csv", ["rule", "steps", "l2_error"],
              conv_rows)
    timer.mark("convergence")

    verdicts = {
        "cocycle": bool(cocycle <= 1e-10 if engine.method == "exact" else True),
        "derivative_dt_order": bool(1.7 <= np.log2(d_dt[0] / d_dt[1]) <= 2.3),
        "derivative_ds_order": bool(1.7 <= np.log2(d_ds[0] / d_ds[1]) <= 2.3),
        "growth": growth.verdict,
        "left_order": bool(all(0.8 <= o <= 1.2 for o in orders["left"])),
        "midpoint_order": bool(all(1.7 <= o <= 2.3 for o in orders["midpoint"])),
        "spectral_tail": bool(tail <= TAIL_WARN),
    }
    report = {
        "s": s, "t": t, "cocycle_defect": cocycle,
        "derivative_dt_defects": d_dt, "derivative_ds_defects": d_ds,
        "growth": growth, "product_orders": orders,
        "spectral_tail_fraction": tail,
        "verdicts": verdicts,
    }
    return (0 if all(verdicts.values()) else 1), report, timer


def run_perturb(config: dict, out: Path, seed: int, refine: int):
    spec = cfg.build_symbol(config["symbol"])
    grid = cfg.build_grid(config["grid"])
    engine = cfg.build_engine(config.get("engine"), spec, grid)
    section = config.get("perturb")
    if section is None:
        raise ConfigurationError("config has no 'perturb' section")
    s, t = float(section["s"]), float(section["t"])
    rng = np.random.default_rng(seed)
    x = cfg.build_initial(section["initial"], grid, rng)
    family = cfg.build_perturbation(config.get("perturbation"), spec.dim)
    solver = cfg.build_solver(config.get("solver"))
    tail = spectral_tail_fraction(x)

    timer = StageTimer()
    traj = per.solve_perturbed(engine, family, s, t, x, solver)
    timer.mark("solve")
    gauge = extrapolated_norm(spec, 0.0)
    rows = [[float(sig), norm(v), norm(v, gauge)]
            for sig, v in zip(traj.sigmas, traj.states)]
    write_csv(out / "trajectory.csv", ["sigma", "norm_X", "norm_Xminus1"], rows)

    residual = per.duhamel_residual(traj, engine, family, s, x)
    timer.mark("duhamel")

    oracle_error, oracle_orders = None, None
    if getattr(family, "has_integral", False):
        oracle = per.commuting_oracle(engine, family, s, t, x)
        errs = []
        for m_steps in (solver.steps // 4, solver.steps // 2, solver.steps):
            tr = per.solve_perturbed(engine, family, s, t, x,
                                     per.VolterraSolver(m_steps, solver.tolerance,
                                                        solver.max_sweeps))
            errs.append(norm(GridFunction(grid, "frequency",
                                          tr.final().values - oracle.values)))
        oracle_error = errs[-1]
        oracle_orders = evo.observed_orders(errs)
    timer.mark("oracle")

    family_rep = per.perturbed_family_checks(
        engine, family, s, 0.5 * (s + t), t, x,
        per.VolterraSolver(max(solver.steps // 2, 8), solver.tolerance,
                           solver.max_sweeps))
    timer.mark("family_checks")

    from .spectral import indicator
    reg = per.perturbation_regularity_report(family, [indicator(grid), x], spec)
    timer.mark("regularity")

    verdicts = {
        "duhamel": bool(residual <= 1e-6),
        "envelope": family_rep.envelope_ok,
        "picard": bool(traj.sweeps_max <= solver.max_sweeps),
        "spectral_tail": bool(tail <= TAIL_WARN),
    }
    if oracle_error is not None:
        verdicts["oracle"] = bool(oracle_error <= 1e-6)
        verdicts["oracle_order"] = bool(all(1.7 <= o <= 2.3 for o in oracle_orders))
    report = {
        "s": s, "t": t, "steps": solver.steps,
        "duhamel_residual": residual,
        "oracle_error": oracle_error, "oracle_orders": oracle_orders,
        "cocycle_defect": family_rep.cocycle_defect,
        "envelope": {"M": family_rep.envelope_m,
                     "omega": family_rep.envelope_omega,
                     "ok": family_rep.envelope_ok},
        "picard": {"max_sweeps": traj.sweeps_max,
                   "last_residual": traj.last_residual,
                   "contraction": traj.contraction},
        "regularity": reg,
        "spectral_tail_fraction": tail,
        "verdicts": verdicts,
    }
    return (0 if all(verdicts.values()) else 1), report, timer


def run_favard(config: dict, out: Path, seed: int, refine: int):
    spec = cfg.build_symbol(config["symbol"])
    grid = cfg.build_grid(config["grid"])
    section = config.get("favard", {})
    times = [float(v) for v in section.get("times", [0.0])]
    rng = np.random.default_rng(seed)
    initial_cfg = section.get("initial", {"kind": "random_band", "band": 4})
    f = cfg.build_initial(initial_cfg, grid, rng)

    timer = StageTimer()
    results, ok = [], True
    for s in times:
        op = FrozenOperator(spec, s)
        f1 = favard_norm(op, f, "F1")
        f0 = favard_norm(op, f, "F0")
        target_f1 = norm(op.apply(f))
        target_f0 = norm(f)
        gap1 = abs(f1.value - target_f1) / max(target_f1, 1e-300)
        gap0 = abs(f0.value - target_f0) / max(target_f0, 1e-300)
        ok = ok and gap1 <= 0.01 and gap0 <= 0.01
        results.append({"time": s, "f1": f1, "f1_target": target_f1,
                        "f1_gap": gap1, "f0": f0, "f0_target": target_f0,
                        "f0_gap": gap0})
    timer.mark("favard")
    verdicts = {"favard_identities": bool(ok)}
    report = {"times": times, "results": results, "verdicts": verdicts}
    return (0 if ok else 1), report, timer


def run_transport(config: dict, out: Path, seed: int, refine: int):
    section = config.get("transport")
    if section is None:
        raise ConfigurationError("config has no 'transport' section")
    problem = cfg.build_transport(section)
    f0_fn = cfg.build_transport_initial(section["initial"])
    f0 = trn.sample_initial(problem, f0_fn)
    s = float(section.get("s", 0.0))
    t = float(section.get("t", problem.horizon))
    r = float(section.get("r", s))

    timer = StageTimer()
    state = trn.transport_solve(problem, s, t, f0, record_history=True)
    write_csv(out / "transport_series.csv", ["time", "mass", "l1_norm"],
              state.history)
    write_csv(out / "transport_profile.csv", ["x", "f"],
              list(zip(problem.centers(), state.values)))
    timer.mark("solve")

    checks = trn.transport_family_checks(problem, min(r, s), 0.5 * (s + t), t, f0)
    timer.mark("family_checks")

    orders = None
    oracle_ok = problem.velocity.is_constant and problem.decay.is_constant
    if oracle_ok:
        refinements = section.get("refinements", [problem.cells // 4,
                                                  problem.cells // 2,
                                                  problem.cells])
        def factory(cells):
            return trn.TransportProblem(problem.horizon, problem.x_max, cells,
                                        problem.velocity, problem.decay)
        errs = trn.convergence_study(factory, s, t, f0_fn, refinements)
        orders = evo.observed_orders(errs)
    timer.mark("convergence")

    verdicts = {
        "cocycle": bool(checks.cocycle_defect <= 1e-12),
        "decay": checks.decay_ok,
        "mass_balance": bool(checks.mass_balance_defect <= 1e-12),
    }
    if orders is not None:
        verdicts["order"] = bool(all(o >= 0.45 for o in orders))
    report = {
        "cells": problem.cells, "s": s, "t": t,
        "final_mass": state.mass(), "outflow": state.outflow,
        "family_checks": checks, "convergence_orders": orders,
        "verdicts": verdicts,
    }
    return (0 if all(verdicts.values()) else 1), report, timer


def run_convergence(config: dict, out: Path, seed: int, refine: int):
    spec = cfg.build_symbol(config["symbol"])
    grid = cfg.build_grid(config["grid"])
    section = config.get("convergence", {})
    s = float(section.get("s", 0.0))
    t = float(section.get("t", min(spec.horizon, 2.0)))
    steps = [int(v) for v in section.get("steps", [32, 64, 128, 256])]
    rng = np.random.default_rng(seed)
    initial_cfg = section.get("initial", {"kind": "random_band", "band": 4})
    f = cfg.build_initial(initial_cfg, grid, rng)

    timer = StageTimer()
    rows, orders = [], {}
    for rule in ("left", "midpoint"):
        errs = evo.product_formula_errors(spec, grid, s, t, f, rule, steps)
        orders[rule] = evo.observed_orders(errs)
        for n, e in zip(steps, errs):
            rows.append([rule, n, e])
    write_csv(out / "convergence.csv", ["rule", "steps", "l2_error"], rows)
    timer.mark("convergence")

    verdicts = {
        "left_order": bool(all(0.8 <= o <= 1.2 for o in orders["left"])),
        "midpoint_order": bool(all(1.7 <= o <= 2.3 for o in orders["midpoint"])),
    }
    report = {"s": s, "t": t, "steps": steps, "orders": orders,
              "verdicts": verdicts}
    return (0 if all(verdicts.values()) else 1), report, timer


PIPELINES = {
    "check": run_check,
    "evolve": run_evolve,
    "perturb": run_perturb,
    "favard": run_favard,
    "transport": run_transport,
    "convergence": run_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evofam",
        description="Certify and exercise evolution families for "
                    "time-dependent multiplier generators.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in PIPELINES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--stable", action="store_true",
                       help="omit timings for byte-identical reports")
        p.add_argument("--refine", type=int, default=1,
                       help="sample-plan density multiplier")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = cfg.load_config(args.config)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else int(config.get("seed", 1))

    try:
        code, report, timer = PIPELINES[args.subcommand](config, out, seed,
                                                         max(args.refine, 1))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ConvergenceError, DomainError) as exc:
        dump_json({"error": str(exc),
                   "witness": getattr(exc, "witness", None)},
                  out / "report.json")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1

    envelope = {
        "subcommand": args.subcommand,
        "seed": seed,
        "config_hash": config_hash(config),
        "environment": environment_stamp(),
        "report": report,
    }
    if not args.stable:
        envelope["timings"] = timer.stages
    dump_json(envelope, out / "report.json")
    for name, value in sorted(report["verdicts"].items()):
        print(f"{name}: {'pass' if value else 'FAIL'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
