"""Configuration-driven scenario runner.

Subcommands: ``timemap`` (period / kinetic-energy table), ``profile``
(limit energy profile), ``solve`` (broken-geodesic solution at the first
sweep level), ``sweep`` (all levels plus convergence summary), ``verify``
(re-run the checks against stored CSVs).  Outputs are CSV files with
fixed formatting plus a JSON run manifest; identical configs reproduce
identical bytes.  Exit codes: 0 success, 2 configuration parse error,
3 validation error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .autonomous import build_table
from .bvp_solver import (Block, detect_margin, maximize_partition,
                         quantile_init, select_counts, zero_density_integral)
from .config import ScenarioConfig, load_config
from .diagnostics import accumulation_report, energy_trace, zero_count_report
from .errors import (ConfigError, ConstructionError, DomainError,
                     NumericalError, PlaposcError, ValidationError)
from .limit_profile import (construct_profile, k_antiderivative,
                            profile_residual_field)

__all__ = ["main"]

_FMT = "{:.12e}"


def _write_csv(path: Path, header: list[str], columns) -> None:
    rows = zip(*columns)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_FMT.format(float(v)) if not isinstance(v, str)
                              else v for v in row) + "\n")
    os.replace(tmp, path)


def _write_manifest(out: Path, cfg: ScenarioConfig, subcommand: str,
                    outputs: list[str], checks: list[dict]) -> None:
    payload = {
        "tool": "plaposc",
        "version": __version__,
        "subcommand": subcommand,
        "config_sha256": hashlib.sha256(cfg.raw_text.encode()).hexdigest(),
        "seed": cfg.seed,
        "outputs": sorted(outputs),
        "checks": checks,
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / "manifest.json")


class Runner:
    """Shared lazy pipeline state for one scenario."""

    def __init__(self, cfg: ScenarioConfig, out_dir: str | None = None):
        self.cfg = cfg
        self.out = Path(out_dir or cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.P = cfg.pexp()
        self.Wd = cfg.build_potential()
        self.weight = cfg.build_weight()
        self._table = None
        self._profile = None

    @property
    def table(self):
        if self._table is None:
            self._table = build_table(self.Wd, n_nodes=self.cfg.xi_nodes)
        return self._table

    @property
    def profile(self):
        if self._profile is None:
            spec = self.cfg.support_spec()
            self._profile = construct_profile(spec, self.weight, self.table,
                                              h_bulk=self.cfg.h_bulk)
        return self._profile

    # -- pipeline pieces -------------------------------------------------
    def blocks_for(self, eps: float) -> list[Block]:
        supports = [(s, t) for (_k, s, t) in self.cfg.supports]
        h0 = self.cfg.h0
        if h0 is None:
            h0 = 0.9 * detect_margin(supports, self.weight)
        if self.cfg.counts is not None:
            counts = list(self.cfg.counts)
        else:
            counts = select_counts(eps, supports, self.weight, self.profile,
                                   self.table)
        return [Block(s, t, h0, c) for (s, t), c in zip(supports, counts)]

    def solve_level(self, eps: float):
        blocks = self.blocks_for(eps)
        tau0 = quantile_init(blocks, self.weight, self.profile, self.table)
        part, sol = maximize_partition(
            eps, blocks, self.weight, self.Wd,
            cells_per_eps=self.cfg.cells_per_eps, initial_tau=tau0)
        return part, sol

    def solution_checks(self, sol, eps: float) -> list[dict]:
        tol = self.cfg.tolerances
        trace = energy_trace(sol, self.weight, self.Wd)
        dev = float(np.max(np.abs(
            trace.e_values - self.profile.interp(trace.x_grid))))
        el = max(pc.grad_residual for pc in sol.pieces)
        energy_tol = max(tol["energy_residual"],
                         2.0 / (self.cfg.cells_per_eps ** 2 * eps))
        checks = [
            dict(check=f"el_residual[{eps:g}]", value=el,
                 tol=tol["el_residual"], ok=el < tol["el_residual"]),
            dict(check=f"neumann_left[{eps:g}]",
                 value=abs(float(sol.uprime_values[0])),
                 tol=tol["neumann"],
                 ok=abs(float(sol.uprime_values[0])) < tol["neumann"]),
            dict(check=f"neumann_right[{eps:g}]",
                 value=abs(float(sol.uprime_values[-1])),
                 tol=tol["neumann"],
                 ok=abs(float(sol.uprime_values[-1])) < tol["neumann"]),
            dict(check=f"junction_mismatch[{eps:g}]",
                 value=sol.junction_mismatch, tol=tol["junction"],
                 ok=sol.junction_mismatch < tol["junction"]),
            dict(check=f"energy_identity[{eps:g}]",
                 value=trace.max_residual, tol=energy_tol,
                 ok=trace.max_residual < energy_tol),
            dict(check=f"energy_deviation[{eps:g}]", value=dev,
                 tol=0.2 * self.Wd.w_zero,
                 ok=dev < 0.2 * self.Wd.w_zero),
        ]
        return checks

    def write_solution(self, sol, eps: float) -> list[str]:
        P = self.P
        lv = np.abs(eps * np.asarray(sol.uprime_values)) ** P.p / P.p_star
        e_eps = -lv / np.asarray(self.weight.a(sol.x_grid)) \
            + np.asarray(self.Wd.w(sol.u_values))
        sol_name = f"solution_eps{eps:.6f}.csv"
        _write_csv(self.out / sol_name,
                   ["x", "u", "uprime", "E_eps"],
                   [sol.x_grid, sol.u_values, sol.uprime_values, e_eps])
        tau = sol.tau_star.tau
        junc_name = f"junctions_eps{eps:.6f}.csv"
        _write_csv(self.out / junc_name,
                   ["j", "tau", "d_left", "d_right", "m"],
                   [[float(j) for j in range(len(tau))], tau,
                    [sol.pieces[j].d_right for j in range(len(tau))],
                    [sol.pieces[j + 1].d_left for j in range(len(tau))],
                    [sol.pieces[j].m_value for j in range(len(tau))]])
        return [sol_name, junc_name]


def cmd_timemap(runner: Runner) -> list[str]:
    table = runner.table
    g_vals = np.array([k_antiderivative(float(x), table)
                       for x in table.xi_grid])
    _write_csv(runner.out / "timemap.csv", ["xi", "T", "K", "G"],
               [table.xi_grid, table.t_values, table.k_values, g_vals])
    return ["timemap.csv"]


def cmd_profile(runner: Runner) -> list[str]:
    prof = runner.profile
    res = profile_residual_field(prof, runner.weight, runner.table)
    _write_csv(runner.out / "profile.csv", ["x", "E", "residual"],
               [prof.x_grid, prof.e_values, res])
    return ["profile.csv"]


def cmd_solve(runner: Runner) -> tuple[list[str], list[dict]]:
    if not runner.cfg.epsilons:
        raise ValidationError("solve requires at least one epsilon")
    eps = runner.cfg.epsilons[0]
    _part, sol = runner.solve_level(eps)
    outputs = runner.write_solution(sol, eps)
    checks = runner.solution_checks(sol, eps)
    return outputs, checks


def _sweep_level(cfg_text: str, out_dir: str, eps: float):
    """Worker for one sweep level (used by the process pool)."""
    from .config import parse_config
    cfg = parse_config(cfg_text)
    runner = Runner(cfg, out_dir)
    _part, sol = runner.solve_level(eps)
    outputs = runner.write_solution(sol, eps)
    checks = runner.solution_checks(sol, eps)
    trace = energy_trace(sol, runner.weight, runner.Wd)
    dev = float(np.max(np.abs(
        trace.e_values - runner.profile.interp(trace.x_grid))))
    summary = dict(eps=eps, zeros=len(sol.zero_locations),
                   junction_mismatch=sol.junction_mismatch,
                   el_residual=max(pc.grad_residual for pc in sol.pieces),
                   energy_identity=trace.max_residual,
                   energy_deviation=dev)
    zero_list = [float(z) for z in sol.zero_locations]
    return outputs, checks, summary, zero_list


def cmd_sweep(runner: Runner, jobs: int = 1) -> tuple[list[str], list[dict]]:
    cfg = runner.cfg
    if not cfg.epsilons:
        raise ValidationError("sweep requires epsilons")
    eps_list = sorted(cfg.epsilons, reverse=True)
    results = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {eps: pool.submit(_sweep_level, cfg.raw_text,
                                     str(runner.out), eps)
                    for eps in eps_list}
            for eps, fut in futs.items():
                results[eps] = fut.result()
    else:
        for eps in eps_list:
            results[eps] = _sweep_level(cfg.raw_text, str(runner.out), eps)

    outputs: list[str] = []
    checks: list[dict] = []
    rows = []

    class _Sol:
        def __init__(self, eps, zeros):
            self.epsilon = eps
            self.zero_locations = np.asarray(zeros)

    sols = []
    for eps in eps_list:
        out_i, checks_i, summary, zeros = results[eps]
        outputs.extend(out_i)
        checks.extend(checks_i)
        rows.append(summary)
        sols.append(_Sol(eps, zeros))
    zr = zero_count_report(sols, runner.profile, runner.weight, runner.table)
    ar = accumulation_report(sols, runner.profile, runner.weight)
    for i, row in enumerate(rows):
        row["eps_z"] = zr.eps_z[i]
        row["zero_rel_err"] = zr.rel_errors[i]
        row["dist_supp_to_zeros"] = ar.dist_support_to_zeros[i]
        row["dist_zeros_to_allowed"] = ar.dist_zeros_to_allowed[i]
    devs = [row["energy_deviation"] for row in rows]
    checks.append(dict(check="energy_deviation_decreasing",
                       value=float(devs[-1]), tol=float(devs[0]),
                       ok=all(d2 < d1 for d1, d2 in zip(devs, devs[1:]))))
    checks.append(dict(check="energy_deviation_final",
                       value=float(devs[-1]),
                       tol=0.05 * runner.Wd.w_zero,
                       ok=devs[-1] < 0.05 * runner.Wd.w_zero))
    checks.append(dict(check="zero_count_trend",
                       value=float(zr.rel_errors[-1]),
                       tol=float(zr.rel_errors[0]),
                       ok=bool(zr.decreasing_tail)))
    cols = ["eps", "zeros", "eps_z", "zero_rel_err", "junction_mismatch",
            "el_residual", "energy_identity", "energy_deviation",
            "dist_supp_to_zeros", "dist_zeros_to_allowed"]
    _write_csv(runner.out / "summary.csv", cols,
               [[row[c] for row in rows] for c in cols])
    outputs.append("summary.csv")
    return outputs, checks


def cmd_verify(runner: Runner) -> tuple[list[str], list[dict]]:
    """Re-run the checks against the stored solution CSVs."""
    from .ptrig import phi_p
    cfg = runner.cfg
    checks: list[dict] = []
    for eps in sorted(cfg.epsilons, reverse=True):
        sol_path = runner.out / f"solution_eps{eps:.6f}.csv"
        junc_path = runner.out / f"junctions_eps{eps:.6f}.csv"
        if not sol_path.exists() or not junc_path.exists():
            raise ValidationError(
                f"missing stored solution for eps = {eps:g} in {runner.out}")
        data = np.loadtxt(sol_path, delimiter=",", skiprows=1, ndmin=2)
        x, u, up = data[:, 0], data[:, 1], data[:, 2]
        jdata = np.loadtxt(junc_path, delimiter=",", skiprows=1, ndmin=2)
        tau = jdata[:, 1]
        d_left, d_right = jdata[:, 2], jdata[:, 3]
        mism = float(np.max(np.abs(np.abs(d_left) - np.abs(d_right)))) \
            if len(tau) else 0.0
        # discrete Euler-Lagrange residual piece by piece
        knots = np.concatenate([[x[0]], tau, [x[-1]]])
        el = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            m = (x >= lo - 1e-12) & (x <= hi + 1e-12)
            xp, upc = x[m], u[m]
            if len(xp) < 3:
                continue
            h = xp[1] - xp[0]
            du = np.diff(upc) / h
            flux = eps ** runner.P.p * phi_p(du, runner.P)
            am = np.asarray(runner.weight.a(0.5 * (xp[:-1] + xp[1:])))
            wp = np.asarray(runner.Wd.w_prime(0.5 * (upc[:-1] + upc[1:])))
            g = -np.diff(flux) / h + 0.5 * (am[:-1] * wp[:-1] + am[1:] * wp[1:])
            if g.size:
                el = max(el, float(np.max(np.abs(g))))
        tol = cfg.tolerances
        energy_tol = max(tol["energy_residual"],
                         2.0 / (cfg.cells_per_eps ** 2 * eps))

        class _Sol:
            epsilon = eps
            x_grid = x
            u_values = u
            uprime_values = up
            pieces = None

        trace = energy_trace(_Sol(), runner.weight, runner.Wd)
        dev = float(np.max(np.abs(
            trace.e_values - runner.profile.interp(trace.x_grid))))
        checks.extend([
            dict(check=f"el_residual[{eps:g}]", value=el,
                 tol=tol["el_residual"], ok=el < tol["el_residual"]),
            dict(check=f"neumann_left[{eps:g}]", value=abs(float(up[0])),
                 tol=tol["neumann"], ok=abs(float(up[0])) < tol["neumann"]),
            dict(check=f"neumann_right[{eps:g}]", value=abs(float(up[-1])),
                 tol=tol["neumann"], ok=abs(float(up[-1])) < tol["neumann"]),
            dict(check=f"junction_mismatch[{eps:g}]", value=mism,
                 tol=tol["junction"], ok=mism < tol["junction"]),
            dict(check=f"energy_deviation[{eps:g}]", value=dev,
                 tol=0.2 * runner.Wd.w_zero,
                 ok=dev < 0.2 * runner.Wd.w_zero),
        ])
    _write_csv(runner.out / "checks.csv",
               ["check", "target", "value", "tol", "pass"],
               [[c["check"] for c in checks],
                [0.0 for _ in checks],
                [c["value"] for c in checks],
                [c["tol"] for c in checks],
                ["1" if c["ok"] else "0" for c in checks]])
    return ["checks.csv"], checks


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plaposc",
        description="phase-plane analysis and oscillatory solutions of "
                    "singularly perturbed p-Laplacian Neumann problems")
    parser.add_argument("subcommand",
                        choices=["timemap", "profile", "solve", "verify",
                                 "sweep"])
    parser.add_argument("--config", required=True, help="scenario file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel sweep levels")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        np.random.seed(cfg.seed % (2 ** 32))
        runner = Runner(cfg, args.out)
        checks: list[dict] = []
        if args.subcommand == "timemap":
            outputs = cmd_timemap(runner)
        elif args.subcommand == "profile":
            outputs = cmd_profile(runner)
        elif args.subcommand == "solve":
            outputs, checks = cmd_solve(runner)
        elif args.subcommand == "sweep":
            outputs, checks = cmd_sweep(runner, jobs=max(1, args.jobs))
        else:
            outputs, checks = cmd_verify(runner)
        _write_manifest(runner.out, cfg, args.subcommand,
                        outputs, checks)
    except ConfigError as ex:
        print(f"plaposc: config error: {ex}", file=sys.stderr)
        return 2
    except (ValidationError, DomainError) as ex:
        print(f"plaposc: validation error: {ex}", file=sys.stderr)
        return 3
    except (NumericalError, ConstructionError) as ex:
        print(f"plaposc: numerical error: {ex}", file=sys.stderr)
        return 4
    except PlaposcError as ex:
        print(f"plaposc: error: {ex}", file=sys.stderr)
        return 4
    for c in checks:
        status = "pass" if c["ok"] else "FAIL"
        print(f"{c['check']}: value={c['value']:.3e} tol={c['tol']:.3e} "
              f"{status}")
    if checks and not all(c["ok"] for c in checks):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
