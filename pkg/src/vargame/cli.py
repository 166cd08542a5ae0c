"""Command-line front end.

Four commands: `inspect` prints case diagnostics, `solve` computes one
equilibrium and writes a JSON result, `sweep` runs a cost grid and writes
CSV rows in grid order, `uncertainty` re-evaluates a solved pair under
perturbed demand models and writes a CSV of per-model mismatches.

Every command is deterministic given its flags and seed: floats are
serialized with repr (shortest round trip), strategy vectors as integer
level indices ("0:0:2:1:0:0@3" means levels out of 3), and no output
carries timestamps or machine identity. Repeating a command byte-identically
reproduces its output files.

Exit codes: 0 success, 1 validation (bad flags, malformed case, infeasible
config), 2 capacity (exact enumeration refused; use bpega), 3 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import engine
from .errors import CapacityError
from .ga import GAParams, run_bpega
from .game import AttackAction, DefenseAction, GameConfig
from .grid import build_stiffness, load_case
from .robust import rd_mismatch, solve_rd
from .traversal import solve_cbse
from .uncertainty import generate_models, summary_stats, utility_mismatch

SWEEP_COLUMNS = ["gamma_a", "gamma_d", "gamma_a_est", "u_attacker",
                 "u_defender", "cost_a", "cost_d", "a_vector", "d_vector",
                 "method", "seed", "error"]

UNCERTAINTY_COLUMNS = ["model", "mu_percent", "mean", "std", "min", "p25",
                       "median", "p75", "max", "clip_window"]

METHODS = ("cbbi", "bpega", "rd")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for capacity here."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fnum(x) -> str:
    return repr(float(x))


def _fmt_vec(levels_idx, n_levels: int) -> str:
    return ":".join(str(int(v)) for v in levels_idx) + f"@{n_levels}"


def _json_safe(value):
    if isinstance(value, (AttackAction, DefenseAction)):
        return {"levels": [int(v) for v in value.levels_idx],
                "n_levels": int(value.n_levels)}
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _parse_axis(text: str, flag: str) -> list[float]:
    """Cost axis: a scalar, a comma list, or inclusive START:STEP:STOP.

    Grid values are rounded to 10 decimals so accumulated step error never
    leaks into output columns (0:0.075:1.5 must hit 0.3 exactly).
    """
    try:
        parts = text.split(":")
        if len(parts) == 3:
            start, step, stop = (float(p) for p in parts)
            if step <= 0.0:
                raise ValueError("step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(max(n, 0))]
        if len(parts) != 1:
            raise ValueError("expected VALUE, V1,V2,... or START:STEP:STOP")
        return [round(float(p), 10) for p in text.split(",")]
    except ValueError as exc:
        raise ValueError(f"{flag}: {exc}") from None


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _csv_text(columns, rows) -> str:
    buf = []

    class _Sink:
        def write(self, s):
            buf.append(s)

    w = csv.writer(_Sink(), lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return "".join(buf)


def _ga_params(args) -> GAParams:
    return GAParams(pop_a=args.ga_pop[0], pop_d=args.ga_pop[1],
                    p_c=args.ga_pc, p_m=args.ga_pm,
                    generations=args.ga_gens)


def _base_config(args, gamma_a: float, gamma_d: float) -> GameConfig:
    return GameConfig(gamma_a=gamma_a, gamma_d=gamma_d,
                      levels_a=args.levels[0], levels_d=args.levels[1],
                      mc_samples=args.mc_samples, seed=args.seed)


# ------------------------------------------------------------------ inspect

def cmd_inspect(args) -> int:
    case = load_case(args.case)
    model = build_stiffness(case)
    doc = {
        "name": case.meta.get("name", ""),
        "n_loads": case.n_loads,
        "n_gens": case.n_gens,
        "n_ctrl": len(case.ctrl_idx),
        "ctrl_buses": [int(i) + 1 for i in case.ctrl_idx],
        "delta_nominal": float(model.delta_nominal),
        "cond_B_LL": float(np.linalg.cond(case.B_LL)),
        "cond_Q_crit": float(np.linalg.cond(model.Q_crit)),
        "kernel": engine.kernel_name(),
    }
    _write_text(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


# -------------------------------------------------------------------- solve

def _solve_one(case, method: str, cfg: GameConfig, gamma_a_est,
               params: GAParams, rd_solver: str):
    if method == "cbbi":
        return solve_cbse(case, cfg)
    if method == "bpega":
        return run_bpega(case, cfg, params=params)
    return solve_rd(case, cfg, gamma_a_est, solver=rd_solver, params=params)


def cmd_solve(args) -> int:
    if args.method == "rd" and args.gamma_a_est is None:
        raise ValueError("method rd requires --gamma-a-est")
    if args.method != "rd" and args.gamma_a_est is not None:
        raise ValueError("--gamma-a-est only applies to method rd")
    case = load_case(args.case)
    cfg = _base_config(args, args.gamma_a, args.gamma_d)
    report = None
    if args.method == "rd":
        report = rd_mismatch(case, cfg, args.gamma_a_est,
                             solver=args.rd_solver, params=_ga_params(args))
        eq = report.rd
    else:
        eq = _solve_one(case, args.method, cfg, None,
                        _ga_params(args), args.rd_solver)
    doc = {
        "schema": "vargame-equilibrium-v1",
        "case_name": case.meta.get("name", ""),
        "method": args.method,
        "gamma_a": float(args.gamma_a),
        "gamma_d": float(args.gamma_d),
        "levels": [cfg.levels_a, cfg.levels_d],
        "seed": args.seed,
        "u_attacker": float(eq.u_attacker),
        "u_defender": float(eq.u_defender),
        "cost_a": float(eq.cost_a),
        "cost_d": float(eq.cost_d),
        "attack": _json_safe(eq.attack),
        "defense": _json_safe(eq.defense),
        "metadata": _json_safe(eq.metadata),
    }
    if report is not None:
        doc["gamma_a_est"] = float(args.gamma_a_est)
        doc["mu_rd_percent"] = float(report.mu_rd_percent)
        doc["cbse"] = {
            "u_attacker": float(report.cbse.u_attacker),
            "u_defender": float(report.cbse.u_defender),
            "cost_a": float(report.cbse.cost_a),
            "cost_d": float(report.cbse.cost_d),
            "attack": _json_safe(report.cbse.attack),
            "defense": _json_safe(report.cbse.defense),
        }
    _write_text(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


# -------------------------------------------------------------------- sweep

def _sweep_point(task):
    (path, method, ga, gd, est, la, ld, seed, mc_samples,
     pop_a, pop_d, p_c, p_m, gens, rd_solver) = task
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(gamma_a=_fnum(ga), gamma_d=_fnum(gd), method=method,
               seed=str(seed))
    if est is not None:
        row["gamma_a_est"] = _fnum(est)
    try:
        case = load_case(path)
        cfg = GameConfig(gamma_a=ga, gamma_d=gd, levels_a=la, levels_d=ld,
                         mc_samples=mc_samples, seed=seed)
        params = GAParams(pop_a=pop_a, pop_d=pop_d, p_c=p_c, p_m=p_m,
                          generations=gens)
        eq = _solve_one(case, method, cfg, est, params, rd_solver)
        row.update(u_attacker=_fnum(eq.u_attacker),
                   u_defender=_fnum(eq.u_defender),
                   cost_a=_fnum(eq.cost_a), cost_d=_fnum(eq.cost_d),
                   a_vector=_fmt_vec(eq.attack.levels_idx, la),
                   d_vector=_fmt_vec(eq.defense.levels_idx, ld))
    except Exception as exc:  # per-point failure, sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return [row[c] for c in SWEEP_COLUMNS]


def cmd_sweep(args) -> int:
    axis_a = _parse_axis(args.gamma_a, "--gamma-a")
    axis_d = _parse_axis(args.gamma_d, "--gamma-d")
    if args.method == "rd":
        if args.gamma_a_est is None:
            raise ValueError("method rd requires --gamma-a-est")
        axis_e: list[float | None] = list(
            _parse_axis(args.gamma_a_est, "--gamma-a-est"))
    else:
        if args.gamma_a_est is not None:
            raise ValueError("--gamma-a-est only applies to method rd")
        axis_e = [None]
    if args.jobs < 1:
        raise ValueError("--jobs must be >= 1")

    tasks = [(args.case, args.method, ga, gd, est,
              args.levels[0], args.levels[1], args.seed, args.mc_samples,
              args.ga_pop[0], args.ga_pop[1], args.ga_pc, args.ga_pm,
              args.ga_gens, args.rd_solver)
             for ga in axis_a for gd in axis_d for est in axis_e]
    if args.jobs == 1 or len(tasks) <= 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        # map preserves task order, so rows come out in grid order
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    _write_text(_csv_text(SWEEP_COLUMNS, rows), args.out)
    return 0


# -------------------------------------------------------------- uncertainty

def cmd_uncertainty(args) -> int:
    case = load_case(args.case)
    try:
        with open(args.equilibrium) as fh:
            eq = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{args.equilibrium}: not a valid result file "
                         f"({exc})") from None
    for key in ("case_name", "gamma_a", "gamma_d", "levels",
                "attack", "defense"):
        if key not in eq:
            raise ValueError(
                f"{args.equilibrium}: missing {key!r}; expected a result "
                "written by the solve command")
    name = case.meta.get("name", "")
    if eq["case_name"] != name:
        raise ValueError(
            f"equilibrium was solved on case {eq['case_name']!r}, "
            f"not {name!r}")
    attack = AttackAction(levels_idx=tuple(eq["attack"]["levels"]),
                          n_levels=int(eq["attack"]["n_levels"]))
    defense = DefenseAction(levels_idx=tuple(eq["defense"]["levels"]),
                            n_levels=int(eq["defense"]["n_levels"]))
    cfg = GameConfig(gamma_a=float(eq["gamma_a"]),
                     gamma_d=float(eq["gamma_d"]),
                     levels_a=int(eq["levels"][0]),
                     levels_d=int(eq["levels"][1]),
                     mc_samples=args.mc_samples, seed=args.seed,
                     clip_per_model=args.clip_per_model)
    model = build_stiffness(case)
    model_set = generate_models(case, cfg, sigma=args.sigma,
                                n_models=args.models, model=model)
    mu = utility_mismatch(case, cfg, attack, defense, model_set, model=model)
    stats = summary_stats(mu)
    window = "per_model" if args.clip_per_model else "nominal"
    rows = [[str(i + 1), _fnum(v), "", "", "", "", "", "", "", ""]
            for i, v in enumerate(mu)]
    rows.append(["summary", "", _fnum(stats["mean"]), _fnum(stats["std"]),
                 _fnum(stats["min"]), _fnum(stats["p25"]),
                 _fnum(stats["median"]), _fnum(stats["p75"]),
                 _fnum(stats["max"]), window])
    _write_text(_csv_text(UNCERTAINTY_COLUMNS, rows), args.out)
    return 0


# ------------------------------------------------------------------- parser

def _add_game_flags(p) -> None:
    p.add_argument("--levels", nargs=2, type=int, default=[3, 3],
                   metavar=("LA", "LD"),
                   help="attacker and defender level counts (default 3 3)")
    p.add_argument("--seed", type=int, default=42,
                   help="seed for GA and Monte Carlo draws (default 42)")
    p.add_argument("--mc-samples", type=int, default=100_000,
                   help="Monte Carlo samples for wide supports")
    p.add_argument("--ga-pop", nargs=2, type=int, default=[30, 20],
                   metavar=("SA", "SD"),
                   help="GA population sizes (default 30 20)")
    p.add_argument("--ga-pc", type=float, default=0.85,
                   help="GA crossover probability (default 0.85)")
    p.add_argument("--ga-pm", type=float, default=0.05,
                   help="GA mutation probability (default 0.05)")
    p.add_argument("--ga-gens", type=int, default=30,
                   help="GA generation limit (default 30)")
    p.add_argument("--rd-solver", choices=("cbbi", "bpega"), default="cbbi",
                   help="planning engine for method rd (default cbbi)")
    p.add_argument("--out", default=None,
                   help="output file (default: stdout)")


def _build_parser() -> _Parser:
    ap = _Parser(prog="vargame",
                 description="security-investment games on power grids "
                             "under covert reactive-load attacks")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="case diagnostics as JSON")
    p.add_argument("case")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("solve", help="solve one cost pair")
    p.add_argument("case")
    p.add_argument("method", choices=METHODS)
    p.add_argument("--gamma-a", type=float, required=True,
                   help="attacker cost weight")
    p.add_argument("--gamma-d", type=float, required=True,
                   help="defender cost weight")
    p.add_argument("--gamma-a-est", type=float, default=None,
                   help="estimated attacker weight (method rd)")
    _add_game_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="cost-grid sweep to CSV")
    p.add_argument("case")
    p.add_argument("method", choices=METHODS)
    p.add_argument("--gamma-a", required=True,
                   help="axis: VALUE, V1,V2,... or START:STEP:STOP")
    p.add_argument("--gamma-d", required=True,
                   help="axis: VALUE, V1,V2,... or START:STEP:STOP")
    p.add_argument("--gamma-a-est", default=None,
                   help="estimate axis (method rd)")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent grid points (default 1)")
    _add_game_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("uncertainty",
                       help="demand-uncertainty mismatch of a solved pair")
    p.add_argument("case")
    p.add_argument("equilibrium", help="JSON result from the solve command")
    p.add_argument("--sigma", type=float, default=0.1,
                   help="relative demand std dev (default 0.1)")
    p.add_argument("--models", type=int, default=20,
                   help="number of perturbed models (default 20)")
    p.add_argument("--clip-per-model", action="store_true",
                   help="anchor the clip window at each model's own index")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_uncertainty)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}\nhint: the bpega method avoids exhaustive "
              "enumeration", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
