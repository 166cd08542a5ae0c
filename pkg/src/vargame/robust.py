"""Robust defense when the attacker's budget weight is uncertain.

The defender knows its own cost weight but only an estimate of the
attacker's. The robust defense is chosen by planning against the estimated
attacker (every defense is scored by the estimated best response, and the
best-scoring defense wins with the canonical tie-breaks), after which the
realized attacker answers with its best response under the true weight.

A lower estimated weight means a richer feasible attack set, so the
estimated defender utility is a pessimistic bound: estimated <= realized,
and the realized utility can never beat the full-information equilibrium.
The mismatch report quantifies the price of planning with a wrong estimate.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from . import engine
from .errors import CapacityError
from .game import GameConfig, action_cost
from .ga import GAParams, attacker_response_ga, run_bpega
from .grid import GridCase, StiffnessModel, build_stiffness
from .traversal import Equilibrium, best_response, solve_cbse

_SOLVERS = ("cbbi", "bpega")


@dataclasses.dataclass(frozen=True)
class RDReport:
    """Robust-defense outcome next to the full-information equilibrium."""

    rd: Equilibrium
    cbse: Equilibrium
    mu_rd_percent: float


def _check_estimate(gamma_a_est: float, gamma_a: float) -> None:
    if not (np.isfinite(gamma_a_est) and gamma_a_est >= 0.0):
        raise ValueError(
            f"gamma_a_est must be finite and >= 0, got {gamma_a_est}")
    if gamma_a_est > gamma_a:
        warnings.warn(
            f"gamma_a_est={gamma_a_est} exceeds the true gamma_a={gamma_a}; "
            "the estimated utility is no longer a pessimistic bound",
            stacklevel=3)


def solve_rd(case: GridCase, cfg: GameConfig, gamma_a_est: float,
             solver: str = "cbbi", params: GAParams | None = None,
             model: StiffnessModel | None = None) -> Equilibrium:
    """Robust defense under an estimated attacker budget weight.

    Plans the defense against the estimated attacker using the requested
    solver, then evaluates it against the true attacker's best response.
    The reported utilities are the realized ones; metadata carries the
    estimate and the planned (estimated) figures.
    """
    if solver not in _SOLVERS:
        raise ValueError(f"solver must be one of {_SOLVERS}, not {solver!r}")
    _check_estimate(gamma_a_est, cfg.gamma_a)
    if model is None:
        model = build_stiffness(case)
    est_cfg = dataclasses.replace(cfg, gamma_a=gamma_a_est)

    if solver == "cbbi":
        planned = solve_cbse(case, est_cfg, model)
    else:
        planned = run_bpega(case, est_cfg, params, model)
    d_rd = planned.defense

    ctx = engine.build_context(model, case)
    try:
        attack, u_att = best_response(ctx, case, cfg, d_rd)
        response_engine = "traversal"
    except CapacityError:
        if solver == "cbbi":
            raise
        attack, u_att = attacker_response_ga(case, cfg, d_rd, params, ctx=ctx)
        response_engine = "ga"

    return Equilibrium(
        attack=attack,
        defense=d_rd,
        u_attacker=u_att,
        u_defender=-u_att,
        cost_a=action_cost(attack.levels_idx, cfg.levels_a, cfg.gamma_a),
        cost_d=action_cost(d_rd.levels_idx, cfg.levels_d, cfg.gamma_d),
        metadata={
            "method": "rd",
            "solver": solver,
            "response_engine": response_engine,
            "gamma_a_est": float(gamma_a_est),
            "estimated_u_defender": planned.u_defender,
            "estimated_attack": list(planned.attack.levels_idx),
            "kernel": engine.kernel_name(),
        },
    )


def rd_mismatch(case: GridCase, cfg: GameConfig, gamma_a_est: float,
                solver: str = "cbbi", params: GAParams | None = None,
                model: StiffnessModel | None = None) -> RDReport:
    """Relative loss (percent) of planning with the estimated weight.

    Compares the realized defender utility of the robust defense with the
    full-information equilibrium under the true weight. Zero when the
    estimate is exact.
    """
    if model is None:
        model = build_stiffness(case)
    rd = solve_rd(case, cfg, gamma_a_est, solver=solver, params=params,
                  model=model)
    if solver == "cbbi":
        ref = solve_cbse(case, cfg, model)
    else:
        ref = run_bpega(case, cfg, params, model)
    # the clip window keeps utilities at or above the nominal index, so the
    # reference is never zero
    mu = abs((rd.u_defender - ref.u_defender) / ref.u_defender) * 100.0
    return RDReport(rd=rd, cbse=ref, mu_rd_percent=float(mu))
