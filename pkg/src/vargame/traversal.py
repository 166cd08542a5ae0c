"""Exact equilibrium by exhaustive leader-follower traversal.

The defender (leader) commits to a feasible compensation profile; the
attacker (follower) answers with its best feasible response. Traversing
every feasible pair yields the exact equilibrium of the quantized game.
Capacity errors from the enumeration layer propagate to the caller; use the
evolutionary solver for cases whose feasible sets are too large.

Ties are resolved by the canonical chain (utility within tie_tol, then
smallest level sum, then lexicographically smallest profile) on both sides,
so repeated runs and alternative solvers can reproduce the same pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .game import (AttackAction, DefenseAction, GameConfig, action_cost,
                   enumerate_actions, select_best_index)
from .grid import GridCase, StiffnessModel, build_stiffness


@dataclass(frozen=True)
class Equilibrium:
    """Solved strategy pair with utilities and investment costs."""

    attack: AttackAction
    defense: DefenseAction
    u_attacker: float
    u_defender: float
    cost_a: float
    cost_d: float
    metadata: dict = field(default_factory=dict)


def _utilities(ctx: engine.EvalContext, cfg: GameConfig,
               atk_matrix: np.ndarray, def_matrix: np.ndarray) -> np.ndarray:
    return engine.utilities_matrix(
        ctx, atk_matrix, cfg.levels_a, def_matrix, cfg.levels_d,
        cfg.mc_support_threshold, cfg.mc_samples, cfg.seed)


def _solve_matrices(ctx: engine.EvalContext, cfg: GameConfig,
                    atk_matrix: np.ndarray,
                    def_matrix: np.ndarray) -> tuple[int, int, np.ndarray]:
    """Leader-follower selection over explicit level matrices.

    Returns (defender row, attacker row, attacker utility matrix). Shared by
    the exhaustive solver and the final stage of the evolutionary solver so
    both apply identical arithmetic and tie-breaking.
    """
    u = _utilities(ctx, cfg, atk_matrix, def_matrix)
    n_def = def_matrix.shape[0]
    resp = np.empty(n_def, dtype=np.int64)
    u_def = np.empty(n_def, dtype=np.float64)
    for i in range(n_def):
        resp[i] = select_best_index(u[i], atk_matrix, cfg.tie_tol)
        u_def[i] = -u[i, resp[i]]
    i_star = select_best_index(u_def, def_matrix, cfg.tie_tol)
    return i_star, int(resp[i_star]), u


def best_response(ctx: engine.EvalContext, case: GridCase, cfg: GameConfig,
                  defense: DefenseAction) -> tuple[AttackAction, float]:
    """Attacker's best feasible action against a pinned defense.

    Returns the action and its expected utility.
    """
    atk = enumerate_actions(case, cfg, "attacker")
    defs = np.asarray([defense.levels_idx], dtype=np.int16)
    u = _utilities(ctx, cfg, atk, defs)[0]
    j = select_best_index(u, atk, cfg.tie_tol)
    return AttackAction(tuple(atk[j]), cfg.levels_a), float(u[j])


def solve_cbse(case: GridCase, cfg: GameConfig,
               model: StiffnessModel | None = None) -> Equilibrium:
    """Exact cost-based equilibrium by full traversal of both feasible sets."""
    if model is None:
        model = build_stiffness(case)
    ctx = engine.build_context(model, case)
    atk = enumerate_actions(case, cfg, "attacker")
    dfn = enumerate_actions(case, cfg, "defender")
    i, j, u = _solve_matrices(ctx, cfg, atk, dfn)
    attack = AttackAction(tuple(atk[j]), cfg.levels_a)
    defense = DefenseAction(tuple(dfn[i]), cfg.levels_d)
    ua = float(u[i, j])
    return Equilibrium(
        attack=attack,
        defense=defense,
        u_attacker=ua,
        u_defender=-ua,
        cost_a=action_cost(attack.levels_idx, cfg.levels_a, cfg.gamma_a),
        cost_d=action_cost(defense.levels_idx, cfg.levels_d, cfg.gamma_d),
        metadata={
            "method": "cbbi",
            "n_attacks": int(atk.shape[0]),
            "n_defenses": int(dfn.shape[0]),
            "kernel": engine.kernel_name(),
        },
    )
