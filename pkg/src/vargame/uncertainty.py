"""Sensitivity of solved strategies to reactive-demand uncertainty.

Strategies are computed for the nominal demand profile; real setpoints
drift. This module draws perturbed demand models Q * (1 + eps) with
independent Gaussian relative errors, re-evaluates a fixed strategy pair
under each model, and reports the relative utility mismatch in percent.
The network (and hence the stiffness matrix) is unchanged; only the demand
baseline moves.

Draws are model-major, load-minor from one seeded generator. A model whose
unstressed index already reaches the collapse threshold is redrawn, which
consumes further draws from the same stream, so the set is reproducible for
a given (seed, sigma, count) triple.

By default every model is clipped to the nominal window, so mismatches
reflect demand drift alone; set clip_per_model to re-anchor the window at
each model's own unstressed index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import StiffnessError
from .game import AttackAction, DefenseAction, GameConfig, expected_utility
from .grid import GridCase, StiffnessModel, _solve_index, build_stiffness


@dataclass(frozen=True)
class UncertainModel:
    """One perturbed demand draw with its evaluation context."""

    q_l: np.ndarray
    delta: float
    ctx: engine.EvalContext


@dataclass(frozen=True)
class UncertainModelSet:
    sigma: float
    seed: int
    models: tuple[UncertainModel, ...]


def generate_models(case: GridCase, cfg: GameConfig, sigma: float = 0.1,
                    n_models: int = 20, model: StiffnessModel | None = None,
                    max_retries: int = 100) -> UncertainModelSet:
    """Draw perturbed demand models around the nominal profile."""
    if not (np.isfinite(sigma) and sigma >= 0.0):
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    if n_models < 1:
        raise ValueError("n_models must be positive")
    if model is None:
        model = build_stiffness(case)
    rng = np.random.default_rng(cfg.seed)
    out = []
    for i in range(n_models):
        for _ in range(max_retries):
            eps = rng.normal(0.0, sigma, size=case.n_loads)
            q_l = case.Q_L_nominal * (1.0 + eps)
            _, delta = _solve_index(model.Q_crit_solver, q_l)
            if delta < 1.0:
                break
        else:
            raise StiffnessError(
                f"model {i}: no stable demand draw within {max_retries} "
                f"tries at sigma={sigma}")
        clip_lo = delta if cfg.clip_per_model else model.delta_nominal
        ctx = engine.build_context(model, case, q_base=q_l, clip_lo=clip_lo)
        out.append(UncertainModel(q_l=q_l, delta=float(delta), ctx=ctx))
    return UncertainModelSet(sigma=float(sigma), seed=cfg.seed,
                             models=tuple(out))


def utility_mismatch(case: GridCase, cfg: GameConfig, attack: AttackAction,
                     defense: DefenseAction, model_set: UncertainModelSet,
                     model: StiffnessModel | None = None) -> np.ndarray:
    """Percent mismatch of the attacker utility under each demand model.

    The pair is held fixed; only the demand baseline changes. The nominal
    utility is bounded below by the nominal index, so the ratio is always
    defined.
    """
    if model is None:
        model = build_stiffness(case)
    ctx = engine.build_context(model, case)
    u_nom, _ = expected_utility(ctx, cfg, attack, defense)
    mu = np.empty(len(model_set.models), dtype=np.float64)
    for i, m in enumerate(model_set.models):
        u_i, _ = expected_utility(m.ctx, cfg, attack, defense)
        mu[i] = abs((u_nom - u_i) / u_nom) * 100.0
    return mu


def summary_stats(values) -> dict[str, float]:
    """Location and spread summary used by reports: mean, std, quartiles."""
    v = np.asarray(values, dtype=np.float64)
    return {
        "mean": float(v.mean()),
        "std": float(v.std()),
        "min": float(v.min()),
        "p25": float(np.percentile(v, 25)),
        "median": float(np.percentile(v, 50)),
        "p75": float(np.percentile(v, 75)),
        "max": float(v.max()),
    }
