"""Coupled evolutionary search for the quantized security game.

Two populations evolve side by side. Each generation, every defender is
scored by the best attacker response found inside the current attacker
population, the best defender under that score becomes the reference, and
attackers are scored against that reference defense. Both sides then run
roulette selection, single-point crossover, and per-gene reset mutation;
infeasible children are discarded, parents and surviving children are
merged, and the fittest distinct genomes carry on. Keeping only distinct
genomes matters: clones of a strong parent would otherwise flood the
population within a few generations and freeze the search. The run spends
the whole generation budget, and the final populations are handed to the
exhaustive leader-follower selection so the returned pair is tie-broken
exactly like the traversal solver.

Survivor sorting prefers, in order: higher fitness, earlier first
appearance, smaller level sum, lexicographically smaller genome; duplicate
rows after the first are dropped. The first-appearance rank keeps
established genomes ahead of same-fitness newcomers, which stabilizes the
populations.

RNG contract: one generator seeded from the config drives a whole run. Draw
order is fixed: initial attacker population (one bounded rejection loop per
individual, a full gene vector per try), then the initial defender
population; per generation the attacker side consumes selection draws (two
per pair, pair-major), then crossover draws (one coin per pair, plus one
cross point when the coin hits and there is more than one gene), then
mutation draws (one coin per gene, child-major row scan, plus one level
redraw per hit in the same scan order); the defender side then repeats the
same phases. Rerunning the same configuration reproduces the run bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .game import (AttackAction, DefenseAction, GameConfig, action_cost,
                   is_feasible, select_best_index)
from .grid import GridCase, StiffnessModel, build_stiffness
from .traversal import Equilibrium, _solve_matrices


@dataclass(frozen=True)
class GAParams:
    """Population sizes and operator rates for the evolutionary solver."""

    pop_a: int = 30
    pop_d: int = 20
    p_c: float = 0.85
    p_m: float = 0.05
    generations: int = 30
    init_tries: int = 200

    def __post_init__(self):
        if self.pop_a < 2 or self.pop_d < 2:
            raise ValueError("population sizes must be at least 2")
        if not 0.0 <= self.p_c <= 1.0:
            raise ValueError("p_c must lie in [0, 1]")
        if not 0.0 <= self.p_m <= 1.0:
            raise ValueError("p_m must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.init_tries < 1:
            raise ValueError("init_tries must be positive")


def _init_population(rng, n_ind: int, genes: int, n_levels: int, gamma: float,
                     tries: int) -> np.ndarray:
    """Rejection-sample feasible genomes; fall back to all-zero levels."""
    pop = np.zeros((n_ind, genes), dtype=np.int16)
    for i in range(n_ind):
        for _ in range(tries):
            cand = rng.integers(0, n_levels, size=genes, dtype=np.int16)
            if is_feasible(cand.tolist(), n_levels, gamma):
                pop[i] = cand
                break
    return pop


def _roulette(rng, fits: np.ndarray, n_picks: int) -> list[int]:
    # the constant shift keeps every weight positive; equal fitnesses
    # degrade to a uniform draw automatically
    w = fits - fits.min() + 1e-6
    cum = np.cumsum(w)
    total = cum[-1]
    picks = []
    for _ in range(n_picks):
        j = int(np.searchsorted(cum, rng.random() * total, side="right"))
        picks.append(min(j, len(cum) - 1))
    return picks


def _evolve_side(rng, pop: np.ndarray, fits: np.ndarray, n_levels: int,
                 gamma: float, params: GAParams) -> np.ndarray:
    """One brood of feasible children from selection/crossover/mutation."""
    n, genes = pop.shape
    n_pairs = n // 2
    picks = _roulette(rng, fits, 2 * n_pairs)
    children = np.empty((2 * n_pairs, genes), dtype=np.int16)
    for p in range(n_pairs):
        a = pop[picks[2 * p]].copy()
        b = pop[picks[2 * p + 1]].copy()
        if rng.random() < params.p_c and genes > 1:
            pt = int(rng.integers(1, genes))
            a, b = (np.concatenate([a[:pt], b[pt:]]),
                    np.concatenate([b[:pt], a[pt:]]))
        children[2 * p] = a
        children[2 * p + 1] = b
    coins = rng.random(children.shape)
    for r, c in np.argwhere(coins < params.p_m):
        # reset draw may land on the current level; that is intended
        children[r, c] = rng.integers(0, n_levels)
    feas = np.array([is_feasible(row, n_levels, gamma)
                     for row in children.tolist()], dtype=bool)
    return np.ascontiguousarray(children[feas])


def _survive(merged: np.ndarray, fits: np.ndarray, first_seen: np.ndarray,
             keep: int) -> np.ndarray:
    sums = merged.sum(axis=1, dtype=np.int64)
    keys = [merged[:, g] for g in range(merged.shape[1] - 1, -1, -1)]
    keys.extend([sums, first_seen, np.negative(fits)])
    order = np.lexsort(tuple(keys))
    rows = []
    taken = set()
    for i in order:
        key = merged[i].tobytes()
        if key in taken:
            continue
        taken.add(key)
        rows.append(merged[i])
        if len(rows) == keep:
            break
    return np.ascontiguousarray(np.stack(rows))


def _utilities_dedup(ctx: engine.EvalContext, cfg: GameConfig,
                     acts: np.ndarray, defs: np.ndarray) -> np.ndarray:
    """Utility matrix with duplicate genomes evaluated once.

    Safe because the kernel evaluates rows independently, so the values are
    identical to a direct call, duplicates or not.
    """
    ua, inv_a = np.unique(acts, axis=0, return_inverse=True)
    ud, inv_d = np.unique(defs, axis=0, return_inverse=True)
    u = engine.utilities_matrix(ctx, ua, cfg.levels_a, ud, cfg.levels_d,
                                cfg.mc_support_threshold, cfg.mc_samples,
                                cfg.seed)
    return u[np.ix_(inv_d.ravel(), inv_a.ravel())]


def _scatter(case: GridCase, compact: np.ndarray) -> np.ndarray:
    full = np.zeros((compact.shape[0], case.n_loads), dtype=np.int16)
    full[:, case.ctrl_idx] = compact
    return full


def _evaluate(ctx, cfg: GameConfig, pop_a: np.ndarray,
              pop_d_full: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Coupled fitness: defenders vs in-population best response, attackers
    vs the reference defense. Returns (fit_a, fit_d, reference index)."""
    u = _utilities_dedup(ctx, cfg, pop_a, pop_d_full)
    fit_d = np.empty(pop_d_full.shape[0])
    for i in range(pop_d_full.shape[0]):
        j = select_best_index(u[i], pop_a, cfg.tie_tol)
        fit_d[i] = -u[i, j]
    i_star = select_best_index(fit_d, pop_d_full, cfg.tie_tol)
    return u[i_star].copy(), fit_d, i_star


def run_bpega(case: GridCase, cfg: GameConfig, params: GAParams | None = None,
              model: StiffnessModel | None = None) -> Equilibrium:
    """Evolutionary approximation of the leader-follower equilibrium.

    Metadata reports the generation count, the last generation at which
    either population changed (stabilized_at), whether the populations
    stopped changing before the budget ran out (converged), and a
    per-generation best-fitness trace.
    """
    params = params or GAParams()
    if model is None:
        model = build_stiffness(case)
    ctx = engine.build_context(model, case)
    rng = np.random.default_rng(cfg.seed)

    pop_a = _init_population(rng, params.pop_a, case.n_loads, cfg.levels_a,
                             cfg.gamma_a, params.init_tries)
    pop_dc = _init_population(rng, params.pop_d, len(case.ctrl_idx),
                              cfg.levels_d, cfg.gamma_d, params.init_tries)
    reg_a: dict[bytes, int] = {}
    reg_d: dict[bytes, int] = {}
    for row in pop_a:
        reg_a.setdefault(row.tobytes(), 0)
    for row in pop_dc:
        reg_d.setdefault(row.tobytes(), 0)

    trace = []
    last_change = 0
    t = 0
    for t in range(params.generations + 1):
        pop_d_full = _scatter(case, pop_dc)
        fit_a, fit_d, i_star = _evaluate(ctx, cfg, pop_a, pop_d_full)
        trace.append({
            "generation": t,
            "u_best_attacker": float(fit_a.max()),
            "u_best_defender": float(fit_d.max()),
        })
        if t == params.generations:
            break

        d_ref = pop_d_full[i_star:i_star + 1]
        kids_a = _evolve_side(rng, pop_a, fit_a, cfg.levels_a, cfg.gamma_a,
                              params)
        if kids_a.shape[0]:
            fit_ka = _utilities_dedup(ctx, cfg, kids_a, d_ref)[0]
            merged_a = np.vstack([pop_a, kids_a])
            fits_ma = np.concatenate([fit_a, fit_ka])
        else:
            merged_a, fits_ma = pop_a, fit_a
        seen_a = np.array([reg_a.get(r.tobytes(), t + 1) for r in merged_a],
                          dtype=np.int64)
        next_a = _survive(merged_a, fits_ma, seen_a, params.pop_a)

        kids_dc = _evolve_side(rng, pop_dc, fit_d, cfg.levels_d, cfg.gamma_d,
                               params)
        if kids_dc.shape[0]:
            # children are judged against this generation's attackers
            u_kd = _utilities_dedup(ctx, cfg, pop_a, _scatter(case, kids_dc))
            fit_kd = np.empty(kids_dc.shape[0])
            for i in range(kids_dc.shape[0]):
                j = select_best_index(u_kd[i], pop_a, cfg.tie_tol)
                fit_kd[i] = -u_kd[i, j]
            merged_d = np.vstack([pop_dc, kids_dc])
            fits_md = np.concatenate([fit_d, fit_kd])
        else:
            merged_d, fits_md = pop_dc, fit_d
        seen_d = np.array([reg_d.get(r.tobytes(), t + 1) for r in merged_d],
                          dtype=np.int64)
        next_dc = _survive(merged_d, fits_md, seen_d, params.pop_d)

        if not np.array_equal(next_a, pop_a) or \
                not np.array_equal(next_dc, pop_dc):
            last_change = t + 1
        pop_a, pop_dc = next_a, next_dc

        for row in pop_a:
            reg_a.setdefault(row.tobytes(), t + 1)
        for row in pop_dc:
            reg_d.setdefault(row.tobytes(), t + 1)

    pop_d_full = _scatter(case, pop_dc)
    i, j, u = _solve_matrices(ctx, cfg, pop_a, pop_d_full)
    attack = AttackAction(tuple(pop_a[j]), cfg.levels_a)
    defense = DefenseAction(tuple(pop_d_full[i]), cfg.levels_d)
    ua = float(u[i, j])
    return Equilibrium(
        attack=attack,
        defense=defense,
        u_attacker=ua,
        u_defender=-ua,
        cost_a=action_cost(attack.levels_idx, cfg.levels_a, cfg.gamma_a),
        cost_d=action_cost(defense.levels_idx, cfg.levels_d, cfg.gamma_d),
        metadata={
            "method": "bpega",
            "generations": t,
            "stabilized_at": last_change,
            "converged": last_change < params.generations,
            "trace": trace,
            "kernel": engine.kernel_name(),
        },
    )


def attacker_response_ga(case: GridCase, cfg: GameConfig,
                         defense: DefenseAction,
                         params: GAParams | None = None,
                         model: StiffnessModel | None = None,
                         ctx: engine.EvalContext | None = None,
                         ) -> tuple[AttackAction, float]:
    """Evolutionary best response against a pinned defense.

    Fallback for cases whose attacker lattice is too large to traverse.
    Same operators and draw conventions as the coupled run, attacker side
    only.
    """
    params = params or GAParams()
    if ctx is None:
        if model is None:
            model = build_stiffness(case)
        ctx = engine.build_context(model, case)
    rng = np.random.default_rng(cfg.seed)
    d_row = np.asarray([defense.levels_idx], dtype=np.int16)

    pop = _init_population(rng, params.pop_a, case.n_loads, cfg.levels_a,
                           cfg.gamma_a, params.init_tries)
    reg: dict[bytes, int] = {}
    for row in pop:
        reg.setdefault(row.tobytes(), 0)

    fit = _utilities_dedup(ctx, cfg, pop, d_row)[0]
    for t in range(params.generations + 1):
        if t == params.generations:
            break
        kids = _evolve_side(rng, pop, fit, cfg.levels_a, cfg.gamma_a, params)
        if kids.shape[0]:
            fit_k = _utilities_dedup(ctx, cfg, kids, d_row)[0]
            merged = np.vstack([pop, kids])
            fits_m = np.concatenate([fit, fit_k])
        else:
            merged, fits_m = pop, fit
        seen = np.array([reg.get(r.tobytes(), t + 1) for r in merged],
                        dtype=np.int64)
        pop = _survive(merged, fits_m, seen, params.pop_a)
        for row in pop:
            reg.setdefault(row.tobytes(), t + 1)
        fit = _utilities_dedup(ctx, cfg, pop, d_row)[0]

    j = select_best_index(fit, pop, cfg.tie_tol)
    return AttackAction(tuple(pop[j]), cfg.levels_a), float(fit[j])
