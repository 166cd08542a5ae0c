"""Game layer: actions, budgets, outcomes, and expected utilities.

Both players quantize their decisions to integer levels per load. An attack
level picks a success probability from {0, 1/(L-1), ..., 1}; a defense level
picks a compensation fraction on a controllable load. Budgets are linear:
a profile with level sum s costs gamma * s / (L - 1), and only profiles with
cost at most 1 are feasible. Costs are computed from the integer level sum
with a single division so that enumeration, feasibility checks, and reported
costs agree bit for bit.

The attacker utility of a pair is the expected clipped instability index
over independent per-load success draws; the defender utility is its exact
negation. Enumeration order conventions (documented on each function) are
part of the contract: solvers rely on them for reproducible tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .errors import CapacityError, SupportOverflowError
from .grid import GridCase, StiffnessModel

# hard ceiling on 2**f outcome enumeration, independent of the MC threshold
MAX_SUPPORT_BITS = 25

# refuse to materialize action matrices beyond this many bytes
_ENUM_MEMORY_BYTES = 2**31


@dataclass(frozen=True)
class GameConfig:
    """Tunable parameters of one attacker/defender game instance."""

    gamma_a: float
    gamma_d: float
    levels_a: int = 3
    levels_d: int = 3
    mc_support_threshold: int = 20
    mc_samples: int = 100_000
    seed: int = 42
    enumeration_cap: int = 10**8
    clip_per_model: bool = False
    tie_tol: float = 1e-9

    def __post_init__(self):
        if not (self.gamma_a >= 0.0 and np.isfinite(self.gamma_a)):
            raise ValueError(f"gamma_a must be finite and >= 0, got {self.gamma_a}")
        if not (self.gamma_d >= 0.0 and np.isfinite(self.gamma_d)):
            raise ValueError(f"gamma_d must be finite and >= 0, got {self.gamma_d}")
        if self.levels_a < 2 or self.levels_d < 2:
            raise ValueError("levels_a and levels_d must be at least 2")
        if self.mc_support_threshold < 0:
            raise ValueError("mc_support_threshold must be >= 0")
        if self.mc_support_threshold > MAX_SUPPORT_BITS:
            raise ValueError(
                f"mc_support_threshold above {MAX_SUPPORT_BITS} is not supported")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")
        if self.enumeration_cap < 1:
            raise ValueError("enumeration_cap must be positive")
        if not (self.tie_tol >= 0.0 and np.isfinite(self.tie_tol)):
            raise ValueError("tie_tol must be finite and >= 0")


def _levels_tuple(levels_idx, n_genes: int, n_levels: int) -> tuple[int, ...]:
    idx = tuple(int(v) for v in levels_idx)
    if len(idx) != n_genes:
        raise ValueError(f"expected {n_genes} levels, got {len(idx)}")
    if any(v < 0 or v >= n_levels for v in idx):
        raise ValueError(f"levels must lie in [0, {n_levels - 1}]")
    return idx


@dataclass(frozen=True)
class AttackAction:
    """Per-load attack levels; level v means success probability v/(L-1)."""

    levels_idx: tuple[int, ...]
    n_levels: int

    def __post_init__(self):
        object.__setattr__(self, "levels_idx",
                           _levels_tuple(self.levels_idx, len(self.levels_idx),
                                         self.n_levels))

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.levels_idx, dtype=np.float64) / (self.n_levels - 1)

    @property
    def l1(self) -> float:
        # integer sum first, one division: matches action_cost bit for bit
        return sum(self.levels_idx) / (self.n_levels - 1)


@dataclass(frozen=True)
class DefenseAction:
    """Per-load defense levels; level v compensates v/(L-1) of q_d_max.

    The tuple spans all loads; entries off the controllable set must be 0.
    """

    levels_idx: tuple[int, ...]
    n_levels: int

    def __post_init__(self):
        object.__setattr__(self, "levels_idx",
                           _levels_tuple(self.levels_idx, len(self.levels_idx),
                                         self.n_levels))

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.levels_idx, dtype=np.float64) / (self.n_levels - 1)

    @property
    def l1(self) -> float:
        return sum(self.levels_idx) / (self.n_levels - 1)


@dataclass(frozen=True)
class Outcome:
    """One realization of the per-load success draws."""

    success_mask: tuple[bool, ...]
    probability: float


def action_cost(levels_idx, n_levels: int, gamma: float) -> float:
    """Investment cost gamma * ||levels||_1 with the canonical division order."""
    s = int(sum(int(v) for v in levels_idx))
    return gamma * (s / (n_levels - 1))


def is_feasible(levels_idx, n_levels: int, gamma: float) -> bool:
    return action_cost(levels_idx, n_levels, gamma) <= 1.0


def _max_level_sum(gamma: float, n_genes: int, n_levels: int) -> int:
    """Largest integer level sum whose cost passes the feasibility test."""
    top = n_genes * (n_levels - 1)
    if gamma == 0.0:
        return top
    s = top
    # same float expression as action_cost, so boundary sums agree exactly
    while s > 0 and gamma * (s / (n_levels - 1)) > 1.0:
        s -= 1
    return s


def _count_level_vectors(n_genes: int, n_levels: int, max_sum: int) -> int:
    """Exact count of vectors in {0..L-1}^n with sum <= max_sum (python ints)."""
    top = n_genes * (n_levels - 1)
    if max_sum >= top:
        return n_levels**n_genes
    if max_sum < 0:
        return 0
    ways = [1] + [0] * max_sum
    for _ in range(n_genes):
        nxt = [0] * (max_sum + 1)
        for s, w in enumerate(ways):
            if w:
                for v in range(min(n_levels - 1, max_sum - s) + 1):
                    nxt[s + v] += w
        ways = nxt
    return sum(ways)


def _enumerate_levels(n_genes: int, n_levels: int, max_sum: int,
                      cap: int) -> np.ndarray:
    """All feasible level vectors in lexicographic order, gene 0 most significant.

    Raises CapacityError before materializing anything too large.
    """
    count = _count_level_vectors(n_genes, n_levels, max_sum)
    if count > cap:
        raise CapacityError(
            f"{count} feasible profiles exceed the enumeration cap of {cap}")
    if count * n_genes * 2 > _ENUM_MEMORY_BYTES:
        raise CapacityError(
            f"{count} profiles of {n_genes} genes would exceed the memory guard")
    rows = np.zeros((1, 0), dtype=np.int16)
    sums = np.zeros(1, dtype=np.int64)
    for _ in range(n_genes):
        m = rows.shape[0]
        rep = np.repeat(rows, n_levels, axis=0)
        col = np.tile(np.arange(n_levels, dtype=np.int16), m)
        new_sums = np.repeat(sums, n_levels) + col
        keep = new_sums <= max_sum
        rows = np.hstack([rep[keep], col[keep, None]])
        sums = new_sums[keep]
    return np.ascontiguousarray(rows)


def enumerate_actions(case: GridCase, cfg: GameConfig, side: str) -> np.ndarray:
    """Feasible level matrix (count, K) for one side, lexicographic order.

    Attacker genes span every load; defender genes span the controllable
    loads and are scattered into full-width rows (zeros elsewhere), so the
    lexicographic order over controllable genes is preserved.
    """
    if side == "attacker":
        s = _max_level_sum(cfg.gamma_a, case.n_loads, cfg.levels_a)
        return _enumerate_levels(case.n_loads, cfg.levels_a, s,
                                 cfg.enumeration_cap)
    if side == "defender":
        s = _max_level_sum(cfg.gamma_d, len(case.ctrl_idx), cfg.levels_d)
        genes = _enumerate_levels(len(case.ctrl_idx), cfg.levels_d, s,
                                  cfg.enumeration_cap)
        full = np.zeros((genes.shape[0], case.n_loads), dtype=np.int16)
        full[:, case.ctrl_idx] = genes
        return full
    raise ValueError(f"side must be 'attacker' or 'defender', not {side!r}")


def attack_increment(case: GridCase, action: AttackAction,
                     success_mask) -> np.ndarray:
    """Reactive demand added by the attack under one success mask."""
    mask = np.asarray(success_mask, dtype=bool)
    vals = action.values
    return np.where(mask & (vals > 0.0), case.q_a_max, 0.0)


def enumerate_outcomes(action: AttackAction) -> list[Outcome]:
    """All success masks of an attack with their probabilities.

    Loads at level L-1 always succeed and loads at level 0 never do; only
    fractional loads branch. Masks are ordered lexicographically over the
    fractional loads, lowest load index most significant, failure before
    success. Probabilities multiply factors in ascending load order, the
    same order the evaluation kernels use.
    """
    vals = action.values
    frac = np.flatnonzero((vals > 0.0) & (vals < 1.0))
    f = frac.size
    if f > MAX_SUPPORT_BITS:
        raise SupportOverflowError(
            f"{f} fractional loads need 2**{f} outcomes; limit is "
            f"2**{MAX_SUPPORT_BITS}")
    base = vals == 1.0
    out = []
    for m in range(1 << f):
        mask = base.copy()
        prob = 1.0
        for pos, k in enumerate(frac):
            hit = (m >> (f - 1 - pos)) & 1
            mask[k] = bool(hit)
            prob = prob * (vals[k] if hit else 1.0 - vals[k])
        out.append(Outcome(tuple(bool(b) for b in mask), prob))
    return out


def performance_loss(ctx: engine.EvalContext, action: AttackAction,
                     success_mask, defense: DefenseAction) -> float:
    """Clipped instability index of one concrete outcome of (a, d)."""
    dvec = engine.def_vector(ctx, defense.values)
    mask = np.asarray(success_mask, dtype=bool)
    return engine.eval_mask(ctx, action.values, mask, dvec)


def expected_utility(ctx: engine.EvalContext, cfg: GameConfig,
                     action: AttackAction,
                     defense: DefenseAction) -> tuple[float, float]:
    """(attacker, defender) expected utilities; the pair sums to exactly 0."""
    acts = np.asarray([action.levels_idx], dtype=np.int16)
    defs = np.asarray([defense.levels_idx], dtype=np.int16)
    u = engine.utilities_matrix(ctx, acts, cfg.levels_a, defs, cfg.levels_d,
                                cfg.mc_support_threshold, cfg.mc_samples,
                                cfg.seed)
    ua = float(u[0, 0])
    return ua, -ua


def select_best_index(values: np.ndarray, level_matrix: np.ndarray,
                      tol: float) -> int:
    """Deterministic argmax with the canonical tie-breaking chain.

    Candidates within tol of the maximum are narrowed to the smallest level
    sum, then the lexicographically smallest row (gene 0 most significant).
    """
    values = np.asarray(values, dtype=np.float64)
    cand = np.flatnonzero(values >= values.max() - tol)
    sums = level_matrix[cand].sum(axis=1)
    cand = cand[sums == sums.min()]
    order = np.lexsort(level_matrix[cand].T[::-1])
    return int(cand[order[0]])


def build_context(model: StiffnessModel, case: GridCase,
                  q_base: np.ndarray | None = None,
                  clip_lo: float | None = None) -> engine.EvalContext:
    """Re-export of the engine precomputation for callers of this module."""
    return engine.build_context(model, case, q_base=q_base, clip_lo=clip_lo)
