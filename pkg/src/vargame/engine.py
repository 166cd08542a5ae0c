"""Evaluation engine: per-case precomputation, kernel dispatch, Monte Carlo.

The instability index is linear in the demand vector, so every outcome of
every action pair is a combination of solved pieces computed once per case:

    x(outcome) = x_base + sum of attack rows over successful loads - def_vec

where row k of atk_rows solves Q_crit x = q_a_max[k] e_k and def_vec is the
level-weighted sum of solved compensation rows. The clipped loss of an
outcome is Clip(max|x|; (clip_lo, 1)) and utilities are probability-weighted
sums over outcomes.

Exact enumeration handles actions whose fractional support fits in
mc_support_threshold bits; larger supports fall back to seeded Monte Carlo.
The MC stream is counter-based (Philox keyed by a hash of seed, action, and
defense levels), so results do not depend on evaluation order or scheduling.

The exact kernel has two implementations selected at import: the compiled
extension (vargame._kernel) when available, else the numpy fallback. Set
VARGAME_KERNEL=python or =cython to force one. Both satisfy the same
determinism contract; utilities may differ between backends at rounding
level (~1e-15 relative), never within one backend.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernel_np
from .grid import GridCase, StiffnessModel

CHUNK_BITS = _kernel_np.CHUNK_BITS


def _select_kernel():
    choice = os.environ.get("VARGAME_KERNEL", "auto")
    if choice not in ("auto", "cython", "python"):
        raise RuntimeError(
            f"VARGAME_KERNEL must be auto, cython, or python, not {choice!r}")
    if choice in ("auto", "cython"):
        try:
            from . import _kernel  # compiled extension, may be absent
            return _kernel, "cython"
        except ImportError:
            if choice == "cython":
                raise RuntimeError(
                    "VARGAME_KERNEL=cython but the compiled kernel is not built")
    return _kernel_np, "python"


_impl, _KERNEL_NAME = _select_kernel()


def kernel_name() -> str:
    """Name of the active exact-evaluation kernel: 'cython' or 'python'."""
    return _KERNEL_NAME


@dataclass(frozen=True)
class EvalContext:
    """Solved pieces for fast utility evaluation of one (case, base) pair."""

    x_base: np.ndarray      # (K,)  solved base demand vector
    atk_rows: np.ndarray    # (K, K) row k: solved full-magnitude attack on load k
    def_rows: np.ndarray    # (K, K) row k: solved full compensation on load k
    clip_lo: float          # lower edge of the clip window


def build_context(model: StiffnessModel, case: GridCase,
                  q_base: np.ndarray | None = None,
                  clip_lo: float | None = None) -> EvalContext:
    """Precompute solved attack/defense increments for one demand baseline.

    q_base defaults to the nominal setpoints (reusing the solved nominal
    vector); pass a perturbed vector to evaluate a load-uncertain model.
    clip_lo defaults to the nominal instability index.
    """
    lu = model.Q_crit_solver
    if q_base is None:
        x_base = model.x_nominal
    else:
        x_base = scipy.linalg.lu_solve(
            lu, np.ascontiguousarray(q_base, dtype=np.float64))
    atk = scipy.linalg.lu_solve(lu, np.diag(case.q_a_max))
    dfn = scipy.linalg.lu_solve(lu, np.diag(case.q_d_max))
    return EvalContext(
        x_base=np.ascontiguousarray(x_base),
        atk_rows=np.ascontiguousarray(atk.T),
        def_rows=np.ascontiguousarray(dfn.T),
        clip_lo=float(model.delta_nominal if clip_lo is None else clip_lo),
    )


def def_vector(ctx: EvalContext, d_vals: np.ndarray) -> np.ndarray:
    """Solved defense vector, accumulated in ascending load order."""
    vec = np.zeros_like(ctx.x_base)
    for k in np.flatnonzero(d_vals > 0.0):
        vec += d_vals[k] * ctx.def_rows[k]
    return vec


def clip_scalar(value: float, lo: float) -> float:
    if value <= lo:
        return lo
    return 1.0 if value >= 1.0 else value


def eval_mask(ctx: EvalContext, a_vals: np.ndarray, mask: np.ndarray,
              def_vec: np.ndarray) -> float:
    """Clipped loss of one concrete outcome (success mask) of (a, d)."""
    x = ctx.x_base.copy()
    for k in np.flatnonzero((mask != 0) & (a_vals > 0.0)):
        x += ctx.atk_rows[k]
    x -= def_vec
    return clip_scalar(float(np.max(np.abs(x))), ctx.clip_lo)


def _mc_key(seed: int, a_idx: np.ndarray, levels_a: int,
            d_idx: np.ndarray, levels_d: int) -> np.ndarray:
    h = hashlib.sha256()
    h.update(b"vargame-mc-v1")
    h.update(struct.pack("<qii", seed, levels_a, levels_d))
    h.update(np.asarray(a_idx, dtype="<i2").tobytes())
    h.update(b"/")
    h.update(np.asarray(d_idx, dtype="<i2").tobytes())
    return np.frombuffer(h.digest()[:16], dtype="<u8").copy()


def mc_utility(ctx: EvalContext, a_idx: np.ndarray, levels_a: int,
               d_idx: np.ndarray, levels_d: int, def_vec: np.ndarray,
               seed: int, mc_samples: int) -> float:
    """Seeded Monte Carlo estimate of the attacker expected utility.

    The generator is keyed by (seed, action levels, defense levels), so the
    estimate for a pair is reproducible regardless of evaluation order.
    Success draws are sample-major, load-minor over the fractional loads.
    """
    a_vals = np.asarray(a_idx, dtype=np.float64) / (levels_a - 1)
    frac = np.flatnonzero((a_vals > 0.0) & (a_vals < 1.0))
    x0 = _kernel_np._sure_base(ctx.x_base, ctx.atk_rows, a_vals)
    rng = np.random.Generator(np.random.Philox(
        key=_mc_key(seed, a_idx, levels_a, d_idx, levels_d)))
    hits = rng.random((mc_samples, frac.size)) < a_vals[frac]
    x = x0 + hits.astype(np.float64) @ ctx.atk_rows[frac] - def_vec
    losses = _kernel_np.clip_loss(np.abs(x).max(axis=1), ctx.clip_lo)
    return float(losses.mean())


def utilities_matrix(ctx: EvalContext, acts_idx: np.ndarray, levels_a: int,
                     defs_idx: np.ndarray, levels_d: int,
                     mc_support_threshold: int, mc_samples: int,
                     seed: int) -> np.ndarray:
    """Attacker expected utilities for all (defense, action) pairs: (m, n).

    Exact enumeration for actions whose fractional support fits the
    threshold, Monte Carlo for the rest.
    """
    acts = np.ascontiguousarray(np.atleast_2d(acts_idx), dtype=np.int16)
    defs = np.ascontiguousarray(np.atleast_2d(defs_idx), dtype=np.int16)
    a_vals = np.ascontiguousarray(acts / np.float64(levels_a - 1))
    d_vals = defs / np.float64(levels_d - 1)
    def_vecs = np.ascontiguousarray(
        np.stack([def_vector(ctx, d_vals[i]) for i in range(d_vals.shape[0])]))

    frac_counts = np.count_nonzero((a_vals > 0.0) & (a_vals < 1.0), axis=1)
    exact = frac_counts <= mc_support_threshold
    out = np.empty((defs.shape[0], acts.shape[0]), dtype=np.float64)
    if exact.any():
        out[:, exact] = _impl.scan(
            ctx.x_base, ctx.atk_rows, def_vecs,
            np.ascontiguousarray(a_vals[exact]), ctx.clip_lo, CHUNK_BITS)
    for j in np.flatnonzero(~exact):
        for i in range(defs.shape[0]):
            out[i, j] = mc_utility(ctx, acts[j], levels_a, defs[i], levels_d,
                                   def_vecs[i], seed, mc_samples)
    return out
