"""Pure-numpy evaluation kernel (fallback when the compiled kernel is absent).

Evaluates attacker expected clipped losses over all success/failure outcomes
of an action. Outcomes are enumerated lexicographically over the fractional
loads (entries strictly between 0 and 1), first fractional load most
significant, failure before success.

Two ordering rules keep utilities bit-reproducible across call shapes:

- loads attacked at the maximum level accumulate into the base vector with
  sequential in-place adds in ascending load order, so a fully deterministic
  action runs through the same float chain as a single-outcome loss;
- the reduction sum(prob * loss) runs left to right in outcome order via
  np.add.reduceat, so a lone pair, a batch, and a defender scan all produce
  identical bits for the same (action, defense).

Actions whose fractional support exceeds `chunk_bits` are processed in
fixed-size outcome blocks accumulated in block order; the route depends only
on the fractional count, so any given (action, defense) always takes the
same path.
"""

from __future__ import annotations

import numpy as np

# 2^12 outcome rows per block keeps the working set around a few MB.
CHUNK_BITS = 12


def clip_loss(values: np.ndarray | float, lo: float):
    """Clip(x; (lo, 1)): flat below the nominal index and above collapse."""
    return np.where(values <= lo, lo, np.where(values >= 1.0, 1.0, values))


def _sure_base(x_base: np.ndarray, atk_rows: np.ndarray,
               a_vals: np.ndarray) -> np.ndarray:
    x0 = x_base.copy()
    for k in np.flatnonzero(a_vals == 1.0):
        x0 += atk_rows[k]
    return x0


def _leaves(x0: np.ndarray, atk_rows: np.ndarray, av_frac: np.ndarray,
            frac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All 2^f outcome vectors (no defense applied) and their probabilities."""
    f = frac.size
    shifts = np.arange(f - 1, -1, -1, dtype=np.uint32)
    bits = (np.arange(1 << f, dtype=np.uint32)[:, None] >> shifts) & 1
    X = x0 + bits.astype(np.float64) @ atk_rows[frac]
    factors = np.where(bits == 1, av_frac, 1.0 - av_frac)
    P = np.multiply.reduce(factors, axis=1)
    return X, P


def _scan_leaves(X: np.ndarray, P: np.ndarray, def_vecs: np.ndarray,
                 clip_lo: float) -> np.ndarray:
    y = np.abs(X[None, :, :] - def_vecs[:, None, :]).max(axis=2)
    pl = P[None, :] * clip_loss(y, clip_lo)
    return np.add.reduceat(pl, [0], axis=1)[:, 0]


def scan(x_base: np.ndarray, atk_rows: np.ndarray, def_vecs: np.ndarray,
         a_vals: np.ndarray, clip_lo: float,
         chunk_bits: int = CHUNK_BITS) -> np.ndarray:
    """Attacker expected utilities for every (defense, action) pair.

    x_base: (K,) solved base vector; atk_rows: (K, K) with row k the solved
    effect of a successful attack on load k; def_vecs: (m, K) solved defense
    vectors; a_vals: (n, K) action level values in [0, 1]. Returns (m, n).
    """
    m = def_vecs.shape[0]
    n = a_vals.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    for j in range(n):
        av = a_vals[j]
        frac = np.flatnonzero((av > 0.0) & (av < 1.0))
        x0 = _sure_base(x_base, atk_rows, av)
        if frac.size == 0:
            y = np.abs(x0[None, :] - def_vecs).max(axis=1)
            out[:, j] = clip_loss(y, clip_lo)
        elif frac.size <= chunk_bits:
            X, P = _leaves(x0, atk_rows, av[frac], frac)
            out[:, j] = _scan_leaves(X, P, def_vecs, clip_lo)
        else:
            out[:, j] = _scan_chunked(x0, atk_rows, av, frac, def_vecs,
                                      clip_lo, chunk_bits)
    return out


def _scan_chunked(x0: np.ndarray, atk_rows: np.ndarray, av: np.ndarray,
                  frac: np.ndarray, def_vecs: np.ndarray, clip_lo: float,
                  chunk_bits: int) -> np.ndarray:
    head = frac[:frac.size - chunk_bits]
    tail = frac[frac.size - chunk_bits:]
    acc = np.zeros(def_vecs.shape[0], dtype=np.float64)
    h = head.size
    for prefix in range(1 << h):
        xp = x0.copy()
        pp = 1.0
        for i in range(h):
            k = head[i]
            if (prefix >> (h - 1 - i)) & 1:
                xp += atk_rows[k]
                pp *= av[k]
            else:
                pp *= 1.0 - av[k]
        X, P = _leaves(xp, atk_rows, av[tail], tail)
        acc += _scan_leaves(X, pp * P, def_vecs, clip_lo)
    return acc
