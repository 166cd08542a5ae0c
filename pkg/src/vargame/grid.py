"""Grid cases and the voltage instability index.

A case describes a grid with K load buses followed by G generator buses.
The full susceptance matrix B is partitioned as

    B = [[B_LL, B_LG],
         [B_GL, B_GG]]

with the load block first. The open-circuit load voltages are
V* = -B_LL^-1 B_LG V_G, the stiffness matrix is
Q_crit = 1/4 diag(V*) B_LL diag(V*), and the instability index of a
reactive-demand vector Q_L is ||Q_crit^-1 Q_L||_inf. Values below 1 mean
the operating point is stable; 1 - index is the stability margin.

Case files are JSON. They either carry B row-major under the key "B" or a
"branches" list from which B is assembled as imag(Ybus) (series impedance,
line charging, off-nominal taps). Bus indices in case files are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg

from .errors import CaseError, StiffnessError

# Invariant tolerances. Symmetry is relative element-wise; the singular-value
# ratio guards B_LL invertibility; the condition cap rejects stiffness
# factorizations whose solves would be meaningless.
SYMMETRY_RTOL = 1e-9
SYMMETRY_ATOL = 1e-12
MIN_SV_RATIO = 1e-10
MAX_CONDITION = 1e12

_REQUIRED_KEYS = ("n_loads", "n_gens", "V_G", "Q_L_nominal",
                  "q_a_max", "q_d_max", "ctrl_buses")


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GridCase:
    """Validated static grid description.

    ctrl_buses holds 1-based load-bus indices; the derived ctrl_idx array is
    0-based and sorted. Arrays are read-only after construction so cases can
    be shared freely across threads and worker processes.
    """

    n_loads: int
    n_gens: int
    B: np.ndarray
    V_G: np.ndarray
    Q_L_nominal: np.ndarray
    q_a_max: np.ndarray
    q_d_max: np.ndarray
    ctrl_buses: frozenset[int]
    base_MVA: float = 100.0
    meta: dict[str, Any] = field(default_factory=dict)
    ctrl_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        K, G = self.n_loads, self.n_gens
        if K < 1 or G < 1:
            raise CaseError("n_loads and n_gens must be positive")
        for name in ("B", "V_G", "Q_L_nominal", "q_a_max", "q_d_max"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if self.B.shape != (K + G, K + G):
            raise CaseError(f"B must be {(K + G, K + G)}, got {self.B.shape}")
        for name, n in (("V_G", G), ("Q_L_nominal", K),
                        ("q_a_max", K), ("q_d_max", K)):
            if getattr(self, name).shape != (n,):
                raise CaseError(f"{name} must have length {n}")
        if not np.all(np.isfinite(self.B)):
            raise CaseError("B contains non-finite entries")
        if not np.allclose(self.B, self.B.T,
                           rtol=SYMMETRY_RTOL, atol=SYMMETRY_ATOL):
            raise CaseError("B is not symmetric within tolerance 1e-9")
        if np.any(self.q_a_max < 0):
            raise CaseError("q_a_max entries must be >= 0")
        if np.any(self.q_d_max < 0):
            raise CaseError("q_d_max entries must be >= 0")
        ctrl = frozenset(int(k) for k in self.ctrl_buses)
        object.__setattr__(self, "ctrl_buses", ctrl)
        if not ctrl or not all(1 <= k <= K for k in ctrl):
            raise CaseError("ctrl_buses must be a nonempty subset of 1..n_loads")
        off_ctrl = [k for k in range(1, K + 1)
                    if k not in ctrl and self.q_d_max[k - 1] != 0.0]
        if off_ctrl:
            raise CaseError(
                f"q_d_max must be zero off the controllable set; "
                f"nonzero at load bus(es) {sorted(off_ctrl)}")
        sv = np.linalg.svd(self.B_LL, compute_uv=False)
        if sv[-1] <= MIN_SV_RATIO * sv[0]:
            raise CaseError("B_LL block is numerically singular")
        object.__setattr__(self, "ctrl_idx",
                           _freeze(np.array(sorted(ctrl))).astype(np.intp) - 1)

    @property
    def B_LL(self) -> np.ndarray:
        return self.B[:self.n_loads, :self.n_loads]

    @property
    def B_LG(self) -> np.ndarray:
        return self.B[:self.n_loads, self.n_loads:]


@dataclass(frozen=True)
class StiffnessModel:
    """Stiffness factorization of one case, reused for every index evaluation.

    x_nominal is the solved vector Q_crit^-1 Q_L_nominal; delta_nominal is
    its infinity norm, computed on the same code path as instability_index.
    """

    V_L_star: np.ndarray
    Q_crit: np.ndarray
    Q_crit_solver: tuple[np.ndarray, np.ndarray]
    delta_nominal: float
    x_nominal: np.ndarray


def _solve_index(solver: tuple[np.ndarray, np.ndarray],
                 Q_L: np.ndarray) -> tuple[np.ndarray, float]:
    # Single code path shared by build_stiffness and instability_index so the
    # stored delta_nominal is bit-identical to a fresh evaluation.
    x = scipy.linalg.lu_solve(solver, Q_L)
    return x, float(np.max(np.abs(x)))


def build_stiffness(case: GridCase) -> StiffnessModel:
    """Compute V*, Q_crit and its LU factorization, and the nominal index.

    Raises StiffnessError when B_LL or Q_crit is ill-conditioned beyond 1e12,
    and CaseError when the nominal index is >= 1 (the case is already
    unstable, so the clipped-loss game is undefined).
    """
    B_LL = case.B_LL
    if np.linalg.cond(B_LL) > MAX_CONDITION:
        raise StiffnessError("B_LL condition estimate exceeds 1e12")
    v_star = scipy.linalg.solve(B_LL, -(case.B_LG @ case.V_G))
    q_crit = 0.25 * (v_star[:, None] * B_LL * v_star[None, :])
    if np.linalg.cond(q_crit) > MAX_CONDITION:
        raise StiffnessError("Q_crit condition estimate exceeds 1e12")
    solver = scipy.linalg.lu_factor(q_crit)
    x_nom, delta = _solve_index(solver, case.Q_L_nominal)
    if not np.isfinite(delta):
        raise StiffnessError("nominal instability index is not finite")
    if delta >= 1.0:
        raise CaseError(
            f"nominal instability index {delta:.6f} >= 1: case is unstable")
    return StiffnessModel(
        V_L_star=_freeze(v_star),
        Q_crit=_freeze(q_crit),
        Q_crit_solver=solver,
        delta_nominal=delta,
        x_nominal=_freeze(x_nom),
    )


def instability_index(model: StiffnessModel, Q_L: np.ndarray) -> float:
    """||Q_crit^-1 Q_L||_inf via the stored factorization."""
    q = np.ascontiguousarray(Q_L, dtype=np.float64)
    if q.shape != model.x_nominal.shape:
        raise CaseError(f"Q_L must have length {model.x_nominal.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise CaseError("Q_L contains non-finite entries")
    return _solve_index(model.Q_crit_solver, q)[1]


def assemble_susceptance(n_buses: int, branches: list[dict]) -> np.ndarray:
    """Assemble B = imag(Ybus) from a branch list.

    Each branch carries 1-based bus ids "from"/"to", series impedance r + jx,
    total line-charging susceptance b, and an optional off-nominal tap ratio
    on the from side. Convenience importer only; anything richer (phase
    shifters, bus shunts) belongs in a precomputed B.
    """
    Y = np.zeros((n_buses, n_buses), dtype=complex)
    for i, br in enumerate(branches):
        try:
            f = int(br["from"]) - 1
            t = int(br["to"]) - 1
            r = float(br.get("r", 0.0))
            x = float(br["x"])
            b = float(br.get("b", 0.0))
            tap = float(br.get("tap", 1.0)) or 1.0
        except (KeyError, TypeError, ValueError) as exc:
            raise CaseError(f"branch {i}: {exc}") from exc
        if not (0 <= f < n_buses and 0 <= t < n_buses) or f == t:
            raise CaseError(f"branch {i}: bus ids out of range")
        ys = 1.0 / complex(r, x)
        ysh = complex(0.0, b / 2.0)
        Y[f, f] += (ys + ysh) / tap ** 2
        Y[t, t] += ys + ysh
        # same float added to both off-diagonal slots keeps B exactly symmetric
        off = -ys / tap
        Y[f, t] += off
        Y[t, f] += off
    return Y.imag.copy()


def load_case(path: str, format: str = "json") -> GridCase:
    """Load, validate, and stability-check a case file.

    Rejects files violating any GridCase invariant with a diagnostic naming
    the violated invariant, and rejects cases whose nominal index is >= 1.
    """
    if format != "json":
        raise CaseError(f"unsupported case format: {format!r}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise CaseError(f"{path}: top level must be an object")
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise CaseError(f"{path}: missing required key(s) {missing}")
    has_b = "B" in raw
    has_branches = "branches" in raw
    if has_b == has_branches:
        raise CaseError(f"{path}: exactly one of 'B' or 'branches' is required")
    try:
        n_loads = int(raw["n_loads"])
        n_gens = int(raw["n_gens"])
        if has_b:
            B = np.array(raw["B"], dtype=np.float64)
        else:
            B = assemble_susceptance(n_loads + n_gens, raw["branches"])
        known = set(_REQUIRED_KEYS) | {"B", "branches", "base_MVA"}
        case = GridCase(
            n_loads=n_loads,
            n_gens=n_gens,
            B=B,
            V_G=np.array(raw["V_G"], dtype=np.float64),
            Q_L_nominal=np.array(raw["Q_L_nominal"], dtype=np.float64),
            q_a_max=np.array(raw["q_a_max"], dtype=np.float64),
            q_d_max=np.array(raw["q_d_max"], dtype=np.float64),
            ctrl_buses=frozenset(int(k) for k in raw["ctrl_buses"]),
            base_MVA=float(raw.get("base_MVA", 100.0)),
            meta={k: v for k, v in raw.items() if k not in known},
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"{path}: {exc}") from exc
    build_stiffness(case)  # rejects unstable or ill-conditioned cases at load
    return case
