import pathlib

import numpy as np
import pytest

import vargame as vg
from vargame.game import build_context

CASE_DIR = pathlib.Path(vg.__file__).parent / "cases"


def case_path(name: str) -> str:
    return str(CASE_DIR / f"{name}.json")


def toy_case() -> vg.GridCase:
    """Five-bus case small enough for exhaustive hand checks."""
    branches = [
        {"from": 1, "to": 4, "x": 0.06},
        {"from": 2, "to": 5, "x": 0.08},
        {"from": 1, "to": 2, "r": 0.01, "x": 0.09, "b": 0.1},
        {"from": 2, "to": 3, "r": 0.02, "x": 0.12, "b": 0.08},
        {"from": 3, "to": 4, "r": 0.01, "x": 0.07, "b": 0.05},
    ]
    B = vg.assemble_susceptance(5, branches)
    return vg.GridCase(
        n_loads=3, n_gens=2, B=B,
        V_G=np.array([1.02, 1.01]),
        Q_L_nominal=np.array([0.9, 1.2, 0.7]),
        q_a_max=np.array([1.5, 1.5, 1.5]),
        q_d_max=np.array([2.0, 0.0, 2.0]),
        ctrl_buses=frozenset({1, 3}),
    )


@pytest.fixture(scope="session")
def ieee9():
    return vg.load_case(case_path("ieee9"))


@pytest.fixture(scope="session")
def ieee39():
    return vg.load_case(case_path("ieee39"))


@pytest.fixture(scope="session")
def model9(ieee9):
    return vg.build_stiffness(ieee9)


@pytest.fixture(scope="session")
def ctx9(ieee9, model9):
    return build_context(model9, ieee9)


@pytest.fixture(scope="session")
def toy():
    return toy_case()


@pytest.fixture(scope="session")
def model_toy(toy):
    return vg.build_stiffness(toy)


@pytest.fixture(scope="session")
def ctx_toy(toy, model_toy):
    return build_context(model_toy, toy)


def random_feasible_levels(rng, n_genes: int, n_levels: int, gamma: float,
                           ctrl=None):
    """Rejection-sample one feasible level vector; zero is always feasible."""
    free = list(range(n_genes)) if ctrl is None else list(ctrl)
    for _ in range(200):
        lv = np.zeros(n_genes, dtype=int)
        lv[free] = rng.integers(0, n_levels, size=len(free))
        if vg.is_feasible(tuple(lv), n_levels, gamma):
            return tuple(int(v) for v in lv)
    return tuple(0 for _ in range(n_genes))
