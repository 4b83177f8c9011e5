"""The five-agent, two-topic reference network and its parameter grid."""
from __future__ import annotations

import itertools

import numpy as np

from .graph import OpinionNetwork
from .nash import Scenario

# undirected edge list {1-2, 1-3, 2-3, 3-4, 4-5}, 0-based
REFERENCE_EDGES = ((0, 1), (0, 2), (1, 2), (2, 3), (3, 4))
REFERENCE_X0 = np.array([1, 2, 2, 4, 3, 1, 4, 3, 5, 6], dtype=float)
UNRELATED = np.eye(2)
COUPLED = np.ones((2, 2))
SWEEP_R_W = (2.0, 0.5, 0.1)

# Reported terminal errors (E_i, E_hat_i, E_o), keyed by (stubbornness, coupled topics).
REFERENCE_TABLES = {
    (0.0, False): {
        "E": (7.4116e-6, 7.4116e-6, 5.9987e-5, 6.5443e-5, 2.0279e-5),
        "E_hat": (7.4229e-6, 7.4206e-6, 6.0077e-5, 6.5548e-5, 2.0314e-5),
        "E_o": 5.5011e-5,
    },
    (0.0, True): {
        "E": (4.5838e-10, 4.5839e-10, 3.7100e-9, 4.0475e-9, 1.2542e-9),
        "E_hat": (5.8660e-10, 5.5744e-10, 4.7495e-9, 5.2724e-9, 1.6661e-9),
        "E_o": 3.4023e-9,
    },
    (1.0, False): {
        "E": (0.2602, 0.1645, 0.6474, 0.7448, 0.6275),
        "E_hat": (0.2602, 0.1645, 0.6474, 0.7448, 0.6275),
        "E_o": 1.4263,
    },
    (1.0, True): {
        "E": (0.2307, 0.0251, 0.3882, 0.5265, 0.6037),
        "E_hat": (0.2307, 0.0251, 0.3882, 0.5265, 0.6037),
        "E_o": 1.1261,
    },
}


def reference_network(stubbornness: float = 0.0, coupled: bool = False,
                      xi=None) -> OpinionNetwork:
    W = COUPLED if coupled else UNRELATED
    return OpinionNetwork.from_edges(
        5, 2, [(i, j, W) for i, j in REFERENCE_EDGES],
        stubbornness=stubbornness, disturbance_maps=xi)


def reference_scenario(stubbornness: float = 0.0, coupled: bool = False, r: float = 2.0,
                       r_w: float = 2.0, delta: float = 1.0, t_f: float = 10.0,
                       grid_steps: int = 2000) -> Scenario:
    name = f"W_ii={stubbornness:g},{'coupled' if coupled else 'unrelated'},r={r:g},r_w={r_w:g}"
    return Scenario.build(reference_network(stubbornness, coupled), REFERENCE_X0, t_f,
                          r=r, r_w=r_w, delta=delta, grid_steps=grid_steps, name=name)


def reference_grid(r_w_values=SWEEP_R_W, stubbornness_values=(0.0, 1.0),
                   coupled_values=(False, True), **kwargs):
    """All (stubbornness, coupled, r_w) cells of the reference sweep."""
    for stub, coupled, r_w in itertools.product(stubbornness_values, coupled_values, r_w_values):
        yield (stub, coupled, r_w), reference_scenario(stub, coupled, r_w=r_w, **kwargs)
