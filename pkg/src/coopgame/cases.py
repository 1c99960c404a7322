"""The three worked case studies: game data, printed gains, parameters."""
from __future__ import annotations

import numpy as np

from . import matlib
from .model import (
    DirectedGraph,
    GameDefinition,
    GcscProblem,
    Mode,
    WeightVector,
    assemble_gain,
    build_from_graph,
    disagreement_weight,
    structured_from_matrix,
)

# --------------------------------------------------------------------------
# two-player game


def two_player_game() -> GameDefinition:
    A = np.array([[0.0, 1.0], [-1.0, -2.0]])
    return GameDefinition.from_matrices(
        A,
        Bs=[[[1.0], [0.0]], [[0.0], [1.0]]],
        Cs=[[[1.0, 0.0]], [[0.0, 1.0]]],
        Qs=[[[1.0]], [[5.0]]],
        Rs=[[[1.0]], [[2.5]]],
    )


TWO_PLAYER_X0 = np.array([1.0, 1.2])
TWO_PLAYER_ALPHA = (0.9048, 0.0952)
TWO_PLAYER_DELTA = 1.75
TWO_PLAYER_DISAGREEMENT = (1.3939, 1.2339)
TWO_PLAYER_PRINTED_BLOCKS = [[[-0.9818]], [[-0.6643]]]


def two_player_problem(delta: float = TWO_PLAYER_DELTA) -> GcscProblem:
    return GcscProblem(two_player_game(), WeightVector(np.array(TWO_PLAYER_ALPHA)), delta,
                       radius=float(np.linalg.norm(TWO_PLAYER_X0)), x0=TWO_PLAYER_X0, mode=Mode.POINT)


def two_player_printed_gain():
    return assemble_gain(TWO_PLAYER_PRINTED_BLOCKS, two_player_game())


# --------------------------------------------------------------------------
# five heterogeneous agents on a directed graph

# 0-based edges (j, i): link j -> i
FIVE_AGENT_EDGES = ((0, 1), (1, 2), (2, 0), (0, 4), (0, 3), (2, 3), (3, 4))
FIVE_AGENT_STATE_DIMS = (1, 2, 1, 1, 2)
FIVE_AGENT_X0 = np.array([-0.3, -0.5, -0.4, -0.2, -0.1, -0.3, -0.4])
FIVE_AGENT_DELTA = 0.25
FIVE_AGENT_PRINTED_F = np.array([
    [-1.3392, 0, 0, 0.5544, 0, 0, 0],
    [0.9748, -3.9132, -2.4520, 0, 0, 0, 0],
    [-0.4568, 2.4189, 2.8231, 0, 0, 0, 0],
    [0, 0.2554, -0.3968, -3.9270, 0, 0, 0],
    [0.8975, 0, 0, 0.1809, -5.5484, 0, 0],
    [0.7665, 0, 0, 0, -0.3011, -1.4171, -1.8687],
])


def five_agent_graph() -> DirectedGraph:
    return DirectedGraph(5, FIVE_AGENT_EDGES)


def five_agent_game() -> GameDefinition:
    g = five_agent_graph()
    A_blocks = [[[0.0]], [[1.0, 1.0], [1.0, 1.0]], [[1.0]], [[2.0]], [[0.0, 1.0], [0.0, 0.0]]]
    B = {
        (0, 0): [[1.0]],
        (1, 0): [[0.3], [0.2]],
        (3, 0): [[0.1]],
        (4, 0): [[0.2], [0.0]],
        (1, 1): [[1.0, 0.0], [0.0, -1.0]],
        (2, 1): [[0.0, 0.2]],
        (2, 2): [[1.0]],
        (0, 2): [[0.2]],
        (3, 2): [[0.3]],
        (3, 3): [[1.0]],
        (4, 3): [[0.1], [0.0]],
        (4, 4): [[0.0], [2.0]],
    }
    dims = FIVE_AGENT_STATE_DIMS
    second_order = [1, 4]
    W = []
    for i in range(5):
        Wi = disagreement_weight(g, dims, i, component=0)
        if i in second_order:
            Wi = Wi + disagreement_weight(g, dims, i, component=1, pairs=second_order)
        W.append(Wi)
    R = [np.eye(1), np.eye(2), np.eye(1), np.eye(1), np.eye(1)]
    return build_from_graph(g, A_blocks, B, W, R)


def five_agent_problem(delta: float = FIVE_AGENT_DELTA) -> GcscProblem:
    return GcscProblem(five_agent_game(), WeightVector.uniform(5), delta,
                       radius=float(np.linalg.norm(FIVE_AGENT_X0)), x0=FIVE_AGENT_X0, mode=Mode.POINT)


def five_agent_printed_gain():
    return structured_from_matrix(FIVE_AGENT_PRINTED_F, five_agent_game())


# --------------------------------------------------------------------------
# microgrid tracking synchronisation (relative coordinates)

MICROGRID_Q = np.diag([50000.0, 1.0])
MICROGRID_R = 0.01
MICROGRID_K = np.array([[2236.0, 67.6]])
MICROGRID_XI0 = np.array([1.0, 0.0])  # every generator starts here
MICROGRID_REF = np.array([0.95, 0.0])
MICROGRID_DELTA = 1.6
# relative states x1 = xi1 - xi0, x2 = xi2 - xi1, x3 = xi3 - xi2, x4 = xi4 - xi1
MICROGRID_EDGES = ((0, 1), (1, 2), (0, 3))
MICROGRID_PRINTED_F = np.array([
    [-2320.7, -84.0, 0, 0, 0, 0, 0, 0],
    [-1194.4, -70.8, -2440.5, -88.0, 0, 0, 0, 0],
    [0, 0, 75.3, -22.0, -2350.9, -69.4, 0, 0],
    [-1014.8, -56.6, 0, 0, 0, 0, -2205.0, -78.2],
])
# The listed weights already carry the 1/2 of the integral, yet the quoted
# microgrid costs equal the integral without it; cost_scale=2 reproduces them.
MICROGRID_COST_SCALE = 2.0


def microgrid_x0() -> np.ndarray:
    x = np.zeros(8)
    x[:2] = MICROGRID_XI0 - MICROGRID_REF
    return x


def microgrid_graph() -> DirectedGraph:
    return DirectedGraph(4, MICROGRID_EDGES)


def microgrid_game(cost_scale: float = MICROGRID_COST_SCALE) -> GameDefinition:
    Ag = np.array([[0.0, 1.0], [0.0, 0.0]])
    Bg = np.array([[0.0], [1.0]])
    g = microgrid_graph()
    B = {(i, i): Bg for i in range(4)}
    for j, i in MICROGRID_EDGES:
        B[(i, j)] = -Bg
    n = 8
    W = []
    for i in range(4):
        Wi = np.zeros((n, n))
        Wi[2 * i:2 * i + 2, 2 * i:2 * i + 2] = 0.5 * MICROGRID_Q
        W.append(Wi)
    R = [0.5 * MICROGRID_R * np.eye(1)] * 4
    return build_from_graph(g, [Ag] * 4, B, W, R, cost_scale=cost_scale)


def microgrid_problem(delta: float = MICROGRID_DELTA) -> GcscProblem:
    x0 = microgrid_x0()
    return GcscProblem(microgrid_game(), WeightVector.uniform(4), delta,
                       radius=float(np.linalg.norm(x0)), x0=x0, mode=Mode.POINT)


def microgrid_printed_gain():
    return structured_from_matrix(MICROGRID_PRINTED_F, microgrid_game())


def microgrid_baseline_gain(c: float = 1.0) -> np.ndarray:
    """Distributed cooperative tracker ``v_i = -cK(xi_i - xi_parent)``."""
    return -c * np.kron(np.eye(4), MICROGRID_K)


def microgrid_tracking_map() -> np.ndarray:
    """``T`` with ``xi_i - xi_0 = (T x)_i`` in relative coordinates."""
    I2 = np.eye(2)
    chains = [[0], [0, 1], [0, 1, 2], [0, 3]]
    T = np.zeros((8, 8))
    for r, cols in enumerate(chains):
        for c in cols:
            T[2 * r:2 * r + 2, 2 * c:2 * c + 2] = I2
    return T


def microgrid_tracking_cost(F, x0=None) -> float:
    """Sum over generators of 1/2 int (e_i'Q e_i + v_i'R v_i), e_i = xi_i - xi_0."""
    from .lyapriccati import solve_lyapunov

    game = microgrid_game()
    x0 = microgrid_x0() if x0 is None else np.asarray(x0, dtype=float)
    F = np.asarray(F, dtype=float)
    T = microgrid_tracking_map()
    W = 0.5 * (T.T @ matlib.kron(np.eye(4), MICROGRID_Q) @ T + MICROGRID_R * F.T @ F)
    Y = solve_lyapunov(game.A + game.B @ F, W)
    return float(x0 @ Y @ x0)
