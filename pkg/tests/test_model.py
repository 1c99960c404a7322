import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coopgame import cases, model
from coopgame.errors import NotStructured, ValidationError
from coopgame.model import (
    DirectedGraph,
    GameDefinition,
    GcscProblem,
    Mode,
    WeightVector,
    aggregate,
    assemble_gain,
    extract_blocks,
    selector,
    structural_residual,
    team_matrices,
)

from conftest import random_game


def test_two_player_aggregate():
    game = cases.two_player_game()
    Qa, Ra, B = aggregate(game, WeightVector(np.array([0.9048, 0.0952])))
    assert np.allclose(Qa, np.diag([0.9048, 0.4760]), atol=1e-12)
    assert np.allclose(Ra, np.diag([0.9048, 0.2380]), atol=1e-12)
    assert np.array_equal(B, np.eye(2))


def test_team_matrices_two_player():
    Q, R, B = team_matrices(cases.two_player_game())
    assert np.allclose(Q, np.diag([1.0, 5.0]))
    assert np.allclose(R, np.diag([1.0, 2.5]))
    assert np.array_equal(B, np.eye(2))


def test_identical_players_aggregate():
    C = np.array([[1.0, 0.5]])
    game = GameDefinition.from_matrices(-np.eye(2), [np.ones((2, 1))] * 2, [C, C], [[[2.0]]] * 2, [[[1.0]]] * 2)
    Qa, _, _ = aggregate(game, WeightVector.uniform(2))
    assert np.allclose(Qa, C.T @ [[2.0]] @ C)
    Qt, _, _ = team_matrices(game)
    assert np.allclose(Qt, 2 * C.T @ [[2.0]] @ C)


def test_zero_state_weights():
    game = GameDefinition.from_matrices(-np.eye(2), [np.ones((2, 1))] * 2, [np.eye(2)] * 2,
                                        [np.zeros((2, 2))] * 2, [[[1.0]]] * 2)
    assert np.array_equal(aggregate(game, WeightVector.uniform(2))[0], np.zeros((2, 2)))


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_aggregate_linear_in_alpha(seed, lam):
    rng = np.random.default_rng(seed)
    game = random_game(rng, 3, 3)
    a = WeightVector.normalized(rng.uniform(0.1, 1, 3))
    b = WeightVector.normalized(rng.uniform(0.1, 1, 3))
    c = lam * a.values + (1 - lam) * b.values
    mix = WeightVector(c / c.sum())
    Qa, Ra, _ = aggregate(game, a)
    Qb, Rb, _ = aggregate(game, b)
    Qm, Rm, _ = aggregate(game, mix)
    assert np.allclose(Qm, lam * Qa + (1 - lam) * Qb, atol=1e-12)
    assert np.allclose(Rm, lam * Ra + (1 - lam) * Rb, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_team_is_N_times_uniform(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, 3, int(rng.integers(2, 5)))
    Qa, Ra, _ = aggregate(game, WeightVector.uniform(game.N))
    Qt, Rt, _ = team_matrices(game)
    assert np.allclose(Qt, game.N * Qa)
    assert np.allclose(Rt, game.N * Ra)


def test_selector():
    game = cases.two_player_game()
    assert np.array_equal(selector(game, 0), [[1.0, 0.0]])
    g5 = cases.five_agent_game()
    assert np.array_equal(selector(g5, 1), np.eye(6)[1:3])
    assert np.array_equal(sum(selector(g5, i).T @ selector(g5, i) for i in range(5)), np.eye(6))
    with pytest.raises(IndexError):
        selector(game, 2)


def test_structural_residual_examples():
    game = cases.two_player_game()
    assert structural_residual(np.diag([-1.0, 2.0]), game) == 0.0
    assert structural_residual(np.array([[0.0, 0.7], [0.0, 0.0]]), game) == pytest.approx(0.7)
    full = GameDefinition.from_matrices(-np.eye(2), [np.ones((2, 1))] * 2, [np.eye(2)] * 2,
                                        [np.eye(2)] * 2, [[[1.0]]] * 2)
    assert structural_residual(np.random.default_rng(0).standard_normal((2, 2)), full) <= 1e-12


def test_assemble_examples():
    game = cases.two_player_game()
    g = assemble_gain([[[-0.9818]], [[-0.6643]]], game)
    assert np.array_equal(g.F, np.diag([-0.9818, -0.6643]))
    assert np.array_equal(assemble_gain([np.zeros((1, 1))] * 2, game).F, np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        assemble_gain([np.zeros((1, 2)), np.zeros((1, 1))], game)


def test_five_agent_printed_pattern_roundtrip():
    game = cases.five_agent_game()
    g = cases.five_agent_printed_gain()
    assert np.allclose(g.F, cases.FIVE_AGENT_PRINTED_F, atol=1e-12)
    assert np.array_equal(g.F == 0, cases.FIVE_AGENT_PRINTED_F == 0)
    assert structural_residual(g.F, game) <= 1e-12


def test_extract_errors_and_identity():
    game = cases.two_player_game()
    with pytest.raises(NotStructured):
        extract_blocks(np.ones((2, 2)), game)
    assert all(np.array_equal(b, 0 * b) for b in extract_blocks(np.zeros((2, 2)), game))
    full = GameDefinition.from_matrices(-np.eye(2), [np.ones((2, 1))] * 2, [np.eye(2)] * 2,
                                        [np.eye(2)] * 2, [[[1.0]]] * 2)
    F = np.array([[1.0, 2.0], [3.0, 4.0]])
    blocks = extract_blocks(F, full)
    assert np.allclose(blocks[0], F[:1]) and np.allclose(blocks[1], F[1:])


@given(st.integers(0, 2**32 - 1))
def test_structured_roundtrip(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
    blocks = [rng.standard_normal((p.m, p.s)) for p in game.players]
    g = assemble_gain(blocks, game)
    assert structural_residual(g.F, game) <= 1e-12 * (1 + np.abs(g.F).max())
    back = extract_blocks(g.F, game)
    assert all(np.abs(a - b).max() <= 1e-9 for a, b in zip(back, blocks))


def test_weight_vector_validation():
    WeightVector(np.array([0.3, 0.7]))
    WeightVector(np.array([1.0]))  # lone player
    for bad in ([0.0, 1.0], [1.2, -0.2], [0.3, 0.6], [np.nan, 0.5]):
        with pytest.raises(ValidationError):
            WeightVector(np.array(bad))
    assert WeightVector.uniform(4).is_uniform()


def test_game_validation_paths():
    A = -np.eye(2)
    ok = dict(Bs=[np.ones((2, 1))], Cs=[np.eye(2)], Qs=[np.eye(2)], Rs=[[[1.0]]])
    GameDefinition.from_matrices(A, **ok)
    with pytest.raises(ValidationError) as e:
        GameDefinition.from_matrices(A, **{**ok, "Rs": [[[0.0]]]})
    assert "players[0].R" in str(e.value)
    with pytest.raises(ValidationError):
        GameDefinition.from_matrices(A, **{**ok, "Qs": [-np.eye(2)]})
    with pytest.raises(ValidationError):
        GameDefinition.from_matrices(A, **{**ok, "Cs": [np.ones((2, 2))], "Qs": [np.eye(2)]})
    # unstable, uncontrollable mode
    with pytest.raises(ValidationError):
        GameDefinition.from_matrices(np.diag([1.0, -1.0]), [np.array([[0.0], [1.0]])], [np.eye(2)],
                                     [np.eye(2)], [[[1.0]]])


def test_problem_validation():
    game = cases.two_player_game()
    a = WeightVector.uniform(2)
    with pytest.raises(ValidationError):
        GcscProblem(game, a, 1.0, radius=1.0, x0=np.array([1.0, 1.0]))
    with pytest.raises(ValidationError):
        GcscProblem(game, a, -1.0, x0=np.zeros(2))
    with pytest.raises(ValidationError):
        GcscProblem(game, a, 1.0)  # point mode without x0
    GcscProblem(game, a, 1.0, radius=2.0, mode=Mode.BALL)


def test_five_agent_graph_assembly():
    game = cases.five_agent_game()
    assert game.n == 7 and game.m == 6
    A = game.A
    assert np.allclose(A[1:3, 1:3], [[1, 1], [1, 1]]) and A[3, 3] == 1 and A[4, 4] == 2
    assert np.allclose(A[5:7, 5:7], [[0, 1], [0, 0]])
    B = game.B
    # agent 1's input (column 0) drives agent 2 with [0.3; 0.2]
    assert np.allclose(B[1:3, 0], [0.3, 0.2])
    assert np.allclose(B[1:3, 1:3], [[1, 0], [0, -1]])
    # agent 1 observes itself and agent 3
    assert np.array_equal(game.players[0].C, np.eye(7)[[0, 3]])
    assert np.array_equal(game.players[3].C, np.eye(7)[[0, 3, 4]])


def test_microgrid_local_information():
    game = cases.microgrid_game()
    assert np.array_equal(game.players[1].C, np.eye(8)[:4])
    assert np.array_equal(game.A, np.kron(np.eye(4), [[0.0, 1.0], [0.0, 0.0]]))


def test_isolated_node_is_lqr():
    g = DirectedGraph(1, ())
    game = model.build_from_graph(g, [[[1.0]]], {(0, 0): [[1.0]]}, [np.eye(1)], [np.eye(1)])
    assert np.array_equal(game.players[0].C, np.eye(1))


def test_graph_rejects_self_loop_and_bad_edge():
    with pytest.raises(ValidationError):
        DirectedGraph(2, ((0, 0),))
    with pytest.raises(ValidationError):
        DirectedGraph(2, ((0, 5),))


def test_json_roundtrip(tmp_path):
    game = cases.five_agent_game()
    p = tmp_path / "g.json"
    p.write_text(json.dumps(model.game_to_dict(game)))
    back = model.game_from_dict(p)
    assert np.array_equal(back.A, game.A) and back.N == game.N
    prob = cases.five_agent_problem()
    assert model.problem_from_dict(model.problem_to_dict(prob), back).delta == prob.delta
    gain = cases.five_agent_printed_gain()
    assert np.allclose(model.gain_from_dict(gain.to_dict(), back).F, gain.F)
    graph = cases.five_agent_graph()
    assert model.graph_from_dict(model.graph_to_dict(graph)).edges == graph.edges


def test_json_errors_carry_path(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError) as e:
        model.game_from_dict(bad)
    assert str(bad) in str(e.value)
    with pytest.raises(ValidationError) as e:
        model.game_from_dict({"A": [[0.0]], "players": [{"B": [[1.0]], "C": [[1.0]], "Q": [[1.0]]}]})
    assert "players[0].R" in str(e.value)
