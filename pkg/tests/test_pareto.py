import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopgame import cases, pareto
from coopgame.errors import NoIndividuallyRationalPoint, SC1Violated
from coopgame.lyapriccati import solve_are, weighted_optimal
from coopgame.model import GameDefinition, WeightVector, aggregate, structural_residual

from conftest import random_game, random_psd, random_spd


def full_info_two_player():
    g = cases.two_player_game()
    return GameDefinition.from_matrices(
        g.A, [p.B for p in g.players], [np.eye(2)] * 2,
        [np.diag([1.0, 0.0]), np.diag([0.0, 5.0])], [p.R for p in g.players],
    )


def planted_sc1_game(rng, n=4):
    """Player 1 sees everything; player 2 has no state cost and observes
    exactly the directions its weighted-optimal row block uses."""
    A = rng.standard_normal((n, n))
    B1, B2 = rng.standard_normal((n, 1)), rng.standard_normal((n, 2))
    Q1 = random_psd(rng, n) + 0.1 * np.eye(n)
    R1, R2 = random_spd(rng, 1), random_spd(rng, 2)
    alpha = WeightVector.normalized(rng.uniform(0.2, 1, 2))
    B = np.hstack([B1, B2])
    Ra = np.block([[alpha.values[0] * R1, np.zeros((1, 2))], [np.zeros((2, 1)), alpha.values[1] * R2]])
    P = solve_are(A, B, alpha.values[0] * Q1, Ra).P
    Fstar = -np.linalg.solve(Ra, B.T @ P)
    C2 = np.vstack([Fstar[1:], rng.standard_normal((1, n))])
    game = GameDefinition.from_matrices(A, [B1, B2], [np.eye(n), C2], [Q1, np.zeros((3, 3))], [R1, R2])
    return game, alpha


def test_sc1_full_information_zero():
    game = full_info_two_player()
    alpha = WeightVector.uniform(2)
    sol, _ = weighted_optimal(game, alpha)
    assert pareto.sc1_residual(sol.P, game, alpha) <= 1e-12


def test_sc1_two_player_violated():
    game = cases.two_player_game()
    alpha = WeightVector.uniform(2)
    sol, _ = weighted_optimal(game, alpha)
    assert pareto.sc1_residual(sol.P, game, alpha) > 1e-6


@given(st.integers(0, 2**32 - 1))
def test_sc1_equals_sc2_at_optimum(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, int(rng.integers(2, 5)), int(rng.integers(1, 4)))
    alpha = WeightVector.normalized(rng.uniform(0.1, 1, game.N))
    sol, F = weighted_optimal(game, alpha)
    assert abs(pareto.sc1_residual(sol.P, game, alpha) - structural_residual(F, game)) <= 1e-10 * (1 + np.abs(F).max())


def test_scan_two_player_all_fail(tmp_path):
    scan = pareto.pareto_scan(cases.two_player_game(), pareto.two_player_grid(0.01))
    assert len(scan.rows) == 99 and scan.all_fail
    assert all(r.sc1_residual > 1e-6 for r in scan.rows)
    out = tmp_path / "scan.csv"
    scan.write_csv(out)
    rows = pareto.read_scan_csv(out)
    assert list(rows[0]) == ["alpha_1", "alpha_2", "are_residual", "sc1_residual", "passes"]
    assert float(rows[4]["sc1_residual"]) == scan.rows[4].sc1_residual


def test_scan_full_information_all_pass_and_single_row():
    scan = pareto.pareto_scan(full_info_two_player(), pareto.two_player_grid(0.1))
    assert all(r.passes for r in scan.rows)
    assert len(pareto.pareto_scan(cases.two_player_game(), [WeightVector.uniform(2)]).rows) == 1


def test_scan_is_deterministic():
    grid = pareto.two_player_grid(0.2)
    a = pareto.pareto_scan(cases.two_player_game(), grid)
    b = pareto.pareto_scan(cases.two_player_game(), grid[::-1])
    assert [r.sc1_residual for r in a.rows] == [r.sc1_residual for r in b.rows][::-1]


def test_output_feedback_gain_full_information():
    game = full_info_two_player()
    alpha = WeightVector(np.array([0.3, 0.7]))
    sol, F = weighted_optimal(game, alpha)
    g = pareto.output_feedback_pareto_gain(sol.P, game, alpha)
    assert np.allclose(g.blocks[0], F[:1]) and np.allclose(g.F, F, atol=1e-8)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_output_feedback_gain_planted(seed):
    rng = np.random.default_rng(seed)
    game, alpha = planted_sc1_game(rng)
    Qa, Ra, B = aggregate(game, alpha)
    P = solve_are(game.A, B, Qa, Ra).P
    assert pareto.sc1_residual(P, game, alpha) <= 1e-6
    g = pareto.output_feedback_pareto_gain(P, game, alpha)
    assert np.abs(g.F + np.linalg.solve(Ra, B.T @ P)).max() <= 1e-8 * (1 + np.abs(g.F).max())
    e = pareto.eta1(game, rng.standard_normal(game.n), alpha)
    assert e.available and e.eta1 >= 1 - 1e-9


def test_output_feedback_gain_violated():
    game = cases.two_player_game()
    alpha = WeightVector.uniform(2)
    sol, _ = weighted_optimal(game, alpha)
    with pytest.raises(SC1Violated):
        pareto.output_feedback_pareto_gain(sol.P, game, alpha)


def test_eta1():
    game = cases.two_player_game()
    for a in (0.1, 0.5, 0.9):
        assert not pareto.eta1(game, cases.TWO_PLAYER_X0, WeightVector(np.array([a, 1 - a]))).available
    single = GameDefinition.from_matrices([[0.0, 1.0], [0.0, 0.0]], [[[0.0], [1.0]]], [np.eye(2)],
                                          [np.eye(2)], [[[1.0]]])
    e = pareto.eta1(single, np.array([1.0, -0.5]), WeightVector(np.array([1.0])))
    assert e.available and e.eta1 == pytest.approx(1.0, abs=1e-12)


def test_bargain_symmetric():
    game = GameDefinition.from_matrices(-np.eye(2), [[[1.0], [0.0]], [[0.0], [1.0]]],
                                        [[[1.0, 0.0]], [[0.0, 1.0]]], [[[1.0]], [[1.0]]], [[[1.0]], [[1.0]]])
    x0 = np.array([1.0, 1.0])
    fr = pareto.frontier_2p(game, x0, 0.1)
    d = fr[:, 1:].max(axis=0) + 0.1
    res = pareto.nash_bargain_2p(game, d, x0, step=0.01)
    assert res.alpha[0] == pytest.approx(0.5)


def test_bargain_no_rational_point():
    with pytest.raises(NoIndividuallyRationalPoint):
        pareto.nash_bargain_2p(cases.two_player_game(), (0.01, 0.01), cases.TWO_PLAYER_X0, step=0.1)
    with pytest.raises(ValueError):
        pareto.nash_bargain_2p(cases.two_player_game(), (-1.0, 1.0), cases.TWO_PLAYER_X0, step=0.1)
