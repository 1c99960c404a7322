import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from coopgame import cases, sim
from coopgame.errors import NotHurwitz
from coopgame.lyapriccati import (
    evaluate_costs,
    lyapunov_residual,
    newton_kleinman,
    optimal_team_cost,
    riccati_residual,
    solve_are,
    solve_lyapunov,
    weighted_optimal,
)
from coopgame.model import GameDefinition, WeightVector

from conftest import random_game, random_psd, random_spd, random_stable


def test_lyapunov_examples():
    assert solve_lyapunov([[-1.0]], [[2.0]])[0, 0] == pytest.approx(1.0)
    assert np.allclose(solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2)), np.diag([0.5, 0.25]))
    with pytest.raises(NotHurwitz):
        solve_lyapunov([[0.0, 1.0], [0.0, 0.0]], np.eye(2))


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_lyapunov_against_scipy(seed, n):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n)
    W = random_psd(rng, n)
    Y = solve_lyapunov(A, W)
    assert lyapunov_residual(A, Y, W) <= 1e-10 * (1 + np.linalg.norm(Y)) * (1 + np.linalg.norm(A))
    assert np.allclose(Y, sla.solve_continuous_lyapunov(A.T, -W), rtol=1e-8, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_lyapunov_matches_quadrature(seed, n):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n, margin=0.5)
    W = random_psd(rng, n)
    x0 = rng.standard_normal(n)
    J = x0 @ solve_lyapunov(A, W) @ x0
    assert sim.simulated_cost(A, W, x0) == pytest.approx(J, rel=1e-2)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_cost_monotone_in_weight(seed, n):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n)
    W = random_psd(rng, n)
    dW = random_psd(rng, n, rank=1)
    x0 = rng.standard_normal(n)
    assert x0 @ solve_lyapunov(A, W + dW) @ x0 >= x0 @ solve_lyapunov(A, W) @ x0 - 1e-10


def test_are_scalar_examples():
    s = solve_are([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert s.P[0, 0] == pytest.approx(1.0) and s.closed_loop_margin == pytest.approx(-1.0)
    s = solve_are([[1.0]], [[1.0]], [[0.0]], [[1.0]])
    assert s.P[0, 0] == pytest.approx(2.0) and s.closed_loop_margin == pytest.approx(-1.0)


def test_are_two_player_team():
    assert optimal_team_cost(cases.two_player_game(), cases.TWO_PLAYER_X0) == pytest.approx(2.5670, abs=5e-3)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 4))
def test_are_random_against_oracles(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    Q = random_psd(rng, n) + 0.01 * np.eye(n)
    R = random_spd(rng, m)
    sol = solve_are(A, B, Q, R)
    assert sol.residual <= 1e-8 * (1 + np.linalg.norm(sol.P))
    assert sol.closed_loop_margin < -1e-9
    P_nk = newton_kleinman(A, B, Q, R, sol.P)
    assert np.linalg.norm(P_nk - sol.P) <= 1e-9 * (1 + np.linalg.norm(sol.P))
    assert np.allclose(sol.P, sla.solve_continuous_are(A, B, Q, R), rtol=1e-7, atol=1e-9)


def test_weighted_optimal_scalar_lqr():
    game = GameDefinition.from_matrices([[0.0]], [[[2.0]]], [[[1.0]]], [[[3.0]]], [[[0.5]]])
    sol, F = weighted_optimal(game, WeightVector(np.array([1.0])))
    p = sol.P[0, 0]
    assert F[0, 0] == pytest.approx(-p * 2.0 / 0.5)
    assert riccati_residual(game.A, game.B, game.players[0].Q, game.players[0].R, sol.P) < 1e-10


@given(st.floats(0.01, 0.99))
def test_weighted_optimal_two_player(a1):
    game = cases.two_player_game()
    sol, F = weighted_optimal(game, WeightVector(np.array([a1, 1 - a1])))
    assert sol.closed_loop_margin < 0 and sol.residual <= 1e-8


def test_evaluate_costs_two_player():
    p = cases.two_player_problem()
    c = evaluate_costs(cases.two_player_printed_gain(), p.game, p.alpha, p.x0)
    assert c.per_player[0] == pytest.approx(1.3816, abs=5e-3)
    assert c.per_player[1] == pytest.approx(1.2125, abs=5e-3)
    assert c.weighted == pytest.approx(1.3655, abs=5e-3)
    assert c.weighted == pytest.approx(c.weighted_direct, rel=1e-9)
    z = evaluate_costs(cases.two_player_printed_gain(), p.game, p.alpha, np.zeros(2))
    assert z.team == 0.0


@given(st.integers(0, 2**32 - 1))
def test_evaluate_costs_cross_check(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, 4, 3, full_info=True)
    alpha = WeightVector.normalized(rng.uniform(0.1, 1, 3))
    _, F = weighted_optimal(game, alpha)
    c = evaluate_costs(F, game, alpha, rng.standard_normal(4))
    assert c.weighted == pytest.approx(float(alpha.values @ c.per_player), rel=1e-9)
    assert c.weighted == pytest.approx(c.weighted_direct, rel=1e-9)


def test_evaluate_costs_requires_hurwitz():
    p = cases.microgrid_problem()
    with pytest.raises(NotHurwitz):
        evaluate_costs(np.zeros((4, 8)), p.game, p.alpha, p.x0)


def test_cost_scale_doubles_costs():
    p = cases.microgrid_problem()
    F = cases.MICROGRID_PRINTED_F
    c2 = evaluate_costs(F, p.game, p.alpha, p.x0)
    c1 = evaluate_costs(F, cases.microgrid_game(cost_scale=1.0), p.alpha, p.x0)
    assert c2.weighted == pytest.approx(2 * c1.weighted, rel=1e-12)
