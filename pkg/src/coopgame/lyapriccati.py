"""Lyapunov and algebraic Riccati solvers, plus closed-loop cost oracles.

The Lyapunov solver vectorises ``A'Y + YA + W = 0`` into an n^2 x n^2
dense system.  At the sizes used here (n <= 32) that is fast enough and
keeps the solver independent of scipy's Bartels-Stewart routine, which
the tests use as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import matlib
from .errors import NoStabilizingSolution, NotHurwitz, SingularSystem
from .model import GameDefinition, StructuredGain, WeightVector, aggregate, team_matrices


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    residual: float
    closed_loop_margin: float


@dataclass(frozen=True)
class CostBreakdown:
    per_player: np.ndarray
    weighted: float
    team: float
    weighted_direct: float

    def to_dict(self) -> dict:
        return {
            "J_i": self.per_player.tolist(),
            "J_alpha": self.weighted,
            "J_team": self.team,
        }


def solve_lyapunov(A_cl, W) -> np.ndarray:
    """Solve ``A_cl' Y + Y A_cl + W = 0`` for a Hurwitz ``A_cl``."""
    A_cl = matlib.as_matrix(A_cl, "A_cl")
    W = matlib.symmetrize(matlib.as_matrix(W, "W"))
    n = A_cl.shape[0]
    margin = matlib.hurwitz_margin(A_cl)
    if margin >= -matlib.HURWITZ_TOL:
        raise NotHurwitz(f"closed loop not Hurwitz (max real part {margin:.3e})")
    eye = np.eye(n)
    # row-major vec: vec(A'Y) = (A' (x) I) vec(Y), vec(YA) = (I (x) A') vec(Y)
    L = np.kron(A_cl.T, eye) + np.kron(eye, A_cl.T)
    try:
        lu = sla.lu_factor(L)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from None
    Y = matlib.symmetrize(sla.lu_solve(lu, -W.reshape(-1)).reshape(n, n))
    # one round of iterative refinement on the residual
    E = A_cl.T @ Y + Y @ A_cl + W
    Y = matlib.symmetrize(Y - sla.lu_solve(lu, E.reshape(-1)).reshape(n, n))
    res = np.linalg.norm(A_cl.T @ Y + Y @ A_cl + W)
    if not np.isfinite(res) or res > 1e-6 * (1 + np.linalg.norm(Y)) * (1 + np.linalg.norm(A_cl)):
        raise SingularSystem(f"Lyapunov residual {res:.3e} too large (near-defective closed loop)")
    return Y


def lyapunov_residual(A_cl, Y, W) -> float:
    return float(np.linalg.norm(A_cl.T @ Y + Y @ A_cl + W))


def riccati_residual(A, B, Q, R, P) -> float:
    return float(np.linalg.norm(_riccati_lhs(A, B, Q, R, P)))


def _riccati_lhs(A, B, Q, R, P):
    return A.T @ P + P @ A + Q - P @ B @ np.linalg.solve(R, B.T @ P)


def _newton_step(A, B, Q, R, P):
    """Kleinman update written for the correction: ``A_k' D + D A_k = -Ric(P)``.

    Mathematically identical to solving for the next iterate directly, but
    the right-hand side is the small residual, which keeps the update
    accurate when ``P`` is large.
    """
    K = np.linalg.solve(R, B.T @ P)
    Acl = A - B @ K
    D = solve_lyapunov(Acl, matlib.symmetrize(_riccati_lhs(A, B, Q, R, P)))
    return matlib.symmetrize(P + D)


def solve_are(A, B, Q, R) -> RiccatiSolution:
    """Stabilising solution of ``A'P + PA + Q - P B R^-1 B' P = 0``.

    Stable invariant subspace of the Hamiltonian, then Newton-Kleinman
    refinement while the Newton correction keeps shrinking (at most four steps).
    """
    A = matlib.as_matrix(A, "A")
    B = matlib.as_matrix(B, "B")
    Q = matlib.symmetrize(matlib.as_matrix(Q, "Q"))
    R = matlib.symmetrize(matlib.as_matrix(R, "R"))
    n = A.shape[0]
    S = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -S], [-Q, -A.T]])
    w, V = np.linalg.eig(H)
    stable = w.real < 0
    if np.sum(stable) != n or np.any(np.abs(w.real) < 1e-12 * (1 + np.abs(w).max())):
        raise NoStabilizingSolution("Hamiltonian has eigenvalues on (or too near) the imaginary axis")
    Vs = V[:, stable]
    X1, X2 = Vs[:n], Vs[n:]
    if np.linalg.cond(X1) > 1e12:
        raise NoStabilizingSolution("stable subspace is not a graph (X1 singular)")
    P = matlib.symmetrize(np.real(np.linalg.solve(X1.T, X2.T).T))
    # One step normally suffices.  Badly scaled instances get up to three
    # more; the residual is rounding-dominated there, so steps are judged
    # by whether the Newton correction is still shrinking.
    last = np.inf
    for _ in range(4):
        try:
            P_ref = _newton_step(A, B, Q, R, P)
        except (NotHurwitz, SingularSystem):
            break
        step = np.linalg.norm(P_ref - P)
        if not step < last:
            break
        P, last = P_ref, step
        if step <= 1e-15 * (1 + np.linalg.norm(P)):
            break
    K = np.linalg.solve(R, B.T @ P)
    margin = matlib.hurwitz_margin(A - B @ K)
    if margin >= -matlib.HURWITZ_TOL:
        raise NoStabilizingSolution(f"closed loop not stable (margin {margin:.3e})")
    return RiccatiSolution(P, riccati_residual(A, B, Q, R, P), margin)


def newton_kleinman(A, B, Q, R, P0, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Plain Newton-Kleinman iteration from a stabilising seed ``P0``."""
    P = matlib.symmetrize(np.asarray(P0, dtype=float))
    for _ in range(max_iter):
        P_next = _newton_step(A, B, Q, R, P)
        if np.linalg.norm(P_next - P) <= tol * (1 + np.linalg.norm(P)):
            return P_next
        P = P_next
    return P


def evaluate_costs(gain, game: GameDefinition, alpha: WeightVector, x0) -> CostBreakdown:
    """Per-player, weighted and team costs of the closed loop from ``x0``."""
    F = gain.F if isinstance(gain, StructuredGain) else np.asarray(gain, dtype=float)
    x0 = np.asarray(x0, dtype=float).ravel()
    A_cl = game.A + game.B @ F
    if not matlib.is_hurwitz(A_cl):
        raise NotHurwitz(f"A + BF not Hurwitz (margin {matlib.hurwitz_margin(A_cl):.3e})")
    s = game.cost_scale
    J = np.empty(game.N)
    for i, p in enumerate(game.players):
        Fi = F[game.input_slice(i)]
        W = s * (p.C.T @ p.Q @ p.C + Fi.T @ p.R @ Fi)
        J[i] = x0 @ solve_lyapunov(A_cl, W) @ x0
    weighted = float(alpha.values @ J)
    Qa, Ra, _ = aggregate(game, alpha)
    direct = float(x0 @ solve_lyapunov(A_cl, Qa + F.T @ Ra @ F) @ x0)
    if abs(direct - weighted) > 1e-9 * max(1.0, abs(direct)):
        raise SingularSystem(f"cost cross-check mismatch: {weighted!r} vs {direct!r}")
    return CostBreakdown(J, weighted, float(J.sum()), direct)


def cost_matrix(gain, game: GameDefinition, alpha: WeightVector) -> np.ndarray:
    """``Y`` with ``J_alpha = x0' Y x0`` for every x0."""
    F = gain.F if isinstance(gain, StructuredGain) else np.asarray(gain, dtype=float)
    Qa, Ra, B = aggregate(game, alpha)
    return solve_lyapunov(game.A + B @ F, Qa + F.T @ Ra @ F)


def optimal_team_cost(game: GameDefinition, x0) -> float:
    """Cooperative optimum ``x0' P x0`` of the unweighted team problem."""
    Q, R, B = team_matrices(game)
    sol = solve_are(game.A, B, Q, R)
    x0 = np.asarray(x0, dtype=float).ravel()
    return float(x0 @ sol.P @ x0)


def weighted_optimal(game: GameDefinition, alpha: WeightVector):
    """``(P_alpha, F_star)`` for the weighted full-information problem."""
    Q, R, B = aggregate(game, alpha)
    sol = solve_are(game.A, B, Q, R)
    F = -np.linalg.solve(R, B.T @ sol.P)
    return sol, F
