"""Pareto-side analysis of the weighted team problem.

For a weight vector ``alpha`` the full-information weighted optimum is
``F* = -R_alpha^-1 B' P_alpha``.  It can be realised with output feedback
only if every player's row block vanishes on the unobservable directions
of that player, i.e. ``G_i R_alpha^-1 B' P_alpha Pi_i = 0`` for all ``i``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matlib
from .errors import NoIndividuallyRationalPoint, NoStabilizingSolution, SC1Violated
from .lyapriccati import evaluate_costs, optimal_team_cost, solve_are
from .model import GameDefinition, StructuredGain, WeightVector, aggregate, assemble_gain, selector

SC1_TOL = 1e-6


@dataclass
class ParetoScanRow:
    alpha: np.ndarray
    are_residual: float
    sc1_residual: float
    passes: bool
    error: str | None = None


@dataclass
class ParetoScan:
    rows: list[ParetoScanRow]
    tol: float

    @property
    def all_fail(self) -> bool:
        return not any(r.passes for r in self.rows)

    def write_csv(self, path) -> None:
        N = len(self.rows[0].alpha) if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"alpha_{i + 1}" for i in range(N)] + ["are_residual", "sc1_residual", "passes"])
            for r in self.rows:
                w.writerow([repr(float(a)) for a in r.alpha]
                           + [repr(r.are_residual), repr(r.sc1_residual), str(r.passes).lower()])


def _minus_gain(P, game: GameDefinition, alpha: WeightVector) -> np.ndarray:
    _, Ra, B = aggregate(game, alpha)
    return -np.linalg.solve(Ra, B.T @ np.asarray(P, dtype=float))


def sc1_residual(P, game: GameDefinition, alpha: WeightVector) -> float:
    """Largest Frobenius norm of ``G_i R_alpha^-1 B' P Pi_i`` over players."""
    K = -_minus_gain(P, game, alpha)
    worst = 0.0
    for i, p in enumerate(game.players):
        Pi = matlib.rowspace_complement_projector(p.C)
        worst = max(worst, float(np.linalg.norm(selector(game, i) @ K @ Pi)))
    return worst


def pareto_scan(game: GameDefinition, alphas, tol: float = SC1_TOL) -> ParetoScan:
    """Weighted ARE and SC1 residual at each weight vector.

    ARE failures are recorded in the row (residual ``inf``) rather than raised.
    """
    rows = []
    for a in alphas:
        alpha = a if isinstance(a, WeightVector) else WeightVector(np.asarray(a, dtype=float))
        Qa, Ra, B = aggregate(game, alpha)
        try:
            sol = solve_are(game.A, B, Qa, Ra)
        except NoStabilizingSolution as exc:
            rows.append(ParetoScanRow(alpha.values, np.inf, np.inf, False, str(exc)))
            continue
        r = sc1_residual(sol.P, game, alpha)
        rows.append(ParetoScanRow(alpha.values, sol.residual, r, bool(r <= tol)))
    return ParetoScan(rows, tol)


def two_player_grid(step: float) -> list[WeightVector]:
    """``(a, 1-a)`` for ``a = step, 2 step, ..., 1 - step``."""
    K = int(round(1.0 / step))
    return [WeightVector(np.array([k / K, 1.0 - k / K])) for k in range(1, K)]


def output_feedback_pareto_gain(P, game: GameDefinition, alpha: WeightVector,
                                tol: float = SC1_TOL) -> StructuredGain:
    """Blocks ``F_i = -G_i R_alpha^-1 B' P C_i' (C_i C_i')^-1``."""
    r = sc1_residual(P, game, alpha)
    if r > tol:
        raise SC1Violated(f"SC1 residual {r:.3e} exceeds {tol:g}")
    Fstar = _minus_gain(P, game, alpha)
    blocks = []
    for i, p in enumerate(game.players):
        C = p.C
        blocks.append(selector(game, i) @ Fstar @ C.T @ np.linalg.inv(C @ C.T))
    return assemble_gain(blocks, game)


@dataclass
class Eta1:
    available: bool
    eta1: float | None = None
    J_PO: float | None = None
    J_OPT: float | None = None
    sc1_residual: float | None = None


def eta1(game: GameDefinition, x0, alpha: WeightVector) -> Eta1:
    """``J_PO / J_OPT`` when the weighted optimum is output-implementable."""
    Qa, Ra, B = aggregate(game, alpha)
    sol = solve_are(game.A, B, Qa, Ra)
    r = sc1_residual(sol.P, game, alpha)
    if r > SC1_TOL:
        return Eta1(False, sc1_residual=r)
    gain = output_feedback_pareto_gain(sol.P, game, alpha)
    J_po = evaluate_costs(gain, game, alpha, x0).team
    J_opt = optimal_team_cost(game, x0)
    return Eta1(True, J_po / J_opt, J_po, J_opt, r)


@dataclass
class Bargain:
    alpha: np.ndarray
    product: float
    costs: np.ndarray
    frontier: np.ndarray  # rows (alpha_1, J_1, J_2)


def frontier_2p(game: GameDefinition, x0, step: float) -> np.ndarray:
    """Full-information weighted-optimal costs ``(alpha_1, J_1, J_2)``."""
    if game.N != 2:
        raise ValueError("two-player game required")
    x0 = np.asarray(x0, dtype=float)
    out = []
    for alpha in two_player_grid(step):
        Qa, Ra, B = aggregate(game, alpha)
        sol = solve_are(game.A, B, Qa, Ra)
        F = -np.linalg.solve(Ra, B.T @ sol.P)
        J = evaluate_costs(F, game, alpha, x0).per_player
        out.append([alpha.values[0], J[0], J[1]])
    return np.array(out)


def nash_bargain_2p(game: GameDefinition, disagreement, x0, step: float = 1e-4) -> Bargain:
    """Grid maximiser of ``(d1 - J1)(d2 - J2)`` over individually rational weights.

    Ties go to the weight closest to (0.5, 0.5).
    """
    d = np.asarray(disagreement, dtype=float)
    if d.shape != (2,) or np.any(d <= 0):
        raise ValueError("disagreement point must be two positive costs")
    fr = frontier_2p(game, x0, step)
    gains = d[None, :] - fr[:, 1:]
    rational = np.all(gains >= 0, axis=1)
    if not rational.any():
        raise NoIndividuallyRationalPoint("no grid weight is individually rational")
    prod = np.where(rational, gains[:, 0] * gains[:, 1], -np.inf)
    best = prod.max()
    ties = np.flatnonzero(prod >= best - 1e-15 * max(1.0, abs(best)))
    k = ties[np.argmin(np.abs(fr[ties, 0] - 0.5))]
    a1 = fr[k, 0]
    return Bargain(np.array([a1, 1.0 - a1]), float(best), fr[k, 1:].copy(), fr)


def read_scan_csv(path) -> list[dict]:
    with open(Path(path), newline="") as fh:
        return list(csv.DictReader(fh))
