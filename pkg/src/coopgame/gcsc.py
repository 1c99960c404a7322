"""Guaranteed cost structured control: verification, synthesis, metrics.

Verification looks for ``P > 0`` with

    (A+BF)'P + P(A+BF) + Q_alpha + F'R_alpha F < 0        (cost decrease)
    x0' P x0 < delta            (point mode)   or   P < (delta/r^2) I   (ball mode)

Synthesis runs in two convex stages.  Stage 1 finds ``Y = P^-1`` from the
null-space-projected inequality in which the gain has been eliminated;
stage 2 fixes ``P`` and searches the per-player blocks ``F_i`` directly,
so the assembled gain ``F = stack(F_i C_i)`` is structured by construction.
Every synthesized gain is re-verified and its cost recomputed from the
Lyapunov equation before it is returned.

All results are sufficient-only: a shortfall means "no certificate found",
never "no such controller exists".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import lmi, matlib
from .errors import AllShortfall, MarginShortfall, NotHurwitz, NotStabilizing, Rejection, Shortfall
from .lyapriccati import CostBreakdown, evaluate_costs, optimal_team_cost, solve_lyapunov
from .model import (
    GameDefinition,
    GcscProblem,
    Mode,
    StructuredGain,
    WeightVector,
    aggregate,
    assemble_gain,
    structural_residual,
)


@dataclass
class Certificate:
    P: np.ndarray
    lmi_margin: float
    mode: Mode
    bound_value: float  # x0'Px0 (point) or lambda_max(P) (ball)
    bound_limit: float  # delta (point) or delta/r^2 (ball)
    slacks: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "P": self.P.tolist(),
            "lmi_margin": self.lmi_margin,
            "mode": self.mode.value,
            "bound_value": self.bound_value,
            "bound_limit": self.bound_limit,
            "slacks": list(self.slacks),
        }


@dataclass
class SynthesisResult:
    gain: StructuredGain
    certificate: Certificate
    costs: CostBreakdown
    stage1_margin: float
    stage2_margin: float
    P_alpha: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def J_alpha(self) -> float:
        return self.costs.weighted

    def to_dict(self) -> dict:
        return {
            "gain": self.gain.to_dict(),
            "F": self.gain.F.tolist(),
            "certificate": self.certificate.to_dict(),
            "costs": self.costs.to_dict(),
            "stage1_margin": self.stage1_margin,
            "stage2_margin": self.stage2_margin,
            "P_alpha": self.P_alpha.tolist(),
            "diagnostics": self.diagnostics,
        }


@dataclass
class MetricsReport:
    J_GC: float
    J_OPT: float
    eta2: float
    J_PO: float | None = None
    eta1: float | None = None
    corollary_bound: float | None = None
    J_alpha: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


# --------------------------------------------------------------------------
# verification


def _verification_system(F: np.ndarray, problem: GcscProblem) -> lmi.LmiSystem:
    game = problem.game
    n, eps = game.n, problem.epsilon
    Qa, Ra, B = aggregate(game, problem.alpha)
    A_cl = game.A + B @ F
    E = lmi.sym_basis(n)
    k = E.shape[0]
    lyap_basis = np.einsum("ab,jbc->jac", A_cl.T, E)
    lyap_basis = lyap_basis + lyap_basis.transpose(0, 2, 1)
    maps = [
        lmi.AffineMatrixMap(Qa + F.T @ Ra @ F, lyap_basis, lmi.Sense.NEG, "cost-decrease"),
        lmi.AffineMatrixMap(np.zeros((n, n)), E, lmi.Sense.POS, "P>0"),
    ]
    # shift the bound constraint so that margin >= eps  <=>  slack >= bound_slack
    shift = problem.bound_slack - eps
    if problem.mode is Mode.POINT:
        x0 = problem.x0
        quad = -np.einsum("a,jab,b->j", x0, E, x0).reshape(k, 1, 1)
        maps.append(lmi.AffineMatrixMap(np.array([[problem.delta - shift]]), quad, lmi.Sense.POS, "bound"))
    else:
        lim = problem.delta / problem.radius ** 2
        maps.append(lmi.AffineMatrixMap((lim - shift) * np.eye(n), -E, lmi.Sense.POS, "bound"))
    return lmi.LmiSystem(k, tuple(maps))


def _bound_value(P: np.ndarray, problem: GcscProblem) -> tuple[float, float]:
    if problem.mode is Mode.POINT:
        return float(problem.x0 @ P @ problem.x0), problem.delta
    return float(np.linalg.eigvalsh(P)[-1]), problem.delta / problem.radius ** 2


def _gain_matrix(gain) -> np.ndarray:
    return gain.F if isinstance(gain, StructuredGain) else np.asarray(gain, dtype=float)


def verify(gain, problem: GcscProblem, max_iter: int = 50_000) -> Certificate:
    """Certify ``gain`` as a stabilising GCSC for ``problem``.

    Raises :class:`NotStabilizing` if the closed loop is not Hurwitz and
    :class:`MarginShortfall` if no certificate was found (inconclusive).
    """
    F = _gain_matrix(gain)
    game = problem.game
    A_cl = game.A + game.B @ F
    hm = matlib.hurwitz_margin(A_cl)
    if hm >= -matlib.HURWITZ_TOL:
        raise NotStabilizing(f"A + BF is not Hurwitz (max real part {hm:.3e})", {"hurwitz_margin": hm})
    res = structural_residual(F, game)
    if res > 1e-6:
        raise Rejection(f"gain is not structured (residual {res:.3e})", {"structural_residual": res})

    system = _verification_system(F, problem)
    report = lmi.solve_feasibility(system, problem.epsilon, max_iter=max_iter)
    if not report.feasible:
        raise MarginShortfall(
            f"no certificate found (best margin {report.margin:.3e})",
            {"margin": report.margin, "iterations": report.iterations},
        )
    P = matlib.symmetrize(lmi.sym_from_vector(report.z, game.n))
    value, limit = _bound_value(P, problem)
    cert = Certificate(P, report.margin, problem.mode, value, limit, report.slacks)

    # the certificate implies J_alpha < delta; check it independently
    Y = solve_lyapunov(A_cl, system.maps[0].constant)
    if problem.mode is Mode.POINT:
        J = float(problem.x0 @ Y @ problem.x0)
        ok = J < problem.delta
    else:
        J = float(np.linalg.eigvalsh(Y)[-1]) * problem.radius ** 2
        ok = J < problem.delta
    if not ok or np.linalg.eigvalsh(P)[0] <= 1e-10:
        raise AssertionError(f"unsound certificate: cost {J!r} vs delta {problem.delta!r}")
    return cert


# --------------------------------------------------------------------------
# synthesis


def null_basis_NB(game: GameDefinition) -> np.ndarray:
    """Orthonormal basis of ker([B' 0 I_m]); always 2n columns."""
    n, m = game.n, game.m
    M = np.hstack([game.B.T, np.zeros((m, n)), np.eye(m)])
    N = matlib.orthonormal_null_basis(M)
    assert N.shape[1] == 2 * n
    return N


def stage1_system(problem: GcscProblem) -> lmi.LmiSystem:
    game = problem.game
    n, m, eps = game.n, game.m, problem.epsilon
    Qa, Ra, _ = aggregate(game, problem.alpha)
    sqQ = matlib.sym_sqrt_psd(Qa)
    A = game.A
    NB = null_basis_NB(game)
    E = lmi.sym_basis(n)
    k = E.shape[0]
    d = 2 * n + m

    omega0 = np.zeros((d, d))
    omega0[n:2 * n, n:2 * n] = -np.eye(n)
    omega0[2 * n:, 2 * n:] = -np.linalg.inv(Ra)
    omega_basis = np.zeros((k, d, d))
    for j in range(k):
        Ej = E[j]
        omega_basis[j, :n, :n] = Ej @ A.T + A @ Ej
        omega_basis[j, n:2 * n, :n] = sqQ @ Ej
        omega_basis[j, :n, n:2 * n] = Ej @ sqQ
    maps = [
        lmi.AffineMatrixMap(np.zeros((n, n)), E, lmi.Sense.POS, "Y>0"),
    ]
    if problem.mode is Mode.POINT:
        x0 = problem.x0
        M0 = np.zeros((n + 1, n + 1))
        M0[0, 0] = problem.delta
        M0[0, 1:] = x0
        M0[1:, 0] = x0
        Mb = np.zeros((k, n + 1, n + 1))
        Mb[:, 1:, 1:] = E
        maps.append(lmi.AffineMatrixMap(M0, Mb, lmi.Sense.POS, "bound"))
    else:
        lim = problem.radius ** 2 / problem.delta
        maps.append(lmi.AffineMatrixMap(-lim * np.eye(n), E, lmi.Sense.POS, "bound"))
    maps.append(
        lmi.AffineMatrixMap(NB.T @ omega0 @ NB, lmi.congruence(omega_basis, NB.T), lmi.Sense.NEG, "projected")
    )
    return lmi.LmiSystem(k, tuple(maps))


def stage1_solve(problem: GcscProblem, max_iter: int = 50_000, refine: bool = False) -> np.ndarray:
    """A strictly feasible ``Y`` for the stage-1 set, or :class:`Shortfall`."""
    system = stage1_system(problem)
    rep = lmi.solve_feasibility(system, problem.epsilon, max_iter=max_iter)
    if not rep.feasible:
        raise Shortfall("stage1", f"best margin {rep.margin:.3e}", {"stage1_margin": rep.margin,
                                                                    "iterations": rep.iterations})
    z = lmi.refine_analytic(system, rep.z) if refine else rep.z
    return matlib.symmetrize(lmi.sym_from_vector(z, problem.game.n))


def _block_coordinates(game: GameDefinition) -> list[np.ndarray]:
    """F-basis matrices (m x n), one per entry of the blocks F_i."""
    out = []
    for i, p in enumerate(game.players):
        sl = game.input_slice(i)
        for a in range(p.m):
            for b in range(p.s):
                F = np.zeros((game.m, game.n))
                F[sl.start + a] = p.C[b]
                out.append(F)
    return out


def _blocks_from_vector(z: np.ndarray, game: GameDefinition) -> list[np.ndarray]:
    blocks, pos = [], 0
    for p in game.players:
        size = p.m * p.s
        blocks.append(np.asarray(z[pos:pos + size]).reshape(p.m, p.s))
        pos += size
    return blocks


def stage2_system(problem: GcscProblem, P: np.ndarray) -> lmi.LmiSystem:
    game = problem.game
    n, m = game.n, game.m
    Qa, Ra, B = aggregate(game, problem.alpha)
    sqQ = matlib.sym_sqrt_psd(Qa)
    sqR = matlib.sym_sqrt_psd(Ra)
    A = game.A
    d = 2 * n + m
    M0 = np.zeros((d, d))
    M0[:n, :n] = A.T @ P + P @ A
    M0[:n, n:2 * n] = sqQ.T
    M0[n:2 * n, :n] = sqQ
    M0[n:2 * n, n:2 * n] = -np.eye(n)
    M0[2 * n:, 2 * n:] = -np.eye(m)
    coords = _block_coordinates(game)
    basis = np.zeros((len(coords), d, d))
    for j, Fj in enumerate(coords):
        PBF = P @ B @ Fj
        basis[j, :n, :n] = PBF + PBF.T
        basis[j, 2 * n:, :n] = sqR @ Fj
        basis[j, :n, 2 * n:] = (sqR @ Fj).T
    return lmi.LmiSystem(len(coords), (lmi.AffineMatrixMap(M0, basis, lmi.Sense.NEG, "gain"),))


def stage2_solve(problem: GcscProblem, P: np.ndarray, max_iter: int = 50_000):
    """Structured gain for fixed ``P``; returns ``(gain, margin)``."""
    system = stage2_system(problem, P)
    rep = lmi.solve_feasibility(system, problem.epsilon, max_iter=max_iter)
    if not rep.feasible:
        raise Shortfall("stage2", f"best margin {rep.margin:.3e}", {"stage2_margin": rep.margin,
                                                                    "iterations": rep.iterations})
    z = lmi.refine_analytic(system, rep.z)
    gain = assemble_gain(_blocks_from_vector(z, problem.game), problem.game)
    return gain, lmi.margin(system, z)


def synthesize(problem: GcscProblem, max_iter: int = 50_000) -> SynthesisResult:
    """Stage 1, stage 2, then independent verification and costing.

    If stage 2 falls short at the first ``P``, it is retried once with the
    barrier-refined stage-1 point.
    """
    game = problem.game
    diag: dict = {"delta": problem.delta, "alpha": problem.alpha.values.tolist(), "attempts": []}
    system1 = stage1_system(problem)
    rep1 = lmi.solve_feasibility(system1, problem.epsilon, max_iter=max_iter)
    diag["stage1_iterations"] = rep1.iterations
    if not rep1.feasible:
        raise Shortfall("stage1", f"best margin {rep1.margin:.3e}", {**diag, "stage1_margin": rep1.margin})
    candidates = [("first", rep1.z), ("refined", lmi.refine_analytic(system1, rep1.z))]
    last_err: Shortfall | None = None
    for label, z in candidates:
        Y = matlib.symmetrize(lmi.sym_from_vector(z, game.n))
        P = matlib.symmetrize(np.linalg.inv(Y))
        m1 = lmi.margin(system1, z)
        try:
            gain, m2 = stage2_solve(problem, P, max_iter=max_iter)
        except Shortfall as exc:
            diag["attempts"].append({"stage1_point": label, "stage1_margin": m1, **exc.diagnostics})
            last_err = exc
            continue
        diag["attempts"].append({"stage1_point": label, "stage1_margin": m1, "stage2_margin": m2})
        try:
            cert = verify(gain, problem, max_iter=max_iter)
        except Rejection as exc:
            raise Shortfall("verify", str(exc), {**diag, **exc.diagnostics}) from None
        x0 = problem.x0 if problem.x0 is not None else np.zeros(game.n)
        costs = evaluate_costs(gain, game, problem.alpha, x0)
        if problem.mode is Mode.POINT and not costs.weighted < problem.delta:
            raise Shortfall("verify", f"J_alpha {costs.weighted:.6g} >= delta", diag)
        res = structural_residual(gain.F, game)
        diag["structural_residual"] = res
        return SynthesisResult(gain, cert, costs, m1, m2, P, diag)
    raise Shortfall("stage2", str(last_err), diag)


def min_delta_search(problem: GcscProblem, deltas: Sequence[float], max_iter: int = 50_000):
    """First ``delta`` on an ascending grid for which synthesis succeeds."""
    grid = list(deltas)
    if not grid:
        raise ValueError("empty delta grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta grid must be ascending")
    history = []
    for d in grid:
        try:
            result = synthesize(problem.with_delta(d), max_iter=max_iter)
        except Shortfall as exc:
            history.append({"delta": d, "feasible": False, "stage": exc.stage, **_scalar_diag(exc.diagnostics)})
            continue
        history.append({"delta": d, "feasible": True, "J_alpha": result.J_alpha})
        result.diagnostics["search"] = history
        return d, result
    raise AllShortfall(history=history)


def _scalar_diag(diag: dict) -> dict:
    return {k: v for k, v in diag.items() if isinstance(v, (int, float, str))}


@dataclass
class WeightScanRow:
    alpha: np.ndarray
    feasible: bool
    diagnostics: dict
    result: SynthesisResult | None = None


def simplex_grid(N: int, step: float) -> list[WeightVector]:
    """Strictly interior points of the probability simplex on a regular grid."""
    K = int(round(1.0 / step))
    if K < N:
        return []
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            if remaining >= 1:
                out.append(prefix + [remaining])
            return
        for c in range(1, remaining - slots + 2):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], K, N)
    return [WeightVector.normalized(np.array(c, dtype=float)) for c in out]


def admissible_weight_scan(problem: GcscProblem, alphas: Iterable, max_iter: int = 50_000) -> list[WeightScanRow]:
    """Synthesis at each weight vector; the feasible rows inner-approximate
    the admissible weight set at ``problem.delta``."""
    rows = []
    for a in alphas:
        alpha = a if isinstance(a, WeightVector) else WeightVector(np.asarray(a, dtype=float))
        try:
            res = synthesize(problem.with_alpha(alpha), max_iter=max_iter)
        except Shortfall as exc:
            rows.append(WeightScanRow(alpha.values, False, {"stage": exc.stage, **_scalar_diag(exc.diagnostics)}))
            continue
        rows.append(WeightScanRow(alpha.values, True, {"J_alpha": res.J_alpha}, res))
    return rows


# --------------------------------------------------------------------------
# metrics


def metrics(gain, game: GameDefinition, x0, delta: float | None = None,
            alpha: WeightVector | None = None, J_PO: float | None = None) -> MetricsReport:
    """Team cost of ``gain`` relative to the cooperative optimum."""
    alpha = alpha or WeightVector.uniform(game.N)
    F = _gain_matrix(gain)
    if not matlib.is_hurwitz(game.A + game.B @ F):
        raise NotHurwitz("A + BF is not Hurwitz")
    costs = evaluate_costs(F, game, alpha, x0)
    J_opt = optimal_team_cost(game, x0)
    rep = MetricsReport(J_GC=costs.team, J_OPT=J_opt, eta2=costs.team / J_opt, J_alpha=costs.weighted)
    if J_PO is not None:
        rep.J_PO = float(J_PO)
        rep.eta1 = float(J_PO) / J_opt
    if delta is not None and alpha.is_uniform():
        rep.corollary_bound = game.N * delta / J_opt
    return rep
