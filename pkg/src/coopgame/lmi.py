"""Affine matrix inequalities and a strict-feasibility solver.

A constraint is an affine symmetric map ``M(z) = M_0 + sum_j z_j M_j``
paired with a sense: ``POS`` asks for ``M(z) > 0``, ``NEG`` for
``M(z) < 0``.  The *margin* of a system at ``z`` is

    min over constraints of  lambda_min(sigma * M(z)),   sigma = +1 / -1,

which is concave in ``z``.  :func:`solve_feasibility` maximises it by
projected supergradient ascent with a Polyak step toward an adaptively
lowered target level, stopping as soon as the requested margin is reached.
Badly scaled systems that the ascent cannot finish are handed to a
log-barrier Newton method on the same objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import matlib


class Sense(str, Enum):
    POS = "pos"
    NEG = "neg"

    @property
    def sign(self) -> float:
        return 1.0 if self is Sense.POS else -1.0


class Status(str, Enum):
    FEASIBLE = "StrictlyFeasible"
    SHORTFALL = "MarginShortfall"


@dataclass(frozen=True)
class AffineMatrixMap:
    constant: np.ndarray
    basis: np.ndarray  # (k, d, d)
    sense: Sense = Sense.POS
    name: str = ""

    def __post_init__(self):
        M0 = np.asarray(self.constant, dtype=float)
        if M0.ndim == 0:
            M0 = M0.reshape(1, 1)
        Ms = np.asarray(self.basis, dtype=float)
        d = M0.shape[0]
        if Ms.ndim == 1 and d == 1:
            Ms = Ms.reshape(-1, 1, 1)
        if M0.shape != (d, d) or Ms.ndim != 3 or Ms.shape[1:] != (d, d):
            raise ValueError(f"inconsistent block shapes {M0.shape} / {Ms.shape}")
        scale = 1.0 + np.abs(M0).max() + (np.abs(Ms).max() if Ms.size else 0.0)
        if np.abs(M0 - M0.T).max() > 1e-12 * scale or (
            Ms.size and np.abs(Ms - Ms.transpose(0, 2, 1)).max() > 1e-12 * scale
        ):
            raise ValueError(f"{self.name or 'map'}: blocks must be symmetric")
        object.__setattr__(self, "constant", matlib.symmetrize(M0))
        object.__setattr__(self, "basis", 0.5 * (Ms + Ms.transpose(0, 2, 1)))
        object.__setattr__(self, "sense", Sense(self.sense))

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.constant.shape[0]


@dataclass(frozen=True)
class LmiSystem:
    k: int
    maps: tuple[AffineMatrixMap, ...]
    box_radius: float = 1e6

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        for mp in self.maps:
            if mp.k != self.k:
                raise ValueError(f"map {mp.name!r} has {mp.k} coordinates, expected {self.k}")


@dataclass
class FeasibilityReport:
    status: Status
    z: np.ndarray
    margin: float
    iterations: int
    on_box_boundary: bool = False
    slacks: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "z": self.z.tolist(),
            "margin": self.margin,
            "iterations": self.iterations,
            "on_box_boundary": self.on_box_boundary,
            "slacks": list(self.slacks),
        }


def evaluate(mp: AffineMatrixMap, z) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size != mp.k:
        raise ValueError(f"expected {mp.k} coordinates, got {z.size}")
    M = mp.constant + np.tensordot(z, mp.basis, axes=1) if mp.k else mp.constant.copy()
    return matlib.symmetrize(M)


def slacks(system: LmiSystem, z) -> list[float]:
    """Signed minimum eigenvalue of each constraint."""
    return [float(np.linalg.eigvalsh(mp.sense.sign * evaluate(mp, z))[0]) for mp in system.maps]


def margin(system: LmiSystem, z) -> float:
    return min(slacks(system, z))


def _margin_and_supergradient(system: LmiSystem, z: np.ndarray):
    best = np.inf
    grad = None
    for mp in system.maps:
        sig = mp.sense.sign
        w, V = np.linalg.eigh(sig * evaluate(mp, z))
        if w[0] < best:
            best = w[0]
            v = V[:, 0]
            grad = sig * np.einsum("i,jik,k->j", v, mp.basis, v)
    return float(best), grad


def _project(z: np.ndarray, radius: float) -> np.ndarray:
    nz = np.linalg.norm(z)
    return z if nz <= radius else z * (radius / nz)


def _supergradient_phase(system: LmiSystem, z: np.ndarray, eps_target: float,
                         max_iter: int, patience: int):
    R = system.box_radius
    f, g = _margin_and_supergradient(system, z)
    z_best, f_best = z.copy(), f
    gap = max(abs(f), eps_target, 1e-8)
    stall = 0
    max_step = 0.1 * R
    it = 0
    while it < max_iter and f_best < eps_target:
        it += 1
        gn2 = float(g @ g) if g is not None else 0.0
        if gn2 == 0.0:
            break  # constant margin: nothing to climb
        aim = max(f_best + gap, eps_target + 0.5 * gap)
        dz = ((aim - f) / gn2) * g
        dn = np.linalg.norm(dz)
        if dn > max_step:
            dz *= max_step / dn
        z = _project(z + dz, R)
        f, g = _margin_and_supergradient(system, z)
        if f > f_best:
            progress = f - f_best
            z_best, f_best = z.copy(), f
            if progress > 1e-3 * gap:
                stall = 0
                continue
        stall += 1
        if stall >= patience:
            # target level too ambitious: lower it and restart from the best point
            gap *= 0.5
            stall = 0
            z = z_best.copy()
            f, g = _margin_and_supergradient(system, z)
            if gap < 1e-13 * (1 + abs(f_best)):
                break
    return z_best, f_best, it


def _epigraph_terms(system: LmiSystem, z: np.ndarray, t: float, tau: float):
    """Value, gradient, Hessian of  -tau*t - sum log det(sigma M(z) - tI) - log(R^2-|z|^2)."""
    k = system.k
    val = -tau * t
    grad = np.zeros(k + 1)
    hess = np.zeros((k + 1, k + 1))
    grad[k] = -tau
    for mp in system.maps:
        sig = mp.sense.sign
        S = sig * evaluate(mp, z) - t * np.eye(mp.d)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return np.inf, None, None
        val -= 2.0 * np.sum(np.log(np.diag(L)))
        Sinv = np.linalg.inv(S)
        Sinv = 0.5 * (Sinv + Sinv.T)
        SG = sig * np.einsum("ab,jbc->jac", Sinv, mp.basis)  # S^-1 dS/dz_j
        grad[:k] -= np.einsum("jaa->j", SG)
        grad[k] += np.trace(Sinv)
        hess[:k, :k] += np.einsum("jab,lba->jl", SG, SG)
        cross = -np.einsum("jab,ba->j", SG, Sinv)  # tr(S^-1 dS_j S^-1 dS_t)
        hess[:k, k] += cross
        hess[k, :k] += cross
        hess[k, k] += np.sum(Sinv * Sinv.T)
    r2 = system.box_radius ** 2 - z @ z
    if r2 <= 0:
        return np.inf, None, None
    val -= np.log(r2)
    grad[:k] += 2.0 * z / r2
    hess[:k, :k] += 2.0 * np.eye(k) / r2 + 4.0 * np.outer(z, z) / r2 ** 2
    return val, grad, hess


def _barrier_phase(system: LmiSystem, z: np.ndarray, eps_target: float,
                   max_newton: int = 400):
    """Maximise the margin with a barrier method on the epigraph form.

    Newton's method is invariant under linear changes of ``z``, so this copes
    with badly scaled constraint data where plain supergradient steps crawl.
    Returns as soon as the true margin reaches ``eps_target``.
    """
    k = system.k
    f0 = margin(system, z)
    z_best, f_best = z.copy(), f0
    t = f0 - max(1.0, abs(f0))
    D = sum(mp.d for mp in system.maps) + 1
    tau = D / max(abs(f0), 1.0)
    w = np.concatenate([z, [t]])
    steps = 0
    while steps < max_newton:
        for _ in range(60):
            val, grad, hess = _epigraph_terms(system, w[:k], w[k], tau)
            if not np.isfinite(val):
                return z_best, f_best, steps
            scale = np.sqrt(np.maximum(np.abs(np.diag(hess)), 1e-300))
            Hs = hess / np.outer(scale, scale)
            try:
                dw = -np.linalg.solve(Hs + 1e-13 * np.eye(k + 1), grad / scale) / scale
            except np.linalg.LinAlgError:
                return z_best, f_best, steps
            dec2 = float(-grad @ dw)
            if dec2 < 1e-9:
                break
            step = 1.0
            while step > 1e-12:
                w_new = w + step * dw
                v_new = _epigraph_terms(system, w_new[:k], w_new[k], tau)[0]
                if v_new <= val - 0.25 * step * dec2:
                    break
                step *= 0.5
            else:
                break
            w = w_new
            steps += 1
            f = margin(system, w[:k])
            if f > f_best:
                z_best, f_best = w[:k].copy(), f
            if f_best >= eps_target or steps >= max_newton:
                return z_best, f_best, steps
        if D / tau < 1e-11 * (1.0 + abs(w[k])):
            break
        tau *= 8.0
    return z_best, f_best, steps


def solve_feasibility(
    system: LmiSystem,
    eps_target: float = 1e-6,
    max_iter: int = 50_000,
    z0=None,
    patience: int = 40,
    barrier: bool = True,
) -> FeasibilityReport:
    """Search for ``z`` with ``margin(z) >= eps_target``.

    Supergradient ascent first; if that ends short of the target, a
    log-barrier Newton phase continues from the best point found (disable
    with ``barrier=False``).  Deterministic: starts at ``z0`` (default
    zero) and uses no randomness.  On shortfall the best point seen is
    returned.
    """
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    R = system.box_radius
    z = np.zeros(system.k) if z0 is None else _project(np.asarray(z0, dtype=float).copy(), R)
    z_best, f_best, it = _supergradient_phase(system, z, eps_target, max_iter, patience)
    if barrier and f_best < eps_target and system.k > 0:
        z_b, f_b, newton = _barrier_phase(system, z_best, eps_target)
        it += newton
        if f_b > f_best:
            z_best, f_best = z_b, f_b
    f_final = margin(system, z_best)
    status = Status.FEASIBLE if f_final >= eps_target else Status.SHORTFALL
    return FeasibilityReport(
        status=status,
        z=z_best,
        margin=f_final,
        iterations=it,
        on_box_boundary=bool(np.linalg.norm(z_best) >= R * (1 - 1e-9)),
        slacks=slacks(system, z_best),
    )


def _barrier(system: LmiSystem, z: np.ndarray):
    """Log-det barrier value, gradient and Hessian (inf if infeasible)."""
    val = 0.0
    k = system.k
    grad = np.zeros(k)
    hess = np.zeros((k, k))
    for mp in system.maps:
        S = mp.sense.sign * evaluate(mp, z)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return np.inf, None, None
        val -= 2.0 * np.sum(np.log(np.diag(L)))
        Sinv = np.linalg.inv(S)
        G = mp.sense.sign * mp.basis  # dS/dz_j
        SG = np.einsum("ab,jbc->jac", Sinv, G)
        grad -= np.einsum("jaa->j", SG)
        hess += np.einsum("jab,lba->jl", SG, SG)
    # keep the box constraint inside the barrier
    R = system.box_radius
    r2 = R * R - z @ z
    if r2 <= 0:
        return np.inf, None, None
    val -= np.log(r2)
    grad += 2.0 * z / r2
    hess += 2.0 * np.eye(k) / r2 + 4.0 * np.outer(z, z) / r2 ** 2
    return val, grad, hess


def refine_analytic(system: LmiSystem, z_feasible, steps: int = 8) -> np.ndarray:
    """Damped Newton steps on the log-det barrier toward the analytic centre.

    Steps that would lower the margin are rejected, so the returned point is
    never worse than the input.
    """
    z = np.asarray(z_feasible, dtype=float).copy()
    m_cur = margin(system, z)
    if m_cur <= 0:
        return z
    for _ in range(steps):
        val, grad, hess = _barrier(system, z)
        if not np.isfinite(val):
            break
        try:
            dz = -np.linalg.solve(hess + 1e-14 * np.eye(system.k), grad)
        except np.linalg.LinAlgError:
            break
        lam = float(np.sqrt(max(-grad @ dz, 0.0)))
        if lam < 1e-10:
            break
        t = 1.0 / (1.0 + lam)
        accepted = False
        while t > 1e-6:
            z_new = z + t * dz
            m_new = margin(system, z_new)
            if m_new >= m_cur and np.linalg.norm(z_new) < system.box_radius:
                z, m_cur = z_new, m_new
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    return z


# --------------------------------------------------------------------------
# symmetric matrix variables


def sym_basis(n: int) -> np.ndarray:
    """Upper-triangle basis ``E_ii`` and ``E_ij + E_ji`` (row-major order)."""
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            E[j, i] = 1.0
            out.append(E)
    return np.array(out).reshape(-1, n, n)


def sym_from_vector(z, n: int) -> np.ndarray:
    return np.tensordot(np.asarray(z, dtype=float), sym_basis(n), axes=1)


def sym_to_vector(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    iu = np.triu_indices(S.shape[0])
    return S[iu].copy()


def congruence(basis: np.ndarray, L: np.ndarray, R: np.ndarray | None = None) -> np.ndarray:
    """Apply ``X -> L X R`` to every basis matrix (``R`` defaults to ``L'``)."""
    R = L.T if R is None else R
    return np.einsum("ab,jbc,cd->jad", L, basis, R)


def stack_system(maps: Sequence[AffineMatrixMap], k: int, box_radius: float = 1e6) -> LmiSystem:
    return LmiSystem(k, tuple(maps), box_radius)
