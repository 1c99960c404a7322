"""Closed-loop simulation and time-domain cost checks.

The integrator is classical fixed-step RK4.  For the linear vector field
``x' = A x`` one RK4 step is exactly multiplication by the degree-4 Taylor
polynomial of ``hA``, which is what :func:`simulate` applies.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm

from . import matlib
from .errors import TailTooLarge

TAIL_RATIO = 1e-6


@dataclass
class Trajectory:
    t: np.ndarray  # (K,)
    x: np.ndarray  # (K, n)
    u: np.ndarray  # (K, m); empty second axis when no gain is given

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def to_csv(self, path) -> None:
        n, m = self.x.shape[1], self.u.shape[1]
        header = ",".join(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)])
        data = np.column_stack([self.t, self.x, self.u])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        path = Path(path)
        with open(path) as fh:
            cols = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = sum(c.startswith("x") for c in cols)
        return cls(data[:, 0].copy(), data[:, 1:1 + n].copy(), data[:, 1 + n:].copy())


def rk4_matrix(A, h: float) -> np.ndarray:
    """One RK4 step for ``x' = Ax`` as a matrix."""
    hA = h * np.asarray(A, dtype=float)
    I = np.eye(hA.shape[0])
    return I + hA @ (I + hA @ (I / 2 + hA @ (I / 6 + hA / 24)))


def max_step(A_cl, h: float = 1e-3) -> float:
    """Default step, shrunk to ``0.1 / spectral radius`` for stiff loops."""
    rho = float(np.max(np.abs(np.linalg.eigvals(np.asarray(A_cl, dtype=float)))))
    return min(h, 0.1 / rho) if rho > 0 else h


def simulate(A_cl, x0, T: float, h: float = 1e-3, F=None) -> Trajectory:
    """RK4 trajectory of ``x' = A_cl x`` on ``[0, T]`` with step ``h``.

    ``F`` (optional) gives the recorded inputs ``u = F x``.
    """
    A_cl = matlib.as_matrix(A_cl, "A_cl")
    x0 = np.asarray(x0, dtype=float).ravel()
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"step must be positive, got {h!r}")
    if not (np.isfinite(T) and T >= h):
        raise ValueError(f"horizon must be at least one step, got T={T!r}, h={h!r}")
    if x0.size != A_cl.shape[0]:
        raise ValueError(f"x0 has {x0.size} entries, A_cl is {A_cl.shape[0]}x{A_cl.shape[0]}")
    K = int(np.floor(T / h + 1e-9)) + 1
    M = rk4_matrix(A_cl, h)
    x = np.empty((K, x0.size))
    x[0] = x0
    for k in range(1, K):
        x[k] = M @ x[k - 1]
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("trajectory diverged to non-finite values")
    t = h * np.arange(K)
    if F is None:
        u = np.zeros((K, 0))
    else:
        u = x @ np.asarray(F, dtype=float).T
    return Trajectory(t, x, u)


def quadrature_cost(traj: Trajectory, Qbar) -> float:
    """Composite Simpson estimate of ``int x'Qbar x dt`` over the trajectory."""
    x = traj.x
    n0 = np.linalg.norm(x[0])
    if n0 == 0.0:
        return 0.0
    if np.linalg.norm(x[-1]) > TAIL_RATIO * n0:
        raise TailTooLarge(
            f"|x(T)|/|x0| = {np.linalg.norm(x[-1]) / n0:.2e} exceeds {TAIL_RATIO:g}; extend the horizon"
        )
    Qbar = matlib.as_matrix(Qbar, "Qbar")
    integrand = np.einsum("ka,ab,kb->k", x, Qbar, x)
    return float(simpson(integrand, x=traj.t))


def tail_horizon(A_cl, x0, ratio: float = 0.1 * TAIL_RATIO, T0: float = 1.0, T_max: float = 1e4) -> float:
    """Smallest doubling of ``T0`` after which ``|x(t)|`` stays below ``ratio |x0|``
    (checked at ``T`` and ``2T`` with the matrix exponential)."""
    A_cl = np.asarray(A_cl, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n0 = np.linalg.norm(x0)
    T = T0
    while T <= T_max:
        if np.linalg.norm(expm(A_cl * T) @ x0) <= ratio * n0 and np.linalg.norm(expm(2 * A_cl * T) @ x0) <= ratio * n0:
            return T
        T *= 2
    raise TailTooLarge(f"no horizon up to {T_max:g} meets the tail criterion")


def simulated_cost(A_cl, Qbar, x0, h: float | None = None) -> float:
    """Cost integral along an RK4 trajectory long enough for the tail test."""
    T = tail_horizon(A_cl, x0)
    h = max_step(A_cl) if h is None else h
    return quadrature_cost(simulate(A_cl, x0, T, h), Qbar)
