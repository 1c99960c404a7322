"""Games, weights, problems and structured gains.

A game is the LTI system ``x' = A x + sum_i B_i u_i`` with outputs
``y_i = C_i x`` and per-player costs

    J_i = cost_scale * int_0^inf (y_i' Q_i y_i + u_i' R_i u_i) dt.

``cost_scale`` is 1 for the plain formulation; it exists so that case
studies that quote costs under a different prefactor convention can be
reproduced without rescaling every weight by hand.

Player indices are 0-based throughout the Python API.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import matlib
from .errors import NotStructured, ValidationError

STRUCT_TOL = 1e-6


def _mat(value, path: str) -> np.ndarray:
    try:
        return matlib.as_matrix(value, path)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], path) from None


@dataclass(frozen=True)
class Player:
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def s(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class GameDefinition:
    A: np.ndarray
    players: tuple[Player, ...]
    cost_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "A", _mat(self.A, "A"))
        object.__setattr__(self, "players", tuple(self.players))
        _validate_game(self)

    @classmethod
    def from_matrices(cls, A, Bs, Cs, Qs, Rs, cost_scale: float = 1.0) -> "GameDefinition":
        if not (len(Bs) == len(Cs) == len(Qs) == len(Rs)):
            raise ValidationError("per-player lists differ in length", "players")
        players = [
            Player(
                _mat(B, f"players[{i}].B"),
                _mat(C, f"players[{i}].C"),
                _mat(Q, f"players[{i}].Q"),
                _mat(R, f"players[{i}].R"),
            )
            for i, (B, C, Q, R) in enumerate(zip(Bs, Cs, Qs, Rs))
        ]
        return cls(A, tuple(players), float(cost_scale))

    @property
    def N(self) -> int:
        return len(self.players)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def input_dims(self) -> list[int]:
        return [p.m for p in self.players]

    @property
    def m(self) -> int:
        return sum(self.input_dims)

    @property
    def B(self) -> np.ndarray:
        return np.hstack([p.B for p in self.players])

    def input_slice(self, i: int) -> slice:
        dims = self.input_dims
        start = sum(dims[:i])
        return slice(start, start + dims[i])


def _validate_game(game: GameDefinition) -> None:
    A = game.A
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError(f"must be square, got {A.shape}", "A")
    if game.N < 1:
        raise ValidationError("at least one player required", "players")
    if not (np.isfinite(game.cost_scale) and game.cost_scale > 0):
        raise ValidationError("must be a positive number", "cost_scale")
    for i, p in enumerate(game.players):
        path = f"players[{i}]"
        if p.B.shape[0] != n:
            raise ValidationError(f"expected {n} rows, got {p.B.shape[0]}", f"{path}.B")
        s = p.C.shape[0]
        if p.C.shape[1] != n or s > n:
            raise ValidationError(f"expected s x {n} with s <= {n}, got {p.C.shape}", f"{path}.C")
        if matlib.numerical_rank(p.C) != s:
            raise ValidationError("must have full row rank", f"{path}.C")
        if p.Q.shape != (s, s):
            raise ValidationError(f"expected {s}x{s}, got {p.Q.shape}", f"{path}.Q")
        if not np.allclose(p.Q, p.Q.T, atol=1e-12 * (1 + np.abs(p.Q).max())):
            raise ValidationError("must be symmetric", f"{path}.Q")
        if matlib.min_eig(p.Q) < -matlib.PSD_TOL * (1 + np.abs(p.Q).max()):
            raise ValidationError("must be positive semidefinite", f"{path}.Q")
        if p.R.shape != (p.m, p.m):
            raise ValidationError(f"expected {p.m}x{p.m}, got {p.R.shape}", f"{path}.R")
        if not np.allclose(p.R, p.R.T, atol=1e-12 * (1 + np.abs(p.R).max())):
            raise ValidationError("must be symmetric", f"{path}.R")
        if matlib.min_eig(p.R) <= 1e-10:
            raise ValidationError("must be positive definite", f"{path}.R")
    if not is_stabilizable(A, game.B):
        raise ValidationError("(A, B) is not stabilizable", "A")


def is_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    """PBH test at every eigenvalue with real part >= -1e-9."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -matlib.HURWITZ_TOL:
            M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
            s = np.linalg.svd(M, compute_uv=False)
            if np.sum(s > matlib.RANK_RTOL * max(s[0], 1.0)) < n:
                return False
    return True


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values, dtype=float).ravel()
        if a.size < 1 or not np.all(np.isfinite(a)):
            raise ValidationError("must be a non-empty finite vector", "alpha")
        # a lone player has the single trivial weight 1
        if a.size > 1 and (np.any(a <= 0.0) or np.any(a >= 1.0)):
            raise ValidationError("entries must lie strictly inside (0, 1)", "alpha")
        if abs(a.sum() - 1.0) > 1e-12:
            raise ValidationError(f"entries must sum to 1 (got {a.sum():.15g})", "alpha")
        object.__setattr__(self, "values", a)

    @classmethod
    def uniform(cls, N: int) -> "WeightVector":
        return cls(np.full(N, 1.0 / N))

    @classmethod
    def normalized(cls, values) -> "WeightVector":
        a = np.asarray(values, dtype=float)
        return cls(a / a.sum())

    def __len__(self) -> int:
        return self.values.size

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.values, 1.0 / self.values.size, rtol=0, atol=1e-12))


class Mode(str, Enum):
    POINT = "point"
    BALL = "ball"


@dataclass(frozen=True)
class GcscProblem:
    """A game plus weights and the guaranteed-cost threshold.

    In ``Mode.POINT`` only the given ``x0`` is certified; ``Mode.BALL``
    certifies every initial condition with norm at most ``radius``.
    """

    game: GameDefinition
    alpha: WeightVector
    delta: float
    radius: float = 1.0
    x0: np.ndarray | None = None
    mode: Mode = Mode.POINT
    epsilon: float = 1e-6

    def __post_init__(self):
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        if len(self.alpha) != self.game.N:
            raise ValidationError(f"expected {self.game.N} weights", "alpha")
        if not self.delta > 0:
            raise ValidationError("must be positive", "delta")
        if not self.radius > 0:
            raise ValidationError("must be positive", "radius")
        if not self.epsilon > 0:
            raise ValidationError("must be positive", "epsilon")
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).ravel()
            if x0.size != self.game.n or not np.all(np.isfinite(x0)):
                raise ValidationError(f"expected {self.game.n} finite entries", "x0")
            object.__setattr__(self, "x0", x0)
        if mode is Mode.POINT:
            if self.x0 is None:
                raise ValidationError("required in point mode", "x0")
            if np.linalg.norm(self.x0) > self.radius * (1 + 1e-12):
                raise ValidationError("initial condition lies outside the ball of given radius", "x0")

    def with_delta(self, delta: float) -> "GcscProblem":
        return GcscProblem(self.game, self.alpha, delta, self.radius, self.x0, self.mode, self.epsilon)

    def with_alpha(self, alpha: WeightVector) -> "GcscProblem":
        return GcscProblem(self.game, alpha, self.delta, self.radius, self.x0, self.mode, self.epsilon)

    @property
    def bound_slack(self) -> float:
        """Slack required on the cost-bound constraint."""
        return self.epsilon * max(1.0, self.delta)


@dataclass(frozen=True)
class StructuredGain:
    """Per-player output-feedback blocks and the assembled state gain."""

    blocks: tuple[np.ndarray, ...]
    F: np.ndarray

    def to_dict(self) -> dict:
        return {"blocks": [b.tolist() for b in self.blocks]}


# --------------------------------------------------------------------------
# aggregation


def aggregate(game: GameDefinition, alpha: WeightVector):
    """Weighted cost matrices ``(Q_alpha, R_alpha, B)``."""
    a = alpha.values
    if a.size != game.N:
        raise ValidationError(f"expected {game.N} weights, got {a.size}", "alpha")
    n = game.n
    Q = np.zeros((n, n))
    for ai, p in zip(a, game.players):
        Q += p.C.T @ (ai * p.Q) @ p.C
    R = matlib.direct_sum([ai * p.R for ai, p in zip(a, game.players)])
    s = game.cost_scale
    return matlib.symmetrize(s * Q), s * R, game.B


def team_matrices(game: GameDefinition):
    """Unweighted team aggregates ``(Q_team, R_team, B)``."""
    n = game.n
    Q = np.zeros((n, n))
    for p in game.players:
        Q += p.C.T @ p.Q @ p.C
    R = matlib.direct_sum([p.R for p in game.players])
    s = game.cost_scale
    return matlib.symmetrize(s * Q), s * R, game.B


def selector(game: GameDefinition, i: int) -> np.ndarray:
    """``G_i``: picks player ``i``'s rows out of an m-row stack."""
    if not 0 <= i < game.N:
        raise IndexError(f"player index {i} out of range for N={game.N}")
    G = np.zeros((game.input_dims[i], game.m))
    sl = game.input_slice(i)
    G[:, sl] = np.eye(game.input_dims[i])
    return G


def _projectors(game: GameDefinition) -> list[np.ndarray]:
    return [matlib.rowspace_complement_projector(p.C) for p in game.players]


def structural_residual(F, game: GameDefinition) -> float:
    """Largest Frobenius norm of ``G_i F (I - C_i'(C_iC_i')^-1 C_i)``."""
    F = np.asarray(F, dtype=float)
    if F.shape != (game.m, game.n):
        raise ValidationError(f"expected shape {(game.m, game.n)}, got {F.shape}", "F")
    worst = 0.0
    for i, Pi in enumerate(_projectors(game)):
        worst = max(worst, float(np.linalg.norm(F[game.input_slice(i)] @ Pi)))
    return worst


def assemble_gain(blocks: Sequence, game: GameDefinition) -> StructuredGain:
    if len(blocks) != game.N:
        raise ValidationError(f"expected {game.N} blocks, got {len(blocks)}", "blocks")
    mats = []
    for i, (b, p) in enumerate(zip(blocks, game.players)):
        Fi = _mat(b, f"blocks[{i}]")
        if Fi.shape != (p.m, p.s):
            raise ValidationError(f"expected {p.m}x{p.s}, got {Fi.shape}", f"blocks[{i}]")
        mats.append(Fi)
    F = np.vstack([Fi @ p.C for Fi, p in zip(mats, game.players)])
    return StructuredGain(tuple(mats), F)


def extract_blocks(F, game: GameDefinition, tol: float = STRUCT_TOL) -> list[np.ndarray]:
    """Recover ``F_i = G_i F C_i'(C_iC_i')^-1`` from a structured gain."""
    F = np.asarray(F, dtype=float)
    res = structural_residual(F, game)
    if res > tol:
        raise NotStructured(f"structural residual {res:.3e} exceeds {tol:g}")
    out = []
    for i, p in enumerate(game.players):
        out.append(F[game.input_slice(i)] @ p.C.T @ np.linalg.inv(p.C @ p.C.T))
    return out


def structured_from_matrix(F, game: GameDefinition, tol: float = STRUCT_TOL) -> StructuredGain:
    return assemble_gain(extract_blocks(F, game, tol), game)


# --------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph on nodes ``0..N-1``; edge ``(j, i)`` is a link j -> i."""

    N: int
    edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        edges = tuple((int(j), int(i)) for j, i in self.edges)
        for k, (j, i) in enumerate(edges):
            if not (0 <= j < self.N and 0 <= i < self.N):
                raise ValidationError(f"edge ({j}, {i}) references a missing node", f"edges[{k}]")
            if j == i:
                raise ValidationError("self-loops are not allowed", f"edges[{k}]")
        object.__setattr__(self, "edges", edges)

    def in_neighbors(self, i: int) -> list[int]:
        return sorted({j for j, k in self.edges if k == i})


def build_from_graph(
    graph: DirectedGraph,
    A_blocks: Sequence,
    B_blocks: Mapping[tuple[int, int], object],
    state_weights: Sequence,
    R_blocks: Sequence,
    cost_scale: float = 1.0,
) -> GameDefinition:
    """Assemble a networked game.

    ``A_blocks[i]`` is agent i's drift, ``B_blocks[(i, j)]`` the effect of
    agent j's input on agent i (``(i, i)`` must be present; ``(i, j)`` with
    ``j`` not an in-neighbour of ``i`` is rejected).  ``state_weights[i]``
    is an n x n PSD weight in full state coordinates that may only involve
    states agent i observes.

    Agent i observes the states of ``{i} U in_neighbors(i)`` stacked in
    ascending node order.
    """
    N = graph.N
    if not (len(A_blocks) == len(state_weights) == len(R_blocks) == N):
        raise ValidationError(f"expected {N} per-agent entries", "agents")
    A_list = [_mat(a, f"A_blocks[{i}]") for i, a in enumerate(A_blocks)]
    dims = [a.shape[0] for a in A_list]
    offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    n = int(offs[-1])
    A = matlib.direct_sum(A_list)

    m_dims = []
    for i in range(N):
        if (i, i) not in B_blocks:
            raise ValidationError("missing own input matrix", f"B_blocks[({i}, {i})]")
        m_dims.append(_mat(B_blocks[(i, i)], f"B_blocks[({i}, {i})]").shape[1])

    Bs = [np.zeros((n, m_dims[j])) for j in range(N)]
    for (i, j), blk in B_blocks.items():
        path = f"B_blocks[({i}, {j})]"
        if not (0 <= i < N and 0 <= j < N):
            raise ValidationError("invalid agent reference", path)
        if i != j and j not in graph.in_neighbors(i):
            raise ValidationError(f"agent {j} is not an in-neighbour of agent {i}", path)
        M = _mat(blk, path)
        if M.shape != (dims[i], m_dims[j]):
            raise ValidationError(f"expected {(dims[i], m_dims[j])}, got {M.shape}", path)
        Bs[j][offs[i]:offs[i + 1]] = M

    Cs, Qs = [], []
    eye = np.eye(n)
    for i in range(N):
        seen = sorted(set(graph.in_neighbors(i)) | {i})
        rows = np.concatenate([np.arange(offs[k], offs[k + 1]) for k in seen])
        C = eye[rows]
        W = _mat(state_weights[i], f"state_weights[{i}]")
        if W.shape != (n, n):
            raise ValidationError(f"expected {n}x{n}", f"state_weights[{i}]")
        Pc = C.T @ C
        if np.linalg.norm(W - Pc @ W @ Pc) > 1e-12 * (1 + np.linalg.norm(W)):
            raise ValidationError("weights states the agent cannot observe", f"state_weights[{i}]")
        Cs.append(C)
        Qs.append(C @ W @ C.T)
    return GameDefinition.from_matrices(A, Bs, Cs, Qs, R_blocks, cost_scale)


def disagreement_weight(graph: DirectedGraph, state_dims: Sequence[int], i: int,
                        component: int = 0, pairs: Sequence[int] | None = None) -> np.ndarray:
    """``sum_j (z_i - z_j)^2`` over in-neighbours j as an n x n weight.

    ``z_k`` is component ``component`` of agent k's state.  ``pairs``
    restricts the neighbours considered (default: all in-neighbours);
    neighbours lacking that component are skipped.
    """
    offs = np.concatenate([[0], np.cumsum(state_dims)]).astype(int)
    n = int(offs[-1])
    W = np.zeros((n, n))
    nbrs = graph.in_neighbors(i) if pairs is None else [j for j in graph.in_neighbors(i) if j in pairs]
    if component >= state_dims[i]:
        return W
    for j in nbrs:
        if component >= state_dims[j]:
            continue
        e = np.zeros(n)
        e[offs[i] + component] = 1.0
        e[offs[j] + component] = -1.0
        W += np.outer(e, e)
    return W


# --------------------------------------------------------------------------
# JSON ingestion


def _load(source):
    if isinstance(source, Mapping):
        return source
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ValidationError(str(exc), str(source)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON ({exc.msg} at line {exc.lineno})", str(source)) from None


def _require(d, key, path):
    if not isinstance(d, Mapping) or key not in d:
        raise ValidationError("missing field", f"{path}.{key}" if path else key)
    return d[key]


def game_from_dict(data) -> GameDefinition:
    data = _load(data)
    A = _mat(_require(data, "A", ""), "A")
    players = _require(data, "players", "")
    if not isinstance(players, list) or not players:
        raise ValidationError("must be a non-empty list", "players")
    Bs, Cs, Qs, Rs = [], [], [], []
    for i, p in enumerate(players):
        path = f"players[{i}]"
        Bs.append(_mat(_require(p, "B", path), f"{path}.B"))
        Cs.append(_mat(_require(p, "C", path), f"{path}.C"))
        Qs.append(_mat(_require(p, "Q", path), f"{path}.Q"))
        Rs.append(_mat(_require(p, "R", path), f"{path}.R"))
    return GameDefinition.from_matrices(A, Bs, Cs, Qs, Rs, float(data.get("cost_scale", 1.0)))


def game_to_dict(game: GameDefinition) -> dict:
    out = {
        "A": game.A.tolist(),
        "players": [
            {"B": p.B.tolist(), "C": p.C.tolist(), "Q": p.Q.tolist(), "R": p.R.tolist()}
            for p in game.players
        ],
    }
    if game.cost_scale != 1.0:
        out["cost_scale"] = game.cost_scale
    return out


def problem_from_dict(data, game: GameDefinition) -> GcscProblem:
    data = _load(data)
    alpha = _require(data, "alpha", "")
    try:
        alpha = WeightVector(np.asarray(alpha, dtype=float))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("must be a list of numbers", "alpha") from None
    mode = data.get("mode", "point")
    if mode not in ("point", "ball"):
        raise ValidationError("must be 'point' or 'ball'", "mode")
    x0 = data.get("x0")
    try:
        return GcscProblem(
            game=game,
            alpha=alpha,
            delta=float(_require(data, "delta", "")),
            radius=float(data.get("radius", np.linalg.norm(x0) if x0 is not None else 1.0) or 1.0),
            x0=None if x0 is None else np.asarray(x0, dtype=float),
            mode=Mode(mode),
            epsilon=float(data.get("epsilon", 1e-6)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc), "problem") from None


def problem_to_dict(problem: GcscProblem) -> dict:
    out = {
        "alpha": problem.alpha.values.tolist(),
        "delta": problem.delta,
        "radius": problem.radius,
        "mode": problem.mode.value,
        "epsilon": problem.epsilon,
    }
    if problem.x0 is not None:
        out["x0"] = problem.x0.tolist()
    return out


def gain_from_dict(data, game: GameDefinition) -> StructuredGain:
    """Either ``{"blocks": [F_1, ...]}`` or a full structured ``{"F": ...}``."""
    data = _load(data)
    if isinstance(data, Mapping) and "blocks" not in data and "F" in data:
        return structured_from_matrix(_mat(data["F"], "F"), game)
    blocks = _require(data, "blocks", "")
    if not isinstance(blocks, list):
        raise ValidationError("must be a list of matrices", "blocks")
    return assemble_gain([_mat(b, f"blocks[{i}]") for i, b in enumerate(blocks)], game)


def graph_from_dict(data) -> DirectedGraph:
    """Graph files use 1-based node labels, as in the usual edge listings."""
    data = _load(data)
    N = _require(data, "nodes", "")
    if not isinstance(N, int) or N < 1:
        raise ValidationError("must be a positive integer", "nodes")
    edges = _require(data, "edges", "")
    out = []
    for k, e in enumerate(edges):
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise ValidationError("expected a [from, to] pair", f"edges[{k}]")
        out.append((int(e[0]) - 1, int(e[1]) - 1))
    return DirectedGraph(N, tuple(out))


def graph_to_dict(graph: DirectedGraph) -> dict:
    return {"nodes": graph.N, "edges": [[j + 1, i + 1] for j, i in graph.edges]}
