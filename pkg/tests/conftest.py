import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coopgame.model import GameDefinition

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_spd(rng, n, floor=0.1):
    G = rng.standard_normal((n, n))
    return G @ G.T + floor * np.eye(n)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank))
    return G @ G.T


def random_stable(rng, n, margin=0.2):
    A = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin + rng.uniform(0, 1)
    return A - shift * np.eye(n)


def random_game(rng, n, N, full_info=False) -> GameDefinition:
    """Random game with generic (hence stabilizable) input matrices."""
    A = rng.standard_normal((n, n))
    Bs, Cs, Qs, Rs = [], [], [], []
    for _ in range(N):
        m = int(rng.integers(1, 3))
        s = n if full_info else int(rng.integers(1, n + 1))
        Bs.append(rng.standard_normal((n, m)))
        Cs.append(np.eye(n) if full_info else rng.standard_normal((s, n)))
        Qs.append(random_psd(rng, s) + 0.1 * np.eye(s))
        Rs.append(random_spd(rng, m, 0.5))
    return GameDefinition.from_matrices(A, Bs, Cs, Qs, Rs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
