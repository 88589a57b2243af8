import numpy as np

from uavsense.allocation import waterfill
from uavsense.scene import ScenarioSpec, SessionSpec, Viewpoint, aggregate_weights, session_distortions


def random_allocation_instance(seed: int):
    """Desk-scale instance (N <= 3, K <= 2) whose bounds some 1%-grid point meets.

    Each bound sits between the distortion of a random grid allocation and
    the unconstrained optimum's, so roughly a quarter of the instances have
    binding session constraints.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    k = int(rng.integers(1, 3))
    pos = np.sort(rng.uniform(0, 1, n))
    vps = [Viewpoint(i + 1, float(pos[i]), float(rng.uniform(0.5, 2))) for i in range(n)]
    sessions = []
    for j in range(k):
        members = sorted(rng.choice(n, rng.integers(1, n + 1), replace=False) + 1)
        sessions.append(SessionSpec(j + 1, tuple(int(m) for m in members), priority=float(rng.uniform(0.2, 2)),
                                    popularity_mean=float(rng.uniform()),
                                    popularity_std=float(rng.uniform(0.05, 0.4))))
    C = float(rng.uniform(1, 4))
    sc = ScenarioSpec(vps, sessions, C)
    w = aggregate_weights(sc)
    unconstrained = session_distortions(sc, w, waterfill(w.alpha, sc.betas, C))
    anchor = rng.multinomial(100, rng.dirichlet(np.ones(n))) * (0.01 * C)
    at_anchor = session_distortions(sc, w, anchor)
    bounds = [min(1.0, float(a + rng.uniform(0, 1) * max(0.0, b - a))) for a, b in zip(at_anchor, unconstrained)]
    sessions = [SessionSpec(s.id, s.members, s.priority, b, s.popularity_mean, s.popularity_std)
                for s, b in zip(sessions, bounds)]
    return ScenarioSpec(vps, sessions, C), w


def small_scenario(capacity: float = 4.0, n_sessions: int = 2, seed: int = 3):
    """Seven UAVs on a line, sessions of four overlapping members."""
    rng = np.random.default_rng(seed)
    n = 3 * n_sessions + 1
    pos = np.arange(n) / (n - 1)
    vps = [Viewpoint(i + 1, float(pos[i]), float(rng.uniform(0.5, 1.0))) for i in range(n)]
    sessions = [SessionSpec(k + 1, tuple(range(3 * k + 1, 3 * k + 5)), 1.0, 0.95,
                            float(pos[3 * k:3 * k + 4].mean()), 0.08) for k in range(n_sessions)]
    return ScenarioSpec(vps, sessions, capacity)
