"""Swarm sampling-rate allocation.

Minimizes ``sum_i alpha_i * exp(-beta_i * R_i)`` subject to a sum-rate cap
and per-session distortion bounds.  The capacity constraint is handled by
closed-form water-filling; the session bounds by ascent on their Lagrange
multipliers, whose inner problem is again a water-filling with modified
weights ``alpha + nu @ alpha_per_session``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import AggregatedWeights, ScenarioSpec


class AllocationError(ValueError):
    pass


class InfeasibleSessionError(AllocationError):
    def __init__(self, k: int, best: float, bound: float):
        self.session = k
        self.best = best
        self.bound = bound
        super().__init__(f"infeasible session constraint {k}: best reachable distortion "
                         f"{best:.6g} exceeds bound {bound:.6g}")


@dataclass
class AllocationResult:
    rates: np.ndarray
    objective: float
    session_distortions: np.ndarray
    mu: float
    nu: np.ndarray
    kkt_residual: float
    iterations: int = 0


def _waterfill(alpha: np.ndarray, beta: np.ndarray, capacity: float) -> tuple[np.ndarray, float]:
    """Rates and water level ``mu`` of the capacity-only problem."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if alpha.shape != beta.shape:
        raise AllocationError("alpha and beta must have the same length")
    if np.any(alpha < 0) or np.any(beta <= 0) or not capacity > 0:
        raise AllocationError("need alpha >= 0, beta > 0 and capacity > 0")
    if not np.any(alpha > 0):
        raise AllocationError("degenerate objective: all weights are zero")
    active = alpha > 0
    log_ab = np.full(alpha.shape, -np.inf)
    log_ab[active] = np.log(alpha[active] * beta[active])
    inv_b = 1.0 / beta
    while True:
        log_mu = (np.sum(log_ab[active] * inv_b[active]) - capacity) / np.sum(inv_b[active])
        # ties (alpha_i * beta_i == mu) get zero rate
        keep = active & (log_ab > log_mu)
        if keep.sum() == active.sum():
            break
        active = keep
    rates = np.zeros_like(alpha)
    rates[active] = (log_ab[active] - log_mu) * inv_b[active]
    return rates, float(np.exp(log_mu))


def waterfill(alpha, beta, capacity: float) -> np.ndarray:
    """Closed-form minimizer of ``sum alpha_i exp(-beta_i R_i)`` s.t. ``sum R_i <= C``.

    The capacity always binds because the objective is strictly decreasing.
    The returned rates satisfy ``R_i = max(0, log(alpha_i beta_i / mu) / beta_i)``.
    """
    return _waterfill(alpha, beta, capacity)[0]


def _dual_hessian(a, beta, rates, mu, A):
    act = rates > 0
    safe = np.where(act, a, 1.0)
    inv_ab = np.where(act, 1.0 / (safe * beta), 0.0)
    b_sum = np.sum(1.0 / beta[act])
    m = A @ inv_ab
    inner = (A * np.where(act, 1.0 / (safe * safe * beta), 0.0)) @ A.T
    return -mu * (inner - np.outer(m, m) / b_sum)


def _kkt_residual(a, beta, rates, mu, capacity, violation, slack):
    e = np.exp(-beta * rates)
    act = rates > 0
    stat = np.where(act, np.abs(a * beta * e - mu), np.maximum(0.0, a * beta - mu)) / mu
    cap = abs(rates.sum() - capacity) / capacity
    return float(max(stat.max(initial=0.0), cap, violation, slack))


def _separates(u, A, const, bound, beta, capacity) -> bool:
    """True if ``u`` certifies that the session bounds are jointly infeasible.

    For any feasible allocation ``u @ (D(R) - bound) <= 0``; a positive
    minimum over all allocations therefore rules feasibility out.
    """
    w = u @ A
    if not np.any(w > 0):
        return float(u @ (const - bound)) > 0
    r = waterfill(w, beta, capacity)
    return float(u @ (A @ np.exp(-beta * r) + const - bound)) > 0


def session_feasibility(scenario: ScenarioSpec, weights: AggregatedWeights) -> np.ndarray:
    """Lowest reachable distortion of each session when it gets all capacity."""
    beta = scenario.betas
    best = np.empty(scenario.n_sessions)
    for k in range(scenario.n_sessions):
        ak = weights.alpha_per_session[k]
        if np.any(ak > 0):
            r = waterfill(ak, beta, scenario.capacity)
            best[k] = ak @ np.exp(-beta * r) + weights.constant[k]
        else:
            best[k] = weights.constant[k]
    return best


def solve_allocation(scenario: ScenarioSpec, weights: AggregatedWeights, *, step: float = 0.1,
                     max_iter: int = 10_000, tol: float = 1e-6) -> AllocationResult:
    """Solve the full allocation problem including session distortion bounds.

    Multipliers for the session bounds are driven by damped projected Newton
    steps on the concave dual, falling back to diminishing subgradient steps
    ``step / t`` whenever no damped step improves the dual.

    Raises
    ------
    InfeasibleSessionError
        If some session cannot meet its bound even with the whole capacity,
        or the bounds are jointly unreachable (the multipliers diverge).
    """
    beta = scenario.betas
    alpha = np.asarray(weights.alpha, dtype=float)
    A = np.asarray(weights.alpha_per_session, dtype=float)
    const = np.asarray(weights.constant, dtype=float)
    bound = np.array([s.max_distortion for s in scenario.sessions], dtype=float)
    C = scenario.capacity

    best = session_feasibility(scenario, weights)
    for k in range(len(bound)):
        if best[k] > bound[k] + tol:
            raise InfeasibleSessionError(k, best[k], bound[k])

    def evaluate(nu):
        a = alpha + nu @ A
        r, mu = _waterfill(a, beta, C)
        e = np.exp(-beta * r)
        d = A @ e + const
        g = float(alpha @ e + nu @ (d - bound))
        return a, r, mu, e, d, g

    nu = np.zeros(len(bound))
    a, r, mu, e, d, g = evaluate(nu)
    damping = 1.0
    nu_cap = 1e12 * (1.0 + float(alpha.sum()))
    it = 0
    while True:
        grad = d - bound
        violation = float(np.max(grad, initial=0.0))
        slack = float(np.max(np.abs(nu * grad), initial=0.0))
        f = float(alpha @ e)
        gap = abs(f - g) / max(abs(f), 1e-300)
        if (violation < tol and slack < tol and gap < tol) or it >= max_iter:
            break
        if nu.max(initial=0.0) > 0 and _separates(nu / nu.sum(), A, const, bound, beta, C) \
                or nu.max(initial=0.0) > nu_cap:
            k = int(np.argmax(grad))
            raise InfeasibleSessionError(k, float(d[k]), float(bound[k]))
        it += 1
        moved = False
        S = (nu > 0) | (grad > 0)
        if np.any(S):
            H = _dual_hessian(a, beta, r, mu, A)[np.ix_(S, S)]
            scale = max(1.0, float(np.abs(np.diag(H)).max(initial=0.0)))
            # damped Newton: ascent direction for any damping > 0
            for _ in range(30):
                M = damping * scale * np.eye(len(H)) - H
                direction = np.linalg.solve(M, grad[S])
                trial = nu.copy()
                trial[S] = np.maximum(0.0, nu[S] + direction)
                cand = evaluate(trial)
                if cand[5] > g:
                    nu = trial
                    a, r, mu, e, d, g = cand
                    damping = max(damping * 0.1, 1e-12)
                    moved = True
                    break
                damping *= 10.0
        if not moved:
            nu = np.maximum(0.0, nu + (step / it) * grad)
            a, r, mu, e, d, g = evaluate(nu)
            damping = 1.0

    grad = d - bound
    violation = float(np.max(grad, initial=0.0))
    slack = float(np.max(np.abs(nu * grad), initial=0.0))
    return AllocationResult(rates=r, objective=float(alpha @ e), session_distortions=d, mu=mu,
                            nu=nu, kkt_residual=_kkt_residual(a, beta, r, mu, C, violation, slack),
                            iterations=it)


def _grid_points(n: int, m: int):
    """Yield chunks of integer vectors with ``sum <= m`` in lexicographic order."""
    if n == 1:
        yield np.arange(m + 1)[:, None]
        return
    for head in range(m + 1):
        # rows for a fixed first coordinate, lexicographic in the remainder
        rest = m - head
        ranges = [np.arange(rest + 1)] * (n - 1)
        tail = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, n - 1)
        tail = tail[tail.sum(axis=1) <= rest]
        yield np.column_stack([np.full(len(tail), head), tail])


def brute_force_allocation(scenario: ScenarioSpec, weights: AggregatedWeights,
                           grid_step: float) -> AllocationResult:
    """Exhaustive grid search over rate vectors with ``sum <= C`` (N <= 4)."""
    n = scenario.n_viewpoints
    if n > 4:
        raise AllocationError("oracle limited to desk scale (N <= 4)")
    if not grid_step > 0:
        raise AllocationError("grid_step must be positive")
    C = scenario.capacity
    ratio = C / grid_step
    m = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio) else int(np.floor(ratio))
    beta = scenario.betas
    alpha = np.asarray(weights.alpha, dtype=float)
    A = np.asarray(weights.alpha_per_session, dtype=float)
    bound = np.array([s.max_distortion for s in scenario.sessions], dtype=float)
    best_val, best_pt = np.inf, None
    for chunk in _grid_points(n, m):
        R = chunk * grid_step
        E = np.exp(-R * beta)
        D = E @ A.T + weights.constant
        ok = np.all(D <= bound, axis=1)
        if not np.any(ok):
            continue
        obj = np.where(ok, E @ alpha, np.inf)
        j = int(np.argmin(obj))
        if obj[j] < best_val:
            best_val, best_pt = float(obj[j]), R[j]
    if best_pt is None:
        raise AllocationError("no grid point satisfies the session constraints")
    d = A @ np.exp(-beta * best_pt) + weights.constant
    return AllocationResult(rates=best_pt, objective=best_val, session_distortions=d,
                            mu=float("nan"), nu=np.full(len(bound), np.nan), kkt_residual=float("nan"))


def equal_marginals(alpha, beta, rates) -> np.ndarray:
    """``beta_i * alpha_i * exp(-beta_i R_i)`` for each viewpoint."""
    alpha, beta, rates = (np.asarray(x, dtype=float) for x in (alpha, beta, rates))
    return alpha * beta * np.exp(-beta * rates)


__all__ = [
    "AllocationError", "InfeasibleSessionError", "AllocationResult", "waterfill",
    "solve_allocation", "brute_force_allocation", "session_feasibility", "equal_marginals",
]
