"""Swarm/session data model and the distortion bookkeeping built on it.

Every captured viewpoint follows the exponential distortion-rate law
``D(R) = exp(-beta * R)`` (normalized so that ``D(0) = 1``).  Virtual views
inside a session are synthesized from the two nearest captured members, and
their distortion is a position-weighted combination of the members'
distortions.  Integrating that combination against the session's view
popularity folds every session objective into per-viewpoint weights, which
is what :mod:`uavsense.allocation` optimizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


_GAUSS_ORDER = 3


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario descriptions."""


@dataclass(frozen=True)
class Viewpoint:
    id: int
    position: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ScenarioError(f"viewpoint {self.id}: beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class SessionSpec:
    id: int
    members: tuple[int, ...]
    priority: float = 1.0
    max_distortion: float = 1.0
    popularity_mean: float = 0.5
    popularity_std: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        if not self.members:
            raise ScenarioError(f"session {self.id} has no members")
        if len(set(self.members)) != len(self.members):
            raise ScenarioError(f"session {self.id}: duplicate member ids")
        if self.priority < 0:
            raise ScenarioError(f"session {self.id}: priority must be >= 0")
        if not 0 < self.max_distortion <= 1:
            raise ScenarioError(f"session {self.id}: max_distortion must lie in (0, 1]")
        if not self.popularity_std > 0:
            raise ScenarioError(f"session {self.id}: popularity_std must be positive")


@dataclass(frozen=True)
class ScenarioSpec:
    viewpoints: tuple[Viewpoint, ...]
    sessions: tuple[SessionSpec, ...]
    capacity: float
    dibr_poly_degree: int = 1
    dibr_synthesis_penalty: float = 0.0
    quadrature_grid: int = 512

    def __post_init__(self):
        object.__setattr__(self, "viewpoints", tuple(self.viewpoints))
        object.__setattr__(self, "sessions", tuple(self.sessions))
        if not self.viewpoints:
            raise ScenarioError("scenario has no viewpoints")
        if not self.capacity > 0:
            raise ScenarioError("capacity must be positive")
        if self.dibr_poly_degree < 1:
            raise ScenarioError("dibr_poly_degree must be a positive integer")
        if self.dibr_synthesis_penalty < 0:
            raise ScenarioError("dibr_synthesis_penalty must be non-negative")
        if self.quadrature_grid < 16:
            raise ScenarioError("quadrature_grid must be at least 16")
        ids = [v.id for v in self.viewpoints]
        if len(set(ids)) != len(ids):
            raise ScenarioError("viewpoint ids must be unique")
        sids = [s.id for s in self.sessions]
        if len(set(sids)) != len(sids):
            raise ScenarioError("session ids must be unique")
        known = set(ids)
        pos = {v.id: v.position for v in self.viewpoints}
        for s in self.sessions:
            missing = [m for m in s.members if m not in known]
            if missing:
                raise ScenarioError(f"session {s.id} references unknown viewpoint(s) {missing}")
            p = [pos[m] for m in s.members]
            if any(b <= a for a, b in zip(p, p[1:])):
                raise ScenarioError(f"session {s.id}: member positions must be strictly increasing")

    @property
    def n_viewpoints(self) -> int:
        return len(self.viewpoints)

    @property
    def n_sessions(self) -> int:
        return len(self.sessions)

    @property
    def betas(self) -> np.ndarray:
        return np.array([v.beta for v in self.viewpoints], dtype=float)

    def index_of(self, viewpoint_id: int) -> int:
        for i, v in enumerate(self.viewpoints):
            if v.id == viewpoint_id:
                return i
        raise KeyError(viewpoint_id)

    def with_capacity(self, capacity: float) -> "ScenarioSpec":
        return ScenarioSpec(self.viewpoints, self.sessions, capacity, self.dibr_poly_degree,
                            self.dibr_synthesis_penalty, self.quadrature_grid)


@dataclass(frozen=True)
class DistortionModel:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ScenarioError("beta must be positive")

    def __call__(self, rate):
        return eval_distortion(self, rate)


@dataclass
class AggregatedWeights:
    """Per-viewpoint weights of the folded objective.

    ``alpha_per_session[k, i]`` is the share of session ``k``'s distortion
    carried by viewpoint ``i``; ``constant[k]`` is the rate-independent
    synthesis-penalty part of that session.  ``alpha`` folds priorities in.
    """

    alpha: np.ndarray
    alpha_per_session: np.ndarray
    constant: np.ndarray = field(default_factory=lambda: np.zeros(0))


def eval_distortion(model: DistortionModel, rate):
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0):
        raise ValueError("rate must be non-negative")
    out = np.exp(-model.beta * r)
    return float(out) if out.ndim == 0 else out


def virtual_view_distortion(x: float, d_left: float, d_right: float, p: int = 1, d0: float = 0.0) -> float:
    """Distortion of a view synthesized at relative offset ``x`` between two captures."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"relative position must lie in [0, 1], got {x}")
    d = (1.0 - x) ** p * d_left + x ** p * d_right + d0 * x * (1.0 - x)
    return min(max(d, 0.0), 1.0)


def _view_grid(n: int, breaks=()) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights on [0, 1] using about ``n`` nodes.

    Composite 3-point Gauss-Legendre; cells never straddle a point of
    ``breaks`` so the piecewise-smooth interpolation coefficients are
    integrated without a kink inside a cell.
    """
    gx, gw = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    edges = np.unique(np.concatenate([[0.0, 1.0], np.clip(np.asarray(breaks, float), 0.0, 1.0)]))
    cells = max(1, n // _GAUSS_ORDER)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        m = max(1, int(round(cells * (b - a))))
        lo = a + (b - a) * np.arange(m) / m
        h = (b - a) / m
        nodes.append((lo[:, None] + 0.5 * h * (gx + 1.0)).ravel())
        weights.append(np.tile(0.5 * h * gw, m))
    return np.concatenate(nodes), np.concatenate(weights)


def _interpolation_coefficients(positions: np.ndarray, v: np.ndarray, p: int):
    """Coefficients of each member's distortion for every view in ``v``.

    Returns ``(coef, xx)`` where ``coef`` has shape ``(len(v), len(positions))``
    and ``xx`` is the relative position used for the synthesis-penalty term
    (zero where a view falls on or outside the member span).
    """
    m = len(positions)
    coef = np.zeros((len(v), m))
    xx = np.zeros(len(v))
    if m == 1:
        coef[:, 0] = 1.0
        return coef, xx
    left = v <= positions[0]
    right = v >= positions[-1]
    coef[left, 0] = 1.0
    coef[right, -1] = 1.0
    inner = ~(left | right)
    j = np.searchsorted(positions, v[inner], side="right") - 1
    x = (v[inner] - positions[j]) / (positions[j + 1] - positions[j])
    rows = np.flatnonzero(inner)
    coef[rows, j] = (1.0 - x) ** p
    coef[rows, j + 1] = x ** p
    xx[rows] = x
    return coef, xx


def popularity_weights(session: SessionSpec, grid_size: int, breaks=()) -> tuple[np.ndarray, np.ndarray]:
    """Grid points on the unit view axis and normalized Gaussian popularity."""
    v, h = _view_grid(grid_size, breaks)
    w = h * np.exp(-0.5 * ((v - session.popularity_mean) / session.popularity_std) ** 2)
    return v, w / w.sum()


def aggregate_weights(scenario: ScenarioSpec, grid_size: int | None = None) -> AggregatedWeights:
    """Fold every session's popularity-weighted view distortion onto viewpoints."""
    g = scenario.quadrature_grid if grid_size is None else grid_size
    n, k = scenario.n_viewpoints, scenario.n_sessions
    per_session = np.zeros((k, n))
    constant = np.zeros(k)
    p, d0 = scenario.dibr_poly_degree, scenario.dibr_synthesis_penalty
    for ks, s in enumerate(scenario.sessions):
        if not s.members:
            raise ScenarioError(f"session {s.id} has no members")
        idx = np.array([scenario.index_of(m) for m in s.members])
        pos = np.array([scenario.viewpoints[i].position for i in idx])
        v, w = popularity_weights(s, g, pos)
        coef, xx = _interpolation_coefficients(pos, v, p)
        per_session[ks, idx] = w @ coef
        constant[ks] = d0 * float(w @ (xx * (1.0 - xx)))
    gammas = np.array([s.priority for s in scenario.sessions], dtype=float)
    alpha = gammas @ per_session if k else np.zeros(n)
    return AggregatedWeights(alpha=alpha, alpha_per_session=per_session, constant=constant)


def viewpoint_distortions(scenario: ScenarioSpec, rates) -> np.ndarray:
    r = np.asarray(rates, dtype=float)
    if r.shape != (scenario.n_viewpoints,):
        raise ValueError("rate vector length does not match the viewpoint count")
    if np.any(r < 0):
        raise ValueError("rates must be non-negative")
    return np.exp(-scenario.betas * r)


def session_distortion(scenario: ScenarioSpec, weights: AggregatedWeights, rates, k: int) -> float:
    """Distortion ``D_k`` of session index ``k`` (0-based) under ``rates``."""
    d = viewpoint_distortions(scenario, rates)
    return float(weights.alpha_per_session[k] @ d + weights.constant[k])


def session_distortions(scenario: ScenarioSpec, weights: AggregatedWeights, rates) -> np.ndarray:
    d = viewpoint_distortions(scenario, rates)
    return weights.alpha_per_session @ d + weights.constant


def sessions_from_viewpoint_distortions(weights: AggregatedWeights, d: np.ndarray) -> np.ndarray:
    """Session distortions from already-realized per-viewpoint distortions.

    ``d`` may carry leading batch axes (e.g. Monte-Carlo trials).
    """
    return d @ weights.alpha_per_session.T + weights.constant
