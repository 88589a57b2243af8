"""Layer-rate and window-probability design for one viewpoint.

The expected distortion of a layered design is ``sum_l P_l * D(x_l)`` where
``P_l`` is the probability that exactly the first ``l`` layers decode and
``x_l`` the cumulative rate they carry.  :func:`coordinate_descent` shifts
window probability one step ``delta_lambda`` at a time towards later
windows, keeping a move only if it strictly lowers that expectation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .codec import CodecError, LayerAllocation, WindowDistribution, estimate_prefix_probabilities
from .scene import DistortionModel


class LayeredOptError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "rank"
    trials: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class LayeredOptConfig:
    """Settings of the layered design.

    ``sent`` is the channel budget T in coded symbols; ``None`` means the
    whole rate budget ``floor(R * rate_unit * frame_interval / symbol_size)``.
    ``refine`` enables the extra layer-rate search after the window descent.
    """

    n_layers: int = 3
    delta_lambda: float = 0.05
    rate_grid_step: int = 1
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    sent: int | None = None
    erasure: float = 0.0
    symbol_size: int = 256
    frame_interval: float = 1.0
    rate_unit: float = 1e6
    refine: bool = False

    def __post_init__(self):
        if self.n_layers < 1:
            raise LayeredOptError("need at least one layer")
        if not 0 < self.delta_lambda <= 1:
            raise LayeredOptError("delta_lambda must lie in (0, 1]")
        if self.rate_grid_step < 1:
            raise LayeredOptError("rate_grid_step must be a positive symbol count")
        if not 0 <= self.erasure < 1:
            raise LayeredOptError("erasure rate must lie in [0, 1)")

    def symbols_for(self, rate: float) -> int:
        return int(np.floor(rate * self.rate_unit * self.frame_interval / self.symbol_size + 1e-9))

    def budget(self, rate: float) -> int:
        return self.symbols_for(rate) if self.sent is None else int(self.sent)


@dataclass
class LayeredDesign:
    allocation: LayerAllocation
    lam: WindowDistribution
    expected_distortion: float
    trace: list[float]
    prefix_probabilities: np.ndarray
    accepted_moves: int = 0
    sent: int = 0
    # window distribution after initialization and after every accepted move
    lam_history: list[tuple[float, ...]] = field(default_factory=list)


def _step(delta: float) -> Fraction:
    return Fraction(delta).limit_denominator(10**9)


def _as_dist(lam) -> WindowDistribution:
    return WindowDistribution(tuple(float(x) for x in lam))


def eval_objective(allocation: LayerAllocation, lam: WindowDistribution, distortion: DistortionModel,
                   config: LayeredOptConfig, sent: int | None = None) -> tuple[float, np.ndarray]:
    """Expected distortion ``sum_l P_l D(x_l)`` and the ``P_l`` used for it."""
    T = config.budget(sum(allocation.layer_rates)) if sent is None else sent
    est = config.estimator
    p = estimate_prefix_probabilities(lam, allocation.cumulative, T, config.erasure, est.trials,
                                      est.seed, est.mode)
    d = distortion(allocation.prefix_rates())
    return float(np.clip(p @ d, 0.0, 1.0)), p


def initial_layer_rates(rate: float, n_layers: int, config: LayeredOptConfig) -> LayerAllocation:
    """Equal split of ``rate`` over ``n_layers`` on the symbol grid.

    Whole symbols are spread as evenly as possible (later layers take the
    remainder, so layers differ by at most one symbol); the sub-symbol
    residual rate goes to the last layer.
    """
    if not rate > 0:
        raise LayeredOptError("rate must be positive")
    total = config.symbols_for(rate)
    if total < n_layers:
        raise LayeredOptError("rate too small for L layers")
    base, extra = divmod(total, n_layers)
    counts = [base + (1 if l >= n_layers - extra else 0) for l in range(n_layers)]
    unit = config.symbol_size / (config.rate_unit * config.frame_interval)
    rates = [c * unit for c in counts]
    rates[-1] += max(0.0, rate - total * unit)
    alloc = LayerAllocation(tuple(rates), config.symbol_size, config.frame_interval, config.rate_unit)
    if list(alloc.counts) != counts:
        raise LayeredOptError("symbol quantization is inconsistent")
    return alloc


def literal_layer_rates(rate: float, n_layers: int) -> np.ndarray:
    """Minimizer of ``sum_l D(x_l)`` under ``sum R^l <= rate`` without decode probabilities.

    Every term decreases in its cumulative rate and layer 1 appears in all
    of them, so the whole budget lands in layer 1.  Kept as a diagnostic of
    why that subproblem is not used to initialize the descent.
    """
    if not rate > 0 or n_layers < 1:
        raise LayeredOptError("need rate > 0 and at least one layer")
    out = np.zeros(n_layers)
    out[0] = rate
    return out


def coordinate_descent(distortion: DistortionModel, rate: float, config: LayeredOptConfig,
                       allocation: LayerAllocation | None = None) -> LayeredDesign:
    """Window-probability descent starting from ``lambda = (1, 0, ..., 0)``.

    For each window ``i`` in turn, probability ``delta_lambda`` is moved from
    window ``i`` to ``i + 1`` as long as the expected distortion strictly
    drops and ``lambda_i`` stays above ``delta_lambda``; the first rejected
    move is undone and ends that window.  A window that accepts nothing ends
    the whole search.  Probabilities are tracked as exact fractions, so an
    undone move restores the previous value exactly.
    """
    L = config.n_layers
    alloc = initial_layer_rates(rate, L, config) if allocation is None else allocation
    if alloc.n_layers != L:
        raise LayeredOptError("allocation layer count does not match the config")
    T = config.budget(rate)
    lam = [Fraction(1)] + [Fraction(0)] * (L - 1)
    d_max, p_best = eval_objective(alloc, _as_dist(lam), distortion, config, T)
    trace = [d_max]
    history = [_as_dist(lam).lam]
    delta = _step(config.delta_lambda)
    moves = 0
    for i in range(L - 1):
        improved = False
        while True:
            trial = list(lam)
            trial[i] -= delta
            trial[i + 1] += delta
            try:
                d, p = eval_objective(alloc, _as_dist(trial), distortion, config, T)
            except CodecError:
                d, p = np.inf, None
            if d < d_max:
                lam, d_max, p_best = trial, d, p
                trace.append(d)
                history.append(_as_dist(lam).lam)
                improved = True
                moves += 1
            else:
                break
            if lam[i] <= delta:
                break
        if not improved:
            break
    design = LayeredDesign(alloc, _as_dist(lam), d_max, trace, p_best, moves, T, history)
    if config.refine:
        design = refine(design, distortion, config, lam)
    return design


def _alloc_from_counts(counts, config) -> LayerAllocation:
    return LayerAllocation.from_counts(counts, config.symbol_size, config.frame_interval, config.rate_unit)


def refine(design: LayeredDesign, distortion: DistortionModel, config: LayeredOptConfig,
           lam=None) -> LayeredDesign:
    """Joint local search over symbol counts and window probabilities.

    Extension beyond the window descent: tries growing, shrinking and
    pushing layer boundaries by halving step sizes (down to
    ``rate_grid_step``) and single ``delta_lambda`` transfers in either
    direction between neighbouring windows.  Only strict improvements are
    kept and the total source count never exceeds the channel budget.
    """
    T = design.sent
    L = config.n_layers
    counts = list(design.allocation.counts)
    lam = [Fraction(x).limit_denominator(10**9) for x in design.lam.lam] if lam is None else list(lam)
    delta = _step(config.delta_lambda)
    best = design.expected_distortion
    p_best = design.prefix_probabilities
    trace = list(design.trace)
    history = list(design.lam_history)
    moves = design.accepted_moves

    def score(c, lm):
        if sum(c) < 1 or sum(c) > max(T, 1) or min(c) < 0:
            return np.inf, None
        try:
            return eval_objective(_alloc_from_counts(c, config), _as_dist(lm), distortion, config, T)
        except CodecError:
            return np.inf, None

    def accept(c, lm):
        nonlocal counts, lam, best, p_best, moves
        d, p = score(c, lm)
        if d < best:
            counts, lam, best, p_best = list(c), list(lm), d, p
            trace.append(d)
            history.append(_as_dist(lam).lam)
            moves += 1
            return True
        return False

    s = max(config.rate_grid_step, sum(counts) // 4)
    while True:
        changed = True
        while changed:
            changed = False
            for l in range(L):
                for sign in (1, -1):
                    c = list(counts)
                    c[l] += sign * s
                    changed |= accept(c, lam)
                    if l + 1 < L:
                        # move the boundary between layers l and l+1
                        c = list(counts)
                        c[l] -= sign * s
                        c[l + 1] += sign * s
                        changed |= accept(c, lam)
            for i in range(L - 1):
                for sign in (1, -1):
                    lm = list(lam)
                    lm[i] -= sign * delta
                    lm[i + 1] += sign * delta
                    if 0 <= lm[i] <= 1 and 0 <= lm[i + 1] <= 1:
                        changed |= accept(counts, lm)
        if s <= config.rate_grid_step:
            break
        s = max(config.rate_grid_step, s // 2)
    top = max(i for i, x in enumerate(lam) if x > 0)
    if any(counts[top + 1:]):
        accept(counts[:top + 1] + [0] * (L - top - 1), lam)
    return LayeredDesign(_alloc_from_counts(counts, config), _as_dist(lam), best, trace, p_best, moves, T,
                         history)


__all__ = [
    "LayeredOptError", "EstimatorConfig", "LayeredOptConfig", "LayeredDesign", "eval_objective",
    "initial_layer_rates", "literal_layer_rates", "coordinate_descent", "refine",
]
