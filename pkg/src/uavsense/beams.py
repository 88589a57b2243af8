"""Multi-beam power scheduling.

Each beam follows the Gaussian-channel rate law
``r(p) = W log2(1 + g p / (N0 W))``; delivering a layer rate ``R`` on a beam
therefore costs ``p = (N0 W / g) (2^(R/W) - 1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Beam:
    gain: float
    bandwidth: float
    noise_density: float = 1.0

    def __post_init__(self):
        if not (self.gain > 0 and self.bandwidth > 0 and self.noise_density > 0):
            raise ScheduleError("beam gain, bandwidth and noise density must be positive")


@dataclass(frozen=True)
class LinkModel:
    beams: tuple[Beam, ...]

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        if not self.beams:
            raise ScheduleError("link model needs at least one beam")

    @classmethod
    def uniform(cls, gains, bandwidth: float = 1.0, noise_density: float = 1.0) -> "LinkModel":
        return cls(tuple(Beam(float(g), bandwidth, noise_density) for g in gains))

    def __len__(self) -> int:
        return len(self.beams)


@dataclass
class PowerSchedule:
    """``assignment[l]`` is the beam carrying layer ``l``."""

    assignment: tuple[int, ...]
    powers: np.ndarray
    total_power: float
    feasible: bool


def rate_to_power(rate, beam: Beam):
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0):
        raise ScheduleError("rate must be non-negative")
    p = beam.noise_density * beam.bandwidth / beam.gain * np.expm1(r / beam.bandwidth * np.log(2.0))
    return float(p) if p.ndim == 0 else p


def rate_of_power(power, beam: Beam):
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ScheduleError("power must be non-negative")
    r = beam.bandwidth * np.log1p(beam.gain * p / (beam.noise_density * beam.bandwidth)) / np.log(2.0)
    return float(r) if r.ndim == 0 else r


def _check(rates, links: LinkModel) -> np.ndarray:
    r = np.asarray(rates, dtype=float)
    if r.ndim != 1 or len(r) != len(links):
        raise ScheduleError("need one beam per layer")
    if np.any(r < 0):
        raise ScheduleError("layer rates must be non-negative")
    return r


def _build(rates, links, assignment, budget) -> PowerSchedule:
    powers = np.array([rate_to_power(r, links.beams[b]) for r, b in zip(rates, assignment)])
    total = float(powers.sum())
    return PowerSchedule(tuple(int(b) for b in assignment), powers, total, total <= budget)


def schedule(layer_rates, links: LinkModel, budget: float = np.inf, reference_rate: float | None = None
             ) -> PowerSchedule:
    """Sort-based layer-to-beam assignment.

    Layers sorted by rate descending are paired with beams sorted by the
    power needed for ``reference_rate`` ascending (the mean layer rate by
    default).  With equal bandwidths this is the best gain first, which is
    optimal by the rearrangement inequality.
    """
    r = _check(layer_rates, links)
    ref = float(r.mean()) if reference_rate is None else reference_rate
    if ref <= 0:
        ref = 1.0
    cost = np.array([rate_to_power(ref, b) for b in links.beams])
    beam_order = np.argsort(cost, kind="stable")
    layer_order = np.argsort(-r, kind="stable")
    assignment = np.empty(len(r), dtype=int)
    assignment[layer_order] = beam_order
    return _build(r, links, assignment, budget)


def brute_force_schedule(layer_rates, links: LinkModel, budget: float = np.inf) -> PowerSchedule:
    """Minimum total power over all assignments (first in lexicographic order on ties)."""
    r = _check(layer_rates, links)
    if len(r) > 8:
        raise ScheduleError("exhaustive search limited to 8 layers")
    best = None
    for perm in itertools.permutations(range(len(r))):
        s = _build(r, links, perm, budget)
        if best is None or s.total_power < best.total_power:
            best = s
    return best


def single_beam_power(total_rate: float, links: LinkModel) -> float:
    """Power to push ``total_rate`` through the cheapest single beam."""
    return min(rate_to_power(total_rate, b) for b in links.beams)


__all__ = [
    "ScheduleError", "Beam", "LinkModel", "PowerSchedule", "rate_to_power", "rate_of_power",
    "schedule", "brute_force_schedule", "single_beam_power",
]
