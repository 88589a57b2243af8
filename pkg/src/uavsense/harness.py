"""End-to-end experiments: rate allocation, layered design, beam scheduling
and Monte-Carlo delivery over an erasure channel, against a uniform-rate
fixed-FEC baseline.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import solve_allocation
from .beams import LinkModel, rate_of_power, rate_to_power, schedule
from .codec import LayerAllocation, sample_prefixes
from .layered import EstimatorConfig, LayeredDesign, LayeredOptConfig, coordinate_descent
from .scene import (AggregatedWeights, DistortionModel, ScenarioSpec, SessionSpec, Viewpoint,
                    aggregate_weights, sessions_from_viewpoint_distortions)

OPTIMAL, BASELINE = "Optimal", "Baseline"
QUALITY_FLOOR = 1e-6


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    """Delivery conditions; ``capacity_actual=None`` means no mismatch."""

    erasure: float = 0.0
    capacity_actual: float | None = None
    capacity_target: float = 12.0

    def __post_init__(self):
        if not 0 <= self.erasure < 1:
            raise HarnessError("erasure rate must lie in [0, 1)")
        if not self.capacity_target > 0 or (self.capacity_actual is not None and not self.capacity_actual > 0):
            raise HarnessError("capacities must be positive")

    @property
    def actual(self) -> float:
        return self.capacity_target if self.capacity_actual is None else self.capacity_actual


@dataclass(frozen=True)
class BaselineConfig:
    fec_overhead: float = 0.03
    block_length: int = 100

    def __post_init__(self):
        if not 0 <= self.fec_overhead < 1:
            raise HarnessError("fec_overhead must lie in [0, 1)")
        if self.block_length < 1:
            raise HarnessError("block_length must be positive")

    @property
    def threshold(self) -> int:
        """Packets needed to decode one block."""
        return math.ceil(self.block_length / (1.0 + self.fec_overhead) - 1e-9)


def default_links(n_layers: int = 3) -> LinkModel:
    gains = [1.0 / (1 + 0.25 * l) for l in range(n_layers)]
    return LinkModel.uniform(gains, bandwidth=1.0, noise_density=1.0)


def default_layered() -> LayeredOptConfig:
    return LayeredOptConfig(n_layers=3, delta_lambda=0.05, rate_grid_step=4,
                            estimator=EstimatorConfig("hall", 1000, 0), refine=True)


@dataclass(frozen=True)
class HarnessConfig:
    layered: LayeredOptConfig = field(default_factory=default_layered)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    links: LinkModel = field(default_factory=default_links)
    trials: int = 1000

    def __post_init__(self):
        if self.trials < 1:
            raise HarnessError("trials must be at least 1")
        if len(self.links) != self.layered.n_layers:
            raise HarnessError("need one beam per layer")


@dataclass
class ExperimentRow:
    sweep_var: float
    system: str
    quality: float
    distortion: float
    session_distortions: np.ndarray
    total_power: float
    latency_s: float
    seed: int
    quality_stderr: float = 0.0
    distortion_stderr: float = 0.0
    # per-viewpoint diagnostics, not written to CSV
    viewpoint_distortions: np.ndarray | None = None
    viewpoint_decoded: np.ndarray | None = None
    viewpoint_sent: np.ndarray | None = None


@dataclass
class ExperimentResult:
    rows: list[ExperimentRow]
    metadata: dict


@dataclass
class SwarmDesign:
    """Per-viewpoint rates and layered designs for one target capacity."""

    scenario: ScenarioSpec
    weights: AggregatedWeights
    rates: np.ndarray
    designs: list[LayeredDesign | None]
    erasure: float


@dataclass
class LatencyEstimate:
    parallel: float
    serial: float
    single_beam: float


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0] >> 1)


def _priorities(scenario: ScenarioSpec) -> np.ndarray:
    g = np.array([s.priority for s in scenario.sessions], dtype=float)
    return g / g.sum() if g.sum() > 0 else np.full(len(g), 1.0 / max(len(g), 1))


def _summarize(per_trial_sessions: np.ndarray, scenario: ScenarioSpec):
    """Trial-averaged aggregate distortion, its standard error and per-session means."""
    agg = np.clip(per_trial_sessions @ _priorities(scenario), 0.0, 1.0)
    d = float(agg.mean())
    sd = float(agg.std(ddof=1) / np.sqrt(len(agg))) if len(agg) > 1 else 0.0
    q = 1.0 / max(d, QUALITY_FLOOR)
    return d, sd, q, sd / max(d, QUALITY_FLOOR) ** 2, per_trial_sessions.mean(axis=0)


def design_swarm(scenario: ScenarioSpec, erasure: float, cfg: HarnessConfig, seed: int) -> SwarmDesign:
    """Allocate rates for ``scenario.capacity`` and design every viewpoint's layers."""
    weights = aggregate_weights(scenario)
    rates = solve_allocation(scenario, weights).rates
    designs: list[LayeredDesign | None] = []
    base = cfg.layered
    for i, (vp, r) in enumerate(zip(scenario.viewpoints, rates)):
        symbols = base.symbols_for(r) if r > 0 else 0
        if symbols < 1:
            designs.append(None)
            continue
        lc = replace(base, n_layers=min(base.n_layers, symbols), erasure=erasure, sent=None,
                     estimator=replace(base.estimator, seed=derive_seed(seed, i)))
        designs.append(coordinate_descent(DistortionModel(vp.beta), float(r), lc))
    return SwarmDesign(scenario, weights, rates, designs, erasure)


def latency_estimate(design: LayeredDesign, links: LinkModel, schedule_=None) -> LatencyEstimate:
    """Delivery time of one frame's source bytes.

    ``parallel`` sends every layer on its own beam at the scheduled rate;
    ``serial`` sends the same layers one after another at those rates;
    ``single_beam`` sends them back to back on the best beam driven at the
    summed scheduled power.
    """
    alloc = design.allocation
    rates = _padded_rates(alloc, len(links))
    sch = schedule(rates, links) if schedule_ is None else schedule_
    nbytes = np.array(_padded_counts(alloc, len(links)), dtype=float) * alloc.symbol_size
    t = np.zeros(len(rates))
    live = nbytes > 0
    t[live] = nbytes[live] / (rates[live] * alloc.rate_unit)
    best = max(rate_of_power(sch.total_power, b) for b in links.beams)
    single = float(nbytes.sum() / (best * alloc.rate_unit)) if nbytes.sum() > 0 else 0.0
    return LatencyEstimate(float(t.max(initial=0.0)), float(t.sum()), single)


def _padded_rates(alloc: LayerAllocation, n: int) -> np.ndarray:
    # layer rates as carried by whole symbols
    r = np.zeros(n)
    r[:alloc.n_layers] = np.array(alloc.counts) * alloc.symbol_rate
    return r


def _padded_counts(alloc: LayerAllocation, n: int) -> list[int]:
    return list(alloc.counts) + [0] * (n - alloc.n_layers)


def _truncate(alloc: LayerAllocation, sent: int, designed: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative counts and prefix rates after dropping the tail to fit ``sent``."""
    k = alloc.cumulative
    if sent >= designed:
        return k, alloc.prefix_rates()
    cap = int(k[-1] * sent // designed) if designed else 0
    kk = np.minimum(k, cap)
    return kk, np.concatenate([[0.0], kk * alloc.symbol_rate])


def run_optimal_pipeline(scenario: ScenarioSpec, channel: ChannelConfig, cfg: HarnessConfig, seed: int,
                         design: SwarmDesign | None = None, sweep_var: float = 0.0) -> tuple[ExperimentRow, SwarmDesign]:
    """Design for ``channel.capacity_target`` and deliver over ``channel``.

    Actual capacity is shared in proportion to the designed rates.  When a
    viewpoint's share falls below its designed symbol count, the top of its
    scalable representation is dropped so the source fits what is sent.
    """
    target = scenario.with_capacity(channel.capacity_target)
    if design is None:
        design = design_swarm(target, channel.erasure, cfg, seed)
    lc = cfg.layered
    rates = design.rates
    n = scenario.n_viewpoints
    d = np.ones((cfg.trials, n))
    decoded = np.zeros(n)
    sent_per = np.zeros(n, dtype=np.int64)
    total_power, latency = 0.0, 0.0
    share = channel.actual * rates / rates.sum()
    for i, (vp, ld) in enumerate(zip(scenario.viewpoints, design.designs)):
        if ld is None:
            continue
        sched = schedule(_padded_rates(ld.allocation, len(cfg.links)), cfg.links)
        total_power += sched.total_power
        latency = max(latency, latency_estimate(ld, cfg.links, sched).parallel)
        sent = lc.symbols_for(share[i])
        sent_per[i] = sent
        k, x = _truncate(ld.allocation, sent, ld.sent)
        if k[-1] < 1:
            continue
        lam = ld.lam
        if any(p > 0 and kk == 0 for p, kk in zip(lam.lam, k)):
            continue
        s = sample_prefixes(lam, k, sent, channel.erasure, cfg.trials, derive_seed(seed, 1, i), lc.estimator.mode)
        d[:, i] = np.exp(-vp.beta * x[s.prefix])
        decoded[i] = np.mean(s.prefix > 0)
    sessions = sessions_from_viewpoint_distortions(design.weights, d)
    dist, sd, q, sq, per = _summarize(sessions, scenario)
    row = ExperimentRow(sweep_var, OPTIMAL, q, dist, per, total_power, latency, seed, sq, sd,
                        d.mean(axis=0), decoded, sent_per)
    return row, design


def run_baseline_pipeline(scenario: ScenarioSpec, channel: ChannelConfig, cfg: HarnessConfig, seed: int,
                          sweep_var: float = 0.0) -> ExperimentRow:
    """Uniform rates, one fixed-overhead MDS block per viewpoint and frame.

    A block decodes iff enough packets survive truncation and erasures; a
    failed block leaves the viewpoint at distortion 1.
    """
    b = cfg.baseline
    n = scenario.n_viewpoints
    rate = channel.capacity_target / n
    sent = int(np.floor(b.block_length * min(1.0, channel.actual / channel.capacity_target) + 1e-9))
    rng = np.random.default_rng(derive_seed(seed, 2))
    received = rng.binomial(sent, 1.0 - channel.erasure, size=(cfg.trials, n))
    ok = received >= b.threshold
    betas = scenario.betas
    d = np.where(ok, np.exp(-betas * rate / (1.0 + b.fec_overhead)), 1.0)
    weights = aggregate_weights(scenario)
    sessions = sessions_from_viewpoint_distortions(weights, d)
    dist, sd, q, sq, per = _summarize(sessions, scenario)
    power = n * min(rate_to_power(rate, beam) for beam in cfg.links.beams)
    return ExperimentRow(sweep_var, BASELINE, q, dist, per, float(power), cfg.layered.frame_interval, seed, sq, sd,
                         d.mean(axis=0), ok.mean(axis=0), np.full(n, sent))


def _metadata(kind: str, scenario, cfg, seed, grid, timings) -> dict:
    h = hashlib.sha256(repr((kind, scenario, cfg, tuple(grid))).encode()).hexdigest()
    return {"sweep": kind, "seed": seed, "trials": cfg.trials, "config_hash": h, "timings": timings}


def sweep_reliability(scenario: ScenarioSpec, erasures, cfg: HarnessConfig, seed: int,
                      capacity: float | None = None) -> ExperimentResult:
    """Both systems across erasure rates; the layered design is redone for each rate."""
    c0 = scenario.capacity if capacity is None else capacity
    rows, timings = [], []
    for j, eps in enumerate(erasures):
        t0 = time.perf_counter()
        ch = ChannelConfig(float(eps), None, c0)
        row, _ = run_optimal_pipeline(scenario, ch, cfg, derive_seed(seed, j), sweep_var=float(eps))
        rows.append(row)
        rows.append(run_baseline_pipeline(scenario, ch, cfg, derive_seed(seed, j), sweep_var=float(eps)))
        timings.append(("reliability", float(eps), time.perf_counter() - t0))
    return ExperimentResult(rows, _metadata("reliability", scenario, cfg, seed, erasures, timings))


def sweep_adaptivity(scenario: ScenarioSpec, mismatches, cfg: HarnessConfig, seed: int,
                     capacity: float | None = None, erasure: float = 0.0) -> ExperimentResult:
    """Both systems encoded for ``capacity`` but delivered at ``capacity * (1 - dC)``."""
    c0 = scenario.capacity if capacity is None else capacity
    t0 = time.perf_counter()
    design = design_swarm(scenario.with_capacity(c0), erasure, cfg, derive_seed(seed, 0))
    rows, timings = [], [("design", c0, time.perf_counter() - t0)]
    for j, dc in enumerate(mismatches):
        t0 = time.perf_counter()
        ch = ChannelConfig(erasure, c0 * (1.0 - float(dc)), c0)
        row, _ = run_optimal_pipeline(scenario, ch, cfg, derive_seed(seed, 0), design, sweep_var=float(dc))
        rows.append(row)
        rows.append(run_baseline_pipeline(scenario, ch, cfg, derive_seed(seed, j), sweep_var=float(dc)))
        timings.append(("adaptivity", float(dc), time.perf_counter() - t0))
    return ExperimentResult(rows, _metadata("adaptivity", scenario, cfg, seed, mismatches, timings))


def sweep_capacity(scenario: ScenarioSpec, capacities, cfg: HarnessConfig, seed: int,
                   erasure: float = 0.0) -> ExperimentResult:
    rows, timings = [], []
    for j, c in enumerate(capacities):
        t0 = time.perf_counter()
        ch = ChannelConfig(erasure, None, float(c))
        row, _ = run_optimal_pipeline(scenario, ch, cfg, derive_seed(seed, j), sweep_var=float(c))
        rows.append(row)
        rows.append(run_baseline_pipeline(scenario, ch, cfg, derive_seed(seed, j), sweep_var=float(c)))
        timings.append(("capacity", float(c), time.perf_counter() - t0))
    return ExperimentResult(rows, _metadata("capacity", scenario, cfg, seed, capacities, timings))


def default_scenario(seed: int = 7, capacity: float = 12.0, n_sessions: int = 6) -> ScenarioSpec:
    """Six equal-priority sessions of four overlapping viewpoints on a 19-UAV line."""
    n = 3 * n_sessions + 1
    rng = np.random.default_rng(seed)
    betas = rng.uniform(0.5, 1.0, n)
    pos = np.arange(n) / (n - 1)
    vps = [Viewpoint(i + 1, float(pos[i]), float(betas[i])) for i in range(n)]
    sessions = []
    for k in range(n_sessions):
        members = tuple(range(3 * k + 1, 3 * k + 5))
        centre = float(pos[3 * k: 3 * k + 4].mean())
        sessions.append(SessionSpec(k + 1, members, 1.0, 0.9, centre, 0.04))
    return ScenarioSpec(tuple(vps), tuple(sessions), capacity)


CSV_BASE_COLUMNS = ("sweep_var", "system", "quality", "distortion")
CSV_TAIL_COLUMNS = ("total_power", "latency_s", "seed")


def csv_text(result: ExperimentResult) -> str:
    k = max((len(r.session_distortions) for r in result.rows), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_BASE_COLUMNS + tuple(f"d_session_{i + 1}" for i in range(k)) + CSV_TAIL_COLUMNS)
    for r in result.rows:
        w.writerow([repr(float(r.sweep_var)), r.system, repr(float(r.quality)), repr(float(r.distortion))]
                   + [repr(float(x)) for x in r.session_distortions]
                   + [repr(float(r.total_power)), repr(float(r.latency_s)), str(r.seed)])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_text(result: ExperimentResult) -> str:
    m = result.metadata
    lines = [f"{key} = {m[key]}" for key in sorted(m) if key != "timings"]
    lines += [f"timing {stage} {point!r} {sec:.3f}s" for stage, point, sec in m.get("timings", [])]
    return "\n".join(lines) + "\n"


def write_result(result: ExperimentResult, out_dir: str, name: str) -> tuple[str, str]:
    csv_path = os.path.join(out_dir, f"{name}.csv")
    man_path = os.path.join(out_dir, f"{name}.manifest.txt")
    write_atomic(csv_path, csv_text(result))
    write_atomic(man_path, manifest_text(result))
    return csv_path, man_path


__all__ = [
    "OPTIMAL", "BASELINE", "HarnessError", "ChannelConfig", "BaselineConfig", "HarnessConfig",
    "ExperimentRow", "ExperimentResult", "SwarmDesign", "LatencyEstimate", "design_swarm",
    "run_optimal_pipeline", "run_baseline_pipeline", "sweep_reliability", "sweep_adaptivity",
    "sweep_capacity", "latency_estimate", "default_scenario", "default_links", "default_layered",
    "csv_text", "write_result", "write_atomic", "derive_seed",
]
