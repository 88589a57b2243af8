"""Scenario files and synthetic scenario generation.

A scenario file is line oriented.  Top-level ``key = value`` lines come
first, followed by repeated blocks opened by a ``[uav]``, ``[session]``,
``[beam]`` or ``[layers]`` header.  ``#`` starts a comment.  Lists are
comma separated.  Example::

    capacity = 4.0

    [uav]
    id = 1
    position = 0.0
    beta = 1.0

    [session]
    id = 1
    members = 1, 2
    max_distortion = 0.9
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import session_feasibility
from .beams import Beam, LinkModel, ScheduleError
from .codec import CodecError, WindowDistribution
from .scene import ScenarioError, ScenarioSpec, SessionSpec, Viewpoint, aggregate_weights


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LayersSpec:
    count: int = 3
    delta_lambda: float = 0.05
    lam: WindowDistribution | None = None


@dataclass(frozen=True)
class ScenarioFile:
    scenario: ScenarioSpec
    layers: LayersSpec | None = None
    links: LinkModel | None = None


_TOP = {"capacity": float, "dibr_poly_degree": int, "dibr_synthesis_penalty": float, "quadrature_grid": int}
_BLOCKS = {
    "uav": ({"id": int, "position": float, "beta": float}, {"id", "position", "beta"}),
    "session": ({"id": int, "members": "ints", "priority": float, "max_distortion": float,
                 "popularity_mean": float, "popularity_std": float}, {"id", "members"}),
    "beam": ({"gain": float, "bandwidth": float, "noise_density": float}, {"gain"}),
    "layers": ({"count": int, "delta_lambda": float, "lambda": "floats"}, set()),
}


def _convert(kind, raw: str, where: str, key: str):
    try:
        if kind == "ints":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        v = kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: bad value for '{key}': {raw!r}") from None
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigError(f"{where}: '{key}' must be finite")
    return v


def parse_text(text: str, name: str = "<string>") -> ScenarioFile:
    """Parse and validate a scenario description."""
    top: dict = {}
    blocks: list[tuple[str, int, dict]] = []
    current = None
    for n, line in enumerate(text.splitlines(), start=1):
        where = f"{name}:{n}"
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]") or s[1:-1].strip() not in _BLOCKS:
                raise ConfigError(f"{where}: unknown block header {s!r}")
            current = (s[1:-1].strip(), n, {})
            blocks.append(current)
            continue
        if "=" not in s:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, raw = (x.strip() for x in s.split("=", 1))
        if current is None:
            if key not in _TOP:
                raise ConfigError(f"{where}: unknown key '{key}'")
            target, kind = top, _TOP[key]
        else:
            fields = _BLOCKS[current[0]][0]
            if key not in fields:
                raise ConfigError(f"{where}: unknown key '{key}' in [{current[0]}]")
            target, kind = current[2], fields[key]
        if key in target:
            raise ConfigError(f"{where}: duplicate key '{key}'")
        target[key] = (_convert(kind, raw, where, key), n)

    if "capacity" not in top:
        raise ConfigError(f"{name}: missing field 'capacity'")
    for kind, n, vals in blocks:
        missing = sorted(_BLOCKS[kind][1] - vals.keys())
        if missing:
            raise ConfigError(f"{name}:{n}: [{kind}] missing field '{missing[0]}'")

    def value(vals, key, default=None):
        return vals[key][0] if key in vals else default

    def checked(build, where):
        try:
            return build()
        except (ScenarioError, CodecError, ScheduleError) as e:
            raise ConfigError(f"{where}: {e}") from None

    vps, seen = [], {}
    for kind, n, v in blocks:
        if kind != "uav":
            continue
        i = value(v, "id")
        if i in seen:
            raise ConfigError(f"{name}:{v['id'][1]}: duplicate id {i} for 'id' in [uav] (first at line {seen[i]})")
        seen[i] = v["id"][1]
        vps.append(checked(lambda: Viewpoint(i, value(v, "position"), value(v, "beta")), f"{name}:{n}"))
    sessions, seen = [], {}
    for kind, n, v in blocks:
        if kind != "session":
            continue
        i = value(v, "id")
        unknown = [m for m in value(v, "members") if m not in {vp.id for vp in vps}]
        if unknown:
            raise ConfigError(f"{name}:{v['members'][1]}: 'members' of session {i} names unknown viewpoint(s) "
                              f"{unknown}")
        if i in seen:
            raise ConfigError(f"{name}:{v['id'][1]}: duplicate id {i} for 'id' in [session] (first at line {seen[i]})")
        seen[i] = v["id"][1]
        sessions.append(checked(lambda: SessionSpec(
            i, value(v, "members"), value(v, "priority", 1.0), value(v, "max_distortion", 1.0),
            value(v, "popularity_mean", 0.5), value(v, "popularity_std", 0.1)), f"{name}:{n}"))
    spec = checked(lambda: ScenarioSpec(
        tuple(vps), tuple(sessions), value(top, "capacity"), value(top, "dibr_poly_degree", 1),
        value(top, "dibr_synthesis_penalty", 0.0), value(top, "quadrature_grid", 512)), name)

    if spec.sessions:
        best = session_feasibility(spec, aggregate_weights(spec))
        for s, b, (kind, n, v) in zip(spec.sessions, best, [x for x in blocks if x[0] == "session"]):
            if b > s.max_distortion + 1e-9:
                line = v["max_distortion"][1] if "max_distortion" in v else n
                raise ConfigError(f"{name}:{line}: infeasible bound 'max_distortion' = {s.max_distortion} "
                                  f"for session {s.id} (best reachable {b:.6g})")

    layers = None
    lblocks = [b for b in blocks if b[0] == "layers"]
    if len(lblocks) > 1:
        raise ConfigError(f"{name}:{lblocks[1][1]}: only one [layers] block allowed")
    if lblocks:
        _, n, v = lblocks[0]
        count = value(v, "count", 3)
        if count < 1:
            raise ConfigError(f"{name}:{v['count'][1]}: 'count' must be positive")
        lam = None
        if "lambda" in v:
            where = f"{name}:{v['lambda'][1]}"
            lam = checked(lambda: WindowDistribution(value(v, "lambda")), where)
            if len(lam.lam) != count:
                raise ConfigError(f"{where}: 'lambda' needs {count} entries")
        delta = value(v, "delta_lambda", 0.05)
        if not 0 < delta <= 1:
            raise ConfigError(f"{name}:{v['delta_lambda'][1]}: 'delta_lambda' must lie in (0, 1]")
        layers = LayersSpec(count, delta, lam)

    beams = [checked(lambda: Beam(value(v, "gain"), value(v, "bandwidth", 1.0), value(v, "noise_density", 1.0)),
                     f"{name}:{n}") for kind, n, v in blocks if kind == "beam"]
    return ScenarioFile(spec, layers, LinkModel(tuple(beams)) if beams else None)


def load_config(path: str) -> ScenarioFile:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {path}: {e.strerror}") from None
    return parse_text(text, path)


def parse_scenario(path: str) -> ScenarioSpec:
    return load_config(path).scenario


def _list(xs) -> str:
    return ", ".join(repr(x) for x in xs)


def emit_scenario(spec: ScenarioSpec, layers: LayersSpec | None = None, links: LinkModel | None = None) -> str:
    """Text that :func:`parse_text` turns back into an equal scenario."""
    out = [f"capacity = {spec.capacity!r}",
           f"dibr_poly_degree = {spec.dibr_poly_degree}",
           f"dibr_synthesis_penalty = {spec.dibr_synthesis_penalty!r}",
           f"quadrature_grid = {spec.quadrature_grid}"]
    for v in spec.viewpoints:
        out += ["", "[uav]", f"id = {v.id}", f"position = {v.position!r}", f"beta = {v.beta!r}"]
    for s in spec.sessions:
        out += ["", "[session]", f"id = {s.id}", f"members = {', '.join(str(m) for m in s.members)}",
                f"priority = {s.priority!r}", f"max_distortion = {s.max_distortion!r}",
                f"popularity_mean = {s.popularity_mean!r}", f"popularity_std = {s.popularity_std!r}"]
    if layers is not None:
        out += ["", "[layers]", f"count = {layers.count}", f"delta_lambda = {layers.delta_lambda!r}"]
        if layers.lam is not None:
            out.append(f"lambda = {_list(layers.lam.lam)}")
    if links is not None:
        for b in links.beams:
            out += ["", "[beam]", f"gain = {b.gain!r}", f"bandwidth = {b.bandwidth!r}",
                    f"noise_density = {b.noise_density!r}"]
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class SyntheticSceneParams:
    """Scene statistics for synthetic scenarios.

    Rougher surfaces (``surface_std``) and busier texture (``color_std``)
    lower the mean distortion-rate exponent; ``surface_std`` alone spreads
    it across viewpoints, so a flat scene gives identical exponents.
    """

    surface_std: float = 1.0
    color_std: float = 1.0
    quant_step: float = 1.0
    n_uavs: int = 19
    n_sessions: int = 6
    capacity: float = 12.0

    def __post_init__(self):
        if self.surface_std < 0 or self.color_std < 0:
            raise ConfigError("surface_std and color_std must be non-negative")
        if not self.quant_step > 0:
            raise ConfigError("quant_step must be positive")
        if self.n_sessions < 1 or self.n_uavs < max(3, self.n_sessions):
            raise ConfigError("need at least 3 UAVs, one session and no more sessions than UAVs")
        if not self.capacity > 0:
            raise ConfigError("capacity must be positive")


def generate_scenario(params: SyntheticSceneParams, seed: int) -> ScenarioSpec:
    rng = np.random.default_rng(seed)
    n, k = params.n_uavs, params.n_sessions
    scale = 2.0 * params.quant_step / (params.quant_step + 1.0) / (1.0 + params.color_std)
    betas = scale * np.exp(-params.surface_std * rng.exponential(1.0, n))
    pos = np.arange(n) / (n - 1)
    width = min(n, max(3, math.ceil(n / k) + 1))
    vps = tuple(Viewpoint(i + 1, float(pos[i]), float(betas[i])) for i in range(n))
    sessions = []
    for j in range(k):
        start = round(j * (n - width) / (k - 1)) if k > 1 else (n - width) // 2
        members = tuple(range(start + 1, start + width + 1))
        span = pos[start + width - 1] - pos[start]
        sessions.append(SessionSpec(j + 1, members, 1.0, 1.0, float(pos[start] + span / 2), float(span / 4)))
    return ScenarioSpec(vps, tuple(sessions), params.capacity)


__all__ = [
    "ConfigError", "LayersSpec", "ScenarioFile", "parse_text", "load_config", "parse_scenario",
    "emit_scenario", "SyntheticSceneParams", "generate_scenario",
]
