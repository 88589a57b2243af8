from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavsense.config import (ConfigError, LayersSpec, SyntheticSceneParams, emit_scenario, generate_scenario,
                             load_config, parse_text)
from uavsense.harness import default_links, default_scenario
from uavsense.codec import WindowDistribution

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """\
capacity = 2.0
[uav]
id = 1
position = 0.5
beta = 0.8
[session]
id = 1
members = 1
"""


def test_minimal_file():
    sc = parse_text(MINIMAL).scenario
    assert sc.n_viewpoints == 1 and sc.n_sessions == 1 and sc.capacity == 2.0
    assert sc.sessions[0].priority == 1.0 and sc.sessions[0].max_distortion == 1.0


def test_comments_and_blank_lines():
    sc = parse_text("# swarm\n\n" + MINIMAL.replace("beta = 0.8", "beta = 0.8   # rough roof")).scenario
    assert sc.viewpoints[0].beta == 0.8


@pytest.mark.parametrize("text,message,line", [
    (MINIMAL.replace("capacity = 2.0\n", ""), "missing field 'capacity'", None),
    (MINIMAL.replace("beta = 0.8\n", ""), "missing field 'beta'", 2),
    (MINIMAL + "[uav]\nid = 1\nposition = 0.1\nbeta = 1\n", "duplicate id 1", 10),
    (MINIMAL.replace("beta = 0.8", "beta = 0.8\nbeta = 0.9"), "duplicate key 'beta'", 6),
    (MINIMAL.replace("beta = 0.8", "colour = 3"), "unknown key 'colour'", 5),
    (MINIMAL.replace("[session]", "[sessions]"), "unknown block header", 6),
    (MINIMAL.replace("beta = 0.8", "beta = fast"), "bad value for 'beta'", 5),
    (MINIMAL.replace("beta = 0.8", "beta = nan"), "must be finite", 5),
    (MINIMAL + "max_distortion = 0.01\n", "infeasible bound 'max_distortion'", 9),
    (MINIMAL + "[layers]\ncount = 2\nlambda = 0.5, 0.4\n", "lambda must sum to 1", 11),
    (MINIMAL + "[layers]\ncount = 3\nlambda = 0.5, 0.5\n", "needs 3 entries", 11),
    (MINIMAL + "[layers]\ndelta_lambda = 0\n", "delta_lambda", 10),
    (MINIMAL.replace("members = 1", "members = 1, 4"), "unknown viewpoint", 8),
])
def test_errors_name_key_and_line(text, message, line):
    with pytest.raises(ConfigError, match=message) as e:
        parse_text(text, "f.txt")
    if line is not None:
        assert f"f.txt:{line}:" in str(e.value)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/scenario.txt")


def test_default_file_accepted():
    cf = load_config(str(SCENARIOS / "default.txt"))
    assert cf.scenario.n_sessions == 6
    assert all(s.priority == 1.0 and len(s.members) >= 3 for s in cf.scenario.sessions)
    assert cf.scenario == default_scenario()
    assert cf.layers is not None and cf.layers.count == 3


def test_symmetric_fixture():
    sc = load_config(str(SCENARIOS / "symmetric2.txt")).scenario
    assert sc.capacity == 4.0 and [v.beta for v in sc.viewpoints] == [1.0, 1.0]


def test_emit_round_trip_with_layers_and_beams():
    sc = default_scenario(seed=3)
    layers = LayersSpec(2, 0.1, WindowDistribution((0.3, 0.7)))
    text = emit_scenario(sc, layers, default_links(2))
    cf = parse_text(text)
    assert cf.scenario == sc and cf.layers == layers and cf.links == default_links(2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(0.1, 4), st.integers(3, 25), st.integers(1, 6),
       st.floats(0.5, 30), st.integers(0, 2**32 - 1))
def test_generated_scenarios_round_trip(sz, sc_, q, n, k, cap, seed):
    if k > n:
        k = n
    spec = generate_scenario(SyntheticSceneParams(sz, sc_, q, n, k, cap), seed)
    assert parse_text(emit_scenario(spec)).scenario == spec


def test_generator_flat_scene_has_equal_betas():
    spec = generate_scenario(SyntheticSceneParams(surface_std=0.0, color_std=0.5), 1)
    assert len({v.beta for v in spec.viewpoints}) == 1


def test_generator_replay_is_identical():
    p = SyntheticSceneParams(1.2, 0.3, 2.0)
    assert emit_scenario(generate_scenario(p, 9)) == emit_scenario(generate_scenario(p, 9))


def test_rougher_surface_lowers_mean_beta():
    def mean_beta(sz):
        return np.mean([np.mean(generate_scenario(SyntheticSceneParams(sz, 0.5, 1.0), s).betas)
                        for s in range(1000)])
    lo, hi = mean_beta(0.5), mean_beta(1.5)
    assert hi < lo


def test_generator_sessions_cover_three_or_more():
    spec = generate_scenario(SyntheticSceneParams(n_uavs=19, n_sessions=6), 0)
    assert spec.n_sessions == 6
    assert all(len(s.members) >= 3 for s in spec.sessions)


def test_generator_param_validation():
    with pytest.raises(ConfigError):
        SyntheticSceneParams(surface_std=-1)
    with pytest.raises(ConfigError):
        SyntheticSceneParams(quant_step=0)
    with pytest.raises(ConfigError):
        SyntheticSceneParams(n_uavs=2)
