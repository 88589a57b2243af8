import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from uavsense.scene import (DistortionModel, ScenarioError, ScenarioSpec, SessionSpec, Viewpoint,
                            aggregate_weights, eval_distortion, session_distortion, session_distortions,
                            virtual_view_distortion)


def line(n, betas=None, capacity=4.0, sessions=None, **kw):
    betas = betas or [1.0] * n
    pos = np.linspace(0, 1, n) if n > 1 else [0.5]
    vps = [Viewpoint(i + 1, float(pos[i]), betas[i]) for i in range(n)]
    sessions = sessions or [SessionSpec(1, tuple(range(1, n + 1)))]
    return ScenarioSpec(vps, sessions, capacity, **kw)


def test_distortion_law_examples():
    m = DistortionModel(1.0)
    assert m(0.0) == 1.0
    assert m(math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert eval_distortion(DistortionModel(0.5), 3.0) == pytest.approx(float(mpmath.exp(-1.5)), rel=1e-14)
    assert eval_distortion(DistortionModel(0.5), 3.0) == pytest.approx(0.22313, abs=5e-6)


def test_distortion_law_rejects_bad_input():
    with pytest.raises(ValueError):
        eval_distortion(DistortionModel(1.0), -0.1)
    with pytest.raises(ScenarioError):
        DistortionModel(0.0)


@given(st.floats(0.01, 10), st.floats(0, 50), st.floats(0, 50))
def test_distortion_law_decreasing_and_bounded(beta, a, b):
    m = DistortionModel(beta)
    lo, hi = sorted((a, b))
    assert 0 < m(hi) <= m(lo) <= 1


def test_virtual_view_examples():
    assert virtual_view_distortion(0.0, 0.3, 0.9) == 0.3
    assert virtual_view_distortion(0.5, 0.2, 0.4) == pytest.approx(0.3, abs=1e-15)
    assert virtual_view_distortion(0.5, 0.2, 0.4, p=2, d0=0.1) == pytest.approx(0.175, abs=1e-15)


def test_virtual_view_domain_and_clamp():
    with pytest.raises(ValueError):
        virtual_view_distortion(1.2, 0.1, 0.1)
    assert virtual_view_distortion(0.5, 1.0, 1.0, d0=4.0) == 1.0


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 4))
def test_virtual_view_endpoints_exact(dl, dr, p):
    assert virtual_view_distortion(0.0, dl, dr, p) == dl
    assert virtual_view_distortion(1.0, dl, dr, p) == dr


def test_scenario_validation():
    vp = [Viewpoint(1, 0.0, 1.0), Viewpoint(2, 1.0, 1.0)]
    with pytest.raises(ScenarioError, match="unknown"):
        ScenarioSpec(vp, [SessionSpec(1, (1, 3))], 1.0)
    with pytest.raises(ScenarioError, match="increasing"):
        ScenarioSpec(vp, [SessionSpec(1, (2, 1))], 1.0)
    with pytest.raises(ScenarioError, match="unique"):
        ScenarioSpec([vp[0], Viewpoint(1, 0.5, 1.0)], [], 1.0)
    with pytest.raises(ScenarioError, match="at least 16"):
        ScenarioSpec(vp, [], 1.0, quadrature_grid=8)
    with pytest.raises(ScenarioError):
        ScenarioSpec(vp, [], 0.0)
    with pytest.raises(ScenarioError, match="no members"):
        SessionSpec(1, ())
    with pytest.raises(ScenarioError):
        SessionSpec(1, (1,), max_distortion=0.0)
    with pytest.raises(ScenarioError):
        SessionSpec(1, (1,), priority=-1.0)
    with pytest.raises(ScenarioError):
        Viewpoint(1, 0.0, -1.0)


def test_symmetric_members_get_equal_weights():
    sc = line(2, sessions=[SessionSpec(1, (1, 2), popularity_std=1e3)])
    a = aggregate_weights(sc).alpha_per_session[0]
    assert abs(a[0] - a[1]) < 1e-9
    assert a.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_member_session_weight_is_one():
    sc = line(3, sessions=[SessionSpec(1, (2,))])
    w = aggregate_weights(sc)
    assert w.alpha_per_session[0].tolist() == [0.0, pytest.approx(1.0, abs=1e-12), 0.0]


def _quad_weights(positions, mean, std, p=1, d0=0.0):
    """Adaptive-quadrature oracle for one session's weights and constant term."""
    positions = np.asarray(positions, float)
    pop = lambda v: math.exp(-0.5 * ((v - mean) / std) ** 2)
    pts = [x for x in positions if 0 < x < 1] + [mean] if 0 < mean < 1 else list(positions)

    def coef(v, i):
        if v <= positions[0]:
            return 1.0 if i == 0 else 0.0
        if v >= positions[-1]:
            return 1.0 if i == len(positions) - 1 else 0.0
        j = int(np.searchsorted(positions, v, side="right") - 1)
        x = (v - positions[j]) / (positions[j + 1] - positions[j])
        return (1 - x) ** p if i == j else x ** p if i == j + 1 else 0.0

    def penalty(v):
        if v <= positions[0] or v >= positions[-1]:
            return 0.0
        j = int(np.searchsorted(positions, v, side="right") - 1)
        x = (v - positions[j]) / (positions[j + 1] - positions[j])
        return x * (1 - x)

    kw = dict(points=sorted(set(pts)), limit=200, epsabs=1e-13, epsrel=1e-12)
    z = integrate.quad(pop, 0, 1, **kw)[0]
    w = [integrate.quad(lambda v: pop(v) * coef(v, i), 0, 1, **kw)[0] / z for i in range(len(positions))]
    c = d0 * integrate.quad(lambda v: pop(v) * penalty(v), 0, 1, **kw)[0] / z
    return np.array(w), c


@pytest.mark.parametrize("positions,mean,std,p,d0", [
    ((0.0, 0.5, 1.0), 0.5, 0.1, 1, 0.0),
    ((0.1, 0.35, 0.8), 0.3, 0.07, 1, 0.0),
    ((0.2, 0.6), 0.45, 0.2, 2, 0.3),
    ((0.0, 0.3, 0.65, 1.0), 0.9, 0.05, 3, 0.1),
])
def test_weights_match_adaptive_quadrature(positions, mean, std, p, d0):
    vps = [Viewpoint(i + 1, x, 1.0) for i, x in enumerate(positions)]
    s = SessionSpec(1, tuple(range(1, len(positions) + 1)), popularity_mean=mean, popularity_std=std)
    sc = ScenarioSpec(vps, [s], 1.0, dibr_poly_degree=p, dibr_synthesis_penalty=d0)
    w = aggregate_weights(sc)
    want, c = _quad_weights(positions, mean, std, p, d0)
    np.testing.assert_allclose(w.alpha_per_session[0], want, atol=1e-9)
    assert w.constant[0] == pytest.approx(c, abs=1e-9)


def test_middle_member_dominates_when_popularity_centred():
    sc = line(3, sessions=[SessionSpec(1, (1, 2, 3), popularity_mean=0.5, popularity_std=0.1)])
    a = aggregate_weights(sc).alpha_per_session[0]
    assert a[1] > a[0] and a[1] > a[2]


def test_alpha_folds_priorities_and_zero_outside_cluster():
    sessions = [SessionSpec(1, (1, 2), priority=2.0), SessionSpec(2, (3, 4), priority=0.5)]
    sc = line(4, sessions=sessions)
    w = aggregate_weights(sc)
    np.testing.assert_allclose(w.alpha, 2.0 * w.alpha_per_session[0] + 0.5 * w.alpha_per_session[1])
    assert w.alpha_per_session[0, 2:].tolist() == [0.0, 0.0]
    assert w.alpha_per_session[1, :2].tolist() == [0.0, 0.0]


scenario_params = st.tuples(
    st.integers(1, 5), st.floats(0.05, 1.0), st.floats(0.0, 1.0), st.integers(0, 10_000))


def _random_scenario(n, std, mean, seed, p=1, d0=0.0):
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.uniform(0, 1, n))
    if n > 1 and np.min(np.diff(pos)) == 0:
        pos = np.linspace(0, 1, n)
    vps = [Viewpoint(i + 1, float(pos[i]), float(rng.uniform(0.2, 2))) for i in range(n)]
    return ScenarioSpec(vps, [SessionSpec(1, tuple(range(1, n + 1)), popularity_mean=mean, popularity_std=std)],
                        1.0, dibr_poly_degree=p, dibr_synthesis_penalty=d0)


@settings(max_examples=40, deadline=None)
@given(scenario_params)
def test_weight_conservation(params):
    w = aggregate_weights(_random_scenario(*params))
    assert abs(w.alpha_per_session[0].sum() - 1.0) < 1e-9
    assert np.all(w.alpha_per_session >= 0)


@settings(max_examples=40, deadline=None)
@given(scenario_params)
def test_quadrature_converges(params):
    sc = _random_scenario(*params)
    a = aggregate_weights(sc, 1024).alpha_per_session
    b = aggregate_weights(sc, 2048).alpha_per_session
    assert np.max(np.abs(a - b)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(scenario_params, st.integers(0, 4), st.floats(0.0, 3.0))
def test_session_distortion_monotone_in_rates(params, i, bump):
    sc = _random_scenario(*params)
    w = aggregate_weights(sc)
    rng = np.random.default_rng(params[-1])
    r = rng.uniform(0, 3, sc.n_viewpoints)
    r2 = r.copy()
    r2[i % sc.n_viewpoints] += bump
    assert np.all(session_distortions(sc, w, r2) <= session_distortions(sc, w, r) + 1e-15)


def test_session_distortion_examples():
    sc = line(3, sessions=[SessionSpec(1, (2,)), SessionSpec(2, (1, 2, 3))])
    w = aggregate_weights(sc)
    assert session_distortion(sc, w, [0, 1.0, 0], 0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert session_distortion(sc, w, [0, 0, 0], 1) == pytest.approx(w.alpha_per_session[1].sum(), abs=1e-15)
    assert session_distortion(sc, w, [200, 200, 200], 1) < 1e-80


def test_session_distortion_bounded_with_penalty():
    sc = line(2, sessions=[SessionSpec(1, (1, 2), popularity_std=0.3)], dibr_synthesis_penalty=1.0,
              dibr_poly_degree=2)
    w = aggregate_weights(sc)
    d = session_distortion(sc, w, [0, 0], 0)
    assert 0 <= d <= 1 + 1.0 / 4


def test_rate_vector_validation():
    sc = line(2)
    w = aggregate_weights(sc)
    with pytest.raises(ValueError):
        session_distortions(sc, w, [1.0])
    with pytest.raises(ValueError):
        session_distortions(sc, w, [1.0, -1.0])
